#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lolal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Lolbin : std::uint8_t { Bitsadmin, Certutil, Msbuild, Msiexec, Regsvr32 };
inline constexpr std::size_t kLolbinCount = 5;

/// Benign plus one malicious class per binary.
enum class Label : std::uint8_t {
  Benign,
  BitsadminLolbin,
  CertutilLolbin,
  MsbuildLolbin,
  MsiexecLolbin,
  Regsvr32Lolbin
};
inline constexpr std::size_t kClassCount = 6;

std::string_view to_string(Lolbin lolbin);
std::string_view to_string(Label label);
/// Case-insensitive; accepts "certutil", "Certutil" and "certutil.exe".
std::optional<Lolbin> parse_lolbin(std::string_view text);
std::optional<Label> parse_label(std::string_view text);

inline bool is_malicious(Label label) { return label != Label::Benign; }
inline int class_index(Label label) { return static_cast<int>(label); }
Label label_from_index(int index);
/// The malicious class that corresponds to a binary.
Label malicious_label(Lolbin lolbin);

/// One process-creation event: parent and child command lines plus the binary.
struct RawSample {
  std::string id;
  std::string parent;
  std::string child;
  Lolbin lolbin = Lolbin::Bitsadmin;
  std::optional<Label> label;
};

using Vector = std::vector<double>;

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  /// The first appended row fixes the column count of an empty matrix.
  void append_row(std::span<const double> values);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace lolal
