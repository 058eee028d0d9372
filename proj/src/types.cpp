#include "lolal/types.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace lolal {
namespace {

constexpr std::array<std::string_view, kLolbinCount> kLolbinNames = {
    "Bitsadmin", "Certutil", "Msbuild", "Msiexec", "Regsvr32"};

constexpr std::array<std::string_view, kClassCount> kLabelNames = {
    "Benign",         "BitsadminLolbin", "CertutilLolbin",
    "MsbuildLolbin",  "MsiexecLolbin",   "Regsvr32Lolbin"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view to_string(Lolbin lolbin) { return kLolbinNames.at(static_cast<std::size_t>(lolbin)); }

std::string_view to_string(Label label) { return kLabelNames.at(static_cast<std::size_t>(label)); }

std::optional<Lolbin> parse_lolbin(std::string_view text) {
  if (text.size() > 4 && iequals(text.substr(text.size() - 4), ".exe")) {
    text.remove_suffix(4);
  }
  for (std::size_t i = 0; i < kLolbinNames.size(); ++i) {
    if (iequals(text, kLolbinNames[i])) return static_cast<Lolbin>(i);
  }
  return std::nullopt;
}

std::optional<Label> parse_label(std::string_view text) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (iequals(text, kLabelNames[i])) return static_cast<Label>(i);
  }
  return std::nullopt;
}

Label label_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kClassCount)) {
    throw Error("class index out of range: " + std::to_string(index));
  }
  return static_cast<Label>(index);
}

Label malicious_label(Lolbin lolbin) { return static_cast<Label>(static_cast<int>(lolbin) + 1); }

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) {
    throw Error("row width " + std::to_string(values.size()) + " does not match matrix width " +
                std::to_string(cols_));
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace lolal
