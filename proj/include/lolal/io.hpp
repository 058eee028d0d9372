#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lolal/types.hpp"

namespace lolal {

std::string read_file(const std::string& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const std::string& path, std::string_view content);

/// Appends one line and flushes it to disk.
void append_line(const std::string& path, std::string_view line);

/// One JSON object per line: id, parent, child, lolbin and an optional label.
std::vector<RawSample> read_corpus(const std::string& path);
std::vector<RawSample> parse_corpus(std::string_view jsonl);
std::string format_corpus(std::span<const RawSample> samples, bool include_labels = true);
void write_corpus(const std::string& path, std::span<const RawSample> samples, bool include_labels = true);

}  // namespace lolal
