#include "lolal/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include "json.hpp"

namespace lolal {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error("cannot write " + tmp);
  std::size_t written = 0;
  while (written < content.size()) {
    ssize_t n = ::write(fd, content.data() + written, content.size() - written);
    if (n < 0) {
      ::close(fd);
      throw Error("write failed for " + tmp);
    }
    written += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  fs::rename(tmp, target);
}

void append_line(const std::string& path, std::string_view line) {
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error("cannot append to " + path);
  std::string buffer(line);
  buffer.push_back('\n');
  ssize_t n = ::write(fd, buffer.data(), buffer.size());
  ::fsync(fd);
  ::close(fd);
  if (n != static_cast<ssize_t>(buffer.size())) throw Error("short write to " + path);
}

std::vector<RawSample> parse_corpus(std::string_view jsonl) {
  std::vector<RawSample> samples;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < jsonl.size()) {
    std::size_t end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    RawSample sample;
    try {
      sample.id = obj.at("id").get<std::string>();
      sample.parent = obj.value("parent", std::string());
      sample.child = obj.value("child", std::string());
      auto lolbin = parse_lolbin(obj.at("lolbin").get<std::string>());
      if (!lolbin) throw Error("unknown lolbin");
      sample.lolbin = *lolbin;
      if (obj.contains("label") && !obj["label"].is_null()) {
        auto label = parse_label(obj["label"].get<std::string>());
        if (!label) throw Error("unknown label");
        sample.label = *label;
      }
    } catch (const std::exception& e) {
      throw Error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(sample.id).second) {
      throw Error("corpus line " + std::to_string(line_no) + ": duplicate id " + sample.id);
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<RawSample> read_corpus(const std::string& path) { return parse_corpus(read_file(path)); }

std::string format_corpus(std::span<const RawSample> samples, bool include_labels) {
  std::string out;
  for (const auto& s : samples) {
    nlohmann::ordered_json obj;
    obj["id"] = s.id;
    obj["parent"] = s.parent;
    obj["child"] = s.child;
    obj["lolbin"] = std::string(to_string(s.lolbin));
    if (include_labels && s.label) obj["label"] = std::string(to_string(*s.label));
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

void write_corpus(const std::string& path, std::span<const RawSample> samples, bool include_labels) {
  write_file_atomic(path, format_corpus(samples, include_labels));
}

}  // namespace lolal
