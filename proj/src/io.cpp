#include "speclab/io.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "speclab/errors.hpp"

namespace speclab {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  return fnv1a64(read_text_file(path));
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  std::string line;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) line += ',';
    line += header[i];
  }
  body_ = line + "\r\n";
}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  require(cells.size() == columns_, Err::ConfigParse, "csv row width mismatch");
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  body_ += line + "\r\n";
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Err::ConfigParse, "cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  require(out.good(), Err::ConfigParse, "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Err::ConfigParse, "cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

Json read_json_file(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    fail(Err::ConfigParse, path.string() + ": " + e.what());
  }
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

}  // namespace speclab
