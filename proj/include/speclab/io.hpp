#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace speclab {

using Json = nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex16(std::uint64_t v);

// %.17g: round-trips doubles and prints identically across runs.
std::string format_double(double v);

// RFC-4180: comma separated, CRLF line endings, header first.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add_row(const std::vector<std::string>& cells);
  const std::string& str() const { return body_; }

 private:
  std::size_t columns_;
  std::string body_;
};

void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);
Json read_json_file(const std::filesystem::path& path);

std::string iso8601_now();

}  // namespace speclab
