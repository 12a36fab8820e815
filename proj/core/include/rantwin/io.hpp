#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rantwin::io {

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

// Strict parse of a whole field; throws FormatError on trailing garbage.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Creates parent directories. Throws IoError on failure.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace rantwin::io
