#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cofirec::io {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::vector<std::string_view> split_ws(std::string_view line);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary file and renames, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view content);

std::uint32_t crc32(std::string_view bytes);
std::string crc32_hex(std::string_view bytes);
std::string file_checksum(const std::filesystem::path& path);

std::string join_doubles(std::span<const double> values, char sep = ' ');

}  // namespace cofirec::io
