#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mum {

// Shortest representation that parses back to the same bits.
std::string format_double(double v);
// General format with the given number of significant digits.
std::string format_double(double v, int significant_digits);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

// Minimal CSV: comma separator, no quoting. Writers reject fields that
// would need escaping.
std::string csv_safe(std::string_view field);
std::vector<std::string> split(std::string_view line, char sep);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

} // namespace mum
