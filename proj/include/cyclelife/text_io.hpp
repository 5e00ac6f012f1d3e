#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cyclelife::text {

/// Shortest decimal text that parses back to exactly `value` ('.' radix, no locale).
std::string format_double(double value);

/// Fixed 17-significant-digit text, used where a stable column width matters less
/// than an explicit precision contract (feature CSV).
std::string format_double17(double value);

/// Locale-independent strict parse; throws ParseError on trailing garbage.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: throws IoError if the file cannot be opened.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace cyclelife::text
