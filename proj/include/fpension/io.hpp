#pragma once

// Locale-independent number formatting and small file helpers.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fpension {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// Parses the whole of `s` as a decimal number; throws ParseError otherwise.
double parse_double(std::string_view s);

/// Writes `content` to `path`, creating parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::string read_text_file(const std::filesystem::path& path);

/// Header plus rows of numbers, comma separated, '\n' line endings.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace fpension
