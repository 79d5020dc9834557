#pragma once

#include <filesystem>
#include <string>

namespace mcdltv {

/// %.17g: enough digits to round-trip any double.
std::string format_double(double v);

/// Writes to "<path>.tmp" and renames over `path`, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace mcdltv
