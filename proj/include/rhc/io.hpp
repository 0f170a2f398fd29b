#pragma once

#include <filesystem>
#include <string>

namespace rhc::io {

std::string sha256_hex(const std::string& data);

std::string read_file(const std::filesystem::path& path);

/// Write via a temporary file and rename, so readers never see a torn file.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace rhc::io
