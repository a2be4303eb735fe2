#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace dsring::io {

/// Writes to `path.tmp` then renames over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// Creates the directory (and parents) if needed; throws if it is not writable.
void ensure_directory(const std::filesystem::path& dir);

/// Ostream precision used for every CSV number.
inline constexpr int kCsvPrecision = 17;

}  // namespace dsring::io
