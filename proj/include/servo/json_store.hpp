// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace servo {

// Writes through a temporary sibling and renames it into place. Throws
// IoError.
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& doc);
// nullopt when the file does not exist. Throws IoError on unreadable or
// malformed content.
std::optional<nlohmann::json> read_json(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace servo
