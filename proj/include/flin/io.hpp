#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace flin::io {

nlohmann::ordered_json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc);
std::string read_file(const std::filesystem::path& path);

}  // namespace flin::io
