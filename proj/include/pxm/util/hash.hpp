#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace pxm::util {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace pxm::util
