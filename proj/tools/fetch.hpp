#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace dam::fetch {

struct RemoteFile {
    std::string name;
    std::uint64_t size;
    std::string sha256;  // lowercase hex
};

// The four canonical MNIST archives.
const std::vector<RemoteFile>& mnist_files();
const std::vector<std::string>& default_mirrors();

std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Size and digest both match.
bool verify(const std::filesystem::path& path, const RemoteFile& f);

using Log = std::function<void(const std::string&)>;

// Downloads every missing or corrupt file into `dir`, trying mirrors in order.
// Throws DataError when a file cannot be obtained with the pinned checksum.
void fetch_all(const std::filesystem::path& dir, const std::vector<std::string>& mirrors, bool force,
               const Log& log);

}  // namespace dam::fetch
