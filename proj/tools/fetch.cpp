#include "fetch.hpp"

#include <fstream>
#include <iterator>
#include <regex>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <openssl/evp.h>

#include "dam/errors.hpp"

namespace dam::fetch {

const std::vector<RemoteFile>& mnist_files() {
    static const std::vector<RemoteFile> files{
        {"train-images-idx3-ubyte.gz", 9912422,
         "440fcabf73cc546fa21475e81ea370265605f56be210a4024d2ca8f203523609"},
        {"train-labels-idx1-ubyte.gz", 28881,
         "3552534a0a558bbed6aed32b30c495cca23d567ec52cac8be1a0730e8010255c"},
        {"t10k-images-idx3-ubyte.gz", 1648877,
         "8d422c7b0a1c1c79245a5bcf07fe86e33eeafee792b84584aec276f5a2dbc4e6"},
        {"t10k-labels-idx1-ubyte.gz", 4542,
         "f7ae60f92e00ec6debd23a6088c31dbd2371eca3ffa0defaefb259924204aec6"},
    };
    return files;
}

const std::vector<std::string>& default_mirrors() {
    static const std::vector<std::string> m{
        "https://storage.googleapis.com/cvdf-datasets/mnist/",
        "https://ossci-datasets.s3.amazonaws.com/mnist/",
    };
    return m;
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw DataError("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Splits "https://host[:port]/path/" into scheme+authority and path prefix.
std::pair<std::string, std::string> split_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError("bad mirror URL '" + url + "'");
    std::string path = m[2].matched ? m[2].str() : "/";
    if (path.back() != '/') path.push_back('/');
    return {m[1].str(), path};
}

bool download(const std::string& mirror, const RemoteFile& f, std::vector<std::uint8_t>& body,
              std::string& why) {
    const auto [origin, prefix] = split_url(mirror);
    httplib::Client cli(origin);
    cli.set_follow_location(true);
    cli.set_connection_timeout(20);
    cli.set_read_timeout(120);
    auto res = cli.Get(prefix + f.name);
    if (!res) {
        why = httplib::to_string(res.error());
        return false;
    }
    if (res->status != 200) {
        why = "HTTP " + std::to_string(res->status);
        return false;
    }
    body.assign(res->body.begin(), res->body.end());
    return true;
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(slurp(path)); }

bool verify(const std::filesystem::path& path, const RemoteFile& f) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec || size != f.size) return false;
    return sha256_file(path) == f.sha256;
}

void fetch_all(const std::filesystem::path& dir, const std::vector<std::string>& mirrors, bool force,
               const Log& log) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
    for (const RemoteFile& f : mnist_files()) {
        const auto target = dir / f.name;
        if (!force && std::filesystem::exists(target)) {
            if (verify(target, f)) {
                log(f.name + ": present, checksum ok");
                continue;
            }
            log(f.name + ": present but checksum differs; downloading again");
        }
        bool ok = false;
        std::string failures;
        for (const auto& m : mirrors) {
            std::vector<std::uint8_t> body;
            std::string why;
            if (!download(m, f, body, why)) {
                failures += "\n  " + m + ": " + why;
                continue;
            }
            const std::string digest = sha256_hex(body);
            if (body.size() != f.size || digest != f.sha256) {
                failures += "\n  " + m + ": checksum mismatch (sha256 " + digest + ")";
                continue;
            }
            const auto tmp = dir / (f.name + ".part");
            {
                std::ofstream out(tmp, std::ios::binary);
                out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
                if (!out) throw DataError("cannot write " + tmp.string());
            }
            std::filesystem::rename(tmp, target);
            log(f.name + ": downloaded from " + m + ", checksum ok");
            ok = true;
            break;
        }
        if (!ok) throw DataError("could not fetch " + f.name + ":" + failures);
    }
}

}  // namespace dam::fetch
