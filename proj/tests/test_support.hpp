#pragma once

#include <unistd.h>
#include <zlib.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dam/datasets.hpp"

// Scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("dam-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_gzip(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    gzFile f = gzopen(p.string().c_str(), "wb");
    if (!f) throw std::runtime_error("gzopen failed");
    gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
}

// Ten fixed random templates, one per class; every image is its class's
// template with a few percent of pixels flipped. Labels cycle through 0..9.
inline dam::RawImageSet synthetic_digits(std::size_t count, std::uint64_t seed, double noise = 0.05) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution on(0.2), flip(noise);
    std::vector<std::vector<std::uint8_t>> templates(10, std::vector<std::uint8_t>(dam::kImagePixels));
    for (auto& t : templates)
        for (auto& px : t) px = on(rng) ? 255 : 0;
    dam::RawImageSet s;
    s.images.reserve(count * dam::kImagePixels);
    for (std::size_t i = 0; i < count; ++i) {
        const auto label = static_cast<std::uint8_t>(i % 10);
        s.labels.push_back(label);
        for (auto px : templates[label]) s.images.push_back(flip(rng) ? static_cast<std::uint8_t>(255 - px) : px);
    }
    return s;
}

// Writes `s` as gzipped IDX files under `dir` with the default MNIST names.
inline void write_idx_set(const std::filesystem::path& dir, const dam::RawImageSet& s) {
    auto be32 = [](std::vector<std::uint8_t>& out, std::uint32_t v) {
        for (int sh = 24; sh >= 0; sh -= 8) out.push_back(static_cast<std::uint8_t>(v >> sh));
    };
    std::vector<std::uint8_t> img, lab;
    be32(img, 0x803);
    be32(img, static_cast<std::uint32_t>(s.count()));
    be32(img, 28);
    be32(img, 28);
    img.insert(img.end(), s.images.begin(), s.images.end());
    be32(lab, 0x801);
    be32(lab, static_cast<std::uint32_t>(s.count()));
    lab.insert(lab.end(), s.labels.begin(), s.labels.end());
    std::filesystem::create_directories(dir);
    write_gzip(dir / "train-images-idx3-ubyte.gz", img);
    write_gzip(dir / "train-labels-idx1-ubyte.gz", lab);
}
