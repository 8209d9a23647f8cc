#include "dam/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <iostream>
#include <numeric>
#include <sstream>

namespace dam {

// ------------------------------------------------------------------ IDX ----

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw IdxError(IdxErrc::truncated, "IDX: stream shorter than its magic number");
    if (bytes[0] != 0 || bytes[1] != 0) throw IdxError(IdxErrc::bad_magic, "IDX: bad magic number");
    const std::uint8_t type = bytes[2], ndims = bytes[3];
    if (type != 0x08 || (ndims != 1 && ndims != 3)) {
        std::ostringstream os;
        os << "IDX: unsupported type 0x" << std::hex << (int(type) << 8 | ndims)
           << " (expected 0x801 labels or 0x803 images)";
        throw IdxError(IdxErrc::unsupported_type, os.str());
    }
    const std::size_t header = 4 + 4 * std::size_t{ndims};
    if (bytes.size() < header) throw IdxError(IdxErrc::truncated, "IDX: truncated dimension header");

    IdxTensor out;
    std::uint64_t total = 1;
    for (std::size_t d = 0; d < ndims; ++d) {
        const auto* p = bytes.data() + 4 + 4 * d;
        const std::uint32_t dim = std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 |
                                  std::uint32_t{p[2]} << 8 | std::uint32_t{p[3]};
        out.dims.push_back(dim);
        total *= dim;
        if (total > (std::uint64_t{1} << 34))
            throw IdxError(IdxErrc::dimension_overflow, "IDX: declared size is implausibly large");
    }
    const std::size_t payload = bytes.size() - header;
    if (payload < total) {
        std::ostringstream os;
        os << "IDX: payload has " << payload << " bytes, header declares " << total;
        throw IdxError(IdxErrc::truncated, os.str());
    }
    if (payload > total) throw IdxError(IdxErrc::trailing_bytes, "IDX: unexpected bytes after payload");
    out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return out;
}

std::vector<std::uint8_t> read_file_maybe_gz(const std::filesystem::path& path) {
    gzFile in = gzopen(path.string().c_str(), "rb");
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> out;
    std::array<std::uint8_t, 1 << 16> chunk{};
    for (;;) {
        const int got = gzread(in, chunk.data(), static_cast<unsigned>(chunk.size()));
        if (got < 0) {
            int errnum = 0;
            const std::string msg = gzerror(in, &errnum);
            gzclose(in);
            throw DataError("read error in " + path.string() + ": " + msg);
        }
        if (got == 0) break;
        out.insert(out.end(), chunk.begin(), chunk.begin() + got);
    }
    gzclose(in);
    return out;
}

RawImageSet make_image_set(const IdxTensor& images, const IdxTensor& labels) {
    if (images.dims.size() != 3 || images.dims[1] != kImageSide || images.dims[2] != kImageSide)
        throw DataError("image tensor must be count x 28 x 28");
    if (labels.dims.size() != 1) throw DataError("label tensor must be one-dimensional");
    if (images.dims[0] != labels.dims[0]) throw DataError("image and label counts differ");
    for (auto l : labels.data)
        if (l >= kClassCount) throw DataError("label outside 0..9");
    return {images.data, labels.data};
}

namespace {

std::filesystem::path locate(const std::filesystem::path& dir, const std::string& name) {
    std::vector<std::filesystem::path> candidates{dir / name};
    if (name.ends_with(".gz"))
        candidates.push_back(dir / name.substr(0, name.size() - 3));
    else
        candidates.push_back(dir / (name + ".gz"));
    for (const auto& c : candidates)
        if (std::filesystem::exists(c)) return c;
    throw DataError("missing data file " + (dir / name).string() + " (or .gz variant)");
}

}  // namespace

RawImageSet load_mnist(const std::filesystem::path& dir, const std::string& images_name,
                       const std::string& labels_name) {
    const auto images = read_file_maybe_gz(locate(dir, images_name));
    const auto labels = read_file_maybe_gz(locate(dir, labels_name));
    return make_image_set(parse_idx(images), parse_idx(labels));
}

// ----------------------------------------------------------- transforms ----

std::vector<double> binarize(std::span<const std::uint8_t> image, std::uint8_t threshold) {
    std::vector<double> out(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) out[i] = image[i] > threshold ? 1.0 : -1.0;
    return out;
}

TransformKind parse_transform_kind(const std::string& s) {
    if (s == "identity") return TransformKind::identity;
    if (s == "permute") return TransformKind::permute;
    if (s == "rotate") return TransformKind::rotate;
    throw ConfigError("unknown task transform '" + s + "' (identity|permute|rotate)");
}

std::string to_string(TransformKind k) {
    switch (k) {
        case TransformKind::identity: return "identity";
        case TransformKind::permute: return "permute";
        case TransformKind::rotate: return "rotate";
    }
    return "?";
}

TaskTransform make_task_transform(TransformKind kind, std::uint64_t seed, double degrees) {
    switch (kind) {
        case TransformKind::identity: return IdentityTransform{};
        case TransformKind::rotate: return Rotation{degrees};
        case TransformKind::permute: {
            PixelPermutation p;
            p.source.resize(kImagePixels);
            std::iota(p.source.begin(), p.source.end(), 0u);
            Rng rng(seed);
            std::shuffle(p.source.begin(), p.source.end(), rng);
            return p;
        }
    }
    return IdentityTransform{};
}

std::vector<std::uint8_t> rotate_image(std::span<const std::uint8_t> image, double degrees) {
    constexpr double kCentre = (kImageSide - 1) / 2.0;
    const double rad = degrees * std::acos(-1.0) / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    std::vector<std::uint8_t> out(kImagePixels, 0);
    for (std::size_t r = 0; r < kImageSide; ++r) {
        for (std::size_t col = 0; col < kImageSide; ++col) {
            // Inverse-map each output pixel into the source grid.
            const double y = static_cast<double>(r) - kCentre, x = static_cast<double>(col) - kCentre;
            const long sr = std::lround(kCentre + (-s * x + c * y));
            const long sc = std::lround(kCentre + (c * x + s * y));
            if (sr >= 0 && sc >= 0 && sr < long{kImageSide} && sc < long{kImageSide})
                out[r * kImageSide + col] = image[static_cast<std::size_t>(sr) * kImageSide +
                                                  static_cast<std::size_t>(sc)];
        }
    }
    return out;
}

std::vector<std::uint8_t> apply_transform(const TaskTransform& t, std::span<const std::uint8_t> image) {
    if (image.size() != kImagePixels) throw ShapeError("apply_transform: image must be 28x28");
    if (const auto* p = std::get_if<PixelPermutation>(&t)) {
        std::vector<std::uint8_t> out(kImagePixels);
        for (std::size_t j = 0; j < kImagePixels; ++j) out[j] = image[p->source[j]];
        return out;
    }
    if (const auto* r = std::get_if<Rotation>(&t)) return rotate_image(image, r->degrees);
    return {image.begin(), image.end()};
}

PixelPermutation invert(const PixelPermutation& p) {
    PixelPermutation inv;
    inv.source.resize(p.source.size());
    for (std::uint32_t j = 0; j < p.source.size(); ++j) inv.source[p.source[j]] = j;
    return inv;
}

// ------------------------------------------------------------- encoding ----

Item encode_item(std::span<const double> binary_pixels, int label, std::size_t task_id,
                 std::size_t task_count) {
    if (label < 0 || label >= static_cast<int>(kClassCount)) throw DataError("label must lie in 0..9");
    if (task_id >= task_count) throw ShapeError("task id out of range");
    const Layout layout{binary_pixels.size(), task_count, kClassCount};
    std::vector<double> v(layout.size(), 0.0);
    std::copy(binary_pixels.begin(), binary_pixels.end(), v.begin());
    for (std::size_t t = 0; t < task_count; ++t) v[layout.task_begin() + t] = t == task_id ? 1.0 : -1.0;
    Item item;
    item.pattern = Pattern(layout, std::move(v));
    item.target.assign(kClassCount, -1.0);
    item.target[static_cast<std::size_t>(label)] = 1.0;
    item.label = label;
    return item;
}

Layout TaskDataset::layout() const {
    if (!train.empty()) return train.front().pattern.layout;
    if (!val.empty()) return val.front().pattern.layout;
    return {};
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t task_seed(std::uint64_t master_seed, std::size_t task_index) {
    return splitmix64(master_seed ^ splitmix64(0x7461736bULL + task_index));
}

namespace {

TaskDataset build_one_task(const RawImageSet& source, const TaskSequenceSpec& spec, std::size_t t,
                           std::uint64_t seed) {
    TaskDataset task;
    task.task_id = t;
    task.seed = seed;
    Rng rng(seed);
    task.transform = make_task_transform(spec.kind, splitmix64(seed),
                                         spec.rotation_step_degrees * static_cast<double>(t));

    // Partial Fisher-Yates: a uniform sample without replacement, in random order.
    std::vector<std::uint32_t> pool(source.count());
    std::iota(pool.begin(), pool.end(), 0u);
    for (std::size_t i = 0; i < spec.items_per_task; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    const auto val_count =
        static_cast<std::size_t>(std::floor(spec.val_fraction * spec.items_per_task + 1e-9));
    task.source_index.assign(pool.begin() + static_cast<std::ptrdiff_t>(val_count),
                             pool.begin() + static_cast<std::ptrdiff_t>(spec.items_per_task));
    task.source_index.insert(task.source_index.end(), pool.begin(),
                             pool.begin() + static_cast<std::ptrdiff_t>(val_count));

    const std::size_t train_count = spec.items_per_task - val_count;
    for (std::size_t s = 0; s < task.source_index.size(); ++s) {
        const std::uint32_t idx = task.source_index[s];
        const auto image = apply_transform(task.transform, source.image(idx));
        const auto bits = binarize(image, spec.threshold);
        auto item = encode_item(bits, source.labels[idx], t, spec.task_count);
        (s < train_count ? task.train : task.val).push_back(std::move(item));
    }
    return task;
}

bool every_class_present(const std::vector<Item>& items) {
    std::array<bool, kClassCount> seen{};
    for (const auto& it : items) seen[static_cast<std::size_t>(it.label)] = true;
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

}  // namespace

std::vector<TaskDataset> build_task_sequence(const RawImageSet& source, const TaskSequenceSpec& spec) {
    if (spec.task_count == 0) throw ConfigError("task_count must be >= 1");
    if (spec.items_per_task == 0) throw ConfigError("items_per_task must be >= 1");
    if (spec.items_per_task > source.count()) {
        std::ostringstream os;
        os << "items_per_task = " << spec.items_per_task << " exceeds the " << source.count()
           << " available source images";
        throw DataError(os.str());
    }
    if (!(spec.val_fraction >= 0.0 && spec.val_fraction < 1.0))
        throw ConfigError("val_fraction must lie in [0, 1)");

    std::vector<TaskDataset> tasks;
    for (std::size_t t = 0; t < spec.task_count; ++t) {
        std::uint64_t seed = task_seed(spec.master_seed, t);
        TaskDataset task = build_one_task(source, spec, t, seed);
        for (int attempt = 1; spec.items_per_task >= 1000 && !every_class_present(task.train); ++attempt) {
            if (attempt > 100) throw DataError("could not draw a task containing every class");
            std::cerr << "warning: task " << t << " train split misses a class; resampling\n";
            seed = splitmix64(seed + static_cast<std::uint64_t>(attempt));
            task = build_one_task(source, spec, t, seed);
        }
        tasks.push_back(std::move(task));
    }
    return tasks;
}

namespace {

template <typename T>
void put(std::string& out, const T& v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

void put_items(std::string& out, const std::vector<Item>& items) {
    put(out, static_cast<std::uint64_t>(items.size()));
    for (const auto& it : items) {
        put(out, static_cast<std::int32_t>(it.label));
        for (double v : it.pattern.values) put(out, static_cast<std::int8_t>(v));
    }
}

}  // namespace

std::string serialize(const TaskDataset& task) {
    std::string out;
    put(out, static_cast<std::uint64_t>(task.task_id));
    put(out, task.seed);
    put(out, static_cast<std::uint8_t>(task.transform.index()));
    if (const auto* p = std::get_if<PixelPermutation>(&task.transform))
        for (auto s : p->source) put(out, s);
    if (const auto* r = std::get_if<Rotation>(&task.transform)) put(out, r->degrees);
    for (auto s : task.source_index) put(out, s);
    put_items(out, task.train);
    put_items(out, task.val);
    return out;
}

}  // namespace dam
