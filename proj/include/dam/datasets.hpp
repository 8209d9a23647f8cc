#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dam/errors.hpp"
#include "dam/network.hpp"
#include "dam/pattern.hpp"

namespace dam {

inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;

// ------------------------------------------------------------------ IDX ----

enum class IdxErrc { bad_magic, unsupported_type, truncated, dimension_overflow, trailing_bytes };

class IdxError : public DataError {
public:
    IdxError(IdxErrc code, const std::string& what) : DataError(what), code_(code) {}
    IdxErrc code() const { return code_; }

private:
    IdxErrc code_;
};

struct IdxTensor {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> data;
};

// Unsigned-byte IDX files only: magic 0x00000801 (labels) or 0x00000803 (images).
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);

// Whole file, transparently gunzipped when compressed.
std::vector<std::uint8_t> read_file_maybe_gz(const std::filesystem::path& path);

struct RawImageSet {
    std::vector<std::uint8_t> images;  // count x 28 x 28, row-major
    std::vector<std::uint8_t> labels;

    std::size_t count() const { return labels.size(); }
    std::span<const std::uint8_t> image(std::size_t i) const {
        return {images.data() + i * kImagePixels, kImagePixels};
    }
};

RawImageSet make_image_set(const IdxTensor& images, const IdxTensor& labels);

// Looks for `name`, then `name.gz` (or the name without .gz) inside `dir`.
RawImageSet load_mnist(const std::filesystem::path& dir,
                       const std::string& images_name = "train-images-idx3-ubyte",
                       const std::string& labels_name = "train-labels-idx1-ubyte");

// ----------------------------------------------------------- transforms ----

std::vector<double> binarize(std::span<const std::uint8_t> image, std::uint8_t threshold = 127);

enum class TransformKind { identity, permute, rotate };

TransformKind parse_transform_kind(const std::string& s);
std::string to_string(TransformKind k);

struct IdentityTransform {
    friend bool operator==(const IdentityTransform&, const IdentityTransform&) = default;
};
struct PixelPermutation {
    std::vector<std::uint32_t> source;  // output pixel j takes input pixel source[j]
    friend bool operator==(const PixelPermutation&, const PixelPermutation&) = default;
};
struct Rotation {
    double degrees = 0.0;
    friend bool operator==(const Rotation&, const Rotation&) = default;
};
using TaskTransform = std::variant<IdentityTransform, PixelPermutation, Rotation>;

// `seed` drives permutations; `degrees` is used by rotations.
TaskTransform make_task_transform(TransformKind kind, std::uint64_t seed, double degrees = 0.0);

std::vector<std::uint8_t> apply_transform(const TaskTransform& t, std::span<const std::uint8_t> image);
// Nearest-neighbour rotation about the image centre; uncovered pixels become 0.
std::vector<std::uint8_t> rotate_image(std::span<const std::uint8_t> image, double degrees);
PixelPermutation invert(const PixelPermutation& p);

// ------------------------------------------------------------- encoding ----

Item encode_item(std::span<const double> binary_pixels, int label, std::size_t task_id,
                 std::size_t task_count);

struct TaskDataset {
    std::size_t task_id = 0;
    TaskTransform transform;
    std::vector<Item> train;
    std::vector<Item> val;
    std::uint64_t seed = 0;
    // Source image indices, train first then val.
    std::vector<std::uint32_t> source_index;

    TaskView view() const { return {task_id, train}; }
    Layout layout() const;
};

struct TaskSequenceSpec {
    std::size_t task_count = 5;
    std::size_t items_per_task = 2000;
    TransformKind kind = TransformKind::permute;
    std::uint64_t master_seed = 0;
    std::uint8_t threshold = 127;
    double rotation_step_degrees = 15.0;  // task t is rotated by t * step
    double val_fraction = 0.2;

    friend bool operator==(const TaskSequenceSpec&, const TaskSequenceSpec&) = default;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t task_seed(std::uint64_t master_seed, std::size_t task_index);

std::vector<TaskDataset> build_task_sequence(const RawImageSet& source, const TaskSequenceSpec& spec);

// Compact binary image of a task, used to check split determinism.
std::string serialize(const TaskDataset& task);

}  // namespace dam
