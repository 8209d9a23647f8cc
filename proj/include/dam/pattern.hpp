#pragma once

#include <cstddef>
#include <vector>

namespace dam {

inline constexpr std::size_t kClassCount = 10;

// Neuron layout of every state vector: [pixels | task one-hot | classes].
struct Layout {
    std::size_t pixel_count = 0;
    std::size_t task_count = 0;
    std::size_t class_count = kClassCount;

    std::size_t size() const { return pixel_count + task_count + class_count; }
    std::size_t task_begin() const { return pixel_count; }
    std::size_t class_begin() const { return pixel_count + task_count; }
    // Columns [0, clamp_end) hold pixel and task weights and are clamped to [-1, 1].
    std::size_t clamp_end() const { return class_begin(); }

    std::vector<std::size_t> class_neurons() const;
    std::vector<std::size_t> pixel_neurons() const;
    std::vector<std::size_t> all_neurons() const;

    friend bool operator==(const Layout&, const Layout&) = default;
};

struct Pattern {
    Layout layout;
    std::vector<double> values;

    Pattern() = default;
    Pattern(Layout l, std::vector<double> v) : layout(l), values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }

    // Pixel and task entries exactly +-1, task block one-hot.
    bool valid() const;

    friend bool operator==(const Pattern&, const Pattern&) = default;
};

// A training or validation item: the probe state plus +-1 targets over the
// loss neurons (the ten class neurons for classification).
struct Item {
    Pattern pattern;
    std::vector<double> target;
    int label = -1;

    friend bool operator==(const Item&, const Item&) = default;
};

}  // namespace dam
