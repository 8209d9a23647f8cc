#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dam/network.hpp"
#include "dam/pattern.hpp"

namespace dam {

using Confusion = std::array<std::array<std::uint64_t, kClassCount>, kClassCount>;  // [true][pred]

struct TaskScore {
    std::size_t task_id = 0;
    Confusion confusion{};
    double macro_f1 = 0.0;
    double accuracy = 0.0;
};

// Unweighted mean of per-class F1. A class with 2TP + FP + FN = 0 scores 0.
double macro_f1(const Confusion& confusion);
double accuracy(const Confusion& confusion);

TaskScore evaluate_task(std::size_t task_id, std::span<const Item> val, const MemoryBank& bank,
                        double beta, const Interaction& f);
TaskScore evaluate_task(std::size_t task_id, std::span<const Item> val, const MemoryBank& bank,
                        const NetParams& params);

double average_accuracy(std::span<const double> scores);

}  // namespace dam
