#include "dam/metrics.hpp"

#include <numeric>

#include "dam/errors.hpp"

namespace dam {

double macro_f1(const Confusion& cm) {
    double sum = 0.0;
    for (std::size_t c = 0; c < kClassCount; ++c) {
        std::uint64_t predicted = 0, actual = 0;
        for (std::size_t o = 0; o < kClassCount; ++o) {
            predicted += cm[o][c];
            actual += cm[c][o];
        }
        const std::uint64_t tp = cm[c][c];
        // F1 = 2PR/(P+R) = 2TP / (2TP + FP + FN) = 2TP / (predicted + actual)
        const std::uint64_t denom = predicted + actual;
        if (denom > 0) sum += 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    }
    return sum / kClassCount;
}

double accuracy(const Confusion& cm) {
    std::uint64_t total = 0, correct = 0;
    for (std::size_t t = 0; t < kClassCount; ++t)
        for (std::size_t p = 0; p < kClassCount; ++p) {
            total += cm[t][p];
            if (t == p) correct += cm[t][p];
        }
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

TaskScore evaluate_task(std::size_t task_id, std::span<const Item> val, const MemoryBank& bank,
                        double beta, const Interaction& f) {
    if (val.empty()) throw ShapeError("evaluate_task: no validation items");
    std::vector<int> predicted(val.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(val.size()); ++s) {
        const auto i = static_cast<std::size_t>(s);
        predicted[i] = argmax_class(classify(val[i].pattern, bank, beta, f));
    }
    TaskScore score;
    score.task_id = task_id;
    for (std::size_t i = 0; i < val.size(); ++i)
        ++score.confusion[static_cast<std::size_t>(val[i].label)][static_cast<std::size_t>(predicted[i])];
    score.macro_f1 = macro_f1(score.confusion);
    score.accuracy = accuracy(score.confusion);
    return score;
}

TaskScore evaluate_task(std::size_t task_id, std::span<const Item> val, const MemoryBank& bank,
                        const NetParams& params) {
    return evaluate_task(task_id, val, bank, params.readout_beta(bank.width()), params.interaction());
}

double average_accuracy(std::span<const double> scores) {
    if (scores.empty()) throw ShapeError("average_accuracy: no scores");
    double s = 0.0;
    for (double v : scores) s += v;
    return s / static_cast<double>(scores.size());
}

}  // namespace dam
