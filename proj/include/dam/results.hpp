#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dam/harness.hpp"

namespace dam {

// One row of a run summary CSV.
struct SummaryRow {
    std::string method;
    double n = 0.0;
    double hyperparameter = 0.0;  // lambda for penalty methods, proportion otherwise
    std::uint64_t seed = 0;
    std::vector<double> final_f1;
    double average_accuracy = 0.0;

    friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

SummaryRow summarize(const RunRecord& rec);
// The method's own hyperparameter name ("lambda" or "proportion"; "-" for vanilla).
std::string hyperparameter_name(const std::string& method);

struct RunPaths {
    std::filesystem::path jsonl;
    std::filesystem::path csv;
};
struct SweepPaths {
    std::filesystem::path trials;
    std::filesystem::path curve;
};

// <dir>/<stem>.jsonl holds one "epoch" object per training epoch, one "curve"
// object per intermediate evaluation and a final "summary" object. <dir>/<stem>.csv
// holds the summary row.
RunPaths write_run(const RunRecord& rec, const std::filesystem::path& dir, const std::string& stem);
RunRecord read_run_jsonl(const std::filesystem::path& path);

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);
std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);

// <dir>/<stem>_trials.csv and <dir>/<stem>_window.csv.
SweepPaths write_sweep(const SweepResult& s, const std::filesystem::path& dir, const std::string& stem);
SweepResult read_sweep(const SweepPaths& paths);

// Shortest text that parses back to the same double.
std::string format_real(double v);

// ---------------------------------------------------------------- report ----

struct AggregateRow {
    std::string method;
    double n = 0.0;
    double hyperparameter = 0.0;
    std::size_t trials = 0;
    double mean = 0.0;
    double stddev = 0.0;  // n - 1 denominator; 0 for a single trial
};

// Groups summary rows by (method, n, hyperparameter), sorted by those keys.
std::vector<AggregateRow> aggregate(const std::vector<SummaryRow>& rows);
// "0.431 +- 0.027"
std::string format_mean_std(double mean, double stddev);

struct BestWindow {
    std::string method;
    double n = 0.0;
    std::string field;
    double value = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
};

// Window centre with the highest mean objective.
BestWindow best_window(const SweepResult& s);

}  // namespace dam
