#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dam/config.hpp"
#include "dam/continual.hpp"
#include "dam/datasets.hpp"
#include "dam/network.hpp"

namespace dam {

inline constexpr const char* kDataDirEnv = "DAM_DATA_DIR";

struct DatasetConfig {
    TaskSequenceSpec sequence;
    std::string data_dir = "data/mnist";
    std::string images_file = "train-images-idx3-ubyte";
    std::string labels_file = "train-labels-idx1-ubyte";

    friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    NetParams net = NetParams::desk();
    MethodSpec method;
    // Extra validation passes every k epochs inside each task; 0 = only after
    // each task.
    int eval_every_epochs = 0;
    std::string output_dir = "results";
    std::string tag = "run";
    std::uint64_t trial_seed = 1;

    // Every field under a dotted key; parse(serialize(c)) == c.
    ConfigFile to_config() const;
    // Missing keys keep their defaults; unknown keys are a ConfigError.
    static ExperimentConfig from_config(const ConfigFile& file);

    void validate() const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// desk: 5 tasks x 2000 items, 128 memories, 100 epochs, batch 100.
// paper / paper_appendix: 5 tasks x 10000 items with the full-scale networks.
ExperimentConfig preset_config(const std::string& name);
const std::vector<std::string>& preset_names();

// DAM_DATA_DIR wins over the configured directory.
std::filesystem::path resolve_data_dir(const DatasetConfig& d);
RawImageSet load_source(const DatasetConfig& d);

struct CurvePoint {
    std::size_t trained_task = 0;
    int epoch = 0;
    std::size_t eval_task = 0;
    double macro_f1 = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct RunRecord {
    ExperimentConfig config;
    std::vector<TrainLog> train_logs;              // one per task
    std::vector<std::vector<double>> f1;           // f1[mu][nu], nu <= mu
    std::vector<std::vector<double>> accuracy;     // same shape, plain accuracy
    std::vector<double> average_accuracy;          // mean of f1[mu][0..mu]
    std::vector<CurvePoint> curves;
    std::size_t buffered_items = 0;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;

    double final_average() const { return average_accuracy.empty() ? 0.0 : average_accuracy.back(); }
    // Smallest final-row score.
    double min_task_f1() const;
    // Mean of f1[mu][mu], each task scored right after it was learned.
    double mean_just_trained() const;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

using Progress = std::function<void(const std::string&)>;

RunRecord run_experiment(const ExperimentConfig& config, const RawImageSet& source,
                         const Progress& progress = {});
RunRecord run_experiment(const ExperimentConfig& config, const Progress& progress = {});

// ----------------------------------------------------------------- sweep ----

struct SweepAxis {
    enum class Kind { grid, log_uniform };
    Kind kind = Kind::grid;
    std::string field = "method.proportion";  // any real-valued config key
    std::vector<double> values;               // grid
    double lo = 1e-8, hi = 1e2;               // log_uniform
    int trials = 100;
    std::uint64_t sample_seed = 0;
};

enum class SweepObjective { average, min_task };
std::string to_string(SweepObjective o);
SweepObjective parse_sweep_objective(const std::string& s);

struct SweepTrial {
    double value = 0.0;
    std::uint64_t seed = 0;
    double final_average = 0.0;
    double min_task_f1 = 0.0;
    std::vector<double> final_f1;

    double objective(SweepObjective o) const { return o == SweepObjective::average ? final_average : min_task_f1; }
    friend bool operator==(const SweepTrial&, const SweepTrial&) = default;
};

struct WindowPoint {
    double value = 0.0;  // mean of the window's values (geometric on a log axis)
    double mean = 0.0;
    double stddev = 0.0;

    friend bool operator==(const WindowPoint&, const WindowPoint&) = default;
};

struct SweepResult {
    std::string method;
    double n = 0.0;
    std::string field;
    bool log_axis = false;
    SweepObjective objective = SweepObjective::average;
    int window = 20;
    std::vector<SweepTrial> trials;  // sorted by value, then seed
    std::vector<WindowPoint> curve;

    friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

// The values a sweep will visit, in visiting order (grid values repeat per
// seed; log-uniform draws use `sample_seed`).
std::vector<std::pair<double, std::uint64_t>> sweep_plan(const SweepAxis& axis,
                                                         const std::vector<std::uint64_t>& seeds);

// Sliding windows of `window` consecutive trials sorted by value; a single
// window when there are fewer trials. Standard deviation uses n - 1.
std::vector<WindowPoint> moving_window(const std::vector<SweepTrial>& sorted, int window,
                                       SweepObjective objective, bool log_axis);

SweepResult sweep(const ExperimentConfig& base, const SweepAxis& axis,
                  const std::vector<std::uint64_t>& seeds, SweepObjective objective,
                  const RawImageSet& source, const Progress& progress = {});

}  // namespace dam
