#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dam/interaction.hpp"
#include "dam/matrix.hpp"
#include "dam/pattern.hpp"

namespace dam {

using Rng = std::mt19937_64;

// How the summed minibatch gradient is rescaled before it enters momentum.
//   none        plain gradient
//   row_max     each memory row divided by its largest absolute entry
//   global_max  whole gradient divided by its largest absolute entry
enum class StepScaling { none, row_max, global_max };

std::string to_string(StepScaling s);
StepScaling parse_step_scaling(const std::string& s);

struct NetParams {
    double n = 2.0;             // interaction vertex
    double eps_leak = 1e-2;
    double T_init = 0.95;
    double T_final = 0.95;
    double lr_init = 8e-2;
    double lr_decay = 0.999;
    double momentum_p = 0.6;
    int error_exp_m = 1;
    int max_epochs = 500;
    int batch_size = 100;
    int memory_count = 512;
    double init_std = 0.1;
    // Divide z.xi by the state width N inside f, so arguments stay in [-1, 1]
    // for bipolar states and clamped memories.
    bool normalize_argument = true;
    StepScaling step_scaling = StepScaling::row_max;

    // Throws ConfigError naming the offending field.
    void validate() const;

    double learning_rate(int epoch) const;  // epoch is 1-based
    double temperature(int epoch) const;
    double argument_scale(std::size_t width) const {
        return normalize_argument ? 1.0 / static_cast<double>(width) : 1.0;
    }
    // Factor multiplying z.xi inside f during training epoch `epoch`.
    double beta(int epoch, std::size_t width) const { return argument_scale(width) / temperature(epoch); }
    // Same factor at T_final, used for readout and relaxation after training.
    double readout_beta(std::size_t width) const { return argument_scale(width) / T_final; }
    Interaction interaction() const { return {n, eps_leak}; }

    // Main-text hyperparameters (512 memories, 500 epochs, lr 8e-2, T 0.95).
    static NetParams paper();
    // Grid-search optimum reported in the appendix (lr 1e-1, T 0.875).
    static NetParams paper_appendix();
    // Workstation-sized run: 128 memories, 100 epochs, T 0.6 (a cooler
    // temperature makes up for 20x fewer updates than the full-scale run).
    static NetParams desk();

    friend bool operator==(const NetParams&, const NetParams&) = default;
};

// Trainable memory vectors, one per row. Pixel and task columns are clamped to
// [-1, 1] after every update; class columns are left free.
struct MemoryBank {
    Layout layout;
    Matrix memories;

    MemoryBank() = default;
    MemoryBank(Layout l, std::size_t count) : layout(l), memories(count, l.size()) {}

    std::size_t count() const { return memories.rows; }
    std::size_t width() const { return memories.cols; }

    void clamp();
    bool clamp_invariant_holds() const;

    static MemoryBank random_normal(Layout l, std::size_t count, double std_dev, Rng& rng);

    friend bool operator==(const MemoryBank&, const MemoryBank&) = default;
};

// Field on neuron i: sum over memories of f(beta z.xi+i) - f(beta z.xi-i), where
// xi+i / xi-i set entry i to +1 / -1.
double neuron_field(const Pattern& xi, std::size_t i, const MemoryBank& bank, double beta,
                    const Interaction& f);

// Fields for several neurons of one state, all computed from the same state.
std::vector<double> neuron_fields(const Pattern& xi, std::span<const std::size_t> neurons,
                                  const MemoryBank& bank, double beta, const Interaction& f);

// One synchronous update of the ten class neurons with linear activation.
std::vector<double> classify(const Pattern& probe, const MemoryBank& bank, const NetParams& params);
std::vector<double> classify(const Pattern& probe, const MemoryBank& bank, double beta,
                             const Interaction& f);
// Lowest index wins ties.
int argmax_class(std::span<const double> logits);

struct RelaxResult {
    Pattern state;
    bool converged = false;
    int sweeps = 0;
};

// Synchronous sign updates on the masked neurons until none changes. sign(0) = +1.
RelaxResult relax(const Pattern& probe, const MemoryBank& bank, const NetParams& params,
                  std::span<const std::size_t> update_mask, int max_sweeps);
RelaxResult relax(const Pattern& probe, const MemoryBank& bank, double beta, const Interaction& f,
                  std::span<const std::size_t> update_mask, int max_sweeps);

struct LossGrad {
    double loss = 0.0;
    Matrix grad;  // shaped like the bank
};

// Summed error sum_items sum_{i in loss set} (target_i - tanh(field_i))^(2m) and
// its exact gradient with respect to every bank entry. Items are referenced by
// pointer so epoch orderings never copy patterns. The result does not depend on
// the OpenMP thread count.
LossGrad batch_loss_and_grad(std::span<const Item* const> batch, const MemoryBank& bank,
                             const NetParams& params, double beta,
                             std::span<const std::size_t> loss_neurons);
LossGrad batch_loss_and_grad(std::span<const Item> batch, const MemoryBank& bank,
                             const NetParams& params, double beta,
                             std::span<const std::size_t> loss_neurons);

// Per-output derivative d field_i / d bank for the readout (linear activation).
// Calls `visit(output_index, grad)` once per neuron in `outputs`.
template <typename Visit>
void output_gradients(const Pattern& xi, const MemoryBank& bank, double beta, const Interaction& f,
                      std::span<const std::size_t> outputs, Visit&& visit);

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double temperature = 0.0;
    double error = 0.0;

    friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    // True when every scheduled epoch ran with finite weights.
    bool converged = false;

    friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

// What train_task knows about the task being learned.
struct TaskView {
    std::size_t task_id = 0;
    std::span<const Item> train;
};

// Extension points through which continual-learning methods steer training.
// Every default is the identity, which gives plain sequential training.
class TrainingHooks {
public:
    virtual ~TrainingHooks() = default;

    virtual void on_task_start(const TaskView& task, const MemoryBank& bank);
    // Items for one epoch, in presentation order.
    virtual std::vector<const Item*> epoch_data(const TaskView& task, Rng& rng);
    // Adds penalty gradients into `grad` and returns the penalty value.
    virtual double augment_loss(const MemoryBank& bank, Matrix& grad);
    virtual void transform_gradient(Matrix& grad, const MemoryBank& bank, const NetParams& params,
                                    double beta);
    // Only called when wants_step_trace() is true.
    virtual bool wants_step_trace() const { return false; }
    virtual void after_step(const Matrix& base_grad, const Matrix& delta);
    virtual void on_task_end(const TaskView& task, const MemoryBank& bank, const NetParams& params);
};

// Shuffled pointers to every item, the vanilla epoch composition.
std::vector<const Item*> shuffled_refs(std::span<const Item> items, Rng& rng);

using EpochCallback = std::function<void(const EpochLog&, const MemoryBank&)>;

// One task of minibatch training with momentum. The momentum buffer starts at
// zero for every call. `on_epoch` (optional) runs after every epoch.
TrainLog train_task(const TaskView& task, MemoryBank& bank, const NetParams& params,
                    TrainingHooks& hooks, Rng& rng, const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------

namespace detail {
// a+ / a- per memory for neuron i given the base dot product d = z.xi.
inline void clamped_args(double d, double z_i, double xi_i, double beta, double& plus,
                         double& minus) {
    const double rest = d - z_i * xi_i;
    plus = beta * (rest + z_i);
    minus = beta * (rest - z_i);
}
}  // namespace detail

template <typename Visit>
void output_gradients(const Pattern& xi, const MemoryBank& bank, double beta, const Interaction& f,
                      std::span<const std::size_t> outputs, Visit&& visit) {
    const std::size_t K = bank.count(), N = bank.width();
    std::vector<double> d(K);
    for (std::size_t k = 0; k < K; ++k) d[k] = dot(bank.memories.row(k), xi.values);
    Matrix g(K, N);
    for (std::size_t o = 0; o < outputs.size(); ++o) {
        const std::size_t i = outputs[o];
        for (std::size_t k = 0; k < K; ++k) {
            const double z_i = bank.memories(k, i);
            double ap, am;
            detail::clamped_args(d[k], z_i, xi[i], beta, ap, am);
            const double dp = f.deriv(ap), dm = f.deriv(am);
            auto row = g.row(k);
            const double u = beta * (dp - dm);
            for (std::size_t j = 0; j < N; ++j) row[j] = u * xi[j];
            row[i] = beta * (dp + dm);
        }
        visit(o, static_cast<const Matrix&>(g));
    }
}

}  // namespace dam
