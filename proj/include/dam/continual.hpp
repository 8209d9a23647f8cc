#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dam/matrix.hpp"
#include "dam/network.hpp"

namespace dam {

// ------------------------------------------------------------ rehearsal ----

// floor(proportion * |train|) items drawn without replacement.
std::vector<Item> build_rehearsal_buffer(std::span<const Item> train, double proportion, Rng& rng);

// Current-task items plus every buffered item, each exactly once, shuffled.
std::vector<const Item*> merge_for_epoch(std::span<const Item> task_items,
                                         const std::vector<std::vector<Item>>& buffers, Rng& rng);

struct Pseudoitem {
    Item item;
    bool converged = false;
};

// Random +-1 pixels with the completing task's one-hot, relaxed over the pixel
// neurons, then labelled by the readout's argmax.
std::vector<Pseudoitem> generate_pseudoitems(const MemoryBank& bank, const NetParams& params,
                                             std::size_t count, std::size_t completing_task_id,
                                             Rng& rng, int max_sweeps = 100);

// ------------------------------------------------------------------ GEM ----

enum class GemMode { per_task, averaged };

// One flattened loss gradient per buffer (per_task) or a single gradient over
// the union of all buffers (averaged). Empty buffers are skipped.
std::vector<std::vector<double>> gem_reference_gradients(const std::vector<std::vector<Item>>& buffers,
                                                         GemMode mode, const MemoryBank& bank,
                                                         const NetParams& params, double beta);

struct QpResult {
    std::vector<double> v;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
};

// min 1/2 v'Qv + c'v subject to v >= 0, Q symmetric PSD. The KKT residual is
// measured in Jacobi-scaled variables relative to max(1, |c_i| / sqrt(Q_ii)).
QpResult nnqp_solve(const Matrix& Q, std::span<const double> c, double tol = 1e-8,
                    int max_iter = 100000);

struct Projection {
    std::vector<double> g;
    bool projected = false;
    bool converged = true;
};

// Closest vector to g with <g~, g_v> >= 0 for every reference row, via the dual.
Projection gem_project(std::span<const double> g, const std::vector<std::vector<double>>& G,
                       double tol = 1e-8, int max_iter = 100000);

// Single-constraint closed form g - (g.r / r.r) r when g.r < 0.
Projection agem_project(std::span<const double> g, std::span<const double> g_ref);

// ------------------------------------------------------------- penalties ----

struct PenaltyTerm {
    Matrix anchor;      // theta*
    Matrix importance;  // omega, elementwise >= 0
};

struct PenaltyState {
    std::vector<PenaltyTerm> terms;
    double lambda = 0.0;
    double coeff = 1.0;  // 1/2 for EWC
};

struct PenaltyValue {
    double penalty = 0.0;
    Matrix grad;
};

// coeff * lambda * sum_terms sum_k omega_k (theta*_k - theta_k)^2 and its gradient.
PenaltyValue quadratic_penalty(const MemoryBank& bank, const PenaltyState& state);

// Mean over items of the squared per-item loss gradient.
Matrix ewc_fisher_importance(std::span<const Item> sample, const MemoryBank& bank,
                             const NetParams& params, double beta);

enum class MasVariant {
    per_output,    // mean over outputs and items of |dF_i/dtheta|
    squared_norm,  // mean over items of |sum_i F_i dF_i/dtheta|
};

Matrix mas_importance(std::span<const Item> sample, const MemoryBank& bank, const NetParams& params,
                      double beta, MasVariant variant = MasVariant::per_output);

struct SiState {
    Matrix running;  // path integral for the task in progress
    Matrix start;    // parameters when the task began
    Matrix omega;    // consolidated importance
    double eps = 1e-3;
    bool printed_sign = false;  // accumulate +g*delta instead of -g*delta
};

void si_step_accumulate(SiState& state, const Matrix& base_grad, const Matrix& delta);

// Folds the finished task into omega (negative path sums contribute nothing),
// clears the running sum and re-anchors `penalty` at the current bank.
void si_task_consolidate(SiState& state, PenaltyState& penalty, const MemoryBank& bank_at_task_end);

// --------------------------------------------------------------- methods ----

struct MethodSpec {
    std::string name = "vanilla";  // vanilla|rehearsal|pseudorehearsal|gem|agem|l2|ewc|mas|si
    double proportion = 0.0;       // rehearsal / pseudorehearsal / GEM memory proportion
    double lambda = 0.0;
    double eps_si = 1e-3;
    std::size_t fisher_cap = 0;    // 0 = whole train split
    int grad_stride = 1;           // GEM reference gradient refresh period, in batches
    MasVariant mas_variant = MasVariant::per_output;
    bool si_printed_sign = false;
    int pseudo_max_sweeps = 100;

    friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

std::string to_string(MasVariant v);
MasVariant parse_mas_variant(const std::string& s);

class ContinualMethod : public TrainingHooks {
public:
    virtual std::string name() const = 0;
    // Rehearsal-style buffers; empty for penalty methods.
    virtual std::size_t buffered_items() const { return 0; }
    // Penalty state, or nullptr when the method has none.
    virtual const PenaltyState* penalty() const { return nullptr; }
};

const std::vector<std::string>& method_names();

// `seed` drives the method's private generator (buffer sampling, pseudoitem
// probes) so method bookkeeping never perturbs the training shuffle stream.
std::unique_ptr<ContinualMethod> make_method(const MethodSpec& spec, std::uint64_t seed);

}  // namespace dam
