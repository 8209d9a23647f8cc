#include "dam/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dam/errors.hpp"

namespace dam {

// ---------------------------------------------------------------- layout ----

std::vector<std::size_t> Layout::class_neurons() const {
    std::vector<std::size_t> out(class_count);
    for (std::size_t c = 0; c < class_count; ++c) out[c] = class_begin() + c;
    return out;
}

std::vector<std::size_t> Layout::pixel_neurons() const {
    std::vector<std::size_t> out(pixel_count);
    for (std::size_t p = 0; p < pixel_count; ++p) out[p] = p;
    return out;
}

std::vector<std::size_t> Layout::all_neurons() const {
    std::vector<std::size_t> out(size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = p;
    return out;
}

bool Pattern::valid() const {
    if (values.size() != layout.size()) return false;
    for (std::size_t i = 0; i < layout.class_begin(); ++i)
        if (values[i] != 1.0 && values[i] != -1.0) return false;
    std::size_t hot = 0;
    for (std::size_t t = 0; t < layout.task_count; ++t)
        if (values[layout.task_begin() + t] == 1.0) ++hot;
    return layout.task_count == 0 || hot == 1;
}

// ----------------------------------------------------------- interaction ----

Interaction::Interaction(double n, double eps_leak) : n_(n), eps_(eps_leak) {
    // Below 1 the derivative n x^(n-1) is unbounded at the origin.
    if (!(n >= 1.0) || !std::isfinite(n)) throw ShapeError("interaction vertex n must be >= 1");
    if (!(eps_leak >= 0.0) || !std::isfinite(eps_leak))
        throw ShapeError("eps_leak must be finite and >= 0");
    integral_ = n == std::floor(n) && n <= 1024.0;
    exponent_ = integral_ ? static_cast<int>(n) - 1 : 0;
}

InteractionValue interaction_and_deriv(double x, double n, double eps_leak) {
    if (!std::isfinite(x)) throw NumericError("interaction argument is not finite");
    const Interaction f(n, eps_leak);
    InteractionValue out{};
    f.both(x, out.f, out.df);
    return out;
}

// ---------------------------------------------------------------- params ----

void NetParams::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("invalid net parameter: " + what); };
    if (!(n >= 1.0) || !std::isfinite(n)) fail("n must be >= 1");
    if (!(eps_leak >= 0.0)) fail("eps_leak must be >= 0");
    if (!(T_init > 0.0) || !(T_final > 0.0)) fail("temperatures must be > 0");
    if (!(lr_init > 0.0)) fail("lr_init must be > 0");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay must lie in (0, 1]");
    if (!(momentum_p >= 0.0 && momentum_p < 1.0)) fail("momentum_p must lie in [0, 1)");
    if (error_exp_m < 1) fail("error_exp_m must be >= 1");
    if (max_epochs < 1) fail("max_epochs must be >= 1");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (memory_count < 1) fail("memory_count must be >= 1");
    if (!(init_std >= 0.0)) fail("init_std must be >= 0");
}

double NetParams::learning_rate(int epoch) const { return lr_init * std::pow(lr_decay, epoch); }

double NetParams::temperature(int epoch) const {
    if (T_init == T_final) return T_init;
    return T_init + (T_final - T_init) * static_cast<double>(epoch) / max_epochs;
}

std::string to_string(StepScaling s) {
    switch (s) {
        case StepScaling::none: return "none";
        case StepScaling::row_max: return "row_max";
        case StepScaling::global_max: return "global_max";
    }
    return "?";
}

StepScaling parse_step_scaling(const std::string& s) {
    if (s == "none") return StepScaling::none;
    if (s == "row_max") return StepScaling::row_max;
    if (s == "global_max") return StepScaling::global_max;
    throw ConfigError("unknown step scaling '" + s + "'");
}

NetParams NetParams::paper() { return NetParams{}; }

NetParams NetParams::paper_appendix() {
    NetParams p;
    p.lr_init = 1e-1;
    p.T_init = p.T_final = 0.875;
    return p;
}

NetParams NetParams::desk() {
    NetParams p;
    p.memory_count = 128;
    p.max_epochs = 100;
    p.T_init = p.T_final = 0.6;
    return p;
}

// ------------------------------------------------------------------ bank ----

void MemoryBank::clamp() {
    const std::size_t end = layout.clamp_end();
    for (std::size_t k = 0; k < count(); ++k) {
        auto row = memories.row(k);
        for (std::size_t j = 0; j < end; ++j) row[j] = std::clamp(row[j], -1.0, 1.0);
    }
}

bool MemoryBank::clamp_invariant_holds() const {
    const std::size_t end = layout.clamp_end();
    for (std::size_t k = 0; k < count(); ++k) {
        auto row = memories.row(k);
        for (std::size_t j = 0; j < end; ++j)
            if (!(std::abs(row[j]) <= 1.0)) return false;
    }
    return true;
}

MemoryBank MemoryBank::random_normal(Layout l, std::size_t count, double std_dev, Rng& rng) {
    MemoryBank bank(l, count);
    std::normal_distribution<double> normal(0.0, std_dev);
    for (double& v : bank.memories.data) v = normal(rng);
    return bank;
}

// ---------------------------------------------------------------- fields ----

namespace {

void check_width(const Pattern& xi, const MemoryBank& bank) {
    if (xi.size() != bank.width()) {
        std::ostringstream os;
        os << "state has " << xi.size() << " neurons but bank rows have " << bank.width();
        throw ShapeError(os.str());
    }
}

}  // namespace

std::vector<double> neuron_fields(const Pattern& xi, std::span<const std::size_t> neurons,
                                  const MemoryBank& bank, double beta, const Interaction& f) {
    check_width(xi, bank);
    for (std::size_t i : neurons)
        if (i >= xi.size()) throw ShapeError("neuron index out of range");
    std::vector<double> fields(neurons.size(), 0.0);
    for (std::size_t k = 0; k < bank.count(); ++k) {
        const auto zeta = bank.memories.row(k);
        const double d = dot(zeta, xi.values);
        for (std::size_t l = 0; l < neurons.size(); ++l) {
            const std::size_t i = neurons[l];
            double ap, am;
            detail::clamped_args(d, zeta[i], xi[i], beta, ap, am);
            fields[l] += f.value(ap) - f.value(am);
        }
    }
    return fields;
}

double neuron_field(const Pattern& xi, std::size_t i, const MemoryBank& bank, double beta,
                    const Interaction& f) {
    const std::size_t one[] = {i};
    return neuron_fields(xi, one, bank, beta, f)[0];
}

std::vector<double> classify(const Pattern& probe, const MemoryBank& bank, double beta,
                             const Interaction& f) {
    const auto outputs = bank.layout.class_neurons();
    return neuron_fields(probe, outputs, bank, beta, f);
}

std::vector<double> classify(const Pattern& probe, const MemoryBank& bank, const NetParams& params) {
    return classify(probe, bank, params.readout_beta(bank.width()), params.interaction());
}

int argmax_class(std::span<const double> logits) {
    int best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
        if (logits[c] > logits[best]) best = static_cast<int>(c);
    return best;
}

RelaxResult relax(const Pattern& probe, const MemoryBank& bank, double beta, const Interaction& f,
                  std::span<const std::size_t> update_mask, int max_sweeps) {
    if (update_mask.empty()) throw ShapeError("relax: update mask is empty");
    if (max_sweeps < 1) throw ShapeError("relax: max_sweeps must be >= 1");
    RelaxResult out{probe, false, 0};
    while (out.sweeps < max_sweeps) {
        ++out.sweeps;
        const auto fields = neuron_fields(out.state, update_mask, bank, beta, f);
        bool changed = false;
        for (std::size_t l = 0; l < update_mask.size(); ++l) {
            const double s = fields[l] >= 0.0 ? 1.0 : -1.0;
            double& v = out.state.values[update_mask[l]];
            if (v != s) {
                v = s;
                changed = true;
            }
        }
        if (!changed) {
            out.converged = true;
            break;
        }
    }
    return out;
}

RelaxResult relax(const Pattern& probe, const MemoryBank& bank, const NetParams& params,
                  std::span<const std::size_t> update_mask, int max_sweeps) {
    return relax(probe, bank, params.readout_beta(bank.width()), params.interaction(), update_mask,
                 max_sweeps);
}

// ------------------------------------------------------------ loss/grad ----

LossGrad batch_loss_and_grad(std::span<const Item* const> batch, const MemoryBank& bank,
                             const NetParams& params, double beta,
                             std::span<const std::size_t> loss_neurons) {
    if (batch.empty()) throw ShapeError("batch_loss_and_grad: empty batch");
    const std::size_t B = batch.size(), K = bank.count(), N = bank.width(), L = loss_neurons.size();
    for (std::size_t b = 0; b < B; ++b) {
        check_width(batch[b]->pattern, bank);
        if (batch[b]->target.size() != L) throw ShapeError("target length differs from loss set");
    }
    for (std::size_t i : loss_neurons)
        if (i >= N) throw ShapeError("loss neuron index out of range");

    const Interaction f = params.interaction();
    const int two_m = 2 * params.error_exp_m;

    // Phase 1, one item per iteration: fields, error, and the per-(memory,
    // neuron) derivatives of the interaction at the clamped arguments.
    std::vector<double> coef(B * L), dplus(B * K * L), dminus(B * K * L), item_loss(B);
    std::vector<char> finite(B, 1);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t sb = 0; sb < static_cast<std::ptrdiff_t>(B); ++sb) {
        const auto b = static_cast<std::size_t>(sb);
        const Pattern& xi = batch[b]->pattern;
        std::vector<double> fields(L, 0.0);
        double* dp = dplus.data() + b * K * L;
        double* dm = dminus.data() + b * K * L;
        for (std::size_t k = 0; k < K; ++k) {
            const auto zeta = bank.memories.row(k);
            const double d = dot(zeta, xi.values);
            for (std::size_t l = 0; l < L; ++l) {
                const std::size_t i = loss_neurons[l];
                double ap, am, fp, fm;
                detail::clamped_args(d, zeta[i], xi[i], beta, ap, am);
                f.both(ap, fp, dp[k * L + l]);
                f.both(am, fm, dm[k * L + l]);
                fields[l] += fp - fm;
            }
        }
        double loss = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            const double y = std::tanh(fields[l]);
            const double e = batch[b]->target[l] - y;
            loss += std::pow(e, two_m);
            coef[b * L + l] = -two_m * std::pow(e, two_m - 1) * (1.0 - y * y);
            if (!std::isfinite(fields[l])) finite[b] = 0;
        }
        item_loss[b] = loss;
    }

    LossGrad out;
    for (std::size_t b = 0; b < B; ++b) {
        if (!finite[b] || !std::isfinite(item_loss[b])) {
            std::ostringstream os;
            os << "non-finite field or loss at batch item " << b;
            throw NumericError(os.str());
        }
        out.loss += item_loss[b];
    }

    // Phase 2, one memory row per iteration. Items are summed in batch order,
    // so the gradient is identical for every thread count.
    out.grad = Matrix(K, N);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t sk = 0; sk < static_cast<std::ptrdiff_t>(K); ++sk) {
        const auto k = static_cast<std::size_t>(sk);
        double* row = out.grad.data.data() + k * N;
        for (std::size_t b = 0; b < B; ++b) {
            const double* xi = batch[b]->pattern.values.data();
            const double* c = coef.data() + b * L;
            const double* dp = dplus.data() + (b * K + k) * L;
            const double* dm = dminus.data() + (b * K + k) * L;
            double u = 0.0;
            for (std::size_t l = 0; l < L; ++l) u += c[l] * (dp[l] - dm[l]);
            u *= beta;
            for (std::size_t j = 0; j < N; ++j) row[j] += u * xi[j];
            // On its own neuron the clamped entry is +1 / -1 rather than xi_i.
            for (std::size_t l = 0; l < L; ++l) {
                const std::size_t i = loss_neurons[l];
                row[i] += beta * c[l] * (dp[l] * (1.0 - xi[i]) + dm[l] * (1.0 + xi[i]));
            }
        }
    }
    return out;
}

LossGrad batch_loss_and_grad(std::span<const Item> batch, const MemoryBank& bank,
                             const NetParams& params, double beta,
                             std::span<const std::size_t> loss_neurons) {
    std::vector<const Item*> refs(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) refs[b] = &batch[b];
    return batch_loss_and_grad(std::span<const Item* const>(refs), bank, params, beta, loss_neurons);
}

// ----------------------------------------------------------------- hooks ----

void TrainingHooks::on_task_start(const TaskView&, const MemoryBank&) {}

std::vector<const Item*> TrainingHooks::epoch_data(const TaskView& task, Rng& rng) {
    return shuffled_refs(task.train, rng);
}

double TrainingHooks::augment_loss(const MemoryBank&, Matrix&) { return 0.0; }

void TrainingHooks::transform_gradient(Matrix&, const MemoryBank&, const NetParams&, double) {}

void TrainingHooks::after_step(const Matrix&, const Matrix&) {}

void TrainingHooks::on_task_end(const TaskView&, const MemoryBank&, const NetParams&) {}

std::vector<const Item*> shuffled_refs(std::span<const Item> items, Rng& rng) {
    std::vector<const Item*> refs(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) refs[i] = &items[i];
    std::shuffle(refs.begin(), refs.end(), rng);
    return refs;
}

// ---------------------------------------------------------------- train ----

namespace {

// A zero row (or gradient) is left as is.
void scale_step(Matrix& g, StepScaling mode) {
    auto normalize = [](std::span<double> v) {
        double mx = 0.0;
        for (double x : v) mx = std::max(mx, std::abs(x));
        if (mx > 0.0)
            for (double& x : v) x /= mx;
    };
    switch (mode) {
        case StepScaling::none: return;
        case StepScaling::global_max: normalize(g.data); return;
        case StepScaling::row_max:
            for (std::size_t k = 0; k < g.rows; ++k) normalize(g.row(k));
            return;
    }
}

}  // namespace

TrainLog train_task(const TaskView& task, MemoryBank& bank, const NetParams& params,
                    TrainingHooks& hooks, Rng& rng, const EpochCallback& on_epoch) {
    params.validate();
    if (task.train.empty()) throw ShapeError("train_task: task has no training items");
    const auto loss_set = bank.layout.class_neurons();
    const std::size_t K = bank.count(), N = bank.width(), clamp_end = bank.layout.clamp_end();
    const bool trace = hooks.wants_step_trace();

    Matrix momentum(K, N);
    Matrix before, base, delta;
    TrainLog log;
    log.epochs.reserve(static_cast<std::size_t>(params.max_epochs));

    for (int epoch = 1; epoch <= params.max_epochs; ++epoch) {
        const double lr = params.learning_rate(epoch);
        const double temp = params.temperature(epoch);
        const double beta = params.beta(epoch, N);
        const auto order = hooks.epoch_data(task, rng);
        const auto bs = static_cast<std::size_t>(params.batch_size);
        double error = 0.0;

        for (std::size_t start = 0, batch_no = 0; start < order.size(); start += bs, ++batch_no) {
            const std::span<const Item* const> batch(order.data() + start,
                                                      std::min(bs, order.size() - start));
            LossGrad lg = batch_loss_and_grad(batch, bank, params, beta, loss_set);
            error += lg.loss;
            if (trace) {
                base = lg.grad;
                before = bank.memories;
            }
            hooks.augment_loss(bank, lg.grad);
            hooks.transform_gradient(lg.grad, bank, params, beta);

            scale_step(lg.grad, params.step_scaling);
            bool ok = true;
            for (std::size_t k = 0; k < K; ++k) {
                double* m = momentum.data.data() + k * N;
                const double* g = lg.grad.data.data() + k * N;
                double* z = bank.memories.data.data() + k * N;
                for (std::size_t j = 0; j < N; ++j) {
                    m[j] = params.momentum_p * m[j] + g[j];
                    double v = z[j] - lr * m[j];
                    if (j < clamp_end) v = std::clamp(v, -1.0, 1.0);
                    ok &= std::isfinite(v);
                    z[j] = v;
                }
            }
            if (!ok) {
                std::ostringstream os;
                os << "non-finite memory weights at task " << task.task_id << ", epoch " << epoch
                   << ", batch " << batch_no;
                throw NumericError(os.str());
            }
            if (trace) {
                delta = bank.memories;
                for (std::size_t x = 0; x < delta.size(); ++x) delta.data[x] -= before.data[x];
                hooks.after_step(base, delta);
            }
        }
        log.epochs.push_back({epoch, lr, temp, error});
        if (on_epoch) on_epoch(log.epochs.back(), bank);
    }
    log.converged = true;
    return log;
}

}  // namespace dam
