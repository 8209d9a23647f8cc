#include "dam/continual.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "dam/errors.hpp"

namespace dam {

// ------------------------------------------------------------ rehearsal ----

std::vector<Item> build_rehearsal_buffer(std::span<const Item> train, double proportion, Rng& rng) {
    if (!(proportion >= 0.0 && proportion <= 1.0))
        throw ConfigError("rehearsal proportion must lie in [0, 1]");
    const auto count = static_cast<std::size_t>(std::floor(proportion * static_cast<double>(train.size())));
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<Item> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        std::uniform_int_distribution<std::size_t> pick(s, idx.size() - 1);
        std::swap(idx[s], idx[pick(rng)]);
        out.push_back(train[idx[s]]);
    }
    return out;
}

std::vector<const Item*> merge_for_epoch(std::span<const Item> task_items,
                                         const std::vector<std::vector<Item>>& buffers, Rng& rng) {
    std::size_t total = task_items.size();
    for (const auto& b : buffers) total += b.size();
    std::vector<const Item*> refs;
    refs.reserve(total);
    for (const Item& it : task_items) refs.push_back(&it);
    for (const auto& b : buffers)
        for (const Item& it : b) refs.push_back(&it);
    std::shuffle(refs.begin(), refs.end(), rng);
    return refs;
}

std::vector<Pseudoitem> generate_pseudoitems(const MemoryBank& bank, const NetParams& params,
                                             std::size_t count, std::size_t completing_task_id,
                                             Rng& rng, int max_sweeps) {
    const Layout& lay = bank.layout;
    if (completing_task_id >= lay.task_count) throw ShapeError("pseudoitems: task id out of range");
    const auto pixels = lay.pixel_neurons();
    const double beta = params.readout_beta(bank.width());
    const Interaction f = params.interaction();
    std::bernoulli_distribution coin(0.5);

    std::vector<Pseudoitem> out;
    out.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        Pattern probe{lay, std::vector<double>(lay.size(), 0.0)};
        for (std::size_t p = 0; p < lay.pixel_count; ++p) probe.values[p] = coin(rng) ? 1.0 : -1.0;
        for (std::size_t t = 0; t < lay.task_count; ++t)
            probe.values[lay.task_begin() + t] = t == completing_task_id ? 1.0 : -1.0;

        RelaxResult r = relax(probe, bank, beta, f, pixels, max_sweeps);
        const int label = argmax_class(classify(r.state, bank, beta, f));
        std::vector<double> target(lay.class_count, -1.0);
        target[static_cast<std::size_t>(label)] = 1.0;
        out.push_back({Item{std::move(r.state), std::move(target), label}, r.converged});
    }
    return out;
}

// ------------------------------------------------------------------ GEM ----

std::vector<std::vector<double>> gem_reference_gradients(const std::vector<std::vector<Item>>& buffers,
                                                         GemMode mode, const MemoryBank& bank,
                                                         const NetParams& params, double beta) {
    const auto loss_set = bank.layout.class_neurons();
    std::vector<std::vector<double>> G;
    if (mode == GemMode::per_task) {
        for (std::size_t v = 0; v < buffers.size(); ++v) {
            if (buffers[v].empty()) {
                std::cerr << "warning: GEM buffer " << v << " is empty; constraint skipped\n";
                continue;
            }
            G.push_back(batch_loss_and_grad(std::span<const Item>(buffers[v]), bank, params, beta,
                                            loss_set).grad.data);
        }
        return G;
    }
    std::vector<const Item*> all;
    for (const auto& b : buffers)
        for (const Item& it : b) all.push_back(&it);
    if (all.empty()) {
        std::cerr << "warning: A-GEM buffers are empty; constraint skipped\n";
        return G;
    }
    G.push_back(batch_loss_and_grad(std::span<const Item* const>(all), bank, params, beta, loss_set)
                    .grad.data);
    return G;
}

Projection gem_project(std::span<const double> g, const std::vector<std::vector<double>>& G,
                       double tol, int max_iter) {
    Projection out{{g.begin(), g.end()}, false, true};
    const std::size_t k = G.size();
    std::vector<double> c(k);
    bool violated = false;
    for (std::size_t v = 0; v < k; ++v) {
        if (G[v].size() != g.size()) throw ShapeError("gem_project: reference gradient length");
        c[v] = dot(G[v], g);
        violated |= c[v] < 0.0;
    }
    if (!violated) return out;

    Matrix Q(k, k);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a; b < k; ++b) Q(a, b) = Q(b, a) = dot(G[a], G[b]);
    const QpResult qp = nnqp_solve(Q, c, tol, max_iter);
    for (std::size_t v = 0; v < k; ++v) {
        if (qp.v[v] == 0.0) continue;
        for (std::size_t x = 0; x < g.size(); ++x) out.g[x] += qp.v[v] * G[v][x];
    }
    out.projected = true;
    out.converged = qp.converged;
    return out;
}

Projection agem_project(std::span<const double> g, std::span<const double> g_ref) {
    if (g.size() != g_ref.size()) throw ShapeError("agem_project: length mismatch");
    Projection out{{g.begin(), g.end()}, false, true};
    const double gr = dot(g, g_ref);
    if (gr >= 0.0) return out;
    const double rr = dot(g_ref, g_ref);
    if (!(rr > 0.0)) {
        std::cerr << "warning: A-GEM reference gradient is zero; gradient left unprojected\n";
        return out;
    }
    const double s = gr / rr;
    for (std::size_t x = 0; x < g.size(); ++x) out.g[x] -= s * g_ref[x];
    out.projected = true;
    return out;
}

// ------------------------------------------------------------- penalties ----

PenaltyValue quadratic_penalty(const MemoryBank& bank, const PenaltyState& state) {
    PenaltyValue out{0.0, Matrix(bank.count(), bank.width())};
    const double scale = state.coeff * state.lambda;
    for (const PenaltyTerm& t : state.terms) {
        if (!t.anchor.same_shape(bank.memories) || !t.importance.same_shape(bank.memories))
            throw ShapeError("quadratic_penalty: term is not shaped like the bank");
        for (std::size_t x = 0; x < out.grad.size(); ++x) {
            const double d = bank.memories.data[x] - t.anchor.data[x];
            out.penalty += scale * t.importance.data[x] * d * d;
            out.grad.data[x] += scale * 2.0 * t.importance.data[x] * d;
        }
    }
    return out;
}

Matrix ewc_fisher_importance(std::span<const Item> sample, const MemoryBank& bank,
                             const NetParams& params, double beta) {
    if (sample.empty()) throw ShapeError("ewc_fisher_importance: empty sample");
    const auto loss_set = bank.layout.class_neurons();
    Matrix omega(bank.count(), bank.width());
    for (const Item& it : sample) {
        const LossGrad lg = batch_loss_and_grad(std::span<const Item>(&it, 1), bank, params, beta, loss_set);
        for (std::size_t x = 0; x < omega.size(); ++x) omega.data[x] += lg.grad.data[x] * lg.grad.data[x];
    }
    const double inv = 1.0 / static_cast<double>(sample.size());
    for (double& v : omega.data) v *= inv;
    return omega;
}

Matrix mas_importance(std::span<const Item> sample, const MemoryBank& bank, const NetParams& params,
                      double beta, MasVariant variant) {
    if (sample.empty()) throw ShapeError("mas_importance: empty sample");
    const auto outputs = bank.layout.class_neurons();
    const Interaction f = params.interaction();
    Matrix omega(bank.count(), bank.width());
    Matrix combined(bank.count(), bank.width());

    for (const Item& it : sample) {
        if (variant == MasVariant::per_output) {
            output_gradients(it.pattern, bank, beta, f, outputs, [&](std::size_t, const Matrix& g) {
                for (std::size_t x = 0; x < omega.size(); ++x) omega.data[x] += std::abs(g.data[x]);
            });
        } else {
            const auto F = neuron_fields(it.pattern, outputs, bank, beta, f);
            std::fill(combined.data.begin(), combined.data.end(), 0.0);
            output_gradients(it.pattern, bank, beta, f, outputs, [&](std::size_t o, const Matrix& g) {
                for (std::size_t x = 0; x < combined.size(); ++x) combined.data[x] += F[o] * g.data[x];
            });
            for (std::size_t x = 0; x < omega.size(); ++x) omega.data[x] += std::abs(combined.data[x]);
        }
    }
    double denom = static_cast<double>(sample.size());
    if (variant == MasVariant::per_output) denom *= static_cast<double>(outputs.size());
    for (double& v : omega.data) v /= denom;
    return omega;
}

void si_step_accumulate(SiState& state, const Matrix& base_grad, const Matrix& delta) {
    if (!base_grad.same_shape(delta) || !state.running.same_shape(delta))
        throw ShapeError("si_step_accumulate: shape mismatch");
    const double sign = state.printed_sign ? 1.0 : -1.0;
    for (std::size_t x = 0; x < delta.size(); ++x)
        state.running.data[x] += sign * base_grad.data[x] * delta.data[x];
}

void si_task_consolidate(SiState& state, PenaltyState& penalty, const MemoryBank& bank_at_task_end) {
    const Matrix& theta = bank_at_task_end.memories;
    if (!state.start.same_shape(theta) || !state.running.same_shape(theta))
        throw ShapeError("si_task_consolidate: shape mismatch");
    if (!state.omega.same_shape(theta)) state.omega = Matrix(theta.rows, theta.cols);
    for (std::size_t x = 0; x < theta.size(); ++x) {
        const double d = theta.data[x] - state.start.data[x];
        state.omega.data[x] += std::max(0.0, state.running.data[x]) / (d * d + state.eps);
    }
    std::fill(state.running.data.begin(), state.running.data.end(), 0.0);
    penalty.terms.assign(1, PenaltyTerm{theta, state.omega});
}

// --------------------------------------------------------------- methods ----

std::string to_string(MasVariant v) {
    return v == MasVariant::per_output ? "per_output" : "squared_norm";
}

MasVariant parse_mas_variant(const std::string& s) {
    if (s == "per_output") return MasVariant::per_output;
    if (s == "squared_norm") return MasVariant::squared_norm;
    throw ConfigError("unknown MAS variant '" + s + "'");
}

const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names{"vanilla", "rehearsal", "pseudorehearsal", "gem",
                                                "agem",    "l2",        "ewc",             "mas",
                                                "si"};
    return names;
}

namespace {

class Vanilla : public ContinualMethod {
public:
    std::string name() const override { return "vanilla"; }
};

// Shared storage of real past-task items (rehearsal, GEM, A-GEM).
class Buffered : public ContinualMethod {
public:
    Buffered(double proportion, std::uint64_t seed) : proportion_(proportion), rng_(seed) {}

    std::size_t buffered_items() const override {
        std::size_t n = 0;
        for (const auto& b : buffers_) n += b.size();
        return n;
    }

    void on_task_end(const TaskView& task, const MemoryBank&, const NetParams&) override {
        buffers_.push_back(build_rehearsal_buffer(task.train, proportion_, rng_));
    }

protected:
    double proportion_;
    Rng rng_;
    std::vector<std::vector<Item>> buffers_;
};

class Rehearsal : public Buffered {
public:
    using Buffered::Buffered;
    std::string name() const override { return "rehearsal"; }
    std::vector<const Item*> epoch_data(const TaskView& task, Rng& rng) override {
        return merge_for_epoch(task.train, buffers_, rng);
    }
};

class Pseudorehearsal : public ContinualMethod {
public:
    Pseudorehearsal(double proportion, int max_sweeps, std::uint64_t seed)
        : proportion_(proportion), max_sweeps_(max_sweeps), rng_(seed) {}

    std::string name() const override { return "pseudorehearsal"; }

    std::size_t buffered_items() const override {
        std::size_t n = 0;
        for (const auto& b : buffers_) n += b.size();
        return n;
    }

    std::vector<const Item*> epoch_data(const TaskView& task, Rng& rng) override {
        return merge_for_epoch(task.train, buffers_, rng);
    }

    void on_task_end(const TaskView& task, const MemoryBank& bank, const NetParams& params) override {
        if (!(proportion_ >= 0.0 && proportion_ <= 1.0))
            throw ConfigError("pseudorehearsal proportion must lie in [0, 1]");
        const auto count =
            static_cast<std::size_t>(std::floor(proportion_ * static_cast<double>(task.train.size())));
        auto pseudo = generate_pseudoitems(bank, params, count, task.task_id, rng_, max_sweeps_);
        std::vector<Item> items;
        items.reserve(pseudo.size());
        for (auto& p : pseudo) {
            if (!p.converged) ++unconverged_;
            items.push_back(std::move(p.item));
        }
        buffers_.push_back(std::move(items));
    }

    std::size_t unconverged() const { return unconverged_; }

private:
    double proportion_;
    int max_sweeps_;
    Rng rng_;
    std::vector<std::vector<Item>> buffers_;
    std::size_t unconverged_ = 0;
};

class Gem : public Buffered {
public:
    Gem(double proportion, GemMode mode, int stride, std::uint64_t seed)
        : Buffered(proportion, seed), mode_(mode), stride_(std::max(1, stride)) {}

    std::string name() const override { return mode_ == GemMode::per_task ? "gem" : "agem"; }

    void on_task_start(const TaskView&, const MemoryBank&) override {
        step_ = 0;
        G_.clear();
    }

    void transform_gradient(Matrix& grad, const MemoryBank& bank, const NetParams& params,
                            double beta) override {
        if (buffered_items() == 0) return;
        if (step_++ % stride_ == 0) G_ = gem_reference_gradients(buffers_, mode_, bank, params, beta);
        if (G_.empty()) return;
        Projection p = mode_ == GemMode::per_task ? gem_project(grad.data, G_)
                                                  : agem_project(grad.data, G_.front());
        if (p.projected) grad.data = std::move(p.g);
    }

private:
    GemMode mode_;
    int stride_;
    long step_ = 0;
    std::vector<std::vector<double>> G_;
};

// Quadratic-penalty methods differ only in how a finished task updates the
// penalty terms.
class Penalized : public ContinualMethod {
public:
    Penalized(double lambda, double coeff) {
        if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
        state_.lambda = lambda;
        state_.coeff = coeff;
    }

    const PenaltyState* penalty() const override { return &state_; }

    double augment_loss(const MemoryBank& bank, Matrix& grad) override {
        if (state_.lambda == 0.0 || state_.terms.empty()) return 0.0;
        const PenaltyValue pv = quadratic_penalty(bank, state_);
        for (std::size_t x = 0; x < grad.size(); ++x) grad.data[x] += pv.grad.data[x];
        return pv.penalty;
    }

protected:
    PenaltyState state_;
};

class L2 : public Penalized {
public:
    explicit L2(double lambda) : Penalized(lambda, 1.0) {}
    std::string name() const override { return "l2"; }
    void on_task_end(const TaskView&, const MemoryBank& bank, const NetParams&) override {
        Matrix ones(bank.count(), bank.width());
        std::fill(ones.data.begin(), ones.data.end(), 1.0);
        state_.terms.push_back({bank.memories, std::move(ones)});
    }
};

class Ewc : public Penalized {
public:
    Ewc(double lambda, std::size_t cap, std::uint64_t seed) : Penalized(lambda, 0.5), cap_(cap), rng_(seed) {}
    std::string name() const override { return "ewc"; }
    void on_task_end(const TaskView& task, const MemoryBank& bank, const NetParams& params) override {
        std::vector<Item> sample;
        std::span<const Item> use = task.train;
        if (cap_ > 0 && cap_ < task.train.size()) {
            sample = build_rehearsal_buffer(task.train,
                                            static_cast<double>(cap_) / static_cast<double>(task.train.size()),
                                            rng_);
            use = sample;
        }
        state_.terms.push_back(
            {bank.memories, ewc_fisher_importance(use, bank, params, params.readout_beta(bank.width()))});
    }

private:
    std::size_t cap_;
    Rng rng_;
};

class Mas : public Penalized {
public:
    Mas(double lambda, MasVariant variant) : Penalized(lambda, 1.0), variant_(variant) {}
    std::string name() const override { return "mas"; }
    void on_task_end(const TaskView& task, const MemoryBank& bank, const NetParams& params) override {
        Matrix w = mas_importance(task.train, bank, params, params.readout_beta(bank.width()), variant_);
        if (state_.terms.empty()) {
            state_.terms.push_back({bank.memories, std::move(w)});
            return;
        }
        PenaltyTerm& t = state_.terms.front();
        for (std::size_t x = 0; x < w.size(); ++x) t.importance.data[x] += w.data[x];
        t.anchor = bank.memories;
    }

private:
    MasVariant variant_;
};

class Si : public Penalized {
public:
    Si(double lambda, double eps, bool printed_sign) : Penalized(lambda, 1.0) {
        if (!(eps > 0.0)) throw ConfigError("eps_si must be > 0");
        si_.eps = eps;
        si_.printed_sign = printed_sign;
    }
    std::string name() const override { return "si"; }
    bool wants_step_trace() const override { return true; }

    void on_task_start(const TaskView&, const MemoryBank& bank) override {
        si_.start = bank.memories;
        if (!si_.running.same_shape(bank.memories)) si_.running = Matrix(bank.count(), bank.width());
    }
    void after_step(const Matrix& base_grad, const Matrix& delta) override {
        si_step_accumulate(si_, base_grad, delta);
    }
    void on_task_end(const TaskView&, const MemoryBank& bank, const NetParams&) override {
        si_task_consolidate(si_, state_, bank);
    }

    const SiState& si() const { return si_; }

private:
    SiState si_;
};

}  // namespace

std::unique_ptr<ContinualMethod> make_method(const MethodSpec& spec, std::uint64_t seed) {
    if (!(spec.proportion >= 0.0 && spec.proportion <= 1.0))
        throw ConfigError("method proportion must lie in [0, 1]");
    if (spec.name == "vanilla") return std::make_unique<Vanilla>();
    if (spec.name == "rehearsal") return std::make_unique<Rehearsal>(spec.proportion, seed);
    if (spec.name == "pseudorehearsal")
        return std::make_unique<Pseudorehearsal>(spec.proportion, spec.pseudo_max_sweeps, seed);
    if (spec.name == "gem")
        return std::make_unique<Gem>(spec.proportion, GemMode::per_task, spec.grad_stride, seed);
    if (spec.name == "agem")
        return std::make_unique<Gem>(spec.proportion, GemMode::averaged, spec.grad_stride, seed);
    if (spec.name == "l2") return std::make_unique<L2>(spec.lambda);
    if (spec.name == "ewc") return std::make_unique<Ewc>(spec.lambda, spec.fisher_cap, seed);
    if (spec.name == "mas") return std::make_unique<Mas>(spec.lambda, spec.mas_variant);
    if (spec.name == "si") return std::make_unique<Si>(spec.lambda, spec.eps_si, spec.si_printed_sign);
    throw ConfigError("unknown method '" + spec.name + "'");
}

}  // namespace dam
