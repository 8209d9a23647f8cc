#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "dam/continual.hpp"
#include "dam/errors.hpp"
#include "oracles.hpp"

using namespace dam;

namespace {

// Random bipolar items over `l` with the given task bit.
std::vector<Item> random_items(const Layout& l, std::size_t count, std::size_t task, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    std::vector<Item> out;
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> v(l.size(), 0.0);
        for (std::size_t p = 0; p < l.pixel_count; ++p) v[p] = coin(rng) ? 1.0 : -1.0;
        for (std::size_t t = 0; t < l.task_count; ++t) v[l.task_begin() + t] = t == task ? 1.0 : -1.0;
        const int label = static_cast<int>(i % l.class_count);
        std::vector<double> target(l.class_count, -1.0);
        target[static_cast<std::size_t>(label)] = 1.0;
        out.push_back({Pattern(l, v), target, label});
    }
    return out;
}

MemoryBank random_bank(const Layout& l, std::size_t K, std::mt19937_64& rng, double spread = 1.0) {
    std::uniform_real_distribution<double> u(-spread, spread);
    MemoryBank b(l, K);
    for (double& v : b.memories.data) v = u(rng);
    return b;
}

std::vector<double> rand_vec(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = nd(rng);
    return v;
}

double norm(const std::vector<double>& v) { return std::sqrt(oracle::dotv(v, v)); }

}  // namespace

// ---------------------------------------------------------------- rehearsal

TEST_CASE("rehearsal buffer sizes") {
    std::mt19937_64 g(1);
    const Layout l{6, 1, 10};
    const auto train = random_items(l, 1600, 0, g);
    Rng rng(3);
    CHECK(build_rehearsal_buffer(train, 0.0, rng).empty());
    CHECK(build_rehearsal_buffer(train, 1.0, rng).size() == 1600);
    const auto b = build_rehearsal_buffer(train, 0.05, rng);
    CHECK(b.size() == 80);
    for (const Item& it : b) CHECK(std::find(train.begin(), train.end(), it) != train.end());
    CHECK_THROWS_AS(build_rehearsal_buffer(train, 1.5, rng), ConfigError);
}

TEST_CASE("merge_for_epoch") {
    std::mt19937_64 g(2);
    const Layout l{6, 2, 10};
    const auto task = random_items(l, 1600, 1, g);
    std::vector<std::vector<Item>> buffers{random_items(l, 80, 0, g)};
    Rng rng(4);
    const auto merged = merge_for_epoch(task, buffers, rng);
    CHECK(merged.size() == 1680);
    std::map<const Item*, int> seen;
    for (const Item* p : merged) seen[p]++;
    CHECK(seen.size() == 1680);
    for (const Item& it : task) CHECK(seen[&it] == 1);
    for (const Item& it : buffers[0]) CHECK(seen[&it] == 1);

    // Without buffers the order is exactly the vanilla shuffle.
    Rng a(9), b(9);
    CHECK(merge_for_epoch(task, {}, a) == shuffled_refs(task, b));
}

TEST_CASE("buffered methods store floor(p * |train|) items per finished task") {
    std::mt19937_64 g(5);
    const Layout l{6, 3, 10};
    std::vector<std::vector<Item>> tasks{random_items(l, 101, 0, g), random_items(l, 57, 1, g)};
    NetParams p;
    MemoryBank bank = random_bank(l, 4, g, 0.1);
    for (const std::string name : {"rehearsal", "gem", "agem", "pseudorehearsal"}) {
        MethodSpec s;
        s.name = name;
        s.proportion = 0.3;
        auto m = make_method(s, 11);
        std::size_t expect = 0;
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            m->on_task_end(TaskView{t, tasks[t]}, bank, p);
            expect += static_cast<std::size_t>(std::floor(0.3 * static_cast<double>(tasks[t].size())));
            CHECK(m->buffered_items() == expect);
        }
    }
}

// ---------------------------------------------------------- pseudoitems

TEST_CASE("pseudoitems are relaxed, labelled fixed points") {
    std::mt19937_64 g(6);
    const Layout l{12, 2, 10};
    MemoryBank bank = random_bank(l, 6, g);
    NetParams p;
    p.n = 3;
    Rng rng(8);
    CHECK(generate_pseudoitems(bank, p, 0, 1, rng).empty());
    const auto items = generate_pseudoitems(bank, p, 25, 1, rng);
    CHECK(items.size() == 25);
    const double beta = p.readout_beta(bank.width());
    const auto pixels = l.pixel_neurons();
    for (const auto& ps : items) {
        const Pattern& x = ps.item.pattern;
        CHECK(x.valid());
        CHECK(x[l.task_begin() + 1] == 1.0);
        CHECK(x[l.task_begin()] == -1.0);
        for (std::size_t c = 0; c < 10; ++c) CHECK(x[l.class_begin() + c] == 0.0);
        CHECK(ps.item.label == argmax_class(classify(x, bank, beta, p.interaction())));
        CHECK(ps.item.target[static_cast<std::size_t>(ps.item.label)] == 1.0);
        if (ps.converged) CHECK(relax(x, bank, beta, p.interaction(), pixels, 5).state == x);
    }
    CHECK_THROWS_AS(generate_pseudoitems(bank, p, 3, 2, rng), ShapeError);
}

// ------------------------------------------------------------------ GEM

TEST_CASE("GEM reference gradients") {
    std::mt19937_64 g(7);
    const Layout l{5, 2, 3};
    MemoryBank bank = random_bank(l, 3, g);
    NetParams p;
    p.n = 3;
    const double beta = 0.2;
    const auto loss = l.class_neurons();
    const auto a = random_items(l, 4, 0, g), b = random_items(l, 3, 1, g);

    const auto G1 = gem_reference_gradients({a}, GemMode::per_task, bank, p, beta);
    REQUIRE(G1.size() == 1);
    const auto ga = batch_loss_and_grad(std::span<const Item>(a), bank, p, beta, loss).grad.data;
    CHECK(G1[0] == ga);
    const auto self = gem_project(ga, G1);
    CHECK_FALSE(self.projected);
    CHECK(self.g == ga);

    CHECK(gem_reference_gradients({a, b}, GemMode::per_task, bank, p, beta).size() == 2);
    CHECK(gem_reference_gradients({a, {}, b}, GemMode::per_task, bank, p, beta).size() == 2);

    std::vector<Item> both = a;
    both.insert(both.end(), b.begin(), b.end());
    const auto avg = gem_reference_gradients({a, b}, GemMode::averaged, bank, p, beta);
    REQUIRE(avg.size() == 1);
    const auto joint = batch_loss_and_grad(std::span<const Item>(both), bank, p, beta, loss).grad.data;
    for (std::size_t x = 0; x < joint.size(); ++x) CHECK(avg[0][x] == doctest::Approx(joint[x]).epsilon(1e-12));
}

TEST_CASE("nnqp: closed forms") {
    Matrix Q(1, 1);
    Q(0, 0) = 2.0;
    CHECK(nnqp_solve(Q, std::vector<double>{-3.0}).v[0] == doctest::Approx(1.5));
    CHECK(nnqp_solve(Q, std::vector<double>{3.0}).v[0] == 0.0);

    Matrix Q3(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) Q3(i, j) = i == j ? 2.0 : 0.5;
    const auto r = nnqp_solve(Q3, std::vector<double>{0.1, 0.0, 2.0});
    CHECK(r.converged);
    for (double v : r.v) CHECK(v == 0.0);
    CHECK_THROWS_AS(nnqp_solve(Q3, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("nnqp: matches an exhaustive grid over [0, 10]^k") {
    std::mt19937_64 g(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0), cu(-3.0, 1.0);
    auto objective = [](const Matrix& Q, const std::vector<double>& c, const double* v, std::size_t k) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            s += c[i] * v[i];
            for (std::size_t j = 0; j < k; ++j) s += 0.5 * v[i] * Q(i, j) * v[j];
        }
        return s;
    };
    int done2 = 0, done3 = 0;
    while (done2 < 6 || done3 < 1) {
        const std::size_t k = done2 < 6 ? 2 : 3;
        // Q = G G' with a well-conditioned G so the minimiser sits inside the box.
        std::vector<std::vector<double>> G(k, std::vector<double>(k + 2));
        for (auto& row : G)
            for (double& x : row) x = u(g);
        Matrix Q(k, k);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) Q(i, j) = oracle::dotv(G[i], G[j]);
        std::vector<double> c(k);
        for (double& x : c) x = cu(g);
        const auto r = nnqp_solve(Q, c);
        REQUIRE(r.converged);
        if (*std::max_element(r.v.begin(), r.v.end()) > 9.5) continue;

        const double h = 1e-2;
        const int steps = 1000;
        double best = std::numeric_limits<double>::infinity();
        double v[3] = {0, 0, 0};
        if (k == 2) {
            for (int a = 0; a <= steps; ++a)
                for (int b = 0; b <= steps; ++b) {
                    v[0] = a * h;
                    v[1] = b * h;
                    best = std::min(best, objective(Q, c, v, 2));
                }
            ++done2;
        } else {
            // Precompute the separable parts so the 10^9-point scan stays cheap.
            for (int a = 0; a <= steps; ++a) {
                const double x = a * h;
                for (int b = 0; b <= steps; ++b) {
                    const double y = b * h;
                    const double base = c[0] * x + c[1] * y + 0.5 * (Q(0, 0) * x * x + Q(1, 1) * y * y) + Q(0, 1) * x * y;
                    const double lin = c[2] + Q(0, 2) * x + Q(1, 2) * y;
                    for (int t = 0; t <= steps; ++t) {
                        const double z = t * h;
                        best = std::min(best, base + lin * z + 0.5 * Q(2, 2) * z * z);
                    }
                }
            }
            ++done3;
        }
        const double got = objective(Q, c, r.v.data(), k);
        CHECK(got <= best + 1e-9);
        CHECK(got >= best - 1e-3);
    }
}

TEST_CASE("GEM projection: hand case, no-op and feasibility") {
    const std::vector<double> g{1.0, -1.0};
    const auto p = gem_project(g, {{0.0, 1.0}});
    CHECK(p.projected);
    CHECK(p.g[0] == doctest::Approx(1.0));
    CHECK(p.g[1] == doctest::Approx(0.0).epsilon(1e-12));

    const std::vector<double> ok{0.3, 0.7};
    const auto q = gem_project(ok, {{1.0, 0.0}, {0.0, 2.0}});
    CHECK_FALSE(q.projected);
    CHECK(q.g == ok);
}

TEST_CASE("GEM projection agrees with the exhaustive primal projection") {
    std::mt19937_64 rng(9);
    int projected = 0;
    for (int t = 0; t < 40; ++t) {
        const std::size_t k = 1 + rng() % 3, dim = k + 1 + rng() % (6 - k);
        std::vector<std::vector<double>> G;
        for (std::size_t v = 0; v < k; ++v) G.push_back(rand_vec(dim, rng));
        const auto g = rand_vec(dim, rng);
        const auto got = gem_project(g, G);
        const auto want = oracle::brute_force_projection(g, G);
        REQUIRE_FALSE(want.empty());
        double dist = 0.0, gn = norm(got.g), gmax = 0.0;
        for (std::size_t x = 0; x < dim; ++x) dist += (got.g[x] - want[x]) * (got.g[x] - want[x]);
        CHECK(std::sqrt(dist) <= 1e-3);
        for (const auto& row : G) gmax = std::max(gmax, norm(row));
        for (const auto& row : G) CHECK(oracle::dotv(got.g, row) >= -1e-6 * gn * gmax);
        projected += got.projected;
    }
    CHECK(projected > 5);
}

TEST_CASE("A-GEM projection") {
    const auto same = agem_project(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0});
    CHECK_FALSE(same.projected);
    CHECK(same.g == std::vector<double>{1.0, 0.0});

    const auto p = agem_project(std::vector<double>{1.0, -1.0}, std::vector<double>{0.0, 1.0});
    CHECK(p.projected);
    CHECK(p.g == std::vector<double>{1.0, 0.0});

    std::mt19937_64 rng(10);
    for (int t = 0; t < 200; ++t) {
        const std::size_t dim = 2 + rng() % 20;
        const auto g = rand_vec(dim, rng), r = rand_vec(dim, rng);
        const auto a = agem_project(g, r);
        if (!a.projected) {
            CHECK(oracle::dotv(g, r) >= 0.0);
            CHECK(a.g == g);
            continue;
        }
        const double cosine = oracle::dotv(a.g, r) / (norm(a.g) * norm(r));
        CHECK(cosine >= -1e-12);
        CHECK(cosine <= 1e-6);
        // A single constraint: GEM and A-GEM solve the same problem.
        const auto gem = gem_project(g, {r});
        for (std::size_t x = 0; x < dim; ++x) CHECK(gem.g[x] == doctest::Approx(a.g[x]).epsilon(1e-6));
    }
    CHECK_THROWS_AS(agem_project(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), ShapeError);
}

// ------------------------------------------------------------ penalties

TEST_CASE("quadratic penalty: hand values and finite differences") {
    const Layout l{1, 0, 0};
    MemoryBank bank(l, 1);
    PenaltyState s;
    Matrix anchor(1, 1, 1.0), omega(1, 1, 2.0);
    s.terms.push_back({anchor, omega});
    s.lambda = 1.0;
    const auto v = quadratic_penalty(bank, s);  // theta = 0, theta* = 1
    CHECK(v.penalty == 2.0);
    CHECK(v.grad(0, 0) == -4.0);

    s.lambda = 0.0;
    CHECK(quadratic_penalty(bank, s).penalty == 0.0);
    s.lambda = 1.0;
    bank.memories(0, 0) = 1.0;
    CHECK(quadratic_penalty(bank, s).penalty == 0.0);
    CHECK(quadratic_penalty(bank, s).grad(0, 0) == 0.0);

    std::mt19937_64 g(11);
    const Layout big{4, 1, 2};
    MemoryBank b = random_bank(big, 3, g);
    PenaltyState st;
    st.lambda = 0.7;
    st.coeff = 0.5;
    for (int t = 0; t < 2; ++t) {
        MemoryBank a = random_bank(big, 3, g), w = random_bank(big, 3, g);
        for (double& x : w.memories.data) x = std::abs(x);
        st.terms.push_back({a.memories, w.memories});
    }
    const auto pv = quadratic_penalty(b, st);
    for (std::size_t x = 0; x < b.memories.size(); ++x) {
        MemoryBank up = b, dn = b;
        const double h = 1e-5;
        up.memories.data[x] += h;
        dn.memories.data[x] -= h;
        const double fd = (quadratic_penalty(up, st).penalty - quadratic_penalty(dn, st).penalty) / (2 * h);
        CHECK(pv.grad.data[x] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("EWC Fisher importance") {
    std::mt19937_64 g(12);
    const Layout l{5, 1, 3};
    const auto items = random_items(l, 4, 0, g);
    NetParams p;
    p.n = 3;
    const double beta = 0.25;
    const auto loss = l.class_neurons();
    MemoryBank bank = random_bank(l, 3, g);
    const Matrix w = ewc_fisher_importance(items, bank, p, beta);
    for (double v : w.data) CHECK(v >= 0.0);

    // Mean of squared finite-difference per-item gradients.
    Matrix expect(bank.count(), bank.width());
    for (const Item& it : items) {
        const auto fd = oracle::fd_gradient(std::span<const Item>(&it, 1), bank, p, beta, loss);
        for (std::size_t x = 0; x < expect.size(); ++x) expect.data[x] += fd.data[x] * fd.data[x] / 4.0;
    }
    CHECK(oracle::max_relative_error(w, expect) < 1e-3);

    // On a zero bank every pixel/task weight has zero loss gradient.
    NetParams q;
    q.n = 2;
    const Matrix z = ewc_fisher_importance(items, MemoryBank(l, 2), q, beta);
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t j = 0; j < l.clamp_end(); ++j) CHECK(z(k, j) == 0.0);
}

TEST_CASE("MAS importance") {
    std::mt19937_64 g(13);
    const Layout l{5, 1, 3};
    const auto items = random_items(l, 3, 0, g);
    NetParams p;
    p.n = 3;
    const double beta = 0.25;
    const Interaction f = p.interaction();
    const auto outs = l.class_neurons();
    MemoryBank bank = random_bank(l, 2, g);

    // Per-output derivatives against finite differences of the readout.
    output_gradients(items[0].pattern, bank, beta, f, outs, [&](std::size_t o, const Matrix& grad) {
        for (std::size_t x = 0; x < grad.size(); ++x) {
            MemoryBank up = bank, dn = bank;
            const double h = 1e-6;
            up.memories.data[x] += h;
            dn.memories.data[x] -= h;
            const double fd = (classify(items[0].pattern, up, beta, f)[o] - classify(items[0].pattern, dn, beta, f)[o]) / (2 * h);
            CHECK(grad.data[x] == doctest::Approx(fd).epsilon(1e-3).scale(1e-6));
        }
    });

    // The per-output definition, averaged by hand from finite differences.
    Matrix expect(bank.count(), bank.width());
    for (const Item& it : items)
        for (std::size_t o = 0; o < outs.size(); ++o)
            for (std::size_t x = 0; x < expect.size(); ++x) {
                MemoryBank up = bank, dn = bank;
                const double h = 1e-6;
                up.memories.data[x] += h;
                dn.memories.data[x] -= h;
                const double fd = (classify(it.pattern, up, beta, f)[o] - classify(it.pattern, dn, beta, f)[o]) / (2 * h);
                expect.data[x] += std::abs(fd) / (3.0 * 3.0);
            }
    CHECK(oracle::max_relative_error(mas_importance(items, bank, p, beta), expect) < 1e-3);

    // The squared-norm variant is |d(1/2 sum F^2)/d theta|.
    Matrix expect2(bank.count(), bank.width());
    auto half_sq = [&](const Item& it, const MemoryBank& b) {
        double s = 0.0;
        for (double v : classify(it.pattern, b, beta, f)) s += 0.5 * v * v;
        return s;
    };
    for (const Item& it : items)
        for (std::size_t x = 0; x < expect2.size(); ++x) {
            MemoryBank up = bank, dn = bank;
            const double h = 1e-6;
            up.memories.data[x] += h;
            dn.memories.data[x] -= h;
            expect2.data[x] += std::abs((half_sq(it, up) - half_sq(it, dn)) / (2 * h)) / 3.0;
        }
    CHECK(oracle::max_relative_error(mas_importance(items, bank, p, beta, MasVariant::squared_norm), expect2) < 1e-3);

    // A zero bank has zero outputs yet nonzero output gradients.
    const Matrix z = mas_importance(items, MemoryBank(l, 2), p, beta);
    double total = 0.0;
    for (double v : z.data) {
        CHECK(v >= 0.0);
        total += v;
    }
    CHECK(total > 0.0);
}

TEST_CASE("MAS accumulates importance across tasks") {
    std::mt19937_64 g(14);
    const Layout l{5, 1, 3};
    const auto items = random_items(l, 3, 0, g);
    MemoryBank bank = random_bank(l, 2, g);
    NetParams p;
    p.n = 3;
    MethodSpec s;
    s.name = "mas";
    s.lambda = 0.1;
    auto m = make_method(s, 1);
    m->on_task_end(TaskView{0, items}, bank, p);
    m->on_task_end(TaskView{0, items}, bank, p);
    const Matrix once = mas_importance(items, bank, p, p.readout_beta(bank.width()));
    REQUIRE(m->penalty()->terms.size() == 1);
    for (std::size_t x = 0; x < once.size(); ++x)
        CHECK(m->penalty()->terms[0].importance.data[x] == 2.0 * once.data[x]);
}

TEST_CASE("L2 and EWC keep one term per finished task") {
    std::mt19937_64 g(15);
    const Layout l{5, 2, 3};
    const auto items = random_items(l, 3, 0, g);
    MemoryBank bank = random_bank(l, 2, g);
    NetParams p;
    for (const std::string name : {"l2", "ewc"}) {
        MethodSpec s;
        s.name = name;
        s.lambda = 1.0;
        auto m = make_method(s, 1);
        m->on_task_end(TaskView{0, items}, bank, p);
        m->on_task_end(TaskView{1, items}, bank, p);
        CHECK(m->penalty()->terms.size() == 2);
        CHECK(m->penalty()->coeff == (name == "ewc" ? 0.5 : 1.0));
        for (const auto& t : m->penalty()->terms)
            for (double v : t.importance.data) CHECK(v >= 0.0);
    }
}

// ------------------------------------------------------------------ SI

TEST_CASE("SI step accumulation") {
    SiState s;
    s.running = Matrix(1, 3);
    const Matrix grad(1, 3, 2.0);
    si_step_accumulate(s, grad, Matrix(1, 3));
    for (double v : s.running.data) CHECK(v == 0.0);

    Matrix step(1, 3);
    for (std::size_t x = 0; x < 3; ++x) step.data[x] = -0.1 * grad.data[x];
    si_step_accumulate(s, grad, step);
    for (double v : s.running.data) CHECK(v == doctest::Approx(0.1 * 4.0));

    s.printed_sign = true;
    si_step_accumulate(s, grad, step);
    for (double v : s.running.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
}

namespace {

// Records the base gradients and realised steps of a training run while
// feeding them into its own SI accumulator.
struct Recorder : TrainingHooks {
    SiState si;
    std::vector<std::vector<double>> grads, steps;
    bool wants_step_trace() const override { return true; }
    void after_step(const Matrix& g, const Matrix& d) override {
        grads.push_back(g.data);
        steps.push_back(d.data);
        si_step_accumulate(si, g, d);
    }
};

}  // namespace

TEST_CASE("SI path integral equals a replay of the recorded trajectory") {
    std::mt19937_64 g(16);
    const Layout l{6, 1, 3};
    const auto items = random_items(l, 40, 0, g);
    NetParams p;
    p.n = 3;
    p.memory_count = 4;
    p.max_epochs = 1;
    p.batch_size = 4;  // ten steps
    Rng rng(2);
    MemoryBank bank = MemoryBank::random_normal(l, 4, 0.3, rng);
    Recorder rec;
    rec.si.running = Matrix(4, l.size());
    train_task(TaskView{0, items}, bank, p, rec, rng);
    REQUIRE(rec.grads.size() == 10);
    CHECK(rec.si.running.data == oracle::si_path_integral(rec.grads, rec.steps));
}

TEST_CASE("SI consolidation") {
    const Layout l{2, 0, 0};
    MemoryBank bank(l, 1);
    SiState s;
    s.eps = 0.5;
    s.start = Matrix(1, 2);
    s.running = Matrix(1, 2);
    s.omega = Matrix(1, 2, 3.0);
    PenaltyState pen;
    si_task_consolidate(s, pen, bank);
    CHECK(s.omega.data == std::vector<double>{3.0, 3.0});
    REQUIRE(pen.terms.size() == 1);
    CHECK(pen.terms[0].anchor == bank.memories);

    // Delta = 0, running = w: omega += w / eps.
    s.running.data = {1.0, 0.25};
    si_task_consolidate(s, pen, bank);
    CHECK(s.omega.data == std::vector<double>{5.0, 3.5});
    CHECK(s.running.data == std::vector<double>{0.0, 0.0});

    // Two tasks on a two-parameter toy, summed by hand:
    // task 1: theta 0 -> (1, -2), running (2, 4)    -> (2/1.5, 4/4.5)
    // task 2: theta (1, -2) -> (1, 0), running (3, 1) -> (3/0.5, 1/4.5)
    SiState t;
    t.eps = 0.5;
    t.start = Matrix(1, 2);
    t.running = Matrix(1, 2);
    PenaltyState pt;
    MemoryBank b1(l, 1);
    b1.memories.data = {1.0, -2.0};
    t.running.data = {2.0, 4.0};
    si_task_consolidate(t, pt, b1);
    t.start = b1.memories;
    MemoryBank b2(l, 1);
    b2.memories.data = {1.0, 0.0};
    t.running.data = {3.0, 1.0};
    si_task_consolidate(t, pt, b2);
    CHECK(t.omega.data[0] == doctest::Approx(2.0 / 1.5 + 3.0 / 0.5));
    CHECK(t.omega.data[1] == doctest::Approx(4.0 / 4.5 + 1.0 / 4.5));
    CHECK(pt.terms.size() == 1);
    CHECK(pt.terms[0].anchor == b2.memories);

    // A negative path sum adds nothing.
    t.running.data = {-7.0, 0.0};
    const auto before = t.omega.data;
    si_task_consolidate(t, pt, b2);
    CHECK(t.omega.data == before);
}

// -------------------------------------------------------------- factory

TEST_CASE("method factory") {
    for (const auto& n : method_names()) {
        MethodSpec s;
        s.name = n;
        CHECK(make_method(s, 1)->name() == n);
    }
    MethodSpec bad;
    bad.name = "replay";
    CHECK_THROWS_AS(make_method(bad, 1), ConfigError);
    bad.name = "rehearsal";
    bad.proportion = 1.5;
    CHECK_THROWS_AS(make_method(bad, 1), ConfigError);
    MethodSpec neg;
    neg.name = "l2";
    neg.lambda = -1.0;
    CHECK_THROWS_AS(make_method(neg, 1), ConfigError);
    CHECK(parse_mas_variant(to_string(MasVariant::squared_norm)) == MasVariant::squared_norm);
}
