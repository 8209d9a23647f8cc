#include "dam/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <type_traits>
#include <sstream>

#include "dam/errors.hpp"
#include "dam/metrics.hpp"

namespace dam {

// --------------------------------------------------------------- config ----

namespace {

struct Field {
    std::string key;
    std::function<ConfigValue(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const ConfigFile&)> set;
};

template <typename M>
Field real(std::string key, M member) {
    return {key, [member](const ExperimentConfig& c) -> ConfigValue { return static_cast<double>(member(c)); },
            [member, key](ExperimentConfig& c, const ConfigFile& f) { member(c) = f.get_real(key); }};
}

template <typename M>
Field integer(std::string key, M member) {
    return {key,
            [member](const ExperimentConfig& c) -> ConfigValue {
                return static_cast<std::int64_t>(member(c));
            },
            [member, key](ExperimentConfig& c, const ConfigFile& f) {
                using T = std::remove_reference_t<decltype(member(c))>;
                const std::int64_t v = f.get_int(key);
                if constexpr (std::is_unsigned_v<T> && sizeof(T) < sizeof(std::int64_t)) {
                    if (v < 0 || static_cast<std::uint64_t>(v) > std::numeric_limits<T>::max())
                        throw ConfigError(key + ": value out of range");
                } else if constexpr (std::is_signed_v<T> && sizeof(T) < sizeof(std::int64_t)) {
                    if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max())
                        throw ConfigError(key + ": value out of range");
                } else if constexpr (std::is_same_v<T, std::size_t>) {
                    if (v < 0) throw ConfigError(key + ": must be >= 0");
                }
                member(c) = static_cast<T>(v);
            }};
}

template <typename M>
Field boolean(std::string key, M member) {
    return {key, [member](const ExperimentConfig& c) -> ConfigValue {
                return static_cast<bool>(member(c));
            },
            [member, key](ExperimentConfig& c, const ConfigFile& f) { member(c) = f.get_bool(key); }};
}

template <typename M>
Field text(std::string key, M member) {
    return {key, [member](const ExperimentConfig& c) -> ConfigValue {
                return std::string(member(c));
            },
            [member, key](ExperimentConfig& c, const ConfigFile& f) { member(c) = f.get_string(key); }};
}

#define DAM_M(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
    static const std::vector<Field> all = [] {
        std::vector<Field> v;
        v.push_back({"dataset.kind",
                     [](const ExperimentConfig& c) -> ConfigValue { return to_string(c.dataset.sequence.kind); },
                     [](ExperimentConfig& c, const ConfigFile& f) {
                         c.dataset.sequence.kind = parse_transform_kind(f.get_string("dataset.kind"));
                     }});
        v.push_back(integer("dataset.task_count", DAM_M(dataset.sequence.task_count)));
        v.push_back(integer("dataset.items_per_task", DAM_M(dataset.sequence.items_per_task)));
        v.push_back(integer("dataset.master_seed", DAM_M(dataset.sequence.master_seed)));
        v.push_back(integer("dataset.threshold", DAM_M(dataset.sequence.threshold)));
        v.push_back(real("dataset.rotation_step_degrees", DAM_M(dataset.sequence.rotation_step_degrees)));
        v.push_back(real("dataset.val_fraction", DAM_M(dataset.sequence.val_fraction)));
        v.push_back(text("dataset.data_dir", DAM_M(dataset.data_dir)));
        v.push_back(text("dataset.images_file", DAM_M(dataset.images_file)));
        v.push_back(text("dataset.labels_file", DAM_M(dataset.labels_file)));

        v.push_back(real("net.n", DAM_M(net.n)));
        v.push_back(real("net.eps_leak", DAM_M(net.eps_leak)));
        v.push_back(real("net.T_init", DAM_M(net.T_init)));
        v.push_back(real("net.T_final", DAM_M(net.T_final)));
        v.push_back(real("net.lr_init", DAM_M(net.lr_init)));
        v.push_back(real("net.lr_decay", DAM_M(net.lr_decay)));
        v.push_back(real("net.momentum_p", DAM_M(net.momentum_p)));
        v.push_back(integer("net.error_exp_m", DAM_M(net.error_exp_m)));
        v.push_back(integer("net.max_epochs", DAM_M(net.max_epochs)));
        v.push_back(integer("net.batch_size", DAM_M(net.batch_size)));
        v.push_back(integer("net.memory_count", DAM_M(net.memory_count)));
        v.push_back(real("net.init_std", DAM_M(net.init_std)));
        v.push_back(boolean("net.normalize_argument", DAM_M(net.normalize_argument)));
        v.push_back({"net.step_scaling",
                     [](const ExperimentConfig& c) -> ConfigValue { return to_string(c.net.step_scaling); },
                     [](ExperimentConfig& c, const ConfigFile& f) {
                         c.net.step_scaling = parse_step_scaling(f.get_string("net.step_scaling"));
                     }});

        v.push_back(text("method.name", DAM_M(method.name)));
        v.push_back(real("method.proportion", DAM_M(method.proportion)));
        v.push_back(real("method.lambda", DAM_M(method.lambda)));
        v.push_back(real("method.eps_si", DAM_M(method.eps_si)));
        v.push_back(integer("method.fisher_cap", DAM_M(method.fisher_cap)));
        v.push_back(integer("method.grad_stride", DAM_M(method.grad_stride)));
        v.push_back({"method.mas_variant",
                     [](const ExperimentConfig& c) -> ConfigValue { return to_string(c.method.mas_variant); },
                     [](ExperimentConfig& c, const ConfigFile& f) {
                         c.method.mas_variant = parse_mas_variant(f.get_string("method.mas_variant"));
                     }});
        v.push_back(boolean("method.si_printed_sign", DAM_M(method.si_printed_sign)));
        v.push_back(integer("method.pseudo_max_sweeps", DAM_M(method.pseudo_max_sweeps)));

        v.push_back(integer("eval.every_epochs", DAM_M(eval_every_epochs)));
        v.push_back(text("output.dir", DAM_M(output_dir)));
        v.push_back(text("output.tag", DAM_M(tag)));
        v.push_back(integer("trial_seed", DAM_M(trial_seed)));
        return v;
    }();
    return all;
}

#undef DAM_M

}  // namespace

ConfigFile ExperimentConfig::to_config() const {
    ConfigFile f;
    for (const Field& fd : fields()) f.set(fd.key, fd.get(*this));
    return f;
}

ExperimentConfig ExperimentConfig::from_config(const ConfigFile& file) {
    ExperimentConfig c;
    for (const auto& [key, value] : file.values()) {
        const auto it = std::find_if(fields().begin(), fields().end(),
                                     [&](const Field& fd) { return fd.key == key; });
        if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
        it->set(c, file);
    }
    return c;
}

void ExperimentConfig::validate() const {
    net.validate();
    const auto& s = dataset.sequence;
    if (s.task_count < 1) throw ConfigError("dataset.task_count must be >= 1");
    if (s.items_per_task < 2) throw ConfigError("dataset.items_per_task must be >= 2");
    if (!(s.val_fraction > 0.0 && s.val_fraction < 1.0))
        throw ConfigError("dataset.val_fraction must lie in (0, 1)");
    const auto& names = method_names();
    if (std::find(names.begin(), names.end(), method.name) == names.end())
        throw ConfigError("unknown method '" + method.name + "'");
    if (!(method.proportion >= 0.0 && method.proportion <= 1.0))
        throw ConfigError("method.proportion must lie in [0, 1]");
    if (!(method.lambda >= 0.0)) throw ConfigError("method.lambda must be >= 0");
    if (!(method.eps_si > 0.0)) throw ConfigError("method.eps_si must be > 0");
    if (method.grad_stride < 1) throw ConfigError("method.grad_stride must be >= 1");
    if (method.pseudo_max_sweeps < 1) throw ConfigError("method.pseudo_max_sweeps must be >= 1");
    if (eval_every_epochs < 0) throw ConfigError("eval.every_epochs must be >= 0");
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"desk", "paper", "paper_appendix", "smoke"};
    return names;
}

ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig c;
    if (name == "desk") return c;
    if (name == "paper" || name == "paper_appendix") {
        c.net = name == "paper" ? NetParams::paper() : NetParams::paper_appendix();
        c.dataset.sequence.items_per_task = 10000;
        return c;
    }
    if (name == "smoke") {
        c.dataset.sequence.task_count = 2;
        c.dataset.sequence.items_per_task = 200;
        // Few, cold, small-batch updates so a seconds-long run still learns.
        c.net.memory_count = 16;
        c.net.max_epochs = 20;
        c.net.batch_size = 10;
        c.net.T_init = c.net.T_final = 0.2;
        c.net.lr_init = 0.1;
        return c;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

std::filesystem::path resolve_data_dir(const DatasetConfig& d) {
    if (const char* env = std::getenv(kDataDirEnv); env != nullptr && *env != '\0') return env;
    return d.data_dir;
}

RawImageSet load_source(const DatasetConfig& d) {
    return load_mnist(resolve_data_dir(d), d.images_file, d.labels_file);
}

// ------------------------------------------------------------------ run ----

double RunRecord::min_task_f1() const {
    if (f1.empty()) return 0.0;
    return *std::min_element(f1.back().begin(), f1.back().end());
}

double RunRecord::mean_just_trained() const {
    if (f1.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t mu = 0; mu < f1.size(); ++mu) s += f1[mu][mu];
    return s / static_cast<double>(f1.size());
}

namespace {

template <typename E>
[[noreturn]] void rethrow_with(const E& e, const std::string& context) {
    throw E(context + ": " + e.what());
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& config, const RawImageSet& source,
                         const Progress& progress) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto tasks = build_task_sequence(source, config.dataset.sequence);

    RunRecord rec;
    rec.config = config;
    rec.seed = config.trial_seed;

    Rng rng(config.trial_seed);
    MemoryBank bank = MemoryBank::random_normal(tasks.front().layout(),
                                                static_cast<std::size_t>(config.net.memory_count),
                                                config.net.init_std, rng);
    // The method's own generator never touches `rng`, which drives shuffles.
    auto method = make_method(config.method, splitmix64(config.trial_seed ^ 0x6d6574686f64ULL));

    for (std::size_t mu = 0; mu < tasks.size(); ++mu) {
        const TaskView view = tasks[mu].view();
        std::ostringstream ctx;
        ctx << "task " << mu;
        EpochCallback on_epoch;
        if (config.eval_every_epochs > 0) {
            on_epoch = [&](const EpochLog& e, const MemoryBank& b) {
                if (e.epoch % config.eval_every_epochs != 0) return;
                for (std::size_t nu = 0; nu <= mu; ++nu)
                    rec.curves.push_back(
                        {mu, e.epoch, nu, evaluate_task(nu, tasks[nu].val, b, config.net).macro_f1});
            };
        }
        try {
            method->on_task_start(view, bank);
            rec.train_logs.push_back(train_task(view, bank, config.net, *method, rng, on_epoch));
            method->on_task_end(view, bank, config.net);
        } catch (const NumericError& e) {
            rethrow_with(e, ctx.str());
        } catch (const DataError& e) {
            rethrow_with(e, ctx.str());
        }

        std::vector<double> f1_row, acc_row;
        for (std::size_t nu = 0; nu <= mu; ++nu) {
            const TaskScore s = evaluate_task(nu, tasks[nu].val, bank, config.net);
            f1_row.push_back(s.macro_f1);
            acc_row.push_back(s.accuracy);
        }
        rec.average_accuracy.push_back(average_accuracy(f1_row));
        rec.f1.push_back(std::move(f1_row));
        rec.accuracy.push_back(std::move(acc_row));
        if (progress) {
            std::ostringstream os;
            os << "task " << mu + 1 << "/" << tasks.size() << " done: just-trained f1 "
               << rec.f1.back().back() << ", average " << rec.average_accuracy.back();
            progress(os.str());
        }
    }
    rec.buffered_items = method->buffered_items();
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

RunRecord run_experiment(const ExperimentConfig& config, const Progress& progress) {
    config.validate();
    return run_experiment(config, load_source(config.dataset), progress);
}

// ---------------------------------------------------------------- sweep ----

std::string to_string(SweepObjective o) { return o == SweepObjective::average ? "average" : "min_task"; }

SweepObjective parse_sweep_objective(const std::string& s) {
    if (s == "average") return SweepObjective::average;
    if (s == "min_task") return SweepObjective::min_task;
    throw ConfigError("unknown sweep objective '" + s + "'");
}

std::vector<std::pair<double, std::uint64_t>> sweep_plan(const SweepAxis& axis,
                                                         const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
    std::vector<std::pair<double, std::uint64_t>> plan;
    if (axis.kind == SweepAxis::Kind::grid) {
        if (axis.values.empty()) throw ConfigError("grid sweep needs at least one value");
        for (double v : axis.values)
            for (std::uint64_t s : seeds) plan.emplace_back(v, s);
        return plan;
    }
    if (!(axis.lo > 0.0 && axis.hi > axis.lo)) throw ConfigError("log-uniform bounds need 0 < lo < hi");
    if (axis.trials < 1) throw ConfigError("log-uniform sweep needs trials >= 1");
    Rng rng(axis.sample_seed);
    std::uniform_real_distribution<double> u(std::log(axis.lo), std::log(axis.hi));
    for (int t = 0; t < axis.trials; ++t) {
        const double v = std::clamp(std::exp(u(rng)), axis.lo, axis.hi);
        plan.emplace_back(v, seeds[static_cast<std::size_t>(t) % seeds.size()]);
    }
    return plan;
}

std::vector<WindowPoint> moving_window(const std::vector<SweepTrial>& sorted, int window,
                                       SweepObjective objective, bool log_axis) {
    std::vector<WindowPoint> out;
    if (sorted.empty() || window < 1) return out;
    const std::size_t w = std::min(sorted.size(), static_cast<std::size_t>(window));
    for (std::size_t s = 0; s + w <= sorted.size(); ++s) {
        double vsum = 0.0, m = 0.0;
        for (std::size_t i = s; i < s + w; ++i) {
            vsum += log_axis ? std::log(sorted[i].value) : sorted[i].value;
            m += sorted[i].objective(objective);
        }
        m /= static_cast<double>(w);
        double ss = 0.0;
        for (std::size_t i = s; i < s + w; ++i) {
            const double d = sorted[i].objective(objective) - m;
            ss += d * d;
        }
        const double center = vsum / static_cast<double>(w);
        out.push_back({log_axis ? std::exp(center) : center, m,
                       w > 1 ? std::sqrt(ss / static_cast<double>(w - 1)) : 0.0});
    }
    return out;
}

SweepResult sweep(const ExperimentConfig& base, const SweepAxis& axis,
                  const std::vector<std::uint64_t>& seeds, SweepObjective objective,
                  const RawImageSet& source, const Progress& progress) {
    const ConfigFile base_file = base.to_config();
    if (!base_file.contains(axis.field)) throw ConfigError("sweep axis '" + axis.field + "' is not a config key");
    if (!std::holds_alternative<double>(base_file.values().at(axis.field)))
        throw ConfigError("sweep axis '" + axis.field + "' is not real-valued");

    SweepResult out;
    out.method = base.method.name;
    out.n = base.net.n;
    out.field = axis.field;
    out.log_axis = axis.kind == SweepAxis::Kind::log_uniform;
    out.objective = objective;

    const auto plan = sweep_plan(axis, seeds);
    for (std::size_t t = 0; t < plan.size(); ++t) {
        ConfigFile f = base_file;
        f.set(axis.field, plan[t].first);
        ExperimentConfig cfg = ExperimentConfig::from_config(f);
        cfg.trial_seed = plan[t].second;
        const RunRecord rec = run_experiment(cfg, source);
        out.trials.push_back({plan[t].first, plan[t].second, rec.final_average(), rec.min_task_f1(),
                              rec.f1.back()});
        if (progress) {
            std::ostringstream os;
            os << "trial " << t + 1 << "/" << plan.size() << " " << axis.field << "=" << plan[t].first
               << " seed " << plan[t].second << ": average " << rec.final_average();
            progress(os.str());
        }
    }
    std::stable_sort(out.trials.begin(), out.trials.end(), [](const SweepTrial& a, const SweepTrial& b) {
        return a.value != b.value ? a.value < b.value : a.seed < b.seed;
    });
    out.curve = moving_window(out.trials, out.window, objective, out.log_axis);
    return out;
}

}  // namespace dam
