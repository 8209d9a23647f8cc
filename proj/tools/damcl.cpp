// damcl: fetch data, run experiments and sweeps, fold results into tables.
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "dam/errors.hpp"
#include "dam/harness.hpp"
#include "dam/results.hpp"
#include "fetch.hpp"

namespace fs = std::filesystem;
using namespace dam;

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kNumeric = 3 };

struct ConfigOptions {
    std::string config_file;
    std::string preset = "desk";
    std::vector<std::string> sets;
    std::string data_dir;
    std::string out_dir;
    std::string tag;
    bool print_config = false;
    bool quiet = false;
};

void add_config_options(CLI::App* app, ConfigOptions& o) {
    app->add_option("-c,--config", o.config_file, "Config file (key = value lines)");
    app->add_option("-p,--preset", o.preset, "Base preset: desk, paper, paper_appendix, smoke")
        ->capture_default_str();
    app->add_option("-s,--set", o.sets, "Override a config key, e.g. --set net.n=20.0")->take_all();
    app->add_option("--data-dir", o.data_dir, "Data directory (DAM_DATA_DIR still wins)");
    app->add_option("-o,--out", o.out_dir, "Output directory");
    app->add_option("--tag", o.tag, "Output file stem");
    app->add_flag("--print-config", o.print_config, "Print the effective config and exit");
    app->add_flag("-q,--quiet", o.quiet, "No progress output");
}

// Preset, then config file, then --set and the shorthand flags.
ExperimentConfig build_config(const ConfigOptions& o) {
    ConfigFile file = preset_config(o.preset).to_config();
    if (!o.config_file.empty()) {
        const ConfigFile user = ConfigFile::load(o.config_file);
        for (const auto& [k, v] : user.values()) file.set(k, v);
    }
    for (const std::string& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        const std::string key = s.substr(0, eq);
        if (!file.contains(key)) throw ConfigError("unknown config key '" + key + "'");
        std::string value = s.substr(eq + 1);
        // Bare words for string keys save shell quoting.
        if (std::holds_alternative<std::string>(file.values().at(key)) && (value.empty() || value.front() != '"'))
            file.set(key, value);
        else
            file.set_literal(key, value);
    }
    if (!o.data_dir.empty()) file.set("dataset.data_dir", o.data_dir);
    if (!o.out_dir.empty()) file.set("output.dir", o.out_dir);
    if (!o.tag.empty()) file.set("output.tag", o.tag);
    ExperimentConfig cfg = ExperimentConfig::from_config(file);
    cfg.validate();
    return cfg;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const ConfigValue v = parse_config_literal(item);
        if (const auto* d = std::get_if<double>(&v)) out.push_back(*d);
        else if (const auto* i = std::get_if<std::int64_t>(&v)) out.push_back(static_cast<double>(*i));
        else throw ConfigError("expected a number in list, got '" + item + "'");
    }
    return out;
}

int cmd_fetch(const std::string& dir_opt, const std::vector<std::string>& mirrors, bool force) {
    fs::path dir = dir_opt;
    if (dir.empty()) {
        const char* env = std::getenv(kDataDirEnv);
        dir = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("data/mnist");
    }
    fetch::fetch_all(dir, mirrors.empty() ? fetch::default_mirrors() : mirrors, force,
                     [](const std::string& s) { std::cout << s << '\n'; });
    std::cout << "MNIST ready in " << dir.string() << '\n';
    return kOk;
}

int cmd_run(const ConfigOptions& o) {
    const ExperimentConfig cfg = build_config(o);
    if (o.print_config) {
        std::cout << cfg.to_config().serialize();
        return kOk;
    }
    Progress progress;
    if (!o.quiet) progress = [](const std::string& s) { std::cerr << s << '\n'; };
    const RunRecord rec = run_experiment(cfg, progress);
    const RunPaths paths = write_run(rec, cfg.output_dir, cfg.tag);
    std::cout << "average accuracy " << format_real(rec.final_average()) << " (final task scores";
    for (double v : rec.f1.back()) std::cout << ' ' << format_real(v);
    std::cout << ")\nwrote " << paths.jsonl.string() << " and " << paths.csv.string() << '\n';
    return kOk;
}

struct SweepOptions {
    std::string axis = "method.proportion";
    std::string grid;
    std::string log_uniform;
    std::string seeds = "1";
    std::uint64_t sample_seed = 0;
    std::string objective = "average";
};

int cmd_sweep(const ConfigOptions& o, const SweepOptions& so) {
    const ExperimentConfig cfg = build_config(o);
    SweepAxis axis;
    axis.field = so.axis;
    axis.sample_seed = so.sample_seed;
    if (so.grid.empty() == so.log_uniform.empty())
        throw ConfigError("give exactly one of --grid or --log-uniform");
    if (!so.grid.empty()) {
        axis.kind = SweepAxis::Kind::grid;
        axis.values = parse_list(so.grid);
    } else {
        const auto v = parse_list(so.log_uniform);
        if (v.size() != 3) throw ConfigError("--log-uniform expects lo,hi,trials");
        axis.kind = SweepAxis::Kind::log_uniform;
        axis.lo = v[0];
        axis.hi = v[1];
        axis.trials = static_cast<int>(v[2]);
    }
    std::vector<std::uint64_t> seeds;
    for (double s : parse_list(so.seeds)) {
        if (s < 0 || s != std::floor(s)) throw ConfigError("seeds must be non-negative integers");
        seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (o.print_config) {
        std::cout << cfg.to_config().serialize();
        for (const auto& [v, s] : sweep_plan(axis, seeds)) std::cout << "# trial " << format_real(v) << " seed " << s << '\n';
        return kOk;
    }
    Progress progress;
    if (!o.quiet) progress = [](const std::string& s) { std::cerr << s << '\n'; };
    const RawImageSet source = load_source(cfg.dataset);
    const SweepResult res = sweep(cfg, axis, seeds, parse_sweep_objective(so.objective), source, progress);
    const SweepPaths paths = write_sweep(res, cfg.output_dir, cfg.tag);
    const BestWindow best = best_window(res);
    std::cout << "best window " << res.field << " ~ " << format_real(best.value) << ": "
              << format_mean_std(best.mean, best.stddev) << "\nwrote " << paths.trials.string() << " and "
              << paths.curve.string() << '\n';
    return kOk;
}

bool has_header(const fs::path& p, const std::string& prefix) {
    std::ifstream in(p);
    std::string line;
    return std::getline(in, line) && line.rfind(prefix, 0) == 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir) {
    std::vector<SummaryRow> rows;
    std::vector<SweepResult> sweeps;
    std::set<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            for (const auto& e : fs::recursive_directory_iterator(in))
                if (e.is_regular_file() && e.path().extension() == ".csv") files.insert(e.path());
        } else if (fs::is_regular_file(in)) {
            files.insert(in);
        } else {
            throw DataError("no such file or directory: " + in);
        }
    }
    for (const auto& f : files) {
        if (has_header(f, "method,n,hyperparameter,seed")) {
            const auto r = read_summary_csv(f);
            rows.insert(rows.end(), r.begin(), r.end());
        } else if (f.filename().string().ends_with("_trials.csv") && has_header(f, "method,n,field,")) {
            fs::path curve = f;
            curve.replace_filename(f.filename().string().substr(0, f.filename().string().size() - 11) + "_window.csv");
            sweeps.push_back(read_sweep({f, curve}));
        }
    }
    if (rows.empty() && sweeps.empty()) throw DataError("no run summaries or sweep results found");
    fs::create_directories(out_dir);

    const auto agg = aggregate(rows);
    {
        std::ofstream t2(fs::path(out_dir) / "table2.csv");
        t2 << "method,n,hyperparameter,trials,mean,stddev\n";
        for (const auto& a : agg)
            t2 << a.method << ',' << format_real(a.n) << ',' << format_real(a.hyperparameter) << ',' << a.trials
               << ',' << format_real(a.mean) << ',' << format_real(a.stddev) << '\n';
    }
    if (!agg.empty()) {
        // Methods down, interaction vertices across.
        std::set<double> ns;
        std::map<std::pair<std::string, double>, std::map<double, std::string>> grid;
        for (const auto& a : agg) {
            ns.insert(a.n);
            grid[{a.method, a.hyperparameter}][a.n] = format_mean_std(a.mean, a.stddev);
        }
        std::cout << "| method | lambda/proportion |";
        for (double n : ns) std::cout << " n=" << format_real(n) << " |";
        std::cout << "\n|---|---|";
        for (std::size_t i = 0; i < ns.size(); ++i) std::cout << "---|";
        std::cout << '\n';
        for (const auto& [key, cells] : grid) {
            std::cout << "| " << key.first << " | "
                      << (hyperparameter_name(key.first) == "-" ? "-" : format_real(key.second)) << " |";
            for (double n : ns) {
                const auto it = cells.find(n);
                std::cout << ' ' << (it == cells.end() ? "" : it->second) << " |";
            }
            std::cout << '\n';
        }
    }
    if (!sweeps.empty()) {
        std::ofstream t1(fs::path(out_dir) / "table1.csv");
        std::ofstream curves(fs::path(out_dir) / "curves.csv");
        t1 << "method,n,field,best_value,mean,stddev\n";
        curves << "method,n,field,value,mean,stddev\n";
        for (const auto& s : sweeps) {
            const BestWindow b = best_window(s);
            t1 << b.method << ',' << format_real(b.n) << ',' << b.field << ',' << format_real(b.value) << ','
               << format_real(b.mean) << ',' << format_real(b.stddev) << '\n';
            for (const auto& w : s.curve)
                curves << s.method << ',' << format_real(s.n) << ',' << s.field << ',' << format_real(w.value)
                       << ',' << format_real(w.mean) << ',' << format_real(w.stddev) << '\n';
            std::cout << "best " << s.method << " n=" << format_real(s.n) << ": " << s.field << " ~ "
                      << format_real(b.value) << " -> " << format_mean_std(b.mean, b.stddev) << '\n';
        }
    }
    std::cout << "wrote tables to " << out_dir << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dense Associative Memory continual-learning benchmark"};
    app.require_subcommand(1);

    std::string fetch_dir;
    std::vector<std::string> mirrors;
    bool force = false;
    auto* fetch = app.add_subcommand("fetch-data", "Download and verify the MNIST archives");
    fetch->add_option("-d,--dir", fetch_dir, "Target directory (default: $DAM_DATA_DIR or data/mnist)");
    fetch->add_option("--mirror", mirrors, "Base URL to try, in order (repeatable)");
    fetch->add_flag("--force", force, "Download even when a verified copy exists");

    ConfigOptions run_opts;
    auto* run = app.add_subcommand("run", "Run one experiment");
    add_config_options(run, run_opts);

    ConfigOptions sweep_opts;
    SweepOptions so;
    auto* sw = app.add_subcommand("sweep", "Sweep one real-valued config key");
    add_config_options(sw, sweep_opts);
    sw->add_option("--axis", so.axis, "Config key to vary")->capture_default_str();
    sw->add_option("--grid", so.grid, "Comma-separated values");
    sw->add_option("--log-uniform", so.log_uniform, "lo,hi,trials");
    sw->add_option("--seeds", so.seeds, "Comma-separated trial seeds")->capture_default_str();
    sw->add_option("--sample-seed", so.sample_seed, "Seed for log-uniform draws")->capture_default_str();
    sw->add_option("--objective", so.objective, "average or min_task")->capture_default_str();

    std::vector<std::string> report_in;
    std::string report_out = "report";
    auto* report = app.add_subcommand("report", "Aggregate run and sweep CSVs into tables");
    report->add_option("inputs", report_in, "Result files or directories")->required();
    report->add_option("-o,--out", report_out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*fetch) return cmd_fetch(fetch_dir, mirrors, force);
        if (*run) return cmd_run(run_opts);
        if (*sw) return cmd_sweep(sweep_opts, so);
        if (*report) return cmd_report(report_in, report_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
