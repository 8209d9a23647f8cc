#include "dam/results.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "dam/errors.hpp"

namespace dam {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
        if (ec) throw DataError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    return in;
}

void finish(std::ofstream& out, const std::filesystem::path& p) {
    out.flush();
    if (!out) throw DataError("write failed for " + p.string());
}

double parse_real(const std::string& s, const std::filesystem::path& where) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw DataError(where.string() + ": bad number '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& s, const std::filesystem::path& where) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw DataError(where.string() + ": bad integer '" + s + "'");
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Header row plus data rows, each split on commas.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
    auto in = open_in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_csv(line));
    }
    if (rows.empty()) throw DataError(p.string() + ": missing header");
    for (const auto& r : rows)
        if (r.size() != rows.front().size()) throw DataError(p.string() + ": ragged row");
    return rows;
}

json config_to_json(const ExperimentConfig& c) {
    json j = json::object();
    const ConfigFile file = c.to_config();
    for (const auto& [k, v] : file.values())
        std::visit([&](const auto& x) { j[k] = x; }, v);
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ConfigFile f;
    for (const auto& [k, v] : j.items()) {
        if (v.is_boolean()) f.set(k, v.get<bool>());
        else if (v.is_number_integer()) f.set(k, v.get<std::int64_t>());
        else if (v.is_number_float()) f.set(k, v.get<double>());
        else if (v.is_string()) f.set(k, v.get<std::string>());
        else throw DataError("config entry '" + k + "' has an unsupported JSON type");
    }
    return ExperimentConfig::from_config(f);
}

}  // namespace

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string hyperparameter_name(const std::string& method) {
    if (method == "l2" || method == "ewc" || method == "mas" || method == "si") return "lambda";
    if (method == "vanilla") return "-";
    return "proportion";
}

SummaryRow summarize(const RunRecord& rec) {
    SummaryRow r;
    r.method = rec.config.method.name;
    r.n = rec.config.net.n;
    const std::string h = hyperparameter_name(r.method);
    r.hyperparameter = h == "lambda" ? rec.config.method.lambda
                       : h == "proportion" ? rec.config.method.proportion
                                           : 0.0;
    r.seed = rec.seed;
    if (!rec.f1.empty()) r.final_f1 = rec.f1.back();
    r.average_accuracy = rec.final_average();
    return r;
}

// ------------------------------------------------------------------ runs ----

RunPaths write_run(const RunRecord& rec, const std::filesystem::path& dir, const std::string& stem) {
    RunPaths paths{dir / (stem + ".jsonl"), dir / (stem + ".csv")};
    auto out = open_out(paths.jsonl);
    for (std::size_t t = 0; t < rec.train_logs.size(); ++t)
        for (const EpochLog& e : rec.train_logs[t].epochs)
            out << json{{"type", "epoch"},
                        {"task", t},
                        {"epoch", e.epoch},
                        {"lr", e.lr},
                        {"temperature", e.temperature},
                        {"error", e.error}}
                       .dump()
                << '\n';
    for (const CurvePoint& c : rec.curves)
        out << json{{"type", "curve"},
                    {"trained_task", c.trained_task},
                    {"epoch", c.epoch},
                    {"eval_task", c.eval_task},
                    {"macro_f1", c.macro_f1}}
                   .dump()
            << '\n';
    json converged = json::array();
    for (const TrainLog& l : rec.train_logs) converged.push_back(l.converged);
    out << json{{"type", "summary"},
                {"config", config_to_json(rec.config)},
                {"converged", converged},
                {"f1", rec.f1},
                {"accuracy", rec.accuracy},
                {"average_accuracy", rec.average_accuracy},
                {"buffered_items", rec.buffered_items},
                {"wall_seconds", rec.wall_seconds},
                {"seed", rec.seed}}
               .dump()
        << '\n';
    finish(out, paths.jsonl);
    write_summary_csv({summarize(rec)}, paths.csv);
    return paths;
}

RunRecord read_run_jsonl(const std::filesystem::path& path) {
    auto in = open_in(path);
    RunRecord rec;
    bool have_summary = false;
    std::string line;
    int lineno = 0;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const json j = json::parse(line);
            const std::string type = j.at("type").get<std::string>();
            if (type == "epoch") {
                const auto t = j.at("task").get<std::size_t>();
                if (rec.train_logs.size() <= t) rec.train_logs.resize(t + 1);
                rec.train_logs[t].epochs.push_back({j.at("epoch").get<int>(), j.at("lr").get<double>(),
                                                    j.at("temperature").get<double>(),
                                                    j.at("error").get<double>()});
            } else if (type == "curve") {
                rec.curves.push_back({j.at("trained_task").get<std::size_t>(), j.at("epoch").get<int>(),
                                      j.at("eval_task").get<std::size_t>(), j.at("macro_f1").get<double>()});
            } else if (type == "summary") {
                rec.config = config_from_json(j.at("config"));
                const auto conv = j.at("converged").get<std::vector<bool>>();
                if (rec.train_logs.size() < conv.size()) rec.train_logs.resize(conv.size());
                for (std::size_t t = 0; t < conv.size(); ++t) rec.train_logs[t].converged = conv[t];
                rec.f1 = j.at("f1").get<std::vector<std::vector<double>>>();
                rec.accuracy = j.at("accuracy").get<std::vector<std::vector<double>>>();
                rec.average_accuracy = j.at("average_accuracy").get<std::vector<double>>();
                rec.buffered_items = j.at("buffered_items").get<std::size_t>();
                rec.wall_seconds = j.at("wall_seconds").get<double>();
                rec.seed = j.at("seed").get<std::uint64_t>();
                have_summary = true;
            } else {
                throw DataError("unknown record type '" + type + "'");
            }
        }
    } catch (const json::exception& e) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ConfigError& e) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_summary) throw DataError(path.string() + ": no summary record");
    return rec;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
    std::size_t T = rows.empty() ? 0 : rows.front().final_f1.size();
    for (const auto& r : rows)
        if (r.final_f1.size() != T) throw ShapeError("summary rows disagree on task count");
    auto out = open_out(path);
    out << "method,n,hyperparameter,seed";
    for (std::size_t t = 0; t < T; ++t) out << ",task" << t + 1 << "_f1";
    out << ",average_accuracy\n";
    for (const auto& r : rows) {
        out << r.method << ',' << format_real(r.n) << ',' << format_real(r.hyperparameter) << ',' << r.seed;
        for (double v : r.final_f1) out << ',' << format_real(v);
        out << ',' << format_real(r.average_accuracy) << '\n';
    }
    finish(out, path);
}

std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
    const auto rows = read_csv(path);
    const auto& head = rows.front();
    if (head.size() < 5 || head[0] != "method" || head.back() != "average_accuracy")
        throw DataError(path.string() + ": not a run summary CSV");
    const std::size_t T = head.size() - 5;
    std::vector<SummaryRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& c = rows[i];
        SummaryRow r;
        r.method = c[0];
        r.n = parse_real(c[1], path);
        r.hyperparameter = parse_real(c[2], path);
        r.seed = parse_u64(c[3], path);
        for (std::size_t t = 0; t < T; ++t) r.final_f1.push_back(parse_real(c[4 + t], path));
        r.average_accuracy = parse_real(c.back(), path);
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------- sweeps ----

SweepPaths write_sweep(const SweepResult& s, const std::filesystem::path& dir, const std::string& stem) {
    SweepPaths paths{dir / (stem + "_trials.csv"), dir / (stem + "_window.csv")};
    const std::size_t T = s.trials.empty() ? 0 : s.trials.front().final_f1.size();
    {
        auto out = open_out(paths.trials);
        out << "method,n,field,objective,log_axis,window,value,seed,final_average,min_task_f1";
        for (std::size_t t = 0; t < T; ++t) out << ",task" << t + 1 << "_f1";
        out << '\n';
        for (const auto& tr : s.trials) {
            if (tr.final_f1.size() != T) throw ShapeError("sweep trials disagree on task count");
            out << s.method << ',' << format_real(s.n) << ',' << s.field << ',' << to_string(s.objective)
                << ',' << (s.log_axis ? 1 : 0) << ',' << s.window << ',' << format_real(tr.value) << ','
                << tr.seed << ',' << format_real(tr.final_average) << ',' << format_real(tr.min_task_f1);
            for (double v : tr.final_f1) out << ',' << format_real(v);
            out << '\n';
        }
        finish(out, paths.trials);
    }
    auto out = open_out(paths.curve);
    out << "method,n,field,value,mean,stddev\n";
    for (const auto& w : s.curve)
        out << s.method << ',' << format_real(s.n) << ',' << s.field << ',' << format_real(w.value) << ','
            << format_real(w.mean) << ',' << format_real(w.stddev) << '\n';
    finish(out, paths.curve);
    return paths;
}

SweepResult read_sweep(const SweepPaths& paths) {
    const auto rows = read_csv(paths.trials);
    const auto& head = rows.front();
    if (head.size() < 10 || head[0] != "method" || head[6] != "value")
        throw DataError(paths.trials.string() + ": not a sweep trials CSV");
    if (rows.size() < 2) throw DataError(paths.trials.string() + ": sweep has no trials");
    const std::size_t T = head.size() - 10;
    SweepResult s;
    const auto& first = rows[1];
    s.method = first[0];
    s.n = parse_real(first[1], paths.trials);
    s.field = first[2];
    s.objective = parse_sweep_objective(first[3]);
    s.log_axis = first[4] == "1";
    s.window = static_cast<int>(parse_u64(first[5], paths.trials));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& c = rows[i];
        SweepTrial tr;
        tr.value = parse_real(c[6], paths.trials);
        tr.seed = parse_u64(c[7], paths.trials);
        tr.final_average = parse_real(c[8], paths.trials);
        tr.min_task_f1 = parse_real(c[9], paths.trials);
        for (std::size_t t = 0; t < T; ++t) tr.final_f1.push_back(parse_real(c[10 + t], paths.trials));
        s.trials.push_back(std::move(tr));
    }
    const auto crow = read_csv(paths.curve);
    for (std::size_t i = 1; i < crow.size(); ++i)
        s.curve.push_back({parse_real(crow[i][3], paths.curve), parse_real(crow[i][4], paths.curve),
                           parse_real(crow[i][5], paths.curve)});
    return s;
}

// ---------------------------------------------------------------- report ----

std::vector<AggregateRow> aggregate(const std::vector<SummaryRow>& rows) {
    std::map<std::tuple<std::string, double, double>, std::vector<double>> groups;
    for (const auto& r : rows) groups[{r.method, r.n, r.hyperparameter}].push_back(r.average_accuracy);
    std::vector<AggregateRow> out;
    for (const auto& [key, vals] : groups) {
        AggregateRow a{std::get<0>(key), std::get<1>(key), std::get<2>(key), vals.size(), 0.0, 0.0};
        for (double v : vals) a.mean += v;
        a.mean /= static_cast<double>(vals.size());
        if (vals.size() > 1) {
            double ss = 0.0;
            for (double v : vals) ss += (v - a.mean) * (v - a.mean);
            a.stddev = std::sqrt(ss / static_cast<double>(vals.size() - 1));
        }
        out.push_back(a);
    }
    return out;
}

std::string format_mean_std(double mean, double stddev) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f +- %.3f", mean, stddev);
    return buf;
}

BestWindow best_window(const SweepResult& s) {
    BestWindow b{s.method, s.n, s.field, 0.0, -1.0, 0.0};
    for (const auto& w : s.curve)
        if (w.mean > b.mean) {
            b.value = w.value;
            b.mean = w.mean;
            b.stddev = w.stddev;
        }
    return b;
}

}  // namespace dam
