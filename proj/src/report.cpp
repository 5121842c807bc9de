#include "lprobe/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lprobe {

namespace {

using ojson = nlohmann::ordered_json;

std::string num(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, ptr};
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

ojson stat_json(const MeanStd& s) { return {{"mean", s.mean}, {"std", s.std}}; }

MeanStd stat_from(const nlohmann::json& j) {
    return {j.at("mean").get<double>(), j.at("std").get<double>()};
}

ojson matrix_json(const Matrix& m) {
    auto rows = ojson::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return rows;
}

ojson run_json(const RunResult& r, bool with_selection) {
    ojson j;
    j["condition"] = r.condition.label();
    j["seed"] = r.seed ? ojson(*r.seed) : ojson(nullptr);
    j["effective_counts"] = r.effective_counts;
    j["fit"] = {{"status", to_string(r.status)},
                {"iterations", r.iterations},
                {"objective", r.objective},
                {"grad_inf_norm", r.grad_inf_norm}};
    j["summary"] = {{"macro_f1", r.summary.macro_f1},
                    {"overall_accuracy", r.summary.overall_accuracy},
                    {"macro_recall", r.summary.macro_recall},
                    {"macro_precision", r.summary.macro_precision}};
    j["per_class"] = {{"precision", r.metrics.precision},
                      {"recall", r.metrics.recall},
                      {"f1", r.metrics.f1},
                      {"support", r.metrics.support}};
    auto cm = ojson::array();
    for (std::size_t t = 0; t < r.confusion.num_classes; ++t) {
        auto row = ojson::array();
        for (std::size_t p = 0; p < r.confusion.num_classes; ++p) {
            row.push_back(r.confusion.at(t, p));
        }
        cm.push_back(std::move(row));
    }
    j["confusion"] = std::move(cm);
    if (with_selection) {
        j["selection"] = r.selection;
    }
    return j;
}

ojson aggregate_json(const ConditionAggregate& a) {
    ojson j;
    j["condition"] = a.condition.label();
    j["runs"] = a.runs;
    j["single_run"] = a.single_run;
    j["converged_runs"] = a.converged_runs;
    j["macro_f1"] = stat_json(a.macro_f1);
    j["overall_accuracy"] = stat_json(a.overall_accuracy);
    j["macro_recall"] = stat_json(a.macro_recall);
    j["macro_precision"] = stat_json(a.macro_precision);
    std::vector<double> means, stds;
    for (const auto& s : a.per_class_f1) {
        means.push_back(s.mean);
        stds.push_back(s.std);
    }
    j["per_class_f1"] = {{"mean", means}, {"std", stds}};
    j["test_support"] = a.test_support;
    j["mean_confusion"] = matrix_json(a.mean_confusion);
    return j;
}

void write_matrix_csv(const Matrix& m, const std::vector<std::string>& classes,
                      const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "true\\pred";
    for (const auto& c : classes) {
        out << ',' << c;
    }
    out << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out << classes[r];
        for (double v : m.row(r)) {
            out << ',' << num(v);
        }
        out << '\n';
    }
}

}  // namespace

std::string condition_file_stem(const Condition& c) {
    auto s = c.label();
    for (char& ch : s) {
        if (ch == ':') {
            ch = '_';
        }
    }
    return s;
}

std::string sweep_report_json(const ExperimentConfig& cfg, const EmbeddingDataset& train,
                              const EmbeddingDataset& test, std::span<const RunResult> runs,
                              const AggregateResult& agg) {
    ojson j;
    j["format"] = "lprobe-sweep/1";
    std::vector<std::string> conditions;
    for (const auto& c : cfg.conditions) {
        conditions.push_back(c.label());
    }
    j["config"] = {{"conditions", conditions},
                   {"seeds", cfg.seeds},
                   {"probe",
                    {{"C", cfg.probe.C},
                     {"class_weighting", to_string(cfg.probe.class_weighting)},
                     {"max_iterations", cfg.probe.max_iterations},
                     {"grad_tolerance", cfg.probe.grad_tolerance}}},
                   {"emit_selections", cfg.emit_selections}};
    j["dataset"] = {{"dim", train.dim()},
                    {"train_rows", train.rows()},
                    {"test_rows", test.rows()},
                    {"train_class_counts", train.class_counts()},
                    {"test_class_counts", test.class_counts()}};
    j["classes"] = train.classes;
    auto run_list = ojson::array();
    for (const auto& r : runs) {
        run_list.push_back(run_json(r, cfg.emit_selections));
    }
    j["runs"] = std::move(run_list);
    auto aggs = ojson::array();
    for (const auto& a : agg.conditions) {
        aggs.push_back(aggregate_json(a));
    }
    j["aggregates"] = std::move(aggs);
    return j.dump(1) + "\n";
}

void write_sweep_outputs(const std::filesystem::path& out_dir, const ExperimentConfig& cfg,
                         const EmbeddingDataset& train, const EmbeddingDataset& test,
                         std::span<const RunResult> runs, const AggregateResult& agg,
                         const BaselineReference* baseline) {
    std::filesystem::create_directories(out_dir);
    open_out(out_dir / "report.json") << sweep_report_json(cfg, train, test, runs, agg);

    {
        auto out = open_out(out_dir / "runs.csv");
        out << "condition,seed,macro_f1,overall_accuracy,macro_recall,macro_precision,status,iterations\n";
        for (const auto& r : runs) {
            out << r.condition.label() << ',' << (r.seed ? std::to_string(*r.seed) : "") << ','
                << num(r.summary.macro_f1) << ',' << num(r.summary.overall_accuracy) << ','
                << num(r.summary.macro_recall) << ',' << num(r.summary.macro_precision) << ','
                << to_string(r.status) << ',' << r.iterations << '\n';
        }
    }
    {
        auto out = open_out(out_dir / "timings.csv");
        out << "condition,seed,duration_seconds\n";
        for (const auto& r : runs) {
            out << r.condition.label() << ',' << (r.seed ? std::to_string(*r.seed) : "") << ','
                << num(r.duration_seconds) << '\n';
        }
    }
    {
        auto out = open_out(out_dir / "summary.csv");
        out << "condition,runs,mean_macro_f1,std_macro_f1,mean_overall_accuracy,std_overall_accuracy,"
               "mean_macro_recall,std_macro_recall,converged_runs\n";
        for (const auto& a : agg.conditions) {
            out << a.condition.label() << ',' << a.runs << ',' << num(a.macro_f1.mean) << ','
                << num(a.macro_f1.std) << ',' << num(a.overall_accuracy.mean) << ','
                << num(a.overall_accuracy.std) << ',' << num(a.macro_recall.mean) << ','
                << num(a.macro_recall.std) << ',' << a.converged_runs << '\n';
        }
    }
    {
        auto out = open_out(out_dir / "learning_curve.csv");
        out << "budget,mean_macro_f1,std_macro_f1,mean_overall_accuracy,std_overall_accuracy,runs\n";
        for (const auto& a : agg.conditions) {
            if (a.condition.kind != Condition::Kind::budget) {
                continue;
            }
            out << a.condition.budget << ',' << num(a.macro_f1.mean) << ',' << num(a.macro_f1.std)
                << ',' << num(a.overall_accuracy.mean) << ',' << num(a.overall_accuracy.std) << ','
                << a.runs << '\n';
        }
    }
    for (const auto& a : agg.conditions) {
        write_matrix_csv(a.mean_confusion, train.classes,
                         out_dir / ("confusion_" + condition_file_stem(a.condition) + ".csv"));
        if (baseline) {
            const auto cmp = compare_to_baseline(a, train.classes, *baseline);
            write_delta_csv(cmp, out_dir / ("delta_f1_" + condition_file_stem(a.condition) + ".csv"));
        }
    }
}

SweepSummary load_sweep_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        const auto j = nlohmann::json::parse(in);
        SweepSummary s;
        s.classes = j.at("classes").get<std::vector<std::string>>();
        const std::size_t K = s.classes.size();
        for (const auto& aj : j.at("aggregates")) {
            ConditionAggregate a;
            a.condition = Condition::parse(aj.at("condition").get<std::string>());
            a.runs = aj.at("runs").get<std::size_t>();
            a.single_run = aj.at("single_run").get<bool>();
            a.converged_runs = aj.value("converged_runs", std::size_t{0});
            a.macro_f1 = stat_from(aj.at("macro_f1"));
            a.overall_accuracy = stat_from(aj.at("overall_accuracy"));
            a.macro_recall = stat_from(aj.at("macro_recall"));
            a.macro_precision = stat_from(aj.at("macro_precision"));
            const auto means = aj.at("per_class_f1").at("mean").get<std::vector<double>>();
            const auto stds = aj.at("per_class_f1").at("std").get<std::vector<double>>();
            if (means.size() != K || stds.size() != K) {
                throw ConsistencyError(path.string() + ": per-class F1 length differs from catalog");
            }
            for (std::size_t c = 0; c < K; ++c) {
                a.per_class_f1.push_back({means[c], stds[c]});
            }
            a.test_support = aj.at("test_support").get<std::vector<std::uint64_t>>();
            const auto cm = aj.at("mean_confusion").get<std::vector<std::vector<double>>>();
            a.mean_confusion = Matrix(K, K);
            for (std::size_t r = 0; r < cm.size() && r < K; ++r) {
                for (std::size_t c = 0; c < cm[r].size() && c < K; ++c) {
                    a.mean_confusion(r, c) = cm[r][c];
                }
            }
            s.aggregates.conditions.push_back(std::move(a));
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

Comparison compare_to_baseline(const ConditionAggregate& agg, const std::vector<std::string>& classes,
                               const BaselineReference& baseline) {
    std::vector<double> ours;
    for (const auto& s : agg.per_class_f1) {
        ours.push_back(s.mean);
    }
    const auto delta = delta_f1(ours, classes, baseline);

    Comparison cmp;
    cmp.condition = agg.condition;
    cmp.baseline_name = baseline.name;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        ComparisonRow row;
        row.class_name = classes[c];
        row.support = c < agg.test_support.size() ? agg.test_support[c] : 0;
        row.ours = agg.per_class_f1[c];
        const auto at = std::find(baseline.classes.begin(), baseline.classes.end(), classes[c]);
        row.baseline = baseline.per_class_f1[static_cast<std::size_t>(at - baseline.classes.begin())];
        row.delta = delta[c];
        row.outperforms = delta[c] > 0.0;
        cmp.outperformed_classes += row.outperforms ? 1 : 0;
        cmp.rows.push_back(std::move(row));
    }
    cmp.ours_macro = agg.macro_f1;
    cmp.baseline_macro = baseline.macro_f1;
    cmp.macro_delta = agg.macro_f1.mean - baseline.macro_f1;
    return cmp;
}

const ConditionAggregate& default_comparison_condition(const AggregateResult& agg) {
    if (agg.conditions.empty()) {
        throw DegenerateInputError("report holds no aggregates");
    }
    for (auto kind : {Condition::Kind::fraction, Condition::Kind::full}) {
        for (const auto& a : agg.conditions) {
            if (a.condition.kind == kind) {
                return a;
            }
        }
    }
    return agg.conditions.back();
}

std::string format_comparison(const Comparison& cmp) {
    std::ostringstream out;
    char line[256];
    out << "condition " << cmp.condition.label() << " vs " << cmp.baseline_name << '\n';
    std::snprintf(line, sizeof line, "%-18s %6s %17s %9s %8s\n", "class", "n", "ours F1", "baseline",
                  "dF1");
    out << line;
    for (const auto& r : cmp.rows) {
        std::snprintf(line, sizeof line, "%-18s %6llu %8.3f +- %5.3f %9.3f %+8.3f%s\n",
                      r.class_name.c_str(), static_cast<unsigned long long>(r.support), r.ours.mean,
                      r.ours.std, r.baseline, r.delta, r.outperforms ? " *" : "");
        out << line;
    }
    std::snprintf(line, sizeof line, "%-18s %6s %8.3f +- %5.3f %9.3f %+8.3f\n", "macro avg", "",
                  cmp.ours_macro.mean, cmp.ours_macro.std, cmp.baseline_macro, cmp.macro_delta);
    out << line;
    out << "outperforms baseline on " << cmp.outperformed_classes << " of " << cmp.rows.size()
        << " classes (*)\n";
    return out.str();
}

void write_comparison_csv(const Comparison& cmp, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "class,support,ours_mean_f1,ours_std_f1,baseline_f1,delta_f1,outperforms\n";
    for (const auto& r : cmp.rows) {
        out << r.class_name << ',' << r.support << ',' << num(r.ours.mean) << ',' << num(r.ours.std)
            << ',' << num(r.baseline) << ',' << num(r.delta) << ',' << (r.outperforms ? 1 : 0) << '\n';
    }
    out << "macro_avg,," << num(cmp.ours_macro.mean) << ',' << num(cmp.ours_macro.std) << ','
        << num(cmp.baseline_macro) << ',' << num(cmp.macro_delta) << ','
        << (cmp.macro_delta > 0.0 ? 1 : 0) << '\n';
}

void write_delta_csv(const Comparison& cmp, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "class,delta_f1\n";
    for (const auto& r : cmp.rows) {
        out << r.class_name << ',' << num(r.delta) << '\n';
    }
}

}  // namespace lprobe
