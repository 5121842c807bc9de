#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lprobe/embedding_store.hpp"
#include "lprobe/logreg.hpp"
#include "lprobe/metrics.hpp"
#include "lprobe/report.hpp"
#include "lprobe/runner.hpp"

namespace lprobe::cli {

namespace {

constexpr double kRowNormTolerance = 1e-5;

// Raised for failed checks that should exit with validation_failure.
class ValidationFailure : public lprobe::Error {
public:
    using lprobe::Error::Error;
};

// Bad flag values or config contents; exits with usage_error.
class UsageFailure : public lprobe::Error {
public:
    using lprobe::Error::Error;
};

EmbeddingDataset load_any(const std::string& path, SplitTag split) {
    const auto ext = std::filesystem::path(path).extension().string();
    return ext == ".csv" ? load_csv(path, split) : load_binary(path, split);
}

// Loads a train/test pair onto the training catalog and checks row norms.
std::pair<EmbeddingDataset, EmbeddingDataset> load_pair(const std::string& train_path,
                                                        const std::string& test_path,
                                                        bool normalize) {
    auto train = load_any(train_path, SplitTag::train);
    auto test = with_catalog(load_any(test_path, SplitTag::test), train.classes);
    if (normalize) {
        train = normalize_rows(train);
        test = normalize_rows(test);
    }
    for (const auto* ds : {&train, &test}) {
        const auto rn = row_norm_deviation(*ds);
        if (rn.worst_deviation > kRowNormTolerance) {
            throw ValidationFailure(std::string(to_string(ds->split)) + " row " +
                                    std::to_string(rn.worst_row) + " is not unit-norm (|norm-1| = " +
                                    std::to_string(rn.worst_deviation) +
                                    "); pass --normalize to normalize on load");
        }
    }
    if (train.dim() != test.dim()) {
        throw ValidationFailure("train and test dimensions differ");
    }
    return {std::move(train), std::move(test)};
}

std::vector<std::size_t> parse_budget_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        out.push_back(Condition::parse("budget:" + item).budget);
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

// --- validate ---------------------------------------------------------------

struct ValidateArgs {
    std::string train;
    std::string test;
    std::string manifest;
};

int do_validate(const ValidateArgs& a, std::ostream& out) {
    bool all_ok = true;
    auto check = [&](const std::string& name, bool ok, const std::string& detail) {
        out << (ok ? "[ok]   " : "[FAIL] ") << name << (detail.empty() ? "" : ": " + detail) << '\n';
        all_ok = all_ok && ok;
    };

    std::optional<EmbeddingDataset> train;
    std::optional<EmbeddingDataset> test;
    for (auto [path, split, slot] : {std::tuple{a.train, SplitTag::train, &train},
                                     std::tuple{a.test, SplitTag::test, &test}}) {
        const std::string name = std::string("load-") + to_string(split);
        try {
            *slot = load_any(path, split);
            check(name, true, path);
        } catch (const lprobe::Error& e) {
            check(name, false, e.what());
        }
    }

    for (const auto* ds : {&train, &test}) {
        if (!*ds) {
            continue;
        }
        const auto& d = **ds;
        out << to_string(d.split) << ": n=" << d.rows() << " d=" << d.dim() << " K=" << d.num_classes()
            << '\n';
        const auto counts = d.class_counts();
        for (std::size_t c = 0; c < counts.size(); ++c) {
            out << "  " << d.classes[c] << ' ' << counts[c] << '\n';
        }
        const auto rn = row_norm_deviation(d);
        char buf[128];
        std::snprintf(buf, sizeof buf, "worst |norm-1| = %.3g at row %zu", rn.worst_deviation,
                      rn.worst_row);
        check(std::string("row-norm-") + to_string(d.split), rn.worst_deviation <= kRowNormTolerance, buf);
        bool all_present = true;
        std::string empty;
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (counts[c] == 0) {
                all_present = false;
                empty += (empty.empty() ? "" : ", ") + d.classes[c];
            }
        }
        check(std::string("class-nonempty-") + to_string(d.split), all_present,
              all_present ? "" : "no rows for " + empty);
    }

    if (train && test) {
        std::string detail;
        bool match = train->classes == test->classes;
        if (!match) {
            try {
                with_catalog(*test, train->classes);
                detail = "same classes in a different order";
            } catch (const lprobe::Error& e) {
                detail = e.what();
            }
        }
        check("catalog-match", match, detail);
        check("dim-match", train->dim() == test->dim(),
              std::to_string(train->dim()) + " vs " + std::to_string(test->dim()));
    }

    if (!a.manifest.empty()) {
        try {
            const auto m = load_manifest(a.manifest);
            const auto problems = verify_manifest(m, std::filesystem::path(a.manifest).parent_path());
            std::string detail;
            for (const auto& p : problems) {
                detail += (detail.empty() ? "" : "; ") + p;
            }
            check("manifest", problems.empty(), detail);
            if (train && m.dim != train->dim()) {
                check("manifest-dim", false, "manifest dim " + std::to_string(m.dim));
            }
        } catch (const lprobe::Error& e) {
            check("manifest", false, e.what());
        }
    }
    return all_ok ? ok : validation_failure;
}

// --- ingest-csv / export-embeddings -----------------------------------------

int do_ingest(const std::string& csv, const std::string& out_path, bool normalize, std::ostream& out) {
    auto ds = load_csv(csv);
    if (normalize) {
        ds = normalize_rows(ds);
    }
    save_binary(ds, out_path);
    out << "wrote " << out_path << ": n=" << ds.rows() << " d=" << ds.dim() << " K=" << ds.num_classes()
        << " checksum=" << file_checksum(out_path) << '\n';
    return ok;
}

int do_export(const std::string& data, const std::string& out_path, std::ostream& out) {
    const auto ds = load_any(data, SplitTag::unsplit);
    save_csv(ds, out_path);
    out << "wrote " << out_path << ": " << ds.rows() << " rows\n";
    return ok;
}

// --- train ------------------------------------------------------------------

struct ProbeArgs {
    double C = 10.0;
    std::string weighting = "balanced";
    std::size_t max_iter = 100;
    double grad_tol = 1e-4;

    ProbeConfig config() const {
        ProbeConfig p;
        p.C = C;
        p.class_weighting = parse_weighting(weighting);
        p.max_iterations = max_iter;
        p.grad_tolerance = grad_tol;
        p.validate();
        return p;
    }
};

void add_probe_options(CLI::App* app, ProbeArgs& p) {
    app->add_option("--C", p.C, "Inverse L2 regularization strength")->check(CLI::PositiveNumber);
    app->add_option("--weighting", p.weighting, "Class weighting")
        ->check(CLI::IsMember({"balanced", "uniform"}));
    app->add_option("--max-iter", p.max_iter, "L-BFGS iteration cap")->check(CLI::PositiveNumber);
    app->add_option("--grad-tol", p.grad_tol, "Gradient infinity-norm tolerance");
}

struct TrainArgs {
    std::string train;
    std::string test;
    std::size_t budget = 0;
    double fraction = 0.0;
    bool full = false;
    std::uint64_t seed = 0;
    bool normalize = false;
    std::string save_model;
    ProbeArgs probe;
};

int do_train(const TrainArgs& a, std::ostream& out) {
    auto [train, test] = load_pair(a.train, a.test, a.normalize);
    Condition cond = Condition::full_supervision();
    if (a.budget > 0) {
        cond = Condition::per_class_budget(a.budget);
    } else if (a.fraction > 0.0) {
        cond = Condition::fraction(a.fraction);
    }
    ProbeConfig probe;
    try {
        probe = a.probe.config();
    } catch (const lprobe::Error& e) {
        throw UsageFailure(e.what());
    }

    std::vector<std::size_t> selection;
    switch (cond.kind) {
        case Condition::Kind::budget: selection = budget_sample(train, a.budget, a.seed).selected; break;
        case Condition::Kind::fraction:
            selection = stratified_split(train, a.fraction, a.seed).first.selected;
            break;
        case Condition::Kind::full:
            for (std::size_t i = 0; i < train.rows(); ++i) {
                selection.push_back(i);
            }
            break;
    }
    const auto fitted = fit(train, selection, probe);
    const auto pred = predict(fitted.params, test.data);
    const auto cm = confusion(test.labels, pred, test.num_classes());
    const auto metrics = per_class_prf(cm);
    const auto summary = summarize(metrics, cm);

    out << "condition " << cond.label() << " seed " << a.seed << " rows " << selection.size() << '\n';
    out << "fit " << to_string(fitted.outcome.status) << " after " << fitted.outcome.iterations_used
        << " iterations, objective " << fitted.outcome.f_final << ", |g|inf "
        << fitted.outcome.grad_inf_norm << '\n';
    char line[160];
    for (std::size_t c = 0; c < test.num_classes(); ++c) {
        std::snprintf(line, sizeof line, "  %-18s P %.3f R %.3f F1 %.3f n %llu\n", test.classes[c].c_str(),
                      metrics.precision[c], metrics.recall[c], metrics.f1[c],
                      static_cast<unsigned long long>(metrics.support[c]));
        out << line;
    }
    std::snprintf(line, sizeof line, "macro F1 %.4f  accuracy %.4f  balanced accuracy %.4f\n",
                  summary.macro_f1, summary.overall_accuracy, summary.macro_recall);
    out << line;
    if (!a.save_model.empty()) {
        save_model_json(fitted.params, a.save_model);
        out << "model written to " << a.save_model << '\n';
    }
    return ok;
}

// --- sweep ------------------------------------------------------------------

struct SweepArgs {
    std::string train;
    std::string test;
    std::string config;
    std::string budgets;
    std::string seeds;
    double fraction = 0.0;
    bool full = false;
    std::size_t jobs = 1;
    bool emit_selections = false;
    bool normalize = false;
    std::string baseline;
    std::string out_dir;
    ProbeArgs probe;
};

ExperimentConfig build_experiment(const SweepArgs& a, const CLI::App& app) {
    // Config file first; inline flags override it.
    std::vector<std::size_t> budgets;
    std::optional<double> fraction;
    bool full = false;
    std::string seeds = "0..99";
    ProbeArgs probe;
    std::size_t jobs = 1;
    bool emit = false;

    if (!a.config.empty()) {
        std::ifstream in(a.config);
        if (!in) {
            throw IoError("cannot open " + a.config);
        }
        try {
            const auto j = nlohmann::json::parse(in);
            budgets = j.value("budgets", budgets);
            if (j.contains("fraction") && !j["fraction"].is_null()) {
                fraction = j["fraction"].get<double>();
            }
            full = j.value("full", full);
            if (j.contains("seeds")) {
                seeds = j["seeds"].is_string() ? j["seeds"].get<std::string>()
                                               : std::to_string(j["seeds"].get<std::uint64_t>());
            }
            probe.C = j.value("C", probe.C);
            probe.weighting = j.value("weighting", probe.weighting);
            probe.max_iter = j.value("max_iterations", probe.max_iter);
            probe.grad_tol = j.value("grad_tolerance", probe.grad_tol);
            jobs = j.value("jobs", jobs);
            emit = j.value("emit_selections", emit);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(a.config + ": " + e.what());
        }
    }
    if (app.count("--budgets")) {
        budgets = parse_budget_list(a.budgets);
    }
    if (app.count("--fraction")) {
        fraction = a.fraction;
    }
    if (app.count("--full")) {
        full = a.full;
    }
    if (app.count("--seeds")) {
        seeds = a.seeds;
    }
    if (app.count("--C")) {
        probe.C = a.probe.C;
    }
    if (app.count("--weighting")) {
        probe.weighting = a.probe.weighting;
    }
    if (app.count("--max-iter")) {
        probe.max_iter = a.probe.max_iter;
    }
    if (app.count("--grad-tol")) {
        probe.grad_tol = a.probe.grad_tol;
    }
    if (app.count("--jobs")) {
        jobs = a.jobs;
    }
    if (app.count("--emit-selections")) {
        emit = a.emit_selections;
    }

    ExperimentConfig cfg;
    for (auto b : budgets) {
        cfg.conditions.push_back(Condition::per_class_budget(b));
    }
    if (fraction) {
        cfg.conditions.push_back(Condition::fraction(*fraction));
    }
    if (full) {
        cfg.conditions.push_back(Condition::full_supervision());
    }
    cfg.seeds = parse_seed_range(seeds);
    cfg.probe = probe.config();
    cfg.parallelism = std::max<std::size_t>(1, jobs);
    cfg.emit_selections = emit;
    cfg.validate();
    return cfg;
}

int do_sweep(const SweepArgs& a, const CLI::App& app, std::ostream& out) {
    ExperimentConfig cfg;
    try {
        cfg = build_experiment(a, app);
    } catch (const IoError&) {
        throw;
    } catch (const lprobe::Error& e) {
        throw UsageFailure(e.what());
    }
    auto [train, test] = load_pair(a.train, a.test, a.normalize);
    std::optional<BaselineReference> baseline;
    if (!a.baseline.empty()) {
        baseline = load_baseline(a.baseline);
    }

    const auto runs = run_sweep(cfg, train, test);
    const auto agg = aggregate(runs);
    write_sweep_outputs(a.out_dir, cfg, train, test, runs, agg, baseline ? &*baseline : nullptr);

    char line[160];
    out << "condition            runs  macro F1          accuracy          converged\n";
    for (const auto& c : agg.conditions) {
        std::snprintf(line, sizeof line, "%-20s %4zu  %.3f +- %.3f   %.3f +- %.3f   %zu\n",
                      c.condition.label().c_str(), c.runs, c.macro_f1.mean, c.macro_f1.std,
                      c.overall_accuracy.mean, c.overall_accuracy.std, c.converged_runs);
        out << line;
    }
    out << "outputs written to " << a.out_dir << '\n';
    return ok;
}

// --- report -----------------------------------------------------------------

struct ReportArgs {
    std::string runs;
    std::string baseline;
    std::string condition;
    std::string out_dir;
};

int do_report(const ReportArgs& a, std::ostream& out) {
    const auto sweep = load_sweep_report(a.runs);
    const auto baseline = load_baseline(a.baseline);
    const ConditionAggregate* agg = nullptr;
    if (a.condition.empty()) {
        agg = &default_comparison_condition(sweep.aggregates);
    } else {
        agg = sweep.aggregates.find(Condition::parse(a.condition));
        if (!agg) {
            throw ConsistencyError("report holds no condition '" + a.condition + "'");
        }
    }
    const auto cmp = compare_to_baseline(*agg, sweep.classes, baseline);
    out << format_comparison(cmp);
    if (!a.out_dir.empty()) {
        std::filesystem::create_directories(a.out_dir);
        const auto stem = condition_file_stem(cmp.condition);
        write_comparison_csv(cmp, std::filesystem::path(a.out_dir) / ("comparison_" + stem + ".csv"));
        write_delta_csv(cmp, std::filesystem::path(a.out_dir) / ("delta_f1_" + stem + ".csv"));
    }
    return ok;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Linear-probe label-efficiency benchmark on frozen embeddings", "lprobe"};
    app.require_subcommand(1);

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "Check an embedding train/test pair");
    validate->add_option("--train", va.train)->required();
    validate->add_option("--test", va.test)->required();
    validate->add_option("--manifest", va.manifest);

    std::string csv_in, emb_out;
    bool ingest_normalize = false;
    auto* ingest = app.add_subcommand("ingest-csv", "Convert a label,f0.. CSV to EMB1");
    ingest->add_option("--csv", csv_in)->required();
    ingest->add_option("--out", emb_out)->required();
    ingest->add_flag("--normalize", ingest_normalize, "L2-normalize rows before writing");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Fit one probe and score it on the test split");
    train->add_option("--train", ta.train)->required();
    train->add_option("--test", ta.test)->required();
    auto* t_budget = train->add_option("--budget", ta.budget, "Examples per class")
                         ->check(CLI::PositiveNumber);
    auto* t_fraction = train->add_option("--fraction", ta.fraction, "Stratified train share")
                           ->check(CLI::Range(0.0, 1.0));
    auto* t_full = train->add_flag("--full", ta.full, "Use every training row");
    t_budget->excludes(t_fraction)->excludes(t_full);
    t_fraction->excludes(t_full);
    train->add_option("--seed", ta.seed);
    train->add_flag("--normalize", ta.normalize);
    train->add_option("--save-model", ta.save_model, "Write fitted parameters as JSON");
    add_probe_options(train, ta.probe);

    SweepArgs sa;
    auto* sweep = app.add_subcommand("sweep", "Run conditions x seeds and write reports");
    sweep->add_option("--train", sa.train)->required();
    sweep->add_option("--test", sa.test)->required();
    sweep->add_option("--config", sa.config, "JSON config; inline flags win");
    sweep->add_option("--budgets", sa.budgets, "Comma-separated per-class budgets");
    sweep->add_option("--seeds", sa.seeds, "Inclusive seed range a..b (default 0..99)");
    sweep->add_option("--fraction", sa.fraction, "Add a stratified fractional condition")
        ->check(CLI::Range(0.0, 1.0));
    sweep->add_flag("--full", sa.full, "Add the single full-supervision run");
    sweep->add_option("--jobs", sa.jobs, "Worker threads")->envname("LPROBE_JOBS")->check(CLI::PositiveNumber);
    sweep->add_flag("--emit-selections", sa.emit_selections, "Record selected row indices");
    sweep->add_flag("--normalize", sa.normalize);
    sweep->add_option("--baseline", sa.baseline, "Baseline JSON for delta-F1 outputs");
    sweep->add_option("--out-dir", sa.out_dir)->required();
    add_probe_options(sweep, sa.probe);

    ReportArgs ra;
    auto* report = app.add_subcommand("report", "Compare sweep aggregates with a baseline");
    report->add_option("--runs", ra.runs, "report.json from a sweep")->required();
    report->add_option("--baseline", ra.baseline)->required();
    report->add_option("--condition", ra.condition, "e.g. fraction:0.8, full, budget:21");
    report->add_option("--out-dir", ra.out_dir, "Write comparison and delta CSVs here");

    std::string export_in, export_out;
    auto* exporter = app.add_subcommand("export-embeddings", "Write embeddings and labels as CSV");
    exporter->add_option("--data", export_in)->required();
    exporter->add_option("--out", export_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return usage_error;
    }

    try {
        if (*validate) {
            return do_validate(va, out);
        }
        if (*ingest) {
            return do_ingest(csv_in, emb_out, ingest_normalize, out);
        }
        if (*train) {
            if (t_budget->count() + t_fraction->count() + t_full->count() == 0) {
                err << "train: one of --budget, --fraction or --full is required\n";
                return usage_error;
            }
            return do_train(ta, out);
        }
        if (*sweep) {
            return do_sweep(sa, *sweep, out);
        }
        if (*report) {
            return do_report(ra, out);
        }
        if (*exporter) {
            return do_export(export_in, export_out, out);
        }
    } catch (const ValidationFailure& e) {
        err << "validation failed: " << e.what() << '\n';
        return validation_failure;
    } catch (const SweepError& e) {
        err << "error: " << e.what() << '\n';
        return runtime_error;
    } catch (const UsageFailure& e) {
        err << "usage error: " << e.what() << '\n';
        return usage_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return runtime_error;
    }
    return usage_error;
}

}  // namespace lprobe::cli
