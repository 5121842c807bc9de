// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "lprobe/embedding_store.hpp"
#include "lprobe/logreg.hpp"
#include "lprobe/metrics.hpp"
#include "lprobe/optimizer.hpp"
#include "lprobe/report.hpp"
#include "lprobe/runner.hpp"
#include "support.hpp"

using namespace lprobe;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = true;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::vector<std::size_t> all_rows(const EmbeddingDataset& ds) {
    std::vector<std::size_t> r(ds.rows());
    std::iota(r.begin(), r.end(), std::size_t{0});
    return r;
}

testing::NaiveObjective naive_for(const EmbeddingDataset& ds, const std::vector<double>& s, double C) {
    testing::NaiveObjective f;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        f.X.emplace_back(ds.data.row(i).begin(), ds.data.row(i).end());
    }
    f.y = ds.labels;
    f.s = s;
    f.C = C;
    return f;
}

// Analytic gradient against central differences on random small instances.
Verdict gradient_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(101);
    const double Cs[] = {0.1, 1.0, 10.0};
    double worst = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t K = 2 + gen() % 4;
        const std::size_t n = K + gen() % (21 - K);
        const std::size_t d = 1 + gen() % 8;
        const double C = Cs[inst % 3];
        const auto mode = inst % 2 ? ClassWeighting::balanced : ClassWeighting::uniform;
        const auto ds = normalize_rows(testing::random_rows(n, d, K, gen()));
        const auto s = class_weights(ds.class_counts(), mode);
        const ProbeProblem p{ds.data, ds.labels, s, C};
        std::normal_distribution<double> normal;
        std::vector<double> theta(p.num_params());
        for (auto& v : theta) v = normal(gen);

        std::vector<double> g(theta.size()), scratch(theta.size());
        objective_and_gradient(p, theta, g);
        const double h = 1e-6;
        std::vector<double> fd(theta.size());
        double scale = 1e-8;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            auto tp = theta, tm = theta;
            tp[k] += h;
            tm[k] -= h;
            fd[k] = (objective_and_gradient(p, tp, scratch) - objective_and_gradient(p, tm, scratch)) / (2 * h);
            scale = std::max(scale, std::abs(fd[k]));
        }
        for (std::size_t k = 0; k < theta.size(); ++k) {
            worst = std::max(worst, std::abs(g[k] - fd[k]) / scale);
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-5 && secs < 1.0,
            "max rel err " + fmt("%.2e", worst) + ", " + fmt("%.3f", secs) + " s"};
}

double rosenbrock(std::span<const double> x, std::span<double> g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
}

// fit's objective against a long gradient-descent run, plus Rosenbrock.
Verdict optimizer_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(202);
    const double Cs[] = {0.1, 1.0, 10.0};
    double worst = 0.0;
    double fit_secs = 0.0;
    for (int prob = 0; prob < 10; ++prob) {
        const std::size_t K = 2 + gen() % 3;
        const std::size_t per = 5 + gen() % 16;
        const std::size_t d = 2 + gen() % 7;
        auto ds = testing::gaussian_blobs(std::vector<std::size_t>(K, per), d, 0.6, gen(), gen());
        ProbeConfig cfg;
        cfg.C = Cs[prob % 3];
        cfg.class_weighting = prob % 2 ? ClassWeighting::uniform : ClassWeighting::balanced;
        const auto tf = Clock::now();
        const auto r = fit(ds, all_rows(ds), cfg);
        fit_secs += seconds_since(tf);
        const double oracle = testing::gradient_descent_minimum(
            naive_for(ds, class_weights(ds.class_counts(), cfg.class_weighting), cfg.C));
        worst = std::max(worst, std::abs(r.outcome.f_final - oracle) / std::abs(oracle));
    }
    OptimizerConfig oc;
    oc.grad_tolerance = 1e-10;
    oc.max_iterations = 1000;
    const std::vector<double> x0{-1.2, 1.0};
    const auto ros = minimize(rosenbrock, x0, oc);
    const double dist = std::max(std::abs(ros.x_final[0] - 1.0), std::abs(ros.x_final[1] - 1.0));
    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && dist <= 1e-5 && secs < 10.0,
            "max rel gap " + fmt("%.2e", worst) + ", Rosenbrock dist " + fmt("%.2e", dist) + ", " +
                fmt("%.3f", secs) + " s total (" + fmt("%.3f", fit_secs) + " s in fit)"};
}

Verdict metrics_oracle() {
    const std::vector<std::uint32_t> y{0, 0, 1, 1, 2}, p{0, 1, 1, 1, 2};
    const auto cm = confusion(y, p, 3);
    const auto s = summarize(per_class_prf(cm), cm);
    const double expected = (2.0 / 3.0 + 0.8 + 1.0) / 3.0;
    bool ok = std::abs(s.macro_f1 - expected) <= 1e-12;

    std::mt19937_64 gen(303);
    int perfect_ok = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t K = 1 + gen() % 50;
        std::vector<std::uint32_t> labels(1 + gen() % 500);
        for (auto& v : labels) v = static_cast<std::uint32_t>(gen() % K);
        // Every class present, so every summary must be exactly 1.
        for (std::uint32_t c = 0; c < K; ++c) labels.push_back(c);
        const auto pc = confusion(labels, labels, K);
        const auto ps = summarize(per_class_prf(pc), pc);
        perfect_ok += ps.macro_f1 == 1.0 && ps.macro_precision == 1.0 && ps.macro_recall == 1.0 &&
                      ps.overall_accuracy == 1.0;
    }
    ok = ok && perfect_ok == 100;
    return {ok, "macro F1 " + fmt("%.16f", s.macro_f1) + ", perfect-prediction " + std::to_string(perfect_ok) +
                    "/100"};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict protocol_determinism() {
    const auto t0 = Clock::now();
    const auto train = testing::gaussian_blobs({60, 60, 60, 60}, 16, 0.3, 11);
    const auto test = testing::gaussian_blobs({40, 40, 40, 40}, 16, 0.3, 12, 12345, SplitTag::test);
    ExperimentConfig cfg;
    cfg.conditions = {Condition::per_class_budget(3), Condition::per_class_budget(13)};
    cfg.seeds = {0, 1, 2, 3, 4};

    testing::ScratchDir dir("acceptance");
    std::string reports[2];
    std::size_t workers[2] = {1, 4};
    for (int k = 0; k < 2; ++k) {
        cfg.parallelism = workers[k];
        const auto runs = run_sweep(cfg, train, test);
        const auto out = dir / ("w" + std::to_string(workers[k]));
        write_sweep_outputs(out, cfg, train, test, runs, aggregate(runs));
        reports[k] = slurp(out / "report.json");
    }
    const double secs = seconds_since(t0);
    const bool same = !reports[0].empty() && reports[0] == reports[1];
    return {same && secs < 30.0, std::string(same ? "identical" : "DIFFERENT") + " reports (" +
                                     std::to_string(reports[0].size()) + " bytes), " + fmt("%.2f", secs) + " s"};
}

// Monotone within slack: mean[k+1] >= mean[k] - slack * max(std[k], std[k+1]).
bool nondecreasing_with_slack(const std::vector<MeanStd>& curve, double slack) {
    for (std::size_t k = 0; k + 1 < curve.size(); ++k) {
        if (curve[k + 1].mean < curve[k].mean - slack * std::max(curve[k].std, curve[k + 1].std)) {
            return false;
        }
    }
    return true;
}

Verdict synthetic_learning_curve() {
    const auto t0 = Clock::now();
    const auto train = testing::gaussian_blobs({200, 200, 200}, 16, 0.3, 21);
    const auto test = testing::gaussian_blobs({200, 200, 200}, 16, 0.3, 22, 12345, SplitTag::test);
    ExperimentConfig cfg;
    for (std::size_t b : {1, 3, 8, 21}) cfg.conditions.push_back(Condition::per_class_budget(b));
    cfg.seeds.resize(20);
    std::iota(cfg.seeds.begin(), cfg.seeds.end(), std::uint64_t{0});
    const auto agg = aggregate(run_sweep(cfg, train, test));
    std::vector<MeanStd> curve;
    std::string detail;
    for (const auto& a : agg.conditions) {
        curve.push_back(a.macro_f1);
        detail += std::to_string(a.condition.budget) + ":" + fmt("%.3f", a.macro_f1.mean) + "+-" +
                  fmt("%.3f", a.macro_f1.std) + " ";
    }
    const double secs = seconds_since(t0);
    const bool ok = nondecreasing_with_slack(curve, 1.5) && curve.back().mean >= 0.95 && secs < 60.0;
    return {ok, detail + fmt("%.2f", secs) + " s"};
}

// Std of macro F1 over the budget ladder on a real embedding set should fall,
// with at most one rung going up.
Verdict real_data_std_trend() {
    const auto t0 = Clock::now();
    const std::filesystem::path dir = std::filesystem::path(LPROBE_DATA_DIR) / "digits";
    const auto train = load_csv(dir / "train.csv", SplitTag::train);
    const auto test = with_catalog(load_csv(dir / "test.csv", SplitTag::test), train.classes);
    if (train.num_classes() < 10) {
        return {false, "dataset has fewer than 10 classes"};
    }
    ExperimentConfig cfg;
    for (std::size_t b : {1, 2, 3, 5, 8, 13, 21, 34, 55, 89}) cfg.conditions.push_back(Condition::per_class_budget(b));
    const auto agg = aggregate(run_sweep(cfg, train, test));
    int violations = 0;
    std::string detail;
    for (std::size_t k = 0; k < agg.conditions.size(); ++k) {
        const auto& a = agg.conditions[k];
        if (k > 0 && a.macro_f1.std > agg.conditions[k - 1].macro_f1.std) ++violations;
        detail += std::to_string(a.condition.budget) + ":" + fmt("%.3f", a.macro_f1.std) + " ";
    }
    const bool ok = violations <= 1 && agg.conditions.back().macro_f1.std < agg.conditions.front().macro_f1.std;
    return {ok, "digits K=10 d=64, std " + detail + "(" + std::to_string(violations) + " rises), " +
                    fmt("%.1f", seconds_since(t0)) + " s"};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Verdict()>> criteria[] = {
        {"gradient oracle", gradient_oracle},
        {"optimizer oracle", optimizer_oracle},
        {"metrics oracle", metrics_oracle},
        {"protocol determinism", protocol_determinism},
        {"synthetic learning curve", synthetic_learning_curve},
        {"real-data std trend", real_data_std_trend},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s  %-26s %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
        std::fflush(stdout);
        failed += v.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
