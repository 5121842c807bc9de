#include "lprobe/runner.hpp"

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cmath>
#include <exception>
#include <numeric>

namespace lprobe {

namespace {

std::uint64_t parse_u64(const std::string& s, const std::string& context) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ParseError("bad seed '" + s + "' in '" + context + "'");
    }
    return v;
}

void require_compatible(const EmbeddingDataset& train, const EmbeddingDataset& test) {
    if (train.classes != test.classes) {
        throw ConsistencyError("train and test class catalogs differ");
    }
    if (train.dim() != test.dim()) {
        throw ConsistencyError("train and test dimensions differ");
    }
}

struct Job {
    Condition condition;
    std::optional<std::uint64_t> seed;
};

}  // namespace

ExperimentConfig::ExperimentConfig() : seeds(100) {
    std::iota(seeds.begin(), seeds.end(), std::uint64_t{0});
}

void ExperimentConfig::validate() const {
    if (conditions.empty()) {
        throw ConsistencyError("experiment needs at least one condition");
    }
    if (seeds.empty()) {
        throw ConsistencyError("experiment needs at least one seed");
    }
    std::size_t full = 0;
    for (const auto& c : conditions) {
        full += c.kind == Condition::Kind::full ? 1 : 0;
        if (c.kind == Condition::Kind::budget && c.budget == 0) {
            throw ConsistencyError("budgets must be positive");
        }
        if (c.kind == Condition::Kind::fraction && !(c.train_share > 0.0 && c.train_share < 1.0)) {
            throw ConsistencyError("fraction must lie strictly between 0 and 1");
        }
    }
    if (full > 1) {
        throw ConsistencyError("the full-supervision condition may appear only once");
    }
    probe.validate();
}

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
    const auto dots = text.find("..");
    if (dots == std::string::npos) {
        return {parse_u64(text, text)};
    }
    const auto first = parse_u64(text.substr(0, dots), text);
    const auto last = parse_u64(text.substr(dots + 2), text);
    if (last < first) {
        throw ParseError("empty seed range '" + text + "'");
    }
    std::vector<std::uint64_t> seeds;
    for (auto s = first;; ++s) {
        seeds.push_back(s);
        if (s == last) {
            break;
        }
    }
    return seeds;
}

SweepError::SweepError(const Condition& condition, std::optional<std::uint64_t> seed,
                       const std::string& cause)
    : Error("run " + condition.label() + " seed " + (seed ? std::to_string(*seed) : "-") +
            " failed: " + cause),
      condition_(condition),
      seed_(seed) {}

RunResult run_single(const EmbeddingDataset& train, const EmbeddingDataset& test,
                     const Condition& condition, std::uint64_t seed, const ProbeConfig& probe,
                     bool keep_selection) {
    require_compatible(train, test);
    const auto start = std::chrono::steady_clock::now();

    RunResult r;
    r.condition = condition;
    std::vector<std::size_t> selection;
    switch (condition.kind) {
        case Condition::Kind::budget: {
            auto sel = budget_sample(train, condition.budget, seed);
            r.effective_counts = std::move(sel.effective_counts);
            selection = std::move(sel.selected);
            r.seed = seed;
            break;
        }
        case Condition::Kind::fraction: {
            // The held-out side of the split is not used at run time.
            auto [fit_side, held_out] = stratified_split(train, condition.train_share, seed);
            r.effective_counts = std::move(fit_side.effective_counts);
            selection = std::move(fit_side.selected);
            r.seed = seed;
            break;
        }
        case Condition::Kind::full: {
            selection.resize(train.rows());
            std::iota(selection.begin(), selection.end(), std::size_t{0});
            r.effective_counts = train.class_counts();
            break;
        }
    }

    auto fitted = fit(train, selection, probe);
    r.status = fitted.outcome.status;
    r.iterations = fitted.outcome.iterations_used;
    r.objective = fitted.outcome.f_final;
    r.grad_inf_norm = fitted.outcome.grad_inf_norm;

    const auto predicted = predict(fitted.params, test.data);
    r.confusion = confusion(test.labels, predicted, test.num_classes());
    r.metrics = per_class_prf(r.confusion);
    r.summary = summarize(r.metrics, r.confusion);
    if (keep_selection) {
        r.selection = std::move(selection);
    }
    r.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::vector<RunResult> run_sweep(const ExperimentConfig& cfg, const EmbeddingDataset& train,
                                 const EmbeddingDataset& test) {
    cfg.validate();
    require_compatible(train, test);

    std::vector<Job> jobs;
    for (const auto& c : cfg.conditions) {
        if (c.kind == Condition::Kind::full) {
            jobs.push_back({c, std::nullopt});
            continue;
        }
        for (auto s : cfg.seeds) {
            jobs.push_back({c, s});
        }
    }

    std::vector<RunResult> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    const auto n = static_cast<std::ptrdiff_t>(jobs.size());
    const int workers = static_cast<int>(std::max<std::size_t>(1, cfg.parallelism));

#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (workers > 1)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        const auto& job = jobs[static_cast<std::size_t>(k)];
        try {
            results[static_cast<std::size_t>(k)] =
                run_single(train, test, job.condition, job.seed.value_or(0), cfg.probe,
                           cfg.emit_selections);
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    }

    for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (!errors[k]) {
            continue;
        }
        try {
            std::rethrow_exception(errors[k]);
        } catch (const std::exception& e) {
            throw SweepError(jobs[k].condition, jobs[k].seed, e.what());
        }
    }
    return results;
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd out;
    if (values.empty()) {
        return out;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(values.size());
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    // Identical values give exactly 0, whatever rounding the mean picked up.
    if (values.size() > 1 && *lo != *hi) {
        double sq = 0.0;
        for (double v : values) {
            sq += (v - out.mean) * (v - out.mean);
        }
        out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return out;
}

const ConditionAggregate* AggregateResult::find(const Condition& c) const {
    for (const auto& a : conditions) {
        if (a.condition == c) {
            return &a;
        }
    }
    return nullptr;
}

AggregateResult aggregate(std::span<const RunResult> results) {
    if (results.empty()) {
        throw DegenerateInputError("nothing to aggregate");
    }
    std::vector<Condition> order;
    std::vector<std::vector<const RunResult*>> groups;
    for (const auto& r : results) {
        std::size_t g = 0;
        while (g < order.size() && !(order[g] == r.condition)) {
            ++g;
        }
        if (g == order.size()) {
            order.push_back(r.condition);
            groups.emplace_back();
        }
        groups[g].push_back(&r);
    }

    AggregateResult out;
    for (std::size_t g = 0; g < order.size(); ++g) {
        const auto& runs = groups[g];
        const std::size_t K = runs.front()->metrics.f1.size();
        ConditionAggregate a;
        a.condition = order[g];
        a.runs = runs.size();
        a.single_run = runs.size() == 1;
        a.test_support = runs.front()->metrics.support;
        a.mean_confusion = Matrix(K, K);

        std::vector<double> f1, acc, rec, prec;
        std::vector<std::vector<double>> per_class(K);
        for (const auto* r : runs) {
            if (r->metrics.f1.size() != K) {
                throw ConsistencyError("runs of " + a.condition.label() + " disagree on class count");
            }
            f1.push_back(r->summary.macro_f1);
            acc.push_back(r->summary.overall_accuracy);
            rec.push_back(r->summary.macro_recall);
            prec.push_back(r->summary.macro_precision);
            for (std::size_t c = 0; c < K; ++c) {
                per_class[c].push_back(r->metrics.f1[c]);
            }
            const Matrix norm = r->confusion.row_normalized();
            for (std::size_t e = 0; e < K * K; ++e) {
                a.mean_confusion.values()[e] += norm.values()[e];
            }
            a.converged_runs += r->status == OptimizeStatus::converged ? 1 : 0;
        }
        for (double& v : a.mean_confusion.values()) {
            v /= static_cast<double>(runs.size());
        }
        a.macro_f1 = mean_std(f1);
        a.overall_accuracy = mean_std(acc);
        a.macro_recall = mean_std(rec);
        a.macro_precision = mean_std(prec);
        for (const auto& v : per_class) {
            a.per_class_f1.push_back(mean_std(v));
        }
        out.conditions.push_back(std::move(a));
    }
    return out;
}

}  // namespace lprobe
