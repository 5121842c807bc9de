#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lprobe/embedding_store.hpp"
#include "lprobe/logreg.hpp"
#include "lprobe/metrics.hpp"
#include "lprobe/sampling.hpp"

namespace lprobe {

struct ExperimentConfig {
    std::vector<Condition> conditions;
    std::vector<std::uint64_t> seeds;  // default 0..99
    ProbeConfig probe;
    bool emit_selections = false;
    std::size_t parallelism = 1;  // worker threads; does not affect results

    ExperimentConfig();
    void validate() const;
};

// Inclusive "a..b", or a single integer.
std::vector<std::uint64_t> parse_seed_range(const std::string& text);

struct RunResult {
    Condition condition;
    std::optional<std::uint64_t> seed;  // empty for full supervision
    std::vector<std::size_t> effective_counts;
    OptimizeStatus status = OptimizeStatus::iteration_cap;
    std::size_t iterations = 0;
    double objective = 0.0;
    double grad_inf_norm = 0.0;
    ConfusionMatrix confusion;
    ClassMetrics metrics;
    MacroSummary summary;
    double duration_seconds = 0.0;
    std::vector<std::size_t> selection;  // filled only when requested
};

// Thrown by run_sweep; names the (condition, seed) that failed.
class SweepError : public Error {
public:
    SweepError(const Condition& condition, std::optional<std::uint64_t> seed, const std::string& cause);

    const Condition& condition() const noexcept { return condition_; }
    std::optional<std::uint64_t> seed() const noexcept { return seed_; }

private:
    Condition condition_;
    std::optional<std::uint64_t> seed_;
};

RunResult run_single(const EmbeddingDataset& train, const EmbeddingDataset& test,
                     const Condition& condition, std::uint64_t seed, const ProbeConfig& probe,
                     bool keep_selection = false);

/// One result per (condition, seed), condition-major, seed-minor; `full`
/// contributes a single seedless run. Output order and content do not depend
/// on cfg.parallelism.
std::vector<RunResult> run_sweep(const ExperimentConfig& cfg, const EmbeddingDataset& train,
                                 const EmbeddingDataset& test);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample (n - 1); 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

struct ConditionAggregate {
    Condition condition;
    std::size_t runs = 0;
    bool single_run = false;  // std undefined, reported as 0
    std::size_t converged_runs = 0;
    MeanStd macro_f1;
    MeanStd overall_accuracy;
    MeanStd macro_recall;
    MeanStd macro_precision;
    std::vector<MeanStd> per_class_f1;
    std::vector<std::uint64_t> test_support;
    Matrix mean_confusion;  // mean of row-normalized matrices
};

struct AggregateResult {
    std::vector<ConditionAggregate> conditions;  // first-appearance order

    const ConditionAggregate* find(const Condition& c) const;
};

AggregateResult aggregate(std::span<const RunResult> results);

}  // namespace lprobe
