#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lprobe/metrics.hpp"
#include "lprobe/runner.hpp"

namespace lprobe {

// The sweep report document. Holds only values that are a pure function of
// the inputs, so identical sweeps give byte-identical text; wall-clock
// timings go to timings.csv instead.
std::string sweep_report_json(const ExperimentConfig& cfg, const EmbeddingDataset& train,
                              const EmbeddingDataset& test, std::span<const RunResult> runs,
                              const AggregateResult& agg);

/// Writes into `out_dir`:
///   report.json         config echo, per-run records, aggregates
///   runs.csv            condition,seed,macro_f1,overall_accuracy,macro_recall,...
///   timings.csv         condition,seed,duration_seconds
///   summary.csv         one row per condition (mean/std)
///   learning_curve.csv  budget,mean_macro_f1,std_macro_f1,... (budget conditions)
///   confusion_<cond>.csv  mean row-normalized confusion matrix
///   delta_f1_<cond>.csv   class,delta (only with a baseline)
void write_sweep_outputs(const std::filesystem::path& out_dir, const ExperimentConfig& cfg,
                         const EmbeddingDataset& train, const EmbeddingDataset& test,
                         std::span<const RunResult> runs, const AggregateResult& agg,
                         const BaselineReference* baseline = nullptr);

// "budget:21" -> "budget_21", safe for file names.
std::string condition_file_stem(const Condition& c);

// Aggregates and catalog read back from a report.json.
struct SweepSummary {
    std::vector<std::string> classes;
    AggregateResult aggregates;
};

SweepSummary load_sweep_report(const std::filesystem::path& path);

struct ComparisonRow {
    std::string class_name;
    std::uint64_t support = 0;
    MeanStd ours;
    double baseline = 0.0;
    double delta = 0.0;
    bool outperforms = false;  // delta > 0
};

struct Comparison {
    Condition condition;
    std::string baseline_name;
    std::vector<ComparisonRow> rows;
    MeanStd ours_macro;
    double baseline_macro = 0.0;
    double macro_delta = 0.0;
    std::size_t outperformed_classes = 0;
};

Comparison compare_to_baseline(const ConditionAggregate& agg, const std::vector<std::string>& classes,
                               const BaselineReference& baseline);

// Picks the condition to compare: fraction if present, else full, else the last.
const ConditionAggregate& default_comparison_condition(const AggregateResult& agg);

std::string format_comparison(const Comparison& cmp);
void write_comparison_csv(const Comparison& cmp, const std::filesystem::path& path);
void write_delta_csv(const Comparison& cmp, const std::filesystem::path& path);

}  // namespace lprobe
