#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lprobe/embedding_store.hpp"

namespace lprobe {

/// Training-set condition for one run.
struct Condition {
    enum class Kind { budget, fraction, full };

    Kind kind = Kind::full;
    std::size_t budget = 0;     // examples per class, Kind::budget
    double train_share = 0.0;   // Kind::fraction

    static Condition per_class_budget(std::size_t b) { return {Kind::budget, b, 0.0}; }
    static Condition fraction(double share) { return {Kind::fraction, 0, share}; }
    static Condition full_supervision() { return {Kind::full, 0, 0.0}; }

    // "budget:21", "fraction:0.8", "full".
    std::string label() const;
    static Condition parse(const std::string& label);

    friend bool operator==(const Condition&, const Condition&) = default;
};

struct SampleSelection {
    std::vector<std::size_t> selected;           // sorted, unique row indices
    std::uint64_t seed = 0;
    Condition condition;
    std::vector<std::size_t> effective_counts;   // per class
};

// min(b, n_c) rows per class, drawn without replacement from stream (seed, c).
SampleSelection budget_sample(const EmbeddingDataset& ds, std::size_t budget, std::uint64_t seed);

// Per class, round(share * n_c) rows (half away from zero, clamped to
// [1, n_c - 1]) go to the first selection and the rest to the second.
std::pair<SampleSelection, SampleSelection> stratified_split(const EmbeddingDataset& ds,
                                                             double train_share,
                                                             std::uint64_t seed);

// Row count on the first side of a stratified split of a class of size n.
std::size_t stratified_take(std::size_t n, double train_share);

}  // namespace lprobe
