#include "lprobe/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "lprobe/rng.hpp"

namespace lprobe {

namespace {

constexpr std::uint64_t kBudgetStream = 1;
constexpr std::uint64_t kSplitStream = 2;

std::vector<std::vector<std::size_t>> rows_by_class(const EmbeddingDataset& ds) {
    std::vector<std::vector<std::size_t>> rows(ds.num_classes());
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        rows[ds.labels[i]].push_back(i);
    }
    for (std::size_t c = 0; c < rows.size(); ++c) {
        if (rows[c].empty()) {
            throw DegenerateInputError("class '" + ds.classes[c] + "' has no training rows");
        }
    }
    return rows;
}

// Moves a uniformly drawn k-subset of `pool` into its first k slots
// (partial Fisher-Yates).
void shuffle_prefix(std::vector<std::size_t>& pool, std::size_t k, CounterRng& rng) {
    for (std::size_t i = 0; i < k && i + 1 < pool.size(); ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
}

void require_trainable(const EmbeddingDataset& ds) {
    if (ds.split == SplitTag::test) {
        throw ConsistencyError("refusing to sample training rows from a test split");
    }
}

}  // namespace

std::string Condition::label() const {
    switch (kind) {
        case Kind::budget: return "budget:" + std::to_string(budget);
        case Kind::fraction: {
            char buf[32];
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, train_share);
            return "fraction:" + std::string(buf, ptr);
        }
        case Kind::full: return "full";
    }
    return "full";
}

Condition Condition::parse(const std::string& label) {
    if (label == "full") {
        return full_supervision();
    }
    const auto colon = label.find(':');
    if (colon == std::string::npos) {
        throw ParseError("unknown condition '" + label + "'");
    }
    const auto kind = label.substr(0, colon);
    const auto value = label.substr(colon + 1);
    if (kind == "budget") {
        std::size_t b = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), b);
        if (ec != std::errc() || ptr != value.data() + value.size() || b == 0) {
            throw ParseError("bad budget in condition '" + label + "'");
        }
        return per_class_budget(b);
    }
    if (kind == "fraction") {
        double share = 0.0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), share);
        if (ec != std::errc() || ptr != value.data() + value.size() || !(share > 0.0 && share < 1.0)) {
            throw ParseError("bad fraction in condition '" + label + "'");
        }
        return fraction(share);
    }
    throw ParseError("unknown condition '" + label + "'");
}

SampleSelection budget_sample(const EmbeddingDataset& ds, std::size_t budget, std::uint64_t seed) {
    require_trainable(ds);
    if (budget == 0) {
        throw DegenerateInputError("budget must be at least 1");
    }
    auto rows = rows_by_class(ds);

    SampleSelection sel;
    sel.seed = seed;
    sel.condition = Condition::per_class_budget(budget);
    sel.effective_counts.resize(rows.size());
    for (std::size_t c = 0; c < rows.size(); ++c) {
        auto& pool = rows[c];
        const auto take = std::min(budget, pool.size());
        CounterRng rng(stream_key(seed, c, kBudgetStream));
        shuffle_prefix(pool, take, rng);
        sel.selected.insert(sel.selected.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
        sel.effective_counts[c] = take;
    }
    std::sort(sel.selected.begin(), sel.selected.end());
    return sel;
}

std::size_t stratified_take(std::size_t n, double train_share) {
    const auto k = static_cast<std::size_t>(std::round(train_share * static_cast<double>(n)));
    return std::clamp<std::size_t>(k, 1, n - 1);
}

std::pair<SampleSelection, SampleSelection> stratified_split(const EmbeddingDataset& ds,
                                                             double train_share,
                                                             std::uint64_t seed) {
    require_trainable(ds);
    if (!(train_share > 0.0 && train_share < 1.0)) {
        throw DegenerateInputError("train share must lie strictly between 0 and 1");
    }
    auto rows = rows_by_class(ds);

    SampleSelection first;
    SampleSelection second;
    first.seed = second.seed = seed;
    first.condition = Condition::fraction(train_share);
    second.condition = Condition::fraction(1.0 - train_share);
    first.effective_counts.resize(rows.size());
    second.effective_counts.resize(rows.size());

    for (std::size_t c = 0; c < rows.size(); ++c) {
        auto& pool = rows[c];
        if (pool.size() < 2) {
            throw DegenerateInputError("class '" + ds.classes[c] +
                                       "' has a single row and cannot be split");
        }
        const auto take = stratified_take(pool.size(), train_share);
        CounterRng rng(stream_key(seed, c, kSplitStream));
        shuffle_prefix(pool, take, rng);
        const auto mid = pool.begin() + static_cast<std::ptrdiff_t>(take);
        first.selected.insert(first.selected.end(), pool.begin(), mid);
        second.selected.insert(second.selected.end(), mid, pool.end());
        first.effective_counts[c] = take;
        second.effective_counts[c] = pool.size() - take;
    }
    std::sort(first.selected.begin(), first.selected.end());
    std::sort(second.selected.begin(), second.selected.end());
    return {std::move(first), std::move(second)};
}

}  // namespace lprobe
