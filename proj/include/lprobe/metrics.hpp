#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lprobe/matrix.hpp"

namespace lprobe {

/// Raw counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::uint64_t> counts;  // row-major K x K

    std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * num_classes + pred]; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const {
        return counts[truth * num_classes + pred];
    }
    std::uint64_t total() const noexcept;
    std::uint64_t trace() const noexcept;
    std::vector<std::uint64_t> row_sums() const;

    // Each row divided by its sum; zero rows stay zero.
    Matrix row_normalized() const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct ClassMetrics {
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    std::vector<std::uint64_t> support;
};

struct MacroSummary {
    double macro_f1 = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;  // balanced accuracy
    double overall_accuracy = 0.0;
};

struct BaselineReference {
    std::string name;
    std::vector<std::string> classes;  // file order
    std::vector<double> per_class_f1;
    double macro_f1 = 0.0;
};

ConfusionMatrix confusion(std::span<const std::uint32_t> y_true, std::span<const std::uint32_t> y_pred,
                          std::size_t num_classes);

// Zero denominators give 0 for precision, recall and F1.
ClassMetrics per_class_prf(const ConfusionMatrix& cm);

MacroSummary summarize(const ClassMetrics& metrics, const ConfusionMatrix& cm);

// F1_ours - F1_baseline per class, in the order of `classes`.
std::vector<double> delta_f1(std::span<const double> ours_f1, std::span<const std::string> classes,
                             const BaselineReference& baseline);

// {"name": ..., "per_class_f1": {"<class>": f1, ...}, "macro_f1": ...}
BaselineReference load_baseline(const std::filesystem::path& path);

}  // namespace lprobe
