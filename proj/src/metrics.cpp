#include "lprobe/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "lprobe/error.hpp"

namespace lprobe {

std::uint64_t ConfusionMatrix::total() const noexcept {
    std::uint64_t t = 0;
    for (auto v : counts) {
        t += v;
    }
    return t;
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
    std::uint64_t t = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        t += counts[c * num_classes + c];
    }
    return t;
}

std::vector<std::uint64_t> ConfusionMatrix::row_sums() const {
    std::vector<std::uint64_t> sums(num_classes, 0);
    for (std::size_t t = 0; t < num_classes; ++t) {
        for (std::size_t p = 0; p < num_classes; ++p) {
            sums[t] += at(t, p);
        }
    }
    return sums;
}

Matrix ConfusionMatrix::row_normalized() const {
    Matrix m(num_classes, num_classes);
    const auto sums = row_sums();
    for (std::size_t t = 0; t < num_classes; ++t) {
        if (sums[t] == 0) {
            continue;
        }
        for (std::size_t p = 0; p < num_classes; ++p) {
            m(t, p) = static_cast<double>(at(t, p)) / static_cast<double>(sums[t]);
        }
    }
    return m;
}

ConfusionMatrix confusion(std::span<const std::uint32_t> y_true, std::span<const std::uint32_t> y_pred,
                          std::size_t num_classes) {
    if (y_true.size() != y_pred.size()) {
        throw ShapeError("confusion: " + std::to_string(y_true.size()) + " true labels but " +
                         std::to_string(y_pred.size()) + " predictions");
    }
    ConfusionMatrix cm{num_classes, std::vector<std::uint64_t>(num_classes * num_classes, 0)};
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] >= num_classes || y_pred[i] >= num_classes) {
            throw ShapeError("confusion: label out of range at position " + std::to_string(i));
        }
        ++cm.at(y_true[i], y_pred[i]);
    }
    return cm;
}

ClassMetrics per_class_prf(const ConfusionMatrix& cm) {
    const std::size_t K = cm.num_classes;
    ClassMetrics m;
    m.precision.assign(K, 0.0);
    m.recall.assign(K, 0.0);
    m.f1.assign(K, 0.0);
    m.support = cm.row_sums();

    std::vector<std::uint64_t> predicted(K, 0);
    for (std::size_t t = 0; t < K; ++t) {
        for (std::size_t p = 0; p < K; ++p) {
            predicted[p] += cm.at(t, p);
        }
    }
    for (std::size_t c = 0; c < K; ++c) {
        const auto tp = static_cast<double>(cm.at(c, c));
        if (predicted[c] > 0) {
            m.precision[c] = tp / static_cast<double>(predicted[c]);
        }
        if (m.support[c] > 0) {
            m.recall[c] = tp / static_cast<double>(m.support[c]);
        }
        const double pr = m.precision[c] + m.recall[c];
        if (pr > 0.0) {
            m.f1[c] = 2.0 * m.precision[c] * m.recall[c] / pr;
        }
    }
    return m;
}

MacroSummary summarize(const ClassMetrics& metrics, const ConfusionMatrix& cm) {
    const std::size_t K = metrics.f1.size();
    if (K != cm.num_classes) {
        throw ConsistencyError("metrics and confusion matrix disagree on the class count");
    }
    const auto total = cm.total();
    if (total == 0 || K == 0) {
        throw DegenerateInputError("cannot summarize zero predictions");
    }
    MacroSummary s;
    for (std::size_t c = 0; c < K; ++c) {
        s.macro_f1 += metrics.f1[c];
        s.macro_precision += metrics.precision[c];
        s.macro_recall += metrics.recall[c];
    }
    const double k = static_cast<double>(K);
    s.macro_f1 /= k;
    s.macro_precision /= k;
    s.macro_recall /= k;
    s.overall_accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
    return s;
}

std::vector<double> delta_f1(std::span<const double> ours_f1, std::span<const std::string> classes,
                             const BaselineReference& baseline) {
    if (ours_f1.size() != classes.size()) {
        throw ShapeError("per-class F1 vector and class catalog differ in length");
    }
    std::map<std::string, double> ref;
    for (std::size_t c = 0; c < baseline.classes.size(); ++c) {
        ref[baseline.classes[c]] = baseline.per_class_f1[c];
    }
    std::string offenders;
    auto note = [&](const std::string& s) {
        offenders += offenders.empty() ? s : ", " + s;
    };
    for (const auto& name : classes) {
        if (!ref.contains(name)) {
            note("'" + name + "' missing from baseline");
        }
    }
    for (const auto& name : baseline.classes) {
        if (std::find(classes.begin(), classes.end(), name) == classes.end()) {
            note("'" + name + "' not in dataset catalog");
        }
    }
    if (!offenders.empty()) {
        throw ConsistencyError("baseline '" + baseline.name + "' does not match catalog: " + offenders);
    }
    std::vector<double> delta(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c) {
        delta[c] = ours_f1[c] - ref.at(classes[c]);
    }
    return delta;
}

BaselineReference load_baseline(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        const auto j = nlohmann::ordered_json::parse(in);
        BaselineReference b;
        b.name = j.at("name").get<std::string>();
        for (const auto& [name, f1] : j.at("per_class_f1").items()) {
            b.classes.push_back(name);
            b.per_class_f1.push_back(f1.get<double>());
        }
        b.macro_f1 = j.at("macro_f1").get<double>();
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace lprobe
