#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lprobe/embedding_store.hpp"
#include "lprobe/matrix.hpp"
#include "lprobe/optimizer.hpp"
#include "lprobe/sampling.hpp"

namespace lprobe {

enum class ClassWeighting { uniform, balanced };

const char* to_string(ClassWeighting w) noexcept;
ClassWeighting parse_weighting(const std::string& s);

struct ProbeConfig {
    double C = 10.0;  // inverse L2 strength; penalty is |W|_F^2 / (2C)
    ClassWeighting class_weighting = ClassWeighting::balanced;
    std::size_t max_iterations = 100;
    double grad_tolerance = 1e-4;

    void validate() const;
};

// s_c = N / (K n_c) in balanced mode, 1 otherwise.
std::vector<double> class_weights(std::span<const std::size_t> counts, ClassWeighting mode);

struct ModelParams {
    Matrix weights;                 // K x d
    std::vector<double> intercepts; // K
    std::vector<std::string> classes;
    double C = 10.0;
    ClassWeighting class_weighting = ClassWeighting::balanced;

    std::size_t num_classes() const noexcept { return weights.rows(); }
    std::size_t dim() const noexcept { return weights.cols(); }

    // Flat layout used by the objective: W row-major, then intercepts.
    std::vector<double> to_vector() const;
    static ModelParams from_vector(std::span<const double> theta, std::size_t num_classes,
                                   std::size_t dim);
};

/// Weighted multinomial cross-entropy plus |W|^2/(2C), intercepts unpenalized.
///
/// Borrows its inputs; the caller keeps X, labels and weights alive.
struct ProbeProblem {
    const Matrix& X;
    std::span<const std::uint32_t> labels;
    std::span<const double> sample_class_weights;  // indexed by class
    double C;

    std::size_t num_classes() const noexcept { return sample_class_weights.size(); }
    std::size_t num_params() const noexcept { return num_classes() * (X.cols() + 1); }
};

// OpenMP kernel. Every output element is reduced over samples in ascending
// order, so the result does not depend on the thread count.
double objective_and_gradient(const ProbeProblem& problem, std::span<const double> theta,
                              std::span<double> grad);

// Serial reference for the kernel above, kept for tests and benchmarks.
double objective_and_gradient_reference(const ProbeProblem& problem, std::span<const double> theta,
                                        std::span<double> grad);

struct FitResult {
    ModelParams params;
    OptimizeOutcome outcome;  // x_final mirrors params
};

FitResult fit(const EmbeddingDataset& ds, std::span<const std::size_t> selection,
              const ProbeConfig& cfg);

Matrix predict_proba(const ModelParams& params, const Matrix& X);

// Argmax of the logits; ties go to the lowest class index.
std::vector<std::uint32_t> predict(const ModelParams& params, const Matrix& X);

void save_model_json(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model_json(const std::filesystem::path& path);

}  // namespace lprobe
