#include "lprobe/logreg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace lprobe {

namespace {

// Below this many multiply-adds per pass the kernel stays on one thread.
constexpr std::size_t kParallelWork = 1u << 16;
constexpr std::size_t kColumnBlock = 64;

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericalError(std::string("non-finite ") + what, {v.begin(), v.end()});
        }
    }
}

void check_problem(const ProbeProblem& p, std::span<const double> theta, std::span<double> grad) {
    if (p.labels.size() != p.X.rows()) {
        throw ShapeError("label count does not match sample count");
    }
    if (theta.size() != p.num_params() || grad.size() != p.num_params()) {
        throw ShapeError("parameter vector has length " + std::to_string(theta.size()) +
                         ", expected K*d + K = " + std::to_string(p.num_params()));
    }
    if (!(p.C > 0.0)) {
        throw ConsistencyError("C must be positive");
    }
    check_finite(theta, "parameter");
}

}  // namespace

const char* to_string(ClassWeighting w) noexcept {
    return w == ClassWeighting::balanced ? "balanced" : "uniform";
}

ClassWeighting parse_weighting(const std::string& s) {
    if (s == "balanced") {
        return ClassWeighting::balanced;
    }
    if (s == "uniform" || s == "none") {
        return ClassWeighting::uniform;
    }
    throw ParseError("unknown class weighting '" + s + "'");
}

void ProbeConfig::validate() const {
    if (!(C > 0.0) || !std::isfinite(C)) {
        throw ConsistencyError("C must be a positive finite number");
    }
    if (max_iterations == 0) {
        throw ConsistencyError("max_iterations must be positive");
    }
}

std::vector<double> class_weights(std::span<const std::size_t> counts, ClassWeighting mode) {
    std::vector<double> s(counts.size(), 1.0);
    if (mode == ClassWeighting::uniform) {
        return s;
    }
    std::size_t total = 0;
    for (auto n : counts) {
        total += n;
    }
    const double k = static_cast<double>(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) {
            throw DegenerateInputError("class " + std::to_string(c) +
                                       " has no selected rows and cannot be weighted");
        }
        s[c] = static_cast<double>(total) / (k * static_cast<double>(counts[c]));
    }
    return s;
}

std::vector<double> ModelParams::to_vector() const {
    std::vector<double> theta(weights.values().begin(), weights.values().end());
    theta.insert(theta.end(), intercepts.begin(), intercepts.end());
    return theta;
}

ModelParams ModelParams::from_vector(std::span<const double> theta, std::size_t num_classes,
                                     std::size_t dim) {
    if (theta.size() != num_classes * (dim + 1)) {
        throw ShapeError("parameter vector length does not match K x (d + 1)");
    }
    ModelParams p;
    const auto split = theta.begin() + static_cast<std::ptrdiff_t>(num_classes * dim);
    p.weights = Matrix(num_classes, dim, std::vector<double>(theta.begin(), split));
    p.intercepts.assign(split, theta.end());
    return p;
}

double objective_and_gradient(const ProbeProblem& p, std::span<const double> theta,
                              std::span<double> grad) {
    check_problem(p, theta, grad);
    const std::size_t n = p.X.rows();
    const std::size_t d = p.X.cols();
    const std::size_t K = p.num_classes();
    const double* W = theta.data();
    const double* b = theta.data() + K * d;
    const bool parallel = n * d * K >= kParallelWork;

    // Per-sample loss and softmax residuals s_y (p_c - [c == y]).
    std::vector<double> loss(n);
    Matrix resid(n, K);
    const auto ns = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t ii = 0; ii < ns; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const auto x = p.X.row(i);
        auto z = resid.row(i);
        for (std::size_t c = 0; c < K; ++c) {
            const double* w = W + c * d;
            double acc = b[c];
            for (std::size_t j = 0; j < d; ++j) {
                acc += w[j] * x[j];
            }
            z[c] = acc;
        }
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) {
            sum += std::exp(v - zmax);
        }
        const double lse = zmax + std::log(sum);
        const auto y = p.labels[i];
        const double s = p.sample_class_weights[y];
        loss[i] = s * (lse - z[y]);
        for (std::size_t c = 0; c < K; ++c) {
            z[c] = s * (std::exp(z[c] - lse) - (c == y ? 1.0 : 0.0));
        }
    }

    double value = 0.0;
    for (double l : loss) {
        value += l;
    }
    double penalty = 0.0;
    for (std::size_t k = 0; k < K * d; ++k) {
        penalty += W[k] * W[k];
    }
    value += penalty / (2.0 * p.C);

    // Weight gradient, one column block per task; each element sums samples in order.
    const std::size_t blocks = (d + kColumnBlock - 1) / kColumnBlock;
    const auto nb = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t bb = 0; bb < nb; ++bb) {
        const std::size_t j0 = static_cast<std::size_t>(bb) * kColumnBlock;
        const std::size_t j1 = std::min(d, j0 + kColumnBlock);
        const std::size_t width = j1 - j0;
        std::vector<double> tile(K * width, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = p.X.row(i).data() + j0;
            const auto r = resid.row(i);
            for (std::size_t c = 0; c < K; ++c) {
                const double coef = r[c];
                double* t = tile.data() + c * width;
                for (std::size_t j = 0; j < width; ++j) {
                    t[j] += coef * x[j];
                }
            }
        }
        for (std::size_t c = 0; c < K; ++c) {
            for (std::size_t j = 0; j < width; ++j) {
                grad[c * d + j0 + j] = tile[c * width + j] + W[c * d + j0 + j] / p.C;
            }
        }
    }
    for (std::size_t c = 0; c < K; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += resid(i, c);
        }
        grad[K * d + c] = acc;
    }
    return value;
}

double objective_and_gradient_reference(const ProbeProblem& p, std::span<const double> theta,
                                        std::span<double> grad) {
    check_problem(p, theta, grad);
    const std::size_t n = p.X.rows();
    const std::size_t d = p.X.cols();
    const std::size_t K = p.num_classes();
    std::fill(grad.begin(), grad.end(), 0.0);

    double value = 0.0;
    std::vector<double> z(K);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < K; ++c) {
            z[c] = theta[K * d + c];
            for (std::size_t j = 0; j < d; ++j) {
                z[c] += theta[c * d + j] * p.X(i, j);
            }
        }
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < K; ++c) {
            sum += std::exp(z[c] - zmax);
        }
        const double lse = zmax + std::log(sum);
        const auto y = p.labels[i];
        const double s = p.sample_class_weights[y];
        value += s * (lse - z[y]);
        for (std::size_t c = 0; c < K; ++c) {
            const double coef = s * (std::exp(z[c] - lse) - (c == y ? 1.0 : 0.0));
            for (std::size_t j = 0; j < d; ++j) {
                grad[c * d + j] += coef * p.X(i, j);
            }
            grad[K * d + c] += coef;
        }
    }
    double penalty = 0.0;
    for (std::size_t k = 0; k < K * d; ++k) {
        penalty += theta[k] * theta[k];
        grad[k] += theta[k] / p.C;
    }
    return value + penalty / (2.0 * p.C);
}

FitResult fit(const EmbeddingDataset& ds, std::span<const std::size_t> selection,
              const ProbeConfig& cfg) {
    cfg.validate();
    const std::size_t d = ds.dim();
    const std::size_t K = ds.num_classes();

    Matrix X(selection.size(), d);
    std::vector<std::uint32_t> y(selection.size());
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t r = 0; r < selection.size(); ++r) {
        const auto i = selection[r];
        if (i >= ds.rows()) {
            throw ShapeError("selection index " + std::to_string(i) + " out of range");
        }
        std::copy_n(ds.data.row(i).begin(), d, X.row(r).begin());
        y[r] = ds.labels[i];
        ++counts[y[r]];
    }
    for (std::size_t c = 0; c < K; ++c) {
        if (counts[c] == 0) {
            throw DegenerateInputError("class '" + ds.classes[c] + "' has no selected rows");
        }
    }
    check_finite(X.values(), "training feature");

    const auto weights = class_weights(counts, cfg.class_weighting);
    const ProbeProblem problem{X, y, weights, cfg.C};

    OptimizerConfig opt;
    opt.max_iterations = cfg.max_iterations;
    opt.grad_tolerance = cfg.grad_tolerance;
    const std::vector<double> x0(problem.num_params(), 0.0);
    auto outcome = minimize(
        [&](std::span<const double> theta, std::span<double> grad) {
            return objective_and_gradient(problem, theta, grad);
        },
        x0, opt);

    FitResult result{ModelParams::from_vector(outcome.x_final, K, d), std::move(outcome)};
    result.params.classes = ds.classes;
    result.params.C = cfg.C;
    result.params.class_weighting = cfg.class_weighting;
    return result;
}

namespace {

Matrix logits(const ModelParams& params, const Matrix& X) {
    if (X.cols() != params.dim()) {
        throw ShapeError("input has " + std::to_string(X.cols()) + " columns, model expects " +
                         std::to_string(params.dim()));
    }
    const std::size_t K = params.num_classes();
    Matrix z(X.rows(), K);
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const auto x = X.row(i);
        for (std::size_t c = 0; c < K; ++c) {
            double acc = params.intercepts[c];
            const auto w = params.weights.row(c);
            for (std::size_t j = 0; j < x.size(); ++j) {
                acc += w[j] * x[j];
            }
            z(i, c) = acc;
        }
    }
    return z;
}

}  // namespace

Matrix predict_proba(const ModelParams& params, const Matrix& X) {
    Matrix z = logits(params, X);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        const double zmax = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - zmax);
            sum += v;
        }
        for (double& v : row) {
            v /= sum;
        }
    }
    return z;
}

std::vector<std::uint32_t> predict(const ModelParams& params, const Matrix& X) {
    const Matrix z = logits(params, X);
    std::vector<std::uint32_t> out(z.rows(), 0);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto row = z.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (row[c] > row[best]) {
                best = c;
            }
        }
        out[i] = static_cast<std::uint32_t>(best);
    }
    return out;
}

void save_model_json(const ModelParams& params, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["classes"] = params.classes;
    j["C"] = params.C;
    j["class_weighting"] = to_string(params.class_weighting);
    j["dim"] = params.dim();
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < params.num_classes(); ++c) {
        const auto r = params.weights.row(c);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    j["weights"] = std::move(rows);
    j["intercepts"] = params.intercepts;
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << j.dump() << '\n';
}

ModelParams load_model_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        const auto j = nlohmann::json::parse(in);
        ModelParams p;
        p.classes = j.at("classes").get<std::vector<std::string>>();
        p.C = j.at("C").get<double>();
        p.class_weighting = parse_weighting(j.at("class_weighting").get<std::string>());
        const auto d = j.at("dim").get<std::size_t>();
        const auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
        std::vector<double> flat;
        for (const auto& r : rows) {
            if (r.size() != d) {
                throw ShapeError("weight row length does not match dim");
            }
            flat.insert(flat.end(), r.begin(), r.end());
        }
        p.weights = Matrix(rows.size(), d, std::move(flat));
        p.intercepts = j.at("intercepts").get<std::vector<double>>();
        if (p.intercepts.size() != rows.size() || p.classes.size() != rows.size()) {
            throw ShapeError("class, weight and intercept counts disagree");
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace lprobe
