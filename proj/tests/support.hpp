#pragma once

// Test-only helpers: scratch directories, synthetic datasets and an
// independent naive implementation of the probe objective.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <unistd.h>
#include <random>
#include <string>
#include <vector>

#include "lprobe/embedding_store.hpp"

namespace testing {

class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("lprobe_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<std::string> class_names(std::size_t k) {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c) {
        names.push_back("class" + std::to_string(c));
    }
    return names;
}

// Isotropic Gaussian blobs around well-separated random centres, rows
// unit-normalized. `per_class[c]` rows for class c.
inline lprobe::EmbeddingDataset gaussian_blobs(const std::vector<std::size_t>& per_class, std::size_t dim,
                                               double spread, std::uint64_t seed,
                                               std::uint64_t centre_seed = 12345,
                                               lprobe::SplitTag split = lprobe::SplitTag::train) {
    std::mt19937_64 centre_gen(centre_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t K = per_class.size();
    std::vector<std::vector<double>> centres(K, std::vector<double>(dim));
    for (auto& c : centres) {
        double n2 = 0.0;
        for (auto& v : c) {
            v = normal(centre_gen);
            n2 += v * v;
        }
        for (auto& v : c) {
            v /= std::sqrt(n2);
        }
    }
    std::mt19937_64 gen(seed);
    std::size_t total = 0;
    for (auto n : per_class) {
        total += n;
    }
    lprobe::EmbeddingDataset ds;
    ds.classes = class_names(K);
    ds.split = split;
    ds.data = lprobe::Matrix(total, dim);
    std::size_t r = 0;
    for (std::size_t c = 0; c < K; ++c) {
        for (std::size_t i = 0; i < per_class[c]; ++i, ++r) {
            double n2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double v = centres[c][j] + spread * normal(gen);
                ds.data(r, j) = v;
                n2 += v * v;
            }
            for (std::size_t j = 0; j < dim; ++j) {
                ds.data(r, j) /= std::sqrt(n2);
            }
            ds.labels.push_back(static_cast<std::uint32_t>(c));
        }
    }
    return ds;
}

inline lprobe::EmbeddingDataset random_rows(std::size_t n, std::size_t dim, std::size_t K,
                                            std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    lprobe::EmbeddingDataset ds;
    ds.classes = class_names(K);
    ds.data = lprobe::Matrix(n, dim);
    for (auto& v : ds.data.values()) {
        v = normal(gen);
    }
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels.push_back(static_cast<std::uint32_t>(i % K));
    }
    return ds;
}

// Naive weighted softmax cross-entropy + |W|^2/(2C), written directly from the
// formula without stabilization. theta = W row-major (K x d) then intercepts.
struct NaiveObjective {
    std::vector<std::vector<double>> X;
    std::vector<std::uint32_t> y;
    std::vector<double> s;  // per-class weights
    double C;

    std::size_t K() const { return s.size(); }
    std::size_t d() const { return X.empty() ? 0 : X[0].size(); }

    double operator()(const std::vector<double>& theta, std::vector<double>* grad = nullptr) const {
        const std::size_t K = this->K(), d = this->d();
        double J = 0.0;
        std::vector<double> g(theta.size(), 0.0);
        std::vector<double> e(K);
        for (std::size_t i = 0; i < X.size(); ++i) {
            double denom = 0.0;
            for (std::size_t c = 0; c < K; ++c) {
                double z = theta[K * d + c];
                for (std::size_t j = 0; j < d; ++j) {
                    z += theta[c * d + j] * X[i][j];
                }
                e[c] = std::exp(z);
                denom += e[c];
            }
            J -= s[y[i]] * std::log(e[y[i]] / denom);
            for (std::size_t c = 0; c < K; ++c) {
                const double coef = s[y[i]] * (e[c] / denom - (c == y[i] ? 1.0 : 0.0));
                for (std::size_t j = 0; j < d; ++j) {
                    g[c * d + j] += coef * X[i][j];
                }
                g[K * d + c] += coef;
            }
        }
        for (std::size_t k = 0; k < K * d; ++k) {
            J += theta[k] * theta[k] / (2.0 * C);
            g[k] += theta[k] / C;
        }
        if (grad) {
            *grad = std::move(g);
        }
        return J;
    }
};

// Plain gradient descent on the naive objective: fixed step, halved whenever
// a step would increase the value. Stops after max_steps, when |g|_inf < tol,
// or when halving has driven the step below 1e-9.
inline double gradient_descent_minimum(const NaiveObjective& f, std::size_t max_steps = 1000000,
                                       double step = 1e-2, double tol = 1e-9) {
    std::vector<double> theta((f.d() + 1) * f.K(), 0.0);
    std::vector<double> g;
    double value = f(theta, &g);
    std::vector<double> trial(theta.size());
    std::vector<double> g_trial;
    for (std::size_t it = 0; it < max_steps; ++it) {
        double gmax = 0.0;
        for (double v : g) {
            gmax = std::max(gmax, std::abs(v));
        }
        if (gmax < tol) {
            break;
        }
        while (true) {
            for (std::size_t k = 0; k < theta.size(); ++k) {
                trial[k] = theta[k] - step * g[k];
            }
            const double v = f(trial, &g_trial);
            if (v <= value) {
                theta.swap(trial);
                g.swap(g_trial);
                value = v;
                break;
            }
            step *= 0.5;
            // Only rounding noise makes a tiny step go uphill; the value is at its floor.
            if (step < 1e-9) {
                return value;
            }
        }
    }
    return value;
}

}  // namespace testing
