#include "lprobe/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <ostream>

#include "lprobe/error.hpp"

namespace lprobe {

namespace {

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double inf_norm(std::span<const double> v) noexcept {
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct CurvaturePair {
    std::vector<double> s;
    std::vector<double> y;
    double rho;  // 1 / s'y
};

// Point on the search ray with its value, gradient and directional derivative.
struct Trial {
    double alpha = 0.0;
    double f = 0.0;
    double slope = 0.0;
    std::vector<double> x;
    std::vector<double> g;
};

class RayEvaluator {
public:
    RayEvaluator(const Objective& objective, std::span<const double> x, std::span<const double> dir)
        : objective_(objective), x_(x), dir_(dir) {}

    Trial at(double alpha) const {
        Trial t;
        t.alpha = alpha;
        t.x.resize(x_.size());
        t.g.resize(x_.size());
        for (std::size_t i = 0; i < x_.size(); ++i) {
            t.x[i] = x_[i] + alpha * dir_[i];
        }
        t.f = objective_(t.x, t.g);
        if (!std::isfinite(t.f) || !all_finite(t.g)) {
            throw NumericalError("objective returned a non-finite value or gradient", t.x);
        }
        t.slope = dot(t.g, dir_);
        return t;
    }

private:
    const Objective& objective_;
    std::span<const double> x_;
    std::span<const double> dir_;
};

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), or NaN when the
// cubic has no interior minimum.
double cubic_minimizer(double a, double fa, double da, double b, double fb, double db) noexcept {
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    if (disc < 0.0) {
        return std::nan("");
    }
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = db - da + 2.0 * d2;
    if (denom == 0.0) {
        return std::nan("");
    }
    return b - (b - a) * (db + d2 - d1) / denom;
}

struct LineSearchResult {
    bool ok = false;
    Trial point;            // Wolfe point when ok
    std::optional<Trial> best;  // lowest Armijo point seen, when not ok
};

class StrongWolfeSearch {
public:
    StrongWolfeSearch(const OptimizerConfig& cfg, const RayEvaluator& ray, double f0, double slope0)
        : cfg_(cfg), ray_(ray), f0_(f0), slope0_(slope0) {}

    LineSearchResult run(double alpha0) {
        Trial prev;
        prev.alpha = 0.0;
        prev.f = f0_;
        prev.slope = slope0_;
        double alpha = alpha0;
        for (std::size_t i = 0; steps_ < cfg_.max_line_search_steps; ++i) {
            Trial cur = evaluate(alpha);
            if (!armijo(cur) || (i > 0 && cur.f >= prev.f)) {
                return zoom(std::move(prev), std::move(cur));
            }
            if (std::abs(cur.slope) <= -cfg_.wolfe_c2 * slope0_) {
                return {true, std::move(cur), std::nullopt};
            }
            if (cur.slope >= 0.0) {
                return zoom(std::move(cur), std::move(prev));
            }
            prev = std::move(cur);
            alpha = std::min(alpha * 2.0, kMaxStep);
            if (prev.alpha >= kMaxStep) {
                break;
            }
        }
        return failure();
    }

private:
    static constexpr double kMaxStep = 1e20;

    bool armijo(const Trial& t) const noexcept {
        return t.f <= f0_ + cfg_.wolfe_c1 * t.alpha * slope0_;
    }

    Trial evaluate(double alpha) {
        ++steps_;
        Trial t = ray_.at(alpha);
        if (armijo(t) && t.f < f0_ && (!best_ || t.f < best_->f)) {
            best_ = t;
        }
        return t;
    }

    LineSearchResult zoom(Trial lo, Trial hi) {
        while (steps_ < cfg_.max_line_search_steps) {
            const double a = std::min(lo.alpha, hi.alpha);
            const double b = std::max(lo.alpha, hi.alpha);
            const double width = b - a;
            if (width <= 1e-16 * std::max(1.0, b)) {
                break;
            }
            double alpha = cubic_minimizer(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope);
            if (!std::isfinite(alpha) || alpha < a + 0.1 * width || alpha > b - 0.1 * width) {
                alpha = 0.5 * (lo.alpha + hi.alpha);
            }
            Trial cur = evaluate(alpha);
            if (!armijo(cur) || cur.f >= lo.f) {
                hi = std::move(cur);
                continue;
            }
            if (std::abs(cur.slope) <= -cfg_.wolfe_c2 * slope0_) {
                return {true, std::move(cur), std::nullopt};
            }
            if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) {
                hi = std::move(lo);
            }
            lo = std::move(cur);
        }
        return failure();
    }

    LineSearchResult failure() { return {false, Trial{}, best_}; }

    const OptimizerConfig& cfg_;
    const RayEvaluator& ray_;
    double f0_;
    double slope0_;
    std::size_t steps_ = 0;
    std::optional<Trial> best_;
};

// Two-loop recursion: returns -H g.
std::vector<double> search_direction(const std::deque<CurvaturePair>& history,
                                     std::span<const double> g) {
    std::vector<double> q(g.begin(), g.end());
    std::vector<double> alphas(history.size());
    for (std::size_t k = history.size(); k-- > 0;) {
        const auto& p = history[k];
        alphas[k] = p.rho * dot(p.s, q);
        for (std::size_t i = 0; i < q.size(); ++i) {
            q[i] -= alphas[k] * p.y[i];
        }
    }
    if (!history.empty()) {
        const auto& newest = history.back();
        const double gamma = dot(newest.s, newest.y) / dot(newest.y, newest.y);
        for (double& v : q) {
            v *= gamma;
        }
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
        const auto& p = history[k];
        const double beta = p.rho * dot(p.y, q);
        for (std::size_t i = 0; i < q.size(); ++i) {
            q[i] += (alphas[k] - beta) * p.s[i];
        }
    }
    for (double& v : q) {
        v = -v;
    }
    return q;
}

}  // namespace

void OptimizerConfig::validate() const {
    if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
        throw ConsistencyError("line search constants must satisfy 0 < c1 < c2 < 1");
    }
    if (memory == 0) {
        throw ConsistencyError("L-BFGS memory must be at least 1");
    }
    if (max_line_search_steps == 0) {
        throw ConsistencyError("line search needs at least one step");
    }
    if (!(grad_tolerance >= 0.0)) {
        throw ConsistencyError("gradient tolerance must be non-negative");
    }
}

const char* to_string(OptimizeStatus status) noexcept {
    switch (status) {
        case OptimizeStatus::converged: return "converged";
        case OptimizeStatus::iteration_cap: return "iteration_cap";
        case OptimizeStatus::line_search_failure: return "line_search_failure";
    }
    return "unknown";
}

OptimizeOutcome minimize(const Objective& objective, std::span<const double> x0,
                         const OptimizerConfig& cfg) {
    cfg.validate();

    OptimizeOutcome out;
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> g(x.size());
    double f = objective(x, g);
    if (!std::isfinite(f) || !all_finite(g)) {
        throw NumericalError("objective returned a non-finite value or gradient at the start", x);
    }

    std::deque<CurvaturePair> history;
    out.status = OptimizeStatus::iteration_cap;
    double gnorm = inf_norm(g);

    while (true) {
        if (gnorm <= cfg.grad_tolerance) {
            out.status = OptimizeStatus::converged;
            break;
        }
        if (out.iterations_used >= cfg.max_iterations) {
            out.status = OptimizeStatus::iteration_cap;
            break;
        }

        auto dir = search_direction(history, g);
        double slope = dot(g, dir);
        if (!(slope < 0.0)) {
            history.clear();
            dir = search_direction(history, g);
            slope = dot(g, dir);
        }

        auto attempt = [&](std::span<const double> d, double s) {
            const double alpha0 = history.empty() ? 1.0 / std::sqrt(dot(g, g)) : 1.0;
            RayEvaluator ray(objective, x, d);
            return StrongWolfeSearch(cfg, ray, f, s).run(alpha0);
        };
        auto ls = attempt(dir, slope);
        if (!ls.ok && !history.empty()) {
            history.clear();
            dir = search_direction(history, g);
            slope = dot(g, dir);
            ls = attempt(dir, slope);
        }
        if (!ls.ok) {
            if (ls.best) {
                x = std::move(ls.best->x);
                g = std::move(ls.best->g);
                f = ls.best->f;
                gnorm = inf_norm(g);
                ++out.iterations_used;
            }
            out.status = gnorm <= cfg.grad_tolerance ? OptimizeStatus::converged
                                                     : OptimizeStatus::line_search_failure;
            break;
        }

        CurvaturePair pair;
        pair.s.resize(x.size());
        pair.y.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            pair.s[i] = ls.point.x[i] - x[i];
            pair.y[i] = ls.point.g[i] - g[i];
        }
        const double sy = dot(pair.s, pair.y);
        const double bound = 1e-10 * std::sqrt(dot(pair.s, pair.s)) * std::sqrt(dot(pair.y, pair.y));
        if (sy > bound) {
            pair.rho = 1.0 / sy;
            history.push_back(std::move(pair));
            if (history.size() > cfg.memory) {
                history.pop_front();
            }
        }

        x = std::move(ls.point.x);
        g = std::move(ls.point.g);
        f = ls.point.f;
        gnorm = inf_norm(g);
        ++out.iterations_used;
        if (cfg.trace) {
            *cfg.trace << "lbfgs iter " << out.iterations_used << " f " << f << " |g|inf " << gnorm
                       << " step " << ls.point.alpha << " pairs " << history.size() << '\n';
        }
    }

    out.x_final = std::move(x);
    out.f_final = f;
    out.grad_inf_norm = gnorm;
    return out;
}

}  // namespace lprobe
