#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace lprobe {

/// Value-and-gradient callback: writes the gradient at `x` into `grad` and
/// returns the objective value. `grad` has the same length as `x`.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct OptimizerConfig {
    std::size_t max_iterations = 100;
    std::size_t memory = 10;
    double grad_tolerance = 1e-4;  // on the infinity norm of the gradient
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    std::size_t max_line_search_steps = 20;
    std::ostream* trace = nullptr;  // one line per iteration when set

    void validate() const;
};

enum class OptimizeStatus { converged, iteration_cap, line_search_failure };

const char* to_string(OptimizeStatus status) noexcept;

struct OptimizeOutcome {
    std::vector<double> x_final;
    double f_final = 0.0;
    double grad_inf_norm = 0.0;
    std::size_t iterations_used = 0;
    OptimizeStatus status = OptimizeStatus::iteration_cap;
};

/// L-BFGS with the two-loop recursion and a strong Wolfe line search
/// (bracketing, then zoom by safeguarded cubic interpolation).
///
/// Curvature pairs with s'y <= 1e-10 |s| |y| are dropped. The initial inverse
/// Hessian is gamma * I with gamma = s'y / y'y from the newest kept pair; with
/// no pairs the first trial step is 1 / |g|_2 along -g.
///
/// Throws NumericalError if the callback returns a non-finite value or
/// gradient. A line search that cannot satisfy strong Wolfe is reported
/// through the status, with the last accepted iterate.
OptimizeOutcome minimize(const Objective& objective, std::span<const double> x0,
                         const OptimizerConfig& cfg = {});

}  // namespace lprobe
