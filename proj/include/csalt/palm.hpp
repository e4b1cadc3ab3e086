#pragma once

// Proximal alternating linearized minimization over the blocks X, V^(a), Y
// with the binary penalty phi(x) = sum Lambda(x_ij), Lambda(x) = 1 - |1 - 2x|
// on [0,1] and +inf elsewhere.

#include "csalt/errors.hpp"
#include "csalt/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace csalt {

struct PalmConfig {
    double gamma = 1.00001;
    std::size_t max_iterations = 10000;
    std::size_t window = 500;
    double min_avg_decrease = 0.005;
    /// When false the V blocks are frozen (unsupervised mode).
    bool update_alterations = true;

    void validate() const {
        if (!(gamma > 1.0)) throw InvalidInput("gamma must exceed 1");
        if (window < 1 || max_iterations < window)
            throw InvalidInput("need max_iterations >= window >= 1");
        if (!(min_avg_decrease >= 0.0)) throw InvalidInput("min_avg_decrease must be nonnegative");
    }
};

/// Step sizes used by one sweep.
struct SweepSteps {
    double x = 0.0;
    std::vector<double> v;
    double y = 0.0;
};

struct PalmTrace {
    /// values[0] is the starting objective, values[k] the one after sweep k.
    std::vector<double> values;
    std::vector<SweepSteps> steps;

    std::size_t sweeps() const noexcept { return values.empty() ? 0 : values.size() - 1; }
};

/// Entry-wise prox of alpha * Lambda.
inline double prox_lambda(double x, double alpha) {
    if (x <= 0.5) return std::max(0.0, x - 2.0 * alpha);
    return std::min(1.0, x + 2.0 * alpha);
}

inline RealMatrix prox_matrix(const RealMatrix& m, double alpha) {
    return m.unaryExpr([alpha](double x) { return prox_lambda(x, alpha); });
}

inline void prox_in_place(RealMatrix& m, double alpha) {
    m = m.unaryExpr([alpha](double x) { return prox_lambda(x, alpha); });
}

/// Lambda(x); infinite outside [0,1].
inline double binary_penalty(double x) {
    if (x < 0.0 || x > 1.0) return std::numeric_limits<double>::infinity();
    return 1.0 - std::abs(1.0 - 2.0 * x);
}

inline double binary_penalty(const RealMatrix& m) {
    double total = 0.0;
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i) total += binary_penalty(m(i, j));
    return total;
}

/// phi(X) + sum_a phi(V^(a)) + phi(Y).
inline double binary_penalty(const RelaxedState& s) {
    double total = binary_penalty(s.X) + binary_penalty(s.Y);
    for (const auto& v : s.V) total += binary_penalty(v);
    return total;
}

/// F + phi, the composite objective PALM decreases.
inline double composite_objective(const ObjectiveContext& ctx, const RelaxedState& s) {
    return relaxed_F(ctx, s) + binary_penalty(s);
}

namespace detail {

inline void require_finite(const RealMatrix& m, const char* what) {
    if (!m.allFinite()) throw NonFiniteValue(std::string("non-finite ") + what);
}

inline double step_from(double modulus, double gamma, const char* what) {
    const double step = 1.0 / (gamma * modulus);
    if (!std::isfinite(step) || step <= 0.0) throw NonFiniteValue(std::string("bad step size for ") + what);
    return step;
}

} // namespace detail

/// One PALM iteration: X, then each V^(a) in ascending class order, then Y.
/// Every gradient is taken at the freshest blocks.
inline SweepSteps palm_sweep(const ObjectiveContext& ctx, RelaxedState& s, const PalmConfig& cfg) {
    SweepSteps steps;

    {
        const auto mod = lipschitz_moduli(ctx, s);
        steps.x = detail::step_from(mod.X, cfg.gamma, "X");
        RealMatrix g = grad_X(ctx, s);
        detail::require_finite(g, "X gradient");
        s.X -= steps.x * g;
        prox_in_place(s.X, steps.x);
    }

    if (cfg.update_alterations) {
        // the V moduli depend on Y only, which is fixed during this stage
        const auto mod = lipschitz_moduli(ctx, s);
        for (int a = 0; a < ctx.class_count(); ++a) {
            const double nu = detail::step_from(mod.V[static_cast<std::size_t>(a)], cfg.gamma, "V");
            RealMatrix g = grad_V(ctx, s, a);
            detail::require_finite(g, "V gradient");
            auto& va = s.V[static_cast<std::size_t>(a)];
            va -= nu * g;
            prox_in_place(va, nu);
            steps.v.push_back(nu);
        }
    }

    {
        const auto mod = lipschitz_moduli(ctx, s);
        steps.y = detail::step_from(mod.Y, cfg.gamma, "Y");
        RealMatrix g = grad_Y(ctx, s);
        detail::require_finite(g, "Y gradient");
        s.Y -= steps.y * g;
        prox_in_place(s.Y, steps.y);
    }

    ++s.iteration;
    return steps;
}

/// Stop when the budget is spent or the mean decrease over the last window
/// falls below the threshold.
inline bool has_converged(const PalmTrace& trace, const PalmConfig& cfg) {
    const std::size_t k = trace.sweeps();
    if (k >= cfg.max_iterations) return true;
    if (k < cfg.window) return false;
    const double drop = trace.values[k - cfg.window] - trace.values[k];
    return drop / static_cast<double>(cfg.window) < cfg.min_avg_decrease;
}

/// Runs sweeps until has_converged. The state is updated in place.
inline PalmTrace run_palm(const ObjectiveContext& ctx, RelaxedState& s, const PalmConfig& cfg) {
    cfg.validate();
    PalmTrace trace;
    auto value = [&] {
        const double v = composite_objective(ctx, s);
        if (!std::isfinite(v)) throw NonFiniteValue("objective is not finite");
        return v;
    };
    trace.values.push_back(value());
    while (!has_converged(trace, cfg)) {
        trace.steps.push_back(palm_sweep(ctx, s, cfg));
        trace.values.push_back(value());
    }
    return trace;
}

} // namespace csalt
