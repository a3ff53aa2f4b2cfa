#pragma once

// Conjugate solver: gradient ascent on J(x) = <x, y> - u(x) with Adam.
// At the maximizer the envelope theorem identifies x* with the gradient
// of the convex conjugate of u at y, which is what callers want.

#include <functional>
#include <span>

#include "npf/icnn.hpp"
#include "npf/mlp.hpp"
#include "npf/numcore.hpp"

namespace npf {

struct ConjugateConfig {
    int max_iterations = 200;
    double gtol = 1e-3;
    double lr = 0.2;
    double beta1 = 0.9;
    double beta2 = 0.99;
};

struct ConjugateResult {
    Vec x;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;
};

// Maximizes <x,y> - u(x) from the warm start x0. Returns the iterate
// with the smallest residual |y - grad u(x)|; converged means the
// residual met gtol. Non-convergence is reported, not thrown.
ConjugateResult conjugate_solve(const IcnnParams& u, std::span<const double> y,
                                std::span<const double> x0, const ConjugateConfig& cfg);

struct AmortizationStats {
    double loss = 0.0;
    int used = 0;
    int failures = 0;
    double mean_iterations = 0.0;
};

// Squared-error regression of the amortizer onto conjugate-solver
// targets; the solver is warm-started at the amortizer's own prediction
// and its output is treated as a constant. Batch entries whose solve
// does not converge are skipped and counted. Throws std::runtime_error
// if every solve fails.
AmortizationStats amortization_loss(const MlpParams& amortizer, const Mat& field_values,
                                    const IcnnParams& potential, const ConjugateConfig& cs,
                                    std::span<double> grad_phi);

}  // namespace npf
