#include "npf/conjugate.hpp"

#include <cmath>
#include <stdexcept>

namespace npf {

ConjugateResult conjugate_solve(const IcnnParams& u, std::span<const double> y,
                                std::span<const double> x0, const ConjugateConfig& cfg) {
    if (y.size() != x0.size()) throw std::invalid_argument("conjugate_solve: y/x0 size mismatch");
    if (cfg.max_iterations < 1 || cfg.gtol <= 0.0)
        throw std::invalid_argument("conjugate_solve: bad config");

    const size_t d = y.size();
    ConjugateResult res;
    res.x.assign(x0.begin(), x0.end());

    IcnnScratch scratch;
    Vec grad(d, 0.0);  // ascent direction y - grad u(x)
    Vec gu(d, 0.0);
    Vec m(d, 0.0), v(d, 0.0);
    Vec best_x = res.x;
    double best_norm = 0.0;

    // Adam's terminal oscillation scales with the step size rather than
    // the gradient, so the step is halved whenever a window passes
    // without a solid improvement of the best residual.
    double lr = cfg.lr;
    double window_start = 0.0;
    int window_iters = 0;
    constexpr int kWindow = 8;
    constexpr double kRequiredDrop = 0.92;

    for (int t = 0; t <= cfg.max_iterations; ++t) {
        icnn_grad_input(u, res.x, gu, scratch);
        double gn = 0.0;
        for (size_t k = 0; k < d; ++k) {
            grad[k] = y[k] - gu[k];
            gn += grad[k] * grad[k];
        }
        gn = std::sqrt(gn);
        if (!std::isfinite(gn)) break;

        if (t == 0 || gn < best_norm) {
            best_x = res.x;
            best_norm = gn;
        }
        if (gn <= cfg.gtol) {
            res.x = best_x;
            res.converged = true;
            res.iterations = t;
            res.grad_norm = best_norm;
            return res;
        }
        if (t == cfg.max_iterations) break;

        if (t == 0) {
            window_start = gn;
        } else if (++window_iters >= kWindow) {
            if (best_norm > kRequiredDrop * window_start) {
                // restart the moments: a symmetric Adam orbit cancels its
                // own momentum and freezes otherwise
                lr *= 0.5;
                fill(m, 0.0);
                fill(v, 0.0);
                res.x = best_x;
            }
            window_start = best_norm;
            window_iters = 0;
        }

        const double bc1 = 1.0 - std::pow(cfg.beta1, t + 1.0);
        const double bc2 = 1.0 - std::pow(cfg.beta2, t + 1.0);
        for (size_t k = 0; k < d; ++k) {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
            res.x[k] += lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + 1e-8);
        }
    }

    res.x = best_x;
    res.converged = false;
    res.iterations = cfg.max_iterations;
    res.grad_norm = best_norm;
    return res;
}

AmortizationStats amortization_loss(const MlpParams& amortizer, const Mat& field_values,
                                    const IcnnParams& potential, const ConjugateConfig& cs,
                                    std::span<double> grad_phi) {
    if (field_values.rows < 1) throw std::invalid_argument("amortization_loss: empty batch");
    if (static_cast<long>(grad_phi.size()) != amortizer.layout.total)
        throw std::invalid_argument("amortization_loss: grad size mismatch");

    const int n = field_values.rows;
    const int d = field_values.cols;
    MlpScratch ms;
    Vec pred(d, 0.0);
    Vec upstream(d, 0.0);
    AmortizationStats stats;
    fill(grad_phi, 0.0);

    struct Pending {
        int row;
        Vec pred;
        Vec target;
    };
    std::vector<Pending> kept;
    kept.reserve(n);
    long iter_sum = 0;

    for (int i = 0; i < n; ++i) {
        auto y = field_values.row(i);
        mlp_forward(amortizer, y, pred, ms);
        ConjugateResult sol = conjugate_solve(potential, y, pred, cs);
        if (!sol.converged) {
            stats.failures += 1;
            continue;
        }
        iter_sum += sol.iterations;
        kept.push_back({i, pred, std::move(sol.x)});
    }

    if (kept.empty())
        throw std::runtime_error(
            "amortization_loss: every conjugate solve diverged; increase max_iterations");

    stats.used = static_cast<int>(kept.size());
    stats.mean_iterations = static_cast<double>(iter_sum) / stats.used;
    const double inv_n = 1.0 / stats.used;
    for (const auto& item : kept) {
        double l2 = 0.0;
        for (int k = 0; k < d; ++k) {
            const double r = item.pred[k] - item.target[k];
            upstream[k] = 2.0 * inv_n * r;
            l2 += r * r;
        }
        stats.loss += inv_n * l2;
        mlp_grad_params(amortizer, field_values.row(item.row), upstream, grad_phi, {}, ms);
    }
    return stats;
}

}  // namespace npf
