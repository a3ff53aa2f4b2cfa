#include "npf/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace npf {

Objective make_quad_well(double stiffness) {
    Objective g;
    g.dim = 2;
    g.support = Box::cube(2, -2.0, 2.0);
    g.value = [stiffness](std::span<const double> x) {
        double s = 0.0;
        for (double xi : x) {
            const double t = xi * xi - 1.0;
            s += t * t;
        }
        return stiffness * s;
    };
    g.grad = [stiffness](std::span<const double> x) {
        Vec out(x.size(), 0.0);
        for (size_t k = 0; k < x.size(); ++k)
            out[k] = stiffness * 4.0 * x[k] * (x[k] * x[k] - 1.0);
        return out;
    };
    g.basin_count = 4;
    g.basin = [](std::span<const double> x) {
        const double mx = x[0] > 0.0 ? 1.0 : -1.0;
        const double my = x[1] > 0.0 ? 1.0 : -1.0;
        const double dx = x[0] - mx, dy = x[1] - my;
        if (dx * dx + dy * dy > 0.35 * 0.35) return -1;
        return (mx > 0 ? 0 : 1) + (my > 0 ? 0 : 2);
    };
    return g;
}

Objective make_double_well_1d() {
    Objective g;
    g.dim = 1;
    g.support = Box::cube(1, -2.0, 2.0);
    g.value = [](std::span<const double> x) {
        const double t = x[0] * x[0] - 1.0;
        return 0.25 * t * t;
    };
    g.grad = [](std::span<const double> x) { return Vec{x[0] * x[0] * x[0] - x[0]}; };
    g.basin_count = 2;
    g.basin = [](std::span<const double> x) {
        if (std::abs(x[0] - 1.0) <= 0.35) return 0;
        if (std::abs(x[0] + 1.0) <= 0.35) return 1;
        return -1;
    };
    return g;
}

ParticleState init_particles(const Mat& positions) {
    ParticleState st;
    st.positions = positions;
    st.last_grad_norm.assign(positions.rows, 0.0);
    st.last_value.assign(positions.rows, 0.0);
    return st;
}

void lmc_step(const std::function<Vec(std::span<const double>)>& grad, ParticleState& state,
              double gamma, Rng& rng) {
    if (gamma < 0.0) throw std::invalid_argument("lmc_step: gamma must be >= 0");
    const int d = state.positions.cols;
    const double noise = std::sqrt(2.0 * gamma);
    Vec z(d, 0.0);
    for (int i = 0; i < state.positions.rows; ++i) {
        rng.fill_normal(z);
        Vec g = grad(state.positions.row(i));
        if (!all_finite(g)) {
            state.frozen_events += 1;
            continue;
        }
        state.last_grad_norm[i] = norm2(g);
        auto row = state.positions.row(i);
        for (int k = 0; k < d; ++k) row[k] += -gamma * g[k] + noise * z[k];
    }
    state.step += 1;
}

namespace {

void clamp_particles(ParticleState& st, const Box& box) {
    for (int i = 0; i < st.positions.rows; ++i) box.clamp(st.positions.row(i));
}

void warmup_descent(const Objective& g, ParticleState& st, int steps, double step_size) {
    for (int w = 0; w < steps; ++w) {
        for (int i = 0; i < st.positions.rows; ++i) {
            Vec grad = g.grad(st.positions.row(i));
            if (!all_finite(grad)) {
                st.frozen_events += 1;
                continue;
            }
            auto row = st.positions.row(i);
            for (int k = 0; k < g.dim; ++k) row[k] -= step_size * grad[k];
        }
        clamp_particles(st, g.support);
    }
}

TraceRow make_trace_row(const Objective& g, const ParticleState& st) {
    TraceRow row;
    row.step = st.step;
    if (g.basin_count > 0) row.basin_histogram.assign(g.basin_count, 0);
    for (int i = 0; i < st.positions.rows; ++i) {
        Vec grad = g.grad(st.positions.row(i));
        const double gn = all_finite(grad) ? norm2(grad) : 0.0;
        const double val = g.value(st.positions.row(i));
        row.mean_grad_norm += (gn - row.mean_grad_norm) / static_cast<double>(i + 1);
        row.mean_value += (val - row.mean_value) / static_cast<double>(i + 1);
        if (g.basin_count > 0) {
            const int b = g.basin(st.positions.row(i));
            if (b >= 0) row.basin_histogram[b] += 1;
        }
    }
    return row;
}

Mat uniform_init(const Objective& g, int n, Rng& rng) {
    Mat pos(n, g.dim);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < g.dim; ++k) pos(i, k) = rng.uniform(g.support.lo[k], g.support.hi[k]);
    return pos;
}

}  // namespace

LmcNpfResult run_lmc(const Objective& g, const SamplerConfig& cfg, Rng rng,
                     const std::optional<Mat>& init) {
    Rng init_stream = rng.fork(0);
    Rng particle_stream = rng.fork(1);

    LmcNpfResult res;
    res.particles = init_particles(init ? *init : uniform_init(g, cfg.particles, init_stream));
    warmup_descent(g, res.particles, cfg.warmup_steps, cfg.warmup_step_size);
    res.particles.step = 0;

    auto scaled_grad = [&](std::span<const double> x) {
        Vec gr = g.grad(x);
        scale(gr, cfg.mult_f);
        return gr;
    };
    for (long k = 0; k < cfg.k_max; ++k) {
        lmc_step(scaled_grad, res.particles, cfg.tau_f, particle_stream);
        clamp_particles(res.particles, g.support);
        if (k % cfg.trace_every == 0 || k + 1 == cfg.k_max)
            res.trace.push_back(make_trace_row(g, res.particles));
    }
    return res;
}

LmcNpfResult lmc_npf(const Objective& g, const SamplerConfig& cfg, const OnlineNpfConfig& npf,
                     Rng rng, const std::optional<Mat>& init, const NpfModel* warm_model,
                     const DriftNet* warm_drift) {
    Rng init_stream = rng.fork(0);
    Rng particle_stream = rng.fork(1);
    Rng train_stream = rng.fork(2);
    Rng gen_stream = rng.fork(3);

    LmcNpfResult res;
    res.particles = init_particles(init ? *init : uniform_init(g, cfg.particles, init_stream));

    if (warm_model) {
        res.model = *warm_model;
    } else {
        IcnnConfig icfg = npf.icnn;
        icfg.input_dim = g.dim;
        res.model.potential = init_icnn(icfg, train_stream);
        MlpConfig vcfg;
        vcfg.input_dim = g.dim;
        vcfg.output_dim = g.dim;
        vcfg.hidden = npf.amortizer_hidden;
        vcfg.activation = Activation::Relu;
        res.model.amortizer = init_mlp(vcfg, train_stream);
    }
    res.drift = warm_drift ? *warm_drift : init_drift(g.dim, npf.drift_hidden, train_stream);

    AdamState theta_state(npf.theta_adam, res.model.potential.theta.size());
    AdamState phi_state(npf.phi_adam, res.model.amortizer.theta.size());
    AdamState psi_state(npf.psi_adam, res.drift.net.theta.size());

    Vec grad_theta(res.model.potential.theta.size(), 0.0);
    Vec grad_phi(res.model.amortizer.theta.size(), 0.0);

    const int n = res.particles.positions.rows;
    const int d = g.dim;

    // One theta, one phi and one psi update from the current
    // particle/gradient pairs.
    auto update_online = [&](ParticleState& st) {
        PairedData batch;
        batch.xs = st.positions;
        batch.fxs = Mat(n, d);
        for (int i = 0; i < n; ++i) {
            Vec fg = g.grad(st.positions.row(i));
            batch.fxs.set_row(i, fg);
        }

        bool have_targets = true;
        try {
            AmortizationStats am = amortization_loss(res.model.amortizer, batch.fxs,
                                                     res.model.potential, npf.cs, grad_phi);
            res.cs_failures += am.failures;
            adam_step(phi_state, res.model.amortizer.all(), grad_phi);
        } catch (const std::runtime_error&) {
            res.cs_failures += n;
            have_targets = false;
        }

        MongeLossResult ml = monge_loss(res.model.potential, res.model.amortizer, batch, grad_theta);
        if (!std::isfinite(ml.loss))
            throw std::runtime_error("lmc_npf: potential training diverged at step " +
                                     std::to_string(st.step));
        adam_step(theta_state, res.model.potential.all(), grad_theta);
        project_convexity(res.model.potential);

        if (have_targets) {
            Mat starts(n, d), ends(n, d);
            int nv = 0;
            for (int i = 0; i < n; ++i) {
                ConjugateResult sol = implicit_map(res.model, batch.fxs.row(i), npf.cs);
                if (!sol.converged) {
                    res.cs_failures += 1;
                    continue;
                }
                starts.set_row(nv, sol.x);
                ends.set_row(nv, st.positions.row(i));
                ++nv;
            }
            if (nv > 0) {
                starts.rows = nv;
                ends.rows = nv;
                drift_regression_step(res.drift, psi_state, starts, ends, npf.bridge.sigma, n,
                                      train_stream);
            }
        }
    };

    // descent warm-up; the online components already learn from the
    // descent trajectories
    for (int w = 0; w < cfg.warmup_steps; ++w) {
        warmup_descent(g, res.particles, 1, cfg.warmup_step_size);
        update_online(res.particles);
    }
    res.particles.step = 0;

    auto scaled_grad_f = [&](std::span<const double> x) {
        Vec gr = g.grad(x);
        scale(gr, cfg.mult_f);
        return gr;
    };

    for (long k = 0; k < cfg.k_max; ++k) {
        if (k > 0 && cfg.period > 0 && k % cfg.period == 0) {
            res.lifts += 1;
            // lift to the potential's geometry
            Mat lifted(n, d);
            for (int i = 0; i < n; ++i) {
                Vec fg = g.grad(res.particles.positions.row(i));
                ConjugateResult sol = implicit_map(res.model, fg, npf.cs);
                if (!sol.converged) res.cs_failures += 1;
                lifted.set_row(i, sol.x);
            }
            ParticleState ys = init_particles(lifted);
            auto scaled_grad_u = [&](std::span<const double> y) {
                Vec gr = icnn_grad_input(res.model.potential, y);
                scale(gr, cfg.mult_u);
                return gr;
            };
            for (int s = 0; s < cfg.period; ++s)
                lmc_step(scaled_grad_u, ys, cfg.tau_u, particle_stream);
            for (int i = 0; i < n; ++i) {
                Rng draw = gen_stream.fork(static_cast<uint64_t>(k) * n + i);
                Vec x = sde_sample(res.drift, ys.positions.row(i), npf.bridge, draw);
                res.particles.positions.set_row(i, x);
            }
            res.particles.step += 1;
        } else {
            lmc_step(scaled_grad_f, res.particles, cfg.tau_f, particle_stream);
        }
        clamp_particles(res.particles, g.support);
        update_online(res.particles);
        if (k % cfg.trace_every == 0 || k + 1 == cfg.k_max)
            res.trace.push_back(make_trace_row(g, res.particles));
    }
    return res;
}

Mat critical_point_sample(const NpfModel& model, const DriftNet& drift, const BridgeConfig& cfg,
                          const ConjugateConfig& cs, std::span<const double> v, Rng& rng,
                          int count, const Box* support) {
    ConjugateResult sol = implicit_map(model, v, cs);
    if (!sol.converged)
        throw std::runtime_error("critical_point_sample: conjugate solve did not converge");
    Mat out(count, static_cast<int>(v.size()));
    for (int i = 0; i < count; ++i) {
        Vec x = sde_sample(drift, sol.x, cfg, rng);
        if (support) support->clamp(x);
        out.set_row(i, x);
    }
    return out;
}

}  // namespace npf
