#pragma once

// Langevin Monte Carlo on a non-convex objective, critical-point
// generation through the factorization's stochastic inverse, and the
// alternating LMC scheme that lifts particles into the convex
// potential's geometry every N-th step while refreshing the learned
// components online from the particle trajectories.

#include <functional>
#include <optional>

#include "npf/bridge.hpp"
#include "npf/npf_train.hpp"
#include "npf/numcore.hpp"

namespace npf {

struct Objective {
    int dim = 0;
    std::function<double(std::span<const double>)> value;
    std::function<Vec(std::span<const double>)> grad;
    Box support;
    // Optional basin classifier (>= 0 labels a basin, -1 means none);
    // basin_count > 0 when defined.
    std::function<int(std::span<const double>)> basin;
    int basin_count = 0;
};

// Separable four-well objective: stiffness * sum_k (x_k^2 - 1)^2 with
// minima at (+-1, +-1) on a [-2, 2]^2 box. Basins are balls of radius
// 0.35 around the minima, labelled by quadrant.
Objective make_quad_well(double stiffness = 8.0);
// 1-D double well (x^2 - 1)^2 / 4; gradient roots at -1, 0, +1.
Objective make_double_well_1d();

struct ParticleState {
    Mat positions;  // n x d
    long step = 0;
    Vec last_grad_norm;
    Vec last_value;
    long frozen_events = 0;  // particle-steps skipped due to non-finite gradients
};

ParticleState init_particles(const Mat& positions);

// x <- x - gamma grad(x) + sqrt(2 gamma) z per particle. A particle with
// a non-finite gradient keeps its position for this step and is counted
// in frozen_events. gamma = 0 degenerates to the identity update.
void lmc_step(const std::function<Vec(std::span<const double>)>& grad, ParticleState& state,
              double gamma, Rng& rng);

struct SamplerConfig {
    double tau_f = 1e-4;    // LMC step size on the objective
    double tau_u = 1e-4;    // LMC step size on the potential
    double mult_f = 1000.0; // gradient multiplier for objective steps
    double mult_u = 1000.0; // gradient multiplier for potential steps
    int period = 200;       // N
    long k_max = 2000;
    int particles = 128;
    int warmup_steps = 200;
    double warmup_step_size = 0.05;
    int trace_every = 10;
};

struct OnlineNpfConfig {
    IcnnConfig icnn;
    std::vector<int> amortizer_hidden = {64, 64};
    std::vector<int> drift_hidden = {64, 64};
    AdamConfig theta_adam{LrSchedule::constant(1e-3), 0.5, 0.5, 1e-8};
    AdamConfig phi_adam{LrSchedule::constant(5e-4), 0.9, 0.999, 1e-8};
    AdamConfig psi_adam{LrSchedule::constant(5e-4), 0.9, 0.999, 1e-8};
    ConjugateConfig cs;
    BridgeConfig bridge;  // sigma / SDE steps for lifting and generation
};

struct TraceRow {
    long step = 0;
    double mean_grad_norm = 0.0;
    double mean_value = 0.0;
    std::vector<long> basin_histogram;
};

struct LmcNpfResult {
    ParticleState particles;
    std::vector<TraceRow> trace;
    NpfModel model;
    DriftNet drift;
    long lifts = 0;
    long cs_failures = 0;
};

// Plain LMC with the configured multiplier and step size; same particle
// noise stream as lmc_npf so degenerate configurations coincide.
LmcNpfResult run_lmc(const Objective& g, const SamplerConfig& cfg, Rng rng,
                     const std::optional<Mat>& init = {});

// Alternating scheme: warm-up gradient descent, then LMC on the
// objective with a lift every N-th step (N > 0): particles map through
// the implicit measure-preserving map, take N LMC steps on the convex
// potential and return through the stochastic inverse. The potential,
// amortizer and drift take one update each per step from the current
// particle/gradient pairs. Particles are clamped to the support box
// after every move.
LmcNpfResult lmc_npf(const Objective& g, const SamplerConfig& cfg, const OnlineNpfConfig& npf,
                     Rng rng, const std::optional<Mat>& init = {},
                     const NpfModel* warm_model = nullptr, const DriftNet* warm_drift = nullptr);

// Samples `count` points whose field value is approximately v: one
// conjugate solve at v, then fresh posterior draws from the inverse
// generator. Draws are clamped into `support` when given, matching the
// bounded-support convention used everywhere else.
Mat critical_point_sample(const NpfModel& model, const DriftNet& drift, const BridgeConfig& cfg,
                          const ConjugateConfig& cs, std::span<const double> v, Rng& rng,
                          int count, const Box* support = nullptr);

}  // namespace npf
