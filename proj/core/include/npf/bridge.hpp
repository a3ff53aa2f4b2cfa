#pragma once

// Stochastic inverse of the measure-preserving map via augmented bridge
// matching: the drift net predicts the endpoint from (start, current
// state); sampling integrates dX = (drift(X0, X) - X)/(1 - t) dt
// + sigma dB with a fixed-step stochastic Heun scheme, stopping just
// short of t = 1 where the drift is singular.

#include "npf/conjugate.hpp"
#include "npf/mlp.hpp"
#include "npf/npf_train.hpp"
#include "npf/numcore.hpp"

namespace npf {

struct BridgeConfig {
    double sigma = 0.1;
    int sde_steps = 100;  // S
    double t_max = 0.0;   // <= 0 selects 1 - 1/(2S)
    int train_steps = 4000;
    int batch_size = 256;
    AdamConfig adam{LrSchedule::cosine(1e-3, 0.01, 4000), 0.9, 0.999, 1e-8};
    std::vector<int> hidden = {128, 128};

    double effective_t_max() const {
        return t_max > 0.0 ? t_max : 1.0 - 1.0 / (2.0 * sde_steps);
    }
    void validate() const;
};

struct DriftNet {
    MlpParams net;  // input (y, x_t, t) of width 2d + 1, output width d, SiLU
    int dim = 0;
};

DriftNet init_drift(int dim, const std::vector<int>& hidden, Rng& rng);

// (1-t) y + t x + sigma sqrt(t(1-t)) z
Vec bridge_interpolate(std::span<const double> y, std::span<const double> x, double t,
                       double sigma, std::span<const double> z);

struct DriftTrainResult {
    DriftNet drift;
    double final_loss = 0.0;
    int cs_failures = 0;
};

// Bridge-matching regression: pair each training point with its
// conjugate-solve image (computed once; the potential is frozen), draw
// per-sample t ~ U[0,1] and z ~ N(0,I), build the noisy interpolant and
// regress the drift net onto the endpoint under squared loss.
DriftTrainResult train_drift(const NpfModel& model, const PairedData& train,
                             const BridgeConfig& cfg, const ConjugateConfig& cs, Rng& rng);

// One posterior draw: integrate the SDE from X0 = y to t_max with S
// fixed stochastic-Heun steps (the Brownian increment is shared between
// predictor and corrector). Throws std::runtime_error naming the step
// if the state leaves the finite range.
Vec sde_sample(const DriftNet& drift, std::span<const double> y, const BridgeConfig& cfg,
               Rng& rng);

// Gradient step count of train_drift on a precomputed pair set; exposed
// for the online refresh inside the sampler.
void drift_regression_step(DriftNet& drift, AdamState& state, const Mat& starts,
                           const Mat& endpoints, double sigma, int batch_size, Rng& rng);

}  // namespace npf
