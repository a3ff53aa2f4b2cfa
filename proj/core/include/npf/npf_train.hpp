#pragma once

// Polar-factorization trainer: fits the convex potential with the Monge
// dual loss while the amortizer regresses onto conjugate-solver targets,
// exposes the implicit measure-preserving map (a conjugate solve on the
// field value) and optionally trains the explicit map network.

#include <functional>
#include <optional>

#include "npf/conjugate.hpp"
#include "npf/fields.hpp"
#include "npf/icnn.hpp"
#include "npf/mlp.hpp"
#include "npf/numcore.hpp"

namespace npf {

struct NpfTrainConfig {
    int steps = 2000;
    int batch_size = 256;
    int amortizer_batch = 0;  // rows of the step batch used for the amortizer step; 0 = all
    AdamConfig theta_adam{LrSchedule::cosine(1e-3, 0.1, 2000), 0.5, 0.5, 1e-8};
    AdamConfig phi_adam{LrSchedule::cosine(5e-4, 0.01, 2000), 0.9, 0.999, 1e-8};
    ConjugateConfig cs;
    double train_fraction = 0.85;
    int log_every = 50;
    std::vector<int> amortizer_hidden = {128, 128};
};

struct TrainRow {
    long step = 0;
    double loss_monge = 0.0;
    double loss_dual = 0.0;
    double mean_cs_iterations = 0.0;
    int cs_failures = 0;
};

struct TrainLog {
    std::vector<TrainRow> rows;
    bool diverged = false;
    long diverged_at = -1;
};

struct NpfModel {
    IcnnParams potential;  // convex potential
    MlpParams amortizer;   // predicts grad u*(F(x)) from F(x)
};

struct MongeLossResult {
    double loss = 0.0;
};

// L(theta) = mean[ u(x_i) + <V(F x_i), F x_i> - u(V(F x_i)) ]; gradient
// flows to theta through both u terms, the amortizer is frozen.
MongeLossResult monge_loss(const IcnnParams& potential, const MlpParams& amortizer,
                           const PairedData& batch, std::span<double> grad_theta);

struct SplitData {
    PairedData train;
    PairedData test;
};

// Deterministic shuffled split; first `fraction` of the permutation is
// the training set.
SplitData split_data(const PairedData& data, double fraction, Rng& rng);

PairedData sample_batch(const PairedData& data, int n, Rng& rng);

struct TrainPotentialResult {
    NpfModel model;
    TrainLog log;
};

// Alternates one amortizer step on the conjugate regression and one
// potential step on the Monge dual per outer step, projecting the
// potential onto the convexity constraints after each update. A
// non-finite loss reverts to the previous step's parameters and stops.
TrainPotentialResult train_potential(const PairedData& train, const IcnnConfig& icnn_cfg,
                                     const NpfTrainConfig& cfg, Rng& rng,
                                     const std::optional<MomentHint>& moment_hint = {});

// Implicit measure-preserving map: conjugate solve at F(x), warm-started
// at the amortizer prediction.
ConjugateResult implicit_map(const NpfModel& model, std::span<const double> field_value,
                             const ConjugateConfig& cs);

struct ExplicitMapConfig {
    int steps = 2000;
    int batch_size = 256;
    AdamConfig adam{LrSchedule::cosine(5e-4, 0.01, 2000), 0.9, 0.999, 1e-8};
    std::vector<int> hidden = {128, 128};
};

struct ExplicitMapResult {
    MlpParams map;        // x -> grad u*(F(x)), trained on solver targets
    double final_loss = 0.0;
    int cs_failures = 0;
};

// Regresses the explicit map network onto conjugate-solver targets
// computed once per training point (the potential is frozen here).
// Unlike the amortizer this network sees x, not F(x).
ExplicitMapResult train_explicit_map(const NpfModel& model, const PairedData& train,
                                     const ExplicitMapConfig& cfg, const ConjugateConfig& cs,
                                     Rng& rng);

// Mean per-coordinate variance helpers used for init hints.
Vec column_variances(const Mat& m);
Vec column_means(const Mat& m);

}  // namespace npf
