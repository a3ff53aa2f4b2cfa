#pragma once

// Evaluation metrics: debiased Sinkhorn divergence between point clouds
// (log-domain), the 5%-of-mean-squared-distance epsilon rule, L2
// unexplained variance percentage, nearest-image anchor sets and the
// posterior / inversion metrics built on them.

#include <functional>
#include <span>
#include <vector>

#include "npf/numcore.hpp"

namespace npf {

struct SinkhornConfig {
    double epsilon = 1e-1;      // absolute entropic regularization
    int max_iterations = 2000;
    double tolerance = 1e-9;    // L1 marginal violation
};

struct SinkhornResult {
    double value = 0.0;
    bool converged = true;
    int iterations = 0;
};

// Entropic OT value between uniform point clouds, cost |x-y|^2,
// evaluated as the dual objective at the Sinkhorn fixed point.
SinkhornResult entropic_ot(const Mat& a, const Mat& b, const SinkhornConfig& cfg);

// S_eps(a,b) = OT_eps(a,b) - (OT_eps(a,a) + OT_eps(b,b)) / 2.
SinkhornResult sinkhorn_divergence(const Mat& a, const Mat& b, const SinkhornConfig& cfg);

struct EpsilonResult {
    double value = 0.0;
    bool degenerate = false;  // all points identical; value floored
};

// 0.05 x mean squared pairwise distance. Exhaustive n x n grid
// (self-pairs included) up to 2048 points, otherwise a 2048 x 2048
// with-replacement Monte-Carlo grid.
EpsilonResult epsilon_rule(const Mat& points, Rng& rng);

using MapFn = std::function<Vec(std::span<const double>)>;

// 100 x mean |T_hat(x) - T_star(x)|^2 / Var(target), Var = trace of the
// target covariance. Throws on non-positive target variance.
double l2_uvp(const MapFn& t_hat, const MapFn& t_star, const Mat& samples,
              double target_variance);

// Indices of the c points whose images are nearest (squared Euclidean)
// to the anchor's image; ties broken by index order.
std::vector<int> b_alpha_set(const Mat& images, int anchor, int cardinality);

using GeneratorFn = std::function<Vec(std::span<const double> y, Rng& rng)>;

struct PosteriorMetricConfig {
    int anchors = 16;
    int cardinality = 128;
    int baseline_size = 128;
    SinkhornConfig sinkhorn;  // epsilon filled from the source-space rule if <= 0
};

struct PosteriorMetricResult {
    double value = 0.0;     // mean S_eps(generated cloud, anchor set) over anchors
    double baseline = 0.0;  // S_eps between two independent same-size draws
    double epsilon = 0.0;
    int anchors = 0;
};

PosteriorMetricResult posterior_metric(const GeneratorFn& generator, const Mat& points,
                                       const Mat& images, const PosteriorMetricConfig& cfg,
                                       Rng& rng);

using FieldFn = std::function<Vec(std::span<const double>)>;
using ConjugateFn = std::function<Vec(std::span<const double>)>;  // y -> grad u*(y)

struct CosineMetricResult {
    double value = 0.0;
    int zero_vector_warnings = 0;
};

// Mean cosine between the field at regenerated inputs and the original
// field values; zero-norm vectors contribute 0 and are counted.
CosineMetricResult cosine_inversion_metric(const FieldFn& field, const ConjugateFn& conjugate,
                                           const GeneratorFn& generator, const Mat& test_points,
                                           Rng& rng, int draws_per_point);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace npf
