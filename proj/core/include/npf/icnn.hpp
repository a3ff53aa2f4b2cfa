#pragma once

// Input convex network with (positive diagonal + low rank) quadratic
// layers. The scalar output
//
//   z_0     = act([Q_0i(x)]_i + B_0 x + c_0)
//   z_l     = act(W_l z_{l-1} + [Q_li(x)]_i + B_l x + c_l),   l = 1..L-1
//   u(x)    = w.z_{L-1} + Q_out(x) + b.x + c_out
//
// with Q_{A,delta}(x) = |delta o x|^2 + |A x|^2 is convex in x as long
// as W_l, w and all delta vectors stay entrywise non-negative and the
// activation is convex non-decreasing. Parameters live in one flat
// float64 array addressed through an offset layout so the optimizer,
// the convexity projection and serialization all see the same view.

#include <optional>
#include <span>

#include "npf/activation.hpp"
#include "npf/numcore.hpp"

namespace npf {

enum class IcnnInit {
    Identity,     // gradient map starts near the identity (or the moment-matching affine map)
    SmallRandom,  // small random everything; quadratic diagonals at the feasibility floor
};

struct IcnnConfig {
    int input_dim = 2;
    int width = 64;
    int depth = 4;            // number of hidden layers
    int quad_rank = 1;        // rank of the per-unit hidden quadratics, 0 disables them
    int final_quad_rank = 1;  // rank of the output quadratic, 0 disables it
    // Scalar isotropic quadratic alpha/2 |x|^2 with a positivity floor;
    // keeps the potential strongly convex (and its conjugate reachable)
    // for variants whose output quadratic form is disabled.
    bool iso_quad = false;
    double iso_quad_init = 0.5;
    Activation activation = Activation::Elu;
    double delta_min = 1e-2;  // floor on the output quadratic diagonal
    IcnnInit init = IcnnInit::Identity;
    double init_scale = 1e-2;

    void validate() const;
    bool has_hidden_quadratics() const { return quad_rank > 0; }
    bool has_final_quadratic() const { return final_quad_rank > 0; }
};

// Flat offsets; -1 marks an absent block.
struct IcnnLayout {
    struct Hidden {
        long w = -1;     // width x prev_width, layer 0 has none
        long b = -1;     // width x input_dim
        long c = -1;     // width
        long quad = -1;  // per unit: delta (d) then A (rank x d)
    };
    std::vector<Hidden> hidden;
    long w_out = -1;
    long delta_out = -1;
    long a_out = -1;
    long alpha_out = -1;  // scalar isotropic quadratic weight
    long b_out = -1;
    long c_out = -1;
    long total = 0;

    static IcnnLayout build(const IcnnConfig& cfg);
};

struct IcnnParams {
    IcnnConfig cfg;
    IcnnLayout layout;
    Vec theta;

    std::span<double> all() { return theta; }
    std::span<const double> all() const { return theta; }
    long parameter_count() const { return layout.total; }
};

// Reusable per-evaluation buffers; forward fills them, the gradient
// passes consume them.
struct IcnnScratch {
    std::vector<Vec> pre;   // preactivations per hidden layer
    std::vector<Vec> act;   // activations per hidden layer
    std::vector<Vec> gpre;  // backprop buffers
};

double quadratic_form(const Mat& a, std::span<const double> delta, std::span<const double> x);

// First and second moments of the source samples and their field
// images; the identity-leaning init matches the affine map between the
// two scales when a hint is given.
struct MomentHint {
    Vec source_mean;
    Vec source_var;
    Vec target_mean;
    Vec target_var;
};

IcnnParams init_icnn(const IcnnConfig& cfg, Rng& rng,
                     const std::optional<MomentHint>& moments = {});

double icnn_forward(const IcnnParams& p, std::span<const double> x, IcnnScratch& scratch);
double icnn_forward(const IcnnParams& p, std::span<const double> x);

// Exact reverse-mode gradient of u with respect to x.
void icnn_grad_input(const IcnnParams& p, std::span<const double> x, std::span<double> grad,
                     IcnnScratch& scratch);
Vec icnn_grad_input(const IcnnParams& p, std::span<const double> x);

// Accumulates d(upstream * u(x))/dtheta into grad (same layout as theta).
// Returns u(x).
double icnn_grad_params(const IcnnParams& p, std::span<const double> x, double upstream,
                        std::span<double> grad, IcnnScratch& scratch);

// Clamps W, w and the hidden quadratic diagonals to >= 0 and the output
// quadratic diagonal to >= delta_min. Idempotent.
void project_convexity(IcnnParams& p);

}  // namespace npf
