#pragma once

// Plain dense feed-forward network with a linear output layer and flat
// float64 parameter storage, used for the conjugate amortizer, the
// explicit measure-preserving map and the SDE drift.

#include <span>
#include <vector>

#include "npf/activation.hpp"
#include "npf/numcore.hpp"

namespace npf {

struct MlpConfig {
    int input_dim = 0;
    int output_dim = 0;
    std::vector<int> hidden;  // may be empty: a single linear layer
    Activation activation = Activation::Relu;

    void validate() const;
};

struct MlpLayout {
    struct Layer {
        long w = 0;  // out x in, row-major
        long b = 0;  // out
        int in = 0;
        int out = 0;
    };
    std::vector<Layer> layers;
    long total = 0;

    static MlpLayout build(const MlpConfig& cfg);
};

struct MlpParams {
    MlpConfig cfg;
    MlpLayout layout;
    Vec theta;

    std::span<double> all() { return theta; }
    std::span<const double> all() const { return theta; }
    long parameter_count() const { return layout.total; }
};

struct MlpScratch {
    std::vector<Vec> pre;
    std::vector<Vec> act;   // act[0] is the input copy
    std::vector<Vec> gpre;
};

MlpParams init_mlp(const MlpConfig& cfg, Rng& rng);

void mlp_forward(const MlpParams& p, std::span<const double> input, std::span<double> output,
                 MlpScratch& scratch);
Vec mlp_forward(const MlpParams& p, std::span<const double> input);

// Accumulates d(upstream . output)/dtheta into grad; forward runs
// internally. Returns the network output in `output`.
void mlp_grad_params(const MlpParams& p, std::span<const double> input,
                     std::span<const double> upstream, std::span<double> grad,
                     std::span<double> output, MlpScratch& scratch);

}  // namespace npf
