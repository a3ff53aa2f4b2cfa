#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace npf {

// Convex non-decreasing activations for the convex potential (Elu,
// Softplus, Relu) plus the generic MLP choices (Relu, Silu).
enum class Activation { Elu, Softplus, Relu, Silu };

inline double activate(Activation a, double x) {
    switch (a) {
        case Activation::Elu:
            return x > 0.0 ? x : std::expm1(x);
        case Activation::Softplus:
            return x > 30.0 ? x : std::log1p(std::exp(x));
        case Activation::Relu:
            return x > 0.0 ? x : 0.0;
        case Activation::Silu:
            return x / (1.0 + std::exp(-x));
    }
    return x;
}

inline double activate_deriv(Activation a, double x) {
    switch (a) {
        case Activation::Elu:
            return x > 0.0 ? 1.0 : std::exp(x);
        case Activation::Softplus:
            return 1.0 / (1.0 + std::exp(-x));
        case Activation::Relu:
            return x > 0.0 ? 1.0 : 0.0;  // subgradient 0 at the kink
        case Activation::Silu: {
            double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 + x * (1.0 - s));
        }
    }
    return 1.0;
}

inline bool activation_is_convex_nondecreasing(Activation a) {
    return a == Activation::Elu || a == Activation::Softplus || a == Activation::Relu;
}

inline std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Elu: return "elu";
        case Activation::Softplus: return "softplus";
        case Activation::Relu: return "relu";
        case Activation::Silu: return "silu";
    }
    return "?";
}

inline Activation activation_from_name(const std::string& name) {
    if (name == "elu") return Activation::Elu;
    if (name == "softplus") return Activation::Softplus;
    if (name == "relu") return Activation::Relu;
    if (name == "silu") return Activation::Silu;
    throw std::invalid_argument("unknown activation: " + name);
}

}  // namespace npf
