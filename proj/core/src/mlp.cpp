#include "npf/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace npf {

void MlpConfig::validate() const {
    if (input_dim < 1 || output_dim < 1)
        throw std::invalid_argument("mlp: input/output dims must be >= 1");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("mlp: hidden widths must be >= 1");
}

MlpLayout MlpLayout::build(const MlpConfig& cfg) {
    cfg.validate();
    MlpLayout lay;
    long at = 0;
    int prev = cfg.input_dim;
    auto push = [&](int out) {
        Layer l;
        l.in = prev;
        l.out = out;
        l.w = at;
        at += static_cast<long>(out) * prev;
        l.b = at;
        at += out;
        lay.layers.push_back(l);
        prev = out;
    };
    for (int h : cfg.hidden) push(h);
    push(cfg.output_dim);
    lay.total = at;
    return lay;
}

MlpParams init_mlp(const MlpConfig& cfg, Rng& rng) {
    MlpParams p;
    p.cfg = cfg;
    p.layout = MlpLayout::build(cfg);
    p.theta.assign(p.layout.total, 0.0);
    double* th = p.theta.data();
    for (const auto& l : p.layout.layers) {
        const double s = std::sqrt(2.0 / static_cast<double>(l.in));
        for (long k = 0; k < static_cast<long>(l.out) * l.in; ++k) th[l.w + k] = s * rng.normal();
        // biases zero
    }
    return p;
}

namespace {

void ensure_scratch(const MlpParams& p, MlpScratch& s) {
    const size_t n = p.layout.layers.size();
    if (s.pre.size() != n) {
        s.pre.assign(n, {});
        s.act.assign(n + 1, {});
        s.gpre.assign(n, {});
        for (size_t l = 0; l < n; ++l) {
            s.pre[l].assign(p.layout.layers[l].out, 0.0);
            s.gpre[l].assign(p.layout.layers[l].out, 0.0);
        }
        s.act[0].assign(p.cfg.input_dim, 0.0);
        for (size_t l = 0; l < n; ++l) s.act[l + 1].assign(p.layout.layers[l].out, 0.0);
    }
}

void forward_impl(const MlpParams& p, std::span<const double> input, MlpScratch& s) {
    if (static_cast<int>(input.size()) != p.cfg.input_dim)
        throw std::invalid_argument("mlp_forward: input dimension mismatch");
    ensure_scratch(p, s);
    std::copy(input.begin(), input.end(), s.act[0].begin());
    const double* th = p.theta.data();
    const size_t n = p.layout.layers.size();
    for (size_t l = 0; l < n; ++l) {
        const auto& lay = p.layout.layers[l];
        const Vec& in = s.act[l];
        const bool last = (l + 1 == n);
        for (int i = 0; i < lay.out; ++i) {
            const double* wrow = th + lay.w + static_cast<long>(i) * lay.in;
            double acc = th[lay.b + i];
            for (int j = 0; j < lay.in; ++j) acc += wrow[j] * in[j];
            s.pre[l][i] = acc;
            s.act[l + 1][i] = last ? acc : activate(p.cfg.activation, acc);
        }
    }
}

}  // namespace

void mlp_forward(const MlpParams& p, std::span<const double> input, std::span<double> output,
                 MlpScratch& s) {
    if (static_cast<int>(output.size()) != p.cfg.output_dim)
        throw std::invalid_argument("mlp_forward: output size mismatch");
    forward_impl(p, input, s);
    const Vec& out = s.act.back();
    std::copy(out.begin(), out.end(), output.begin());
}

Vec mlp_forward(const MlpParams& p, std::span<const double> input) {
    Vec out(p.cfg.output_dim, 0.0);
    MlpScratch s;
    mlp_forward(p, input, out, s);
    return out;
}

void mlp_grad_params(const MlpParams& p, std::span<const double> input,
                     std::span<const double> upstream, std::span<double> grad,
                     std::span<double> output, MlpScratch& s) {
    if (static_cast<int>(upstream.size()) != p.cfg.output_dim)
        throw std::invalid_argument("mlp_grad_params: upstream size mismatch");
    if (static_cast<long>(grad.size()) != p.layout.total)
        throw std::invalid_argument("mlp_grad_params: grad size mismatch");
    forward_impl(p, input, s);
    if (!output.empty()) {
        if (static_cast<int>(output.size()) != p.cfg.output_dim)
            throw std::invalid_argument("mlp_grad_params: output size mismatch");
        std::copy(s.act.back().begin(), s.act.back().end(), output.begin());
    }

    const double* th = p.theta.data();
    double* g = grad.data();
    const int n = static_cast<int>(p.layout.layers.size());
    // output layer is linear
    std::copy(upstream.begin(), upstream.end(), s.gpre[n - 1].begin());
    for (int l = n - 1; l >= 0; --l) {
        const auto& lay = p.layout.layers[l];
        const Vec& in = s.act[l];
        for (int i = 0; i < lay.out; ++i) {
            const double gi = s.gpre[l][i];
            if (gi == 0.0) continue;
            double* gw = g + lay.w + static_cast<long>(i) * lay.in;
            for (int j = 0; j < lay.in; ++j) gw[j] += gi * in[j];
            g[lay.b + i] += gi;
        }
        if (l > 0) {
            Vec& gprev = s.gpre[l - 1];
            const auto& prev = p.layout.layers[l - 1];
            for (int j = 0; j < lay.in; ++j) {
                double acc = 0.0;
                for (int i = 0; i < lay.out; ++i)
                    acc += th[lay.w + static_cast<long>(i) * lay.in + j] * s.gpre[l][i];
                gprev[j] = acc * activate_deriv(p.cfg.activation, s.pre[l - 1][j]);
            }
            (void)prev;
        }
    }
}

}  // namespace npf
