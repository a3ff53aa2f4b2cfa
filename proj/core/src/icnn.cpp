#include "npf/icnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace npf {

void IcnnConfig::validate() const {
    if (input_dim < 1) throw std::invalid_argument("icnn: input_dim must be >= 1");
    if (width < 1) throw std::invalid_argument("icnn: width must be >= 1");
    if (depth < 1) throw std::invalid_argument("icnn: depth must be >= 1");
    if (quad_rank < 0 || final_quad_rank < 0)
        throw std::invalid_argument("icnn: quadratic ranks must be >= 0");
    if (delta_min < 0.0) throw std::invalid_argument("icnn: delta_min must be >= 0");
    if (!activation_is_convex_nondecreasing(activation))
        throw std::invalid_argument("icnn: activation must be convex non-decreasing (elu, softplus, relu)");
}

IcnnLayout IcnnLayout::build(const IcnnConfig& cfg) {
    cfg.validate();
    IcnnLayout lay;
    const int d = cfg.input_dim;
    const int q = cfg.width;
    long at = 0;
    for (int l = 0; l < cfg.depth; ++l) {
        Hidden h;
        if (l > 0) {
            h.w = at;
            at += static_cast<long>(q) * q;
        }
        h.b = at;
        at += static_cast<long>(q) * d;
        h.c = at;
        at += q;
        if (cfg.has_hidden_quadratics()) {
            h.quad = at;
            at += static_cast<long>(q) * (d + cfg.quad_rank * d);
        }
        lay.hidden.push_back(h);
    }
    lay.w_out = at;
    at += q;
    if (cfg.has_final_quadratic()) {
        lay.delta_out = at;
        at += d;
        lay.a_out = at;
        at += static_cast<long>(cfg.final_quad_rank) * d;
    }
    if (cfg.iso_quad) {
        lay.alpha_out = at;
        at += 1;
    }
    lay.b_out = at;
    at += d;
    lay.c_out = at;
    at += 1;
    lay.total = at;
    return lay;
}

double quadratic_form(const Mat& a, std::span<const double> delta, std::span<const double> x) {
    if (delta.size() != x.size())
        throw std::invalid_argument("quadratic_form: delta/x size mismatch");
    if (a.rows > 0 && a.cols != static_cast<int>(x.size()))
        throw std::invalid_argument("quadratic_form: A columns must match x");
    double s = 0.0;
    for (size_t k = 0; k < x.size(); ++k) {
        double t = delta[k] * x[k];
        s += t * t;
    }
    for (int r = 0; r < a.rows; ++r) {
        double t = dot(a.row(r), x);
        s += t * t;
    }
    return s;
}

namespace {

// Quadratic block accessors: per unit i the block holds delta_i (d
// values) followed by A_i (rank rows of d values).
struct QuadView {
    const double* base;
    int d;
    int rank;
    const double* delta(int i) const { return base + static_cast<long>(i) * (d + rank * d); }
    const double* a_row(int i, int r) const { return delta(i) + d + static_cast<long>(r) * d; }
};

struct QuadViewMut {
    double* base;
    int d;
    int rank;
    double* delta(int i) const { return base + static_cast<long>(i) * (d + rank * d); }
    double* a_row(int i, int r) const { return delta(i) + d + static_cast<long>(r) * d; }
};

double quad_value(const QuadView& q, int i, std::span<const double> x) {
    double s = 0.0;
    const double* del = q.delta(i);
    for (int k = 0; k < q.d; ++k) {
        double t = del[k] * x[k];
        s += t * t;
    }
    for (int r = 0; r < q.rank; ++r) {
        const double* row = q.a_row(i, r);
        double t = 0.0;
        for (int k = 0; k < q.d; ++k) t += row[k] * x[k];
        s += t * t;
    }
    return s;
}

// grad += coeff * dQ_i/dx
void quad_grad_x(const QuadView& q, int i, std::span<const double> x, double coeff,
                 std::span<double> grad) {
    const double* del = q.delta(i);
    for (int k = 0; k < q.d; ++k) grad[k] += coeff * 2.0 * del[k] * del[k] * x[k];
    for (int r = 0; r < q.rank; ++r) {
        const double* row = q.a_row(i, r);
        double t = 0.0;
        for (int k = 0; k < q.d; ++k) t += row[k] * x[k];
        for (int k = 0; k < q.d; ++k) grad[k] += coeff * 2.0 * t * row[k];
    }
}

// gquad += coeff * dQ_i/d(delta_i, A_i)
void quad_grad_params(const QuadView& q, int i, std::span<const double> x, double coeff,
                      const QuadViewMut& gquad) {
    const double* del = q.delta(i);
    double* gdel = gquad.delta(i);
    for (int k = 0; k < q.d; ++k) gdel[k] += coeff * 2.0 * del[k] * x[k] * x[k];
    for (int r = 0; r < q.rank; ++r) {
        const double* row = q.a_row(i, r);
        double* grow = gquad.a_row(i, r);
        double t = 0.0;
        for (int k = 0; k < q.d; ++k) t += row[k] * x[k];
        for (int k = 0; k < q.d; ++k) grow[k] += coeff * 2.0 * t * x[k];
    }
}

void ensure_scratch(const IcnnConfig& cfg, IcnnScratch& s) {
    if (static_cast<int>(s.pre.size()) != cfg.depth) {
        s.pre.assign(cfg.depth, Vec(cfg.width, 0.0));
        s.act.assign(cfg.depth, Vec(cfg.width, 0.0));
        s.gpre.assign(cfg.depth, Vec(cfg.width, 0.0));
    }
}

double forward_impl(const IcnnParams& p, std::span<const double> x, IcnnScratch& s) {
    const IcnnConfig& cfg = p.cfg;
    if (static_cast<int>(x.size()) != cfg.input_dim)
        throw std::invalid_argument("icnn_forward: input dimension mismatch");
    ensure_scratch(cfg, s);
    const int d = cfg.input_dim;
    const int q = cfg.width;
    const double* th = p.theta.data();

    for (int l = 0; l < cfg.depth; ++l) {
        const auto& hl = p.layout.hidden[l];
        Vec& pre = s.pre[l];
        QuadView qv{cfg.has_hidden_quadratics() ? th + hl.quad : nullptr, d, cfg.quad_rank};
        for (int i = 0; i < q; ++i) {
            double acc = th[hl.c + i];
            const double* brow = th + hl.b + static_cast<long>(i) * d;
            for (int k = 0; k < d; ++k) acc += brow[k] * x[k];
            if (l > 0) {
                const double* wrow = th + hl.w + static_cast<long>(i) * q;
                const Vec& prev = s.act[l - 1];
                for (int j = 0; j < q; ++j) acc += wrow[j] * prev[j];
            }
            if (qv.base) acc += quad_value(qv, i, x);
            pre[i] = acc;
            s.act[l][i] = activate(cfg.activation, acc);
        }
    }

    double out = th[p.layout.c_out];
    const Vec& last = s.act[cfg.depth - 1];
    for (int i = 0; i < q; ++i) out += th[p.layout.w_out + i] * last[i];
    for (int k = 0; k < d; ++k) out += th[p.layout.b_out + k] * x[k];
    if (cfg.has_final_quadratic()) {
        QuadView qf{th + p.layout.delta_out, d, cfg.final_quad_rank};
        out += quad_value(qf, 0, x);
    }
    if (cfg.iso_quad) {
        double sq = 0.0;
        for (int k = 0; k < d; ++k) sq += x[k] * x[k];
        out += 0.5 * th[p.layout.alpha_out] * sq;
    }
    return out;
}

// Fills s.gpre with d(out)/d(pre) * upstream; forward must have run on x.
void backprop_preacts(const IcnnParams& p, IcnnScratch& s, double upstream) {
    const IcnnConfig& cfg = p.cfg;
    const int q = cfg.width;
    const double* th = p.theta.data();
    const int last = cfg.depth - 1;
    for (int i = 0; i < q; ++i)
        s.gpre[last][i] =
            upstream * th[p.layout.w_out + i] * activate_deriv(cfg.activation, s.pre[last][i]);
    for (int l = last; l > 0; --l) {
        const auto& hl = p.layout.hidden[l];
        for (int j = 0; j < q; ++j) {
            double acc = 0.0;
            for (int i = 0; i < q; ++i) acc += th[hl.w + static_cast<long>(i) * q + j] * s.gpre[l][i];
            s.gpre[l - 1][j] = acc * activate_deriv(cfg.activation, s.pre[l - 1][j]);
        }
    }
}

}  // namespace

double icnn_forward(const IcnnParams& p, std::span<const double> x, IcnnScratch& scratch) {
    return forward_impl(p, x, scratch);
}

double icnn_forward(const IcnnParams& p, std::span<const double> x) {
    IcnnScratch s;
    return forward_impl(p, x, s);
}

void icnn_grad_input(const IcnnParams& p, std::span<const double> x, std::span<double> grad,
                     IcnnScratch& s) {
    const IcnnConfig& cfg = p.cfg;
    if (grad.size() != x.size()) throw std::invalid_argument("icnn_grad_input: grad size mismatch");
    forward_impl(p, x, s);
    backprop_preacts(p, s, 1.0);

    const int d = cfg.input_dim;
    const int q = cfg.width;
    const double* th = p.theta.data();
    fill(grad, 0.0);

    for (int l = 0; l < cfg.depth; ++l) {
        const auto& hl = p.layout.hidden[l];
        QuadView qv{cfg.has_hidden_quadratics() ? th + hl.quad : nullptr, d, cfg.quad_rank};
        for (int i = 0; i < q; ++i) {
            const double gi = s.gpre[l][i];
            if (gi == 0.0) continue;
            const double* brow = th + hl.b + static_cast<long>(i) * d;
            for (int k = 0; k < d; ++k) grad[k] += gi * brow[k];
            if (qv.base) quad_grad_x(qv, i, x, gi, grad);
        }
    }
    for (int k = 0; k < d; ++k) grad[k] += th[p.layout.b_out + k];
    if (cfg.has_final_quadratic()) {
        QuadView qf{th + p.layout.delta_out, d, cfg.final_quad_rank};
        quad_grad_x(qf, 0, x, 1.0, grad);
    }
    if (cfg.iso_quad) {
        const double alpha = th[p.layout.alpha_out];
        for (int k = 0; k < d; ++k) grad[k] += alpha * x[k];
    }
}

Vec icnn_grad_input(const IcnnParams& p, std::span<const double> x) {
    Vec g(x.size(), 0.0);
    IcnnScratch s;
    icnn_grad_input(p, x, g, s);
    return g;
}

double icnn_grad_params(const IcnnParams& p, std::span<const double> x, double upstream,
                        std::span<double> grad, IcnnScratch& s) {
    const IcnnConfig& cfg = p.cfg;
    if (static_cast<long>(grad.size()) != p.layout.total)
        throw std::invalid_argument("icnn_grad_params: grad size mismatch");
    const double out = forward_impl(p, x, s);
    if (upstream == 0.0) return out;
    backprop_preacts(p, s, upstream);

    const int d = cfg.input_dim;
    const int q = cfg.width;
    const double* th = p.theta.data();
    double* g = grad.data();

    for (int l = 0; l < cfg.depth; ++l) {
        const auto& hl = p.layout.hidden[l];
        QuadView qv{cfg.has_hidden_quadratics() ? th + hl.quad : nullptr, d, cfg.quad_rank};
        QuadViewMut gqv{cfg.has_hidden_quadratics() ? g + hl.quad : nullptr, d, cfg.quad_rank};
        for (int i = 0; i < q; ++i) {
            const double gi = s.gpre[l][i];
            if (gi == 0.0) continue;
            double* gb = g + hl.b + static_cast<long>(i) * d;
            for (int k = 0; k < d; ++k) gb[k] += gi * x[k];
            g[hl.c + i] += gi;
            if (l > 0) {
                double* gw = g + hl.w + static_cast<long>(i) * q;
                const Vec& prev = s.act[l - 1];
                for (int j = 0; j < q; ++j) gw[j] += gi * prev[j];
            }
            if (qv.base) quad_grad_params(qv, i, x, gi, gqv);
        }
    }

    const Vec& last = s.act[cfg.depth - 1];
    for (int i = 0; i < q; ++i) g[p.layout.w_out + i] += upstream * last[i];
    for (int k = 0; k < d; ++k) g[p.layout.b_out + k] += upstream * x[k];
    g[p.layout.c_out] += upstream;
    if (cfg.has_final_quadratic()) {
        QuadView qf{th + p.layout.delta_out, d, cfg.final_quad_rank};
        QuadViewMut gqf{g + p.layout.delta_out, d, cfg.final_quad_rank};
        quad_grad_params(qf, 0, x, upstream, gqf);
    }
    if (cfg.iso_quad) {
        double sq = 0.0;
        for (int k = 0; k < d; ++k) sq += x[k] * x[k];
        g[p.layout.alpha_out] += upstream * 0.5 * sq;
    }
    return out;
}

void project_convexity(IcnnParams& p) {
    const IcnnConfig& cfg = p.cfg;
    double* th = p.theta.data();
    const int d = cfg.input_dim;
    const int q = cfg.width;
    for (int l = 0; l < cfg.depth; ++l) {
        const auto& hl = p.layout.hidden[l];
        if (hl.w >= 0) {
            for (long k = 0; k < static_cast<long>(q) * q; ++k)
                th[hl.w + k] = std::max(0.0, th[hl.w + k]);
        }
        if (hl.quad >= 0) {
            QuadViewMut qv{th + hl.quad, d, cfg.quad_rank};
            for (int i = 0; i < q; ++i) {
                double* del = qv.delta(i);
                for (int k = 0; k < d; ++k) del[k] = std::max(0.0, del[k]);
            }
        }
    }
    for (int i = 0; i < q; ++i)
        th[p.layout.w_out + i] = std::max(0.0, th[p.layout.w_out + i]);
    if (cfg.has_final_quadratic()) {
        for (int k = 0; k < d; ++k)
            th[p.layout.delta_out + k] = std::max(cfg.delta_min, th[p.layout.delta_out + k]);
    }
    if (cfg.iso_quad)
        th[p.layout.alpha_out] =
            std::max(2.0 * cfg.delta_min * cfg.delta_min, th[p.layout.alpha_out]);
}

IcnnParams init_icnn(const IcnnConfig& cfg, Rng& rng, const std::optional<MomentHint>& moments) {
    cfg.validate();
    IcnnParams p;
    p.cfg = cfg;
    p.layout = IcnnLayout::build(cfg);
    p.theta.assign(p.layout.total, 0.0);

    const int d = cfg.input_dim;
    const int q = cfg.width;
    double* th = p.theta.data();
    const double s = cfg.init_scale;

    for (int l = 0; l < cfg.depth; ++l) {
        const auto& hl = p.layout.hidden[l];
        if (hl.w >= 0)
            for (long k = 0; k < static_cast<long>(q) * q; ++k)
                th[hl.w + k] = s * std::abs(rng.normal()) / std::sqrt(static_cast<double>(q));
        for (long k = 0; k < static_cast<long>(q) * d; ++k) th[hl.b + k] = s * rng.normal();
        // biases start at zero
        if (hl.quad >= 0) {
            QuadViewMut qv{th + hl.quad, d, cfg.quad_rank};
            for (int i = 0; i < q; ++i) {
                double* del = qv.delta(i);
                for (int k = 0; k < d; ++k) del[k] = s * std::abs(rng.normal());
                for (int r = 0; r < cfg.quad_rank; ++r) {
                    double* row = qv.a_row(i, r);
                    for (int k = 0; k < d; ++k) row[k] = s * rng.normal();
                }
            }
        }
    }
    for (int i = 0; i < q; ++i)
        th[p.layout.w_out + i] = s * std::abs(rng.normal()) / std::sqrt(static_cast<double>(q));
    if (cfg.has_final_quadratic()) {
        for (int k = 0; k < d; ++k) {
            double slope = 1.0;  // target gradient map scale per coordinate
            if (cfg.init == IcnnInit::Identity && moments) {
                if (moments->source_var[k] > 0.0 && moments->target_var[k] > 0.0)
                    slope = std::sqrt(moments->target_var[k] / moments->source_var[k]);
            }
            th[p.layout.delta_out + k] = cfg.init == IcnnInit::Identity
                                             ? std::sqrt(slope / 2.0)
                                             : cfg.delta_min;
            if (cfg.init == IcnnInit::Identity && moments)
                th[p.layout.b_out + k] =
                    moments->target_mean[k] - slope * moments->source_mean[k];
        }
        for (long k = 0; k < static_cast<long>(cfg.final_quad_rank) * d; ++k)
            th[p.layout.a_out + k] = s * rng.normal();
    }
    if (cfg.iso_quad) th[p.layout.alpha_out] = cfg.iso_quad_init;
    // c_out stays zero; b_out stays zero without a moment hint

    project_convexity(p);
    return p;
}

}  // namespace npf
