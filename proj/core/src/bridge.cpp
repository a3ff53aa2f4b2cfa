#include "npf/bridge.hpp"

#include <cmath>
#include <stdexcept>

namespace npf {

void BridgeConfig::validate() const {
    if (sigma < 0.0) throw std::invalid_argument("bridge: sigma must be >= 0");
    if (sde_steps < 2) throw std::invalid_argument("bridge: need at least 2 SDE steps");
    const double tm = effective_t_max();
    if (tm <= 0.0 || tm >= 1.0) throw std::invalid_argument("bridge: t_max must be in (0,1)");
}

DriftNet init_drift(int dim, const std::vector<int>& hidden, Rng& rng) {
    MlpConfig cfg;
    cfg.input_dim = 2 * dim + 1;
    cfg.output_dim = dim;
    cfg.hidden = hidden;
    cfg.activation = Activation::Silu;
    DriftNet d;
    d.net = init_mlp(cfg, rng);
    d.dim = dim;
    return d;
}

Vec bridge_interpolate(std::span<const double> y, std::span<const double> x, double t,
                       double sigma, std::span<const double> z) {
    if (y.size() != x.size() || y.size() != z.size())
        throw std::invalid_argument("bridge_interpolate: size mismatch");
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("bridge_interpolate: t must be in [0,1]");
    const double noise = sigma * std::sqrt(t * (1.0 - t));
    Vec out(y.size(), 0.0);
    for (size_t k = 0; k < y.size(); ++k)
        out[k] = (1.0 - t) * y[k] + t * x[k] + noise * z[k];
    return out;
}

void drift_regression_step(DriftNet& drift, AdamState& state, const Mat& starts,
                           const Mat& endpoints, double sigma, int batch_size, Rng& rng) {
    const int d = drift.dim;
    const int n = starts.rows;
    Vec grad(drift.net.theta.size(), 0.0);
    Vec input(2 * d + 1, 0.0), pred(d, 0.0), upstream(d, 0.0), z(d, 0.0);
    MlpScratch ms;
    const double inv_n = 1.0 / batch_size;
    for (int b = 0; b < batch_size; ++b) {
        const int i = rng.uniform_int(n);
        const double t = rng.uniform();
        rng.fill_normal(z);
        Vec xt = bridge_interpolate(starts.row(i), endpoints.row(i), t, sigma, z);
        std::copy(starts.row(i).begin(), starts.row(i).end(), input.begin());
        std::copy(xt.begin(), xt.end(), input.begin() + d);
        input[2 * d] = t;
        mlp_forward(drift.net, input, pred, ms);
        for (int k = 0; k < d; ++k) upstream[k] = 2.0 * inv_n * (pred[k] - endpoints(i, k));
        mlp_grad_params(drift.net, input, upstream, grad, {}, ms);
    }
    adam_step(state, drift.net.all(), grad);
}

DriftTrainResult train_drift(const NpfModel& model, const PairedData& train,
                             const BridgeConfig& cfg, const ConjugateConfig& cs, Rng& rng) {
    cfg.validate();
    const int d = train.xs.cols;
    DriftTrainResult res;
    res.drift = init_drift(d, cfg.hidden, rng);
    if (cfg.train_steps == 0) return res;

    // starts are the conjugate-solve images of the (frozen) potential
    Mat starts(train.size(), d);
    Mat endpoints(train.size(), d);
    int nvalid = 0;
    for (int i = 0; i < train.size(); ++i) {
        ConjugateResult sol = implicit_map(model, train.fxs.row(i), cs);
        if (!sol.converged) {
            res.cs_failures += 1;
            continue;
        }
        starts.set_row(nvalid, sol.x);
        endpoints.set_row(nvalid, train.xs.row(i));
        ++nvalid;
    }
    if (nvalid == 0)
        throw std::runtime_error("train_drift: every conjugate solve diverged; increase max_iterations");
    starts.rows = nvalid;
    starts.v.resize(static_cast<size_t>(nvalid) * d);
    endpoints.rows = nvalid;
    endpoints.v.resize(static_cast<size_t>(nvalid) * d);

    AdamState state(cfg.adam, res.drift.net.theta.size());
    for (long step = 0; step < cfg.train_steps; ++step)
        drift_regression_step(res.drift, state, starts, endpoints, cfg.sigma, cfg.batch_size, rng);

    // report the loss on one fresh regression batch
    {
        Vec input(2 * d + 1, 0.0), pred(d, 0.0), z(d, 0.0);
        MlpScratch ms;
        double loss = 0.0;
        const int m = std::min(nvalid, cfg.batch_size);
        for (int b = 0; b < m; ++b) {
            const int i = rng.uniform_int(nvalid);
            const double t = rng.uniform();
            rng.fill_normal(z);
            Vec xt = bridge_interpolate(starts.row(i), endpoints.row(i), t, cfg.sigma, z);
            std::copy(starts.row(i).begin(), starts.row(i).end(), input.begin());
            std::copy(xt.begin(), xt.end(), input.begin() + d);
            input[2 * d] = t;
            mlp_forward(res.drift.net, input, pred, ms);
            loss += sq_dist(pred, endpoints.row(i)) / m;
        }
        res.final_loss = loss;
    }
    return res;
}

Vec sde_sample(const DriftNet& drift, std::span<const double> y, const BridgeConfig& cfg,
               Rng& rng) {
    cfg.validate();
    const int d = drift.dim;
    if (static_cast<int>(y.size()) != d) throw std::invalid_argument("sde_sample: dimension mismatch");

    const double t_max = cfg.effective_t_max();
    const int S = cfg.sde_steps;
    const double dt = t_max / S;

    Vec x(y.begin(), y.end());
    Vec input(2 * d + 1, 0.0), b0(d, 0.0), b1(d, 0.0), xpred(d, 0.0), dw(d, 0.0);
    MlpScratch ms;
    std::copy(y.begin(), y.end(), input.begin());

    auto drift_eval = [&](const Vec& state, double t, Vec& out) {
        std::copy(state.begin(), state.end(), input.begin() + d);
        input[2 * d] = t;
        mlp_forward(drift.net, input, out, ms);
        const double denom = 1.0 - t;
        for (int k = 0; k < d; ++k) out[k] = (out[k] - state[k]) / denom;
    };

    for (int s = 0; s < S; ++s) {
        const double t = s * dt;
        rng.fill_normal(dw);
        const double noise = cfg.sigma * std::sqrt(dt);
        drift_eval(x, t, b0);
        for (int k = 0; k < d; ++k) xpred[k] = x[k] + dt * b0[k] + noise * dw[k];
        drift_eval(xpred, t + dt, b1);
        for (int k = 0; k < d; ++k) x[k] += 0.5 * dt * (b0[k] + b1[k]) + noise * dw[k];
        if (!all_finite(x))
            throw std::runtime_error("sde_sample: non-finite state at step " + std::to_string(s));
    }
    return x;
}

}  // namespace npf
