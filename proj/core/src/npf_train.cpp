#include "npf/npf_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace npf {

Vec column_means(const Mat& m) {
    Vec mu(m.cols, 0.0);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) mu[j] += (m(i, j) - mu[j]) / static_cast<double>(i + 1);
    return mu;
}

Vec column_variances(const Mat& m) {
    Vec mu = column_means(m);
    Vec var(m.cols, 0.0);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) {
            const double d = m(i, j) - mu[j];
            var[j] += (d * d - var[j]) / static_cast<double>(i + 1);
        }
    return var;
}

MongeLossResult monge_loss(const IcnnParams& potential, const MlpParams& amortizer,
                           const PairedData& batch, std::span<double> grad_theta) {
    if (batch.size() < 1) throw std::invalid_argument("monge_loss: empty batch");
    if (static_cast<long>(grad_theta.size()) != potential.layout.total)
        throw std::invalid_argument("monge_loss: grad size mismatch");

    const int n = batch.size();
    const double inv_n = 1.0 / n;
    fill(grad_theta, 0.0);

    IcnnScratch is;
    MlpScratch ms;
    Vec v(potential.cfg.input_dim, 0.0);
    MongeLossResult res;
    for (int i = 0; i < n; ++i) {
        auto x = batch.xs.row(i);
        auto fx = batch.fxs.row(i);
        const double ux = icnn_grad_params(potential, x, inv_n, grad_theta, is);
        mlp_forward(amortizer, fx, v, ms);
        const double uv = icnn_grad_params(potential, v, -inv_n, grad_theta, is);
        res.loss += inv_n * (ux + dot(v, fx) - uv);
    }
    return res;
}

SplitData split_data(const PairedData& data, double fraction, Rng& rng) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw std::invalid_argument("split_data: fraction must be in (0,1)");
    const int n = data.size();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);

    const int ntrain = std::max(1, static_cast<int>(std::floor(fraction * n)));
    SplitData split;
    split.train.xs = Mat(ntrain, data.xs.cols);
    split.train.fxs = Mat(ntrain, data.fxs.cols);
    split.test.xs = Mat(n - ntrain, data.xs.cols);
    split.test.fxs = Mat(n - ntrain, data.fxs.cols);
    for (int i = 0; i < ntrain; ++i) {
        split.train.xs.set_row(i, data.xs.row(perm[i]));
        split.train.fxs.set_row(i, data.fxs.row(perm[i]));
    }
    for (int i = ntrain; i < n; ++i) {
        split.test.xs.set_row(i - ntrain, data.xs.row(perm[i]));
        split.test.fxs.set_row(i - ntrain, data.fxs.row(perm[i]));
    }
    return split;
}

PairedData sample_batch(const PairedData& data, int n, Rng& rng) {
    PairedData batch;
    batch.xs = Mat(n, data.xs.cols);
    batch.fxs = Mat(n, data.fxs.cols);
    for (int i = 0; i < n; ++i) {
        const int k = rng.uniform_int(data.size());
        batch.xs.set_row(i, data.xs.row(k));
        batch.fxs.set_row(i, data.fxs.row(k));
    }
    return batch;
}

TrainPotentialResult train_potential(const PairedData& train, const IcnnConfig& icnn_cfg,
                                     const NpfTrainConfig& cfg, Rng& rng,
                                     const std::optional<MomentHint>& moment_hint) {
    if (cfg.steps < 0) throw std::invalid_argument("train_potential: steps must be >= 0");
    const int d = icnn_cfg.input_dim;
    if (train.xs.cols != d) throw std::invalid_argument("train_potential: data dimension mismatch");

    TrainPotentialResult out;
    std::optional<MomentHint> hint = moment_hint;
    if (!hint && icnn_cfg.init == IcnnInit::Identity)
        hint = MomentHint{column_means(train.xs), column_variances(train.xs),
                          column_means(train.fxs), column_variances(train.fxs)};
    out.model.potential = init_icnn(icnn_cfg, rng, hint);

    MlpConfig vcfg;
    vcfg.input_dim = d;
    vcfg.output_dim = d;
    vcfg.hidden = cfg.amortizer_hidden;
    vcfg.activation = Activation::Relu;
    out.model.amortizer = init_mlp(vcfg, rng);

    AdamState theta_state(cfg.theta_adam, out.model.potential.theta.size());
    AdamState phi_state(cfg.phi_adam, out.model.amortizer.theta.size());
    Vec grad_theta(out.model.potential.theta.size(), 0.0);
    Vec grad_phi(out.model.amortizer.theta.size(), 0.0);

    Vec prev_theta, prev_phi;
    for (long step = 0; step < cfg.steps; ++step) {
        prev_theta = out.model.potential.theta;
        prev_phi = out.model.amortizer.theta;

        PairedData batch = sample_batch(train, cfg.batch_size, rng);
        Mat phi_batch = batch.fxs;
        if (cfg.amortizer_batch > 0 && cfg.amortizer_batch < batch.size()) {
            phi_batch = Mat(cfg.amortizer_batch, batch.fxs.cols);
            for (int i = 0; i < cfg.amortizer_batch; ++i) phi_batch.set_row(i, batch.fxs.row(i));
        }
        AmortizationStats am;
        try {
            am = amortization_loss(out.model.amortizer, phi_batch, out.model.potential, cfg.cs,
                                   grad_phi);
            adam_step(phi_state, out.model.amortizer.all(), grad_phi);
        } catch (const std::runtime_error&) {
            // every conjugate solve failed (possible while the potential
            // is still too flat); skip the amortizer update, the Monge
            // step below does not need solver targets
            am.loss = 0.0;
            am.used = 0;
            am.failures = cfg.batch_size;
        }

        MongeLossResult ml = monge_loss(out.model.potential, out.model.amortizer, batch, grad_theta);
        adam_step(theta_state, out.model.potential.all(), grad_theta);
        project_convexity(out.model.potential);

        if (!std::isfinite(ml.loss) || !std::isfinite(am.loss) ||
            !all_finite(out.model.potential.theta) || !all_finite(out.model.amortizer.theta)) {
            out.model.potential.theta = prev_theta;
            out.model.amortizer.theta = prev_phi;
            out.log.diverged = true;
            out.log.diverged_at = step;
            break;
        }
        if (step % cfg.log_every == 0 || step + 1 == cfg.steps) {
            out.log.rows.push_back({step, ml.loss, am.loss, am.mean_iterations, am.failures});
        }
    }
    return out;
}

ConjugateResult implicit_map(const NpfModel& model, std::span<const double> field_value,
                             const ConjugateConfig& cs) {
    Vec warm = mlp_forward(model.amortizer, field_value);
    return conjugate_solve(model.potential, field_value, warm, cs);
}

ExplicitMapResult train_explicit_map(const NpfModel& model, const PairedData& train,
                                     const ExplicitMapConfig& cfg, const ConjugateConfig& cs,
                                     Rng& rng) {
    const int d = train.xs.cols;
    MlpConfig mcfg;
    mcfg.input_dim = d;
    mcfg.output_dim = d;
    mcfg.hidden = cfg.hidden;
    mcfg.activation = Activation::Relu;
    ExplicitMapResult res;
    res.map = init_mlp(mcfg, rng);
    if (cfg.steps == 0) return res;

    // the potential is frozen, so solver targets are computed once
    Mat targets(train.size(), d);
    std::vector<char> valid(train.size(), 0);
    int nvalid = 0;
    for (int i = 0; i < train.size(); ++i) {
        ConjugateResult sol = implicit_map(model, train.fxs.row(i), cs);
        if (!sol.converged) {
            res.cs_failures += 1;
            continue;
        }
        targets.set_row(i, sol.x);
        valid[i] = 1;
        ++nvalid;
    }
    if (nvalid == 0)
        throw std::runtime_error(
            "train_explicit_map: every conjugate solve diverged; increase max_iterations");

    std::vector<int> pool;
    pool.reserve(nvalid);
    for (int i = 0; i < train.size(); ++i)
        if (valid[i]) pool.push_back(i);

    AdamState state(cfg.adam, res.map.theta.size());
    Vec grad(res.map.theta.size(), 0.0);
    Vec pred(d, 0.0), upstream(d, 0.0);
    MlpScratch ms;
    for (long step = 0; step < cfg.steps; ++step) {
        fill(grad, 0.0);
        double loss = 0.0;
        const double inv_n = 1.0 / cfg.batch_size;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const int i = pool[rng.uniform_int(static_cast<int>(pool.size()))];
            mlp_forward(res.map, train.xs.row(i), pred, ms);
            double l2 = 0.0;
            for (int k = 0; k < d; ++k) {
                const double r = pred[k] - targets(i, k);
                upstream[k] = 2.0 * inv_n * r;
                l2 += r * r;
            }
            loss += inv_n * l2;
            mlp_grad_params(res.map, train.xs.row(i), upstream, grad, {}, ms);
        }
        adam_step(state, res.map.all(), grad);
        res.final_loss = loss;
    }
    return res;
}

}  // namespace npf
