#include "npf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace npf {

namespace {

Mat pairwise_sq_cost(const Mat& a, const Mat& b) {
    if (a.cols != b.cols) throw std::invalid_argument("sinkhorn: dimension mismatch");
    Mat c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.rows; ++j) c(i, j) = sq_dist(a.row(i), b.row(j));
    return c;
}

double logsumexp(std::span<const double> xs) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : xs) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace

SinkhornResult entropic_ot(const Mat& a, const Mat& b, const SinkhornConfig& cfg) {
    if (a.rows < 1 || b.rows < 1) throw std::invalid_argument("sinkhorn: empty cloud");
    if (cfg.epsilon <= 0.0) throw std::invalid_argument("sinkhorn: epsilon must be positive");

    const int n = a.rows, m = b.rows;
    const double log_mu = -std::log(static_cast<double>(n));
    const double log_nu = -std::log(static_cast<double>(m));
    const Mat c = pairwise_sq_cost(a, b);

    Vec f(n, 0.0), g(m, 0.0);
    Vec buf(std::max(n, m), 0.0);

    auto half_sweep = [&](double eps) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j) buf[j] = log_nu + (g[j] - c(i, j)) / eps;
            f[i] = -eps * logsumexp({buf.data(), static_cast<size_t>(m)});
        }
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < n; ++i) buf[i] = log_mu + (f[i] - c(i, j)) / eps;
            g[j] = -eps * logsumexp({buf.data(), static_cast<size_t>(n)});
        }
    };
    // after a g-update the column marginals are exact; row violation
    // measures convergence
    auto row_violation = [&](double eps) {
        double violation = 0.0;
        for (int i = 0; i < n; ++i) {
            double row = 0.0;
            for (int j = 0; j < m; ++j)
                row += std::exp(log_mu + log_nu + (f[i] + g[j] - c(i, j)) / eps);
            violation += std::abs(row - std::exp(log_mu));
        }
        return violation;
    };

    // epsilon scaling: a few warm-started sweeps at geometrically
    // decreasing regularization cut the iteration count at small target
    // epsilon by orders of magnitude
    double cmax = 0.0;
    for (double v : c.v) cmax = std::max(cmax, v);
    const double eps_target = cfg.epsilon;
    std::vector<double> schedule{eps_target};
    for (double e = eps_target * 4.0; e < 0.25 * cmax; e *= 4.0) schedule.push_back(e);
    std::reverse(schedule.begin(), schedule.end());

    SinkhornResult res;
    res.converged = false;
    int it = 0;
    for (size_t s = 0; s + 1 < schedule.size() && it + 3 <= cfg.max_iterations; ++s) {
        for (int k = 0; k < 3; ++k, ++it) half_sweep(schedule[s]);
    }
    constexpr int kCheckEvery = 5;
    int since_check = 0;
    for (; it < cfg.max_iterations; ++it) {
        half_sweep(eps_target);
        if (++since_check >= kCheckEvery || it + 1 == cfg.max_iterations) {
            since_check = 0;
            if (row_violation(eps_target) <= cfg.tolerance) {
                res.converged = true;
                ++it;
                break;
            }
        }
    }
    res.iterations = it;
    double value = 0.0;
    for (int i = 0; i < n; ++i) value += std::exp(log_mu) * f[i];
    for (int j = 0; j < m; ++j) value += std::exp(log_nu) * g[j];
    res.value = value;
    return res;
}

SinkhornResult sinkhorn_divergence(const Mat& a, const Mat& b, const SinkhornConfig& cfg) {
    SinkhornResult ab = entropic_ot(a, b, cfg);
    SinkhornResult aa = entropic_ot(a, a, cfg);
    SinkhornResult bb = entropic_ot(b, b, cfg);
    SinkhornResult res;
    res.value = ab.value - 0.5 * (aa.value + bb.value);
    res.converged = ab.converged && aa.converged && bb.converged;
    res.iterations = std::max({ab.iterations, aa.iterations, bb.iterations});
    return res;
}

EpsilonResult epsilon_rule(const Mat& points, Rng& rng) {
    if (points.rows < 2) throw std::invalid_argument("epsilon_rule: need at least two samples");
    constexpr int kGrid = 2048;
    const int n = points.rows;

    std::vector<int> ia, ib;
    if (n <= kGrid) {
        ia.resize(n);
        std::iota(ia.begin(), ia.end(), 0);
        ib = ia;
    } else {
        ia.resize(kGrid);
        ib.resize(kGrid);
        for (int& k : ia) k = rng.uniform_int(n);
        for (int& k : ib) k = rng.uniform_int(n);
    }

    double mean = 0.0;
    long count = 0;
    for (int i : ia)
        for (int j : ib) {
            mean += (sq_dist(points.row(i), points.row(j)) - mean) / static_cast<double>(++count);
        }

    EpsilonResult res;
    res.value = 0.05 * mean;
    if (res.value <= 0.0) {
        res.value = std::numeric_limits<double>::min();
        res.degenerate = true;
    }
    return res;
}

double l2_uvp(const MapFn& t_hat, const MapFn& t_star, const Mat& samples,
              double target_variance) {
    if (target_variance <= 0.0) throw std::invalid_argument("l2_uvp: target variance must be positive");
    if (samples.rows < 1) throw std::invalid_argument("l2_uvp: empty sample set");
    double mean = 0.0;
    for (int i = 0; i < samples.rows; ++i) {
        Vec h = t_hat(samples.row(i));
        Vec s = t_star(samples.row(i));
        mean += (sq_dist(h, s) - mean) / static_cast<double>(i + 1);
    }
    return 100.0 * mean / target_variance;
}

std::vector<int> b_alpha_set(const Mat& images, int anchor, int cardinality) {
    if (cardinality < 1 || cardinality > images.rows)
        throw std::invalid_argument("b_alpha_set: cardinality exceeds available points");
    if (anchor < 0 || anchor >= images.rows)
        throw std::invalid_argument("b_alpha_set: anchor out of range");
    std::vector<int> idx(images.rows);
    std::iota(idx.begin(), idx.end(), 0);
    Vec dist(images.rows, 0.0);
    for (int j = 0; j < images.rows; ++j) dist[j] = sq_dist(images.row(j), images.row(anchor));
    std::stable_sort(idx.begin(), idx.end(), [&](int p, int q) { return dist[p] < dist[q]; });
    idx.resize(cardinality);
    return idx;
}

namespace {

Mat gather_rows(const Mat& src, std::span<const int> idx) {
    Mat out(static_cast<int>(idx.size()), src.cols);
    for (size_t r = 0; r < idx.size(); ++r) out.set_row(static_cast<int>(r), src.row(idx[r]));
    return out;
}

}  // namespace

PosteriorMetricResult posterior_metric(const GeneratorFn& generator, const Mat& points,
                                       const Mat& images, const PosteriorMetricConfig& cfg,
                                       Rng& rng) {
    if (points.rows != images.rows) throw std::invalid_argument("posterior_metric: size mismatch");
    if (points.rows < cfg.cardinality)
        throw std::invalid_argument("posterior_metric: fewer points than the anchor cardinality");

    SinkhornConfig sk = cfg.sinkhorn;
    if (sk.epsilon <= 0.0) sk.epsilon = epsilon_rule(points, rng).value;

    PosteriorMetricResult res;
    res.epsilon = sk.epsilon;
    res.anchors = cfg.anchors;

    double mean = 0.0;
    for (int a = 0; a < cfg.anchors; ++a) {
        const int anchor = rng.uniform_int(points.rows);
        std::vector<int> set = b_alpha_set(images, anchor, cfg.cardinality);
        Mat target = gather_rows(points, set);
        Mat generated(cfg.cardinality, points.cols);
        for (int r = 0; r < cfg.cardinality; ++r) {
            Vec x = generator(images.row(set[r]), rng);
            generated.set_row(r, x);
        }
        mean += (sinkhorn_divergence(generated, target, sk).value - mean) /
                static_cast<double>(a + 1);
    }
    res.value = mean;

    // companion scale: two independent same-size draws from the points
    Mat da(cfg.baseline_size, points.cols), db(cfg.baseline_size, points.cols);
    for (int r = 0; r < cfg.baseline_size; ++r) da.set_row(r, points.row(rng.uniform_int(points.rows)));
    for (int r = 0; r < cfg.baseline_size; ++r) db.set_row(r, points.row(rng.uniform_int(points.rows)));
    res.baseline = sinkhorn_divergence(da, db, sk).value;
    return res;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

CosineMetricResult cosine_inversion_metric(const FieldFn& field, const ConjugateFn& conjugate,
                                           const GeneratorFn& generator, const Mat& test_points,
                                           Rng& rng, int draws_per_point) {
    if (draws_per_point < 1) throw std::invalid_argument("cosine_inversion_metric: draws must be >= 1");
    CosineMetricResult res;
    double mean = 0.0;
    long count = 0;
    for (int j = 0; j < test_points.rows; ++j) {
        Vec v = field(test_points.row(j));
        Vec p = conjugate(v);
        for (int k = 0; k < draws_per_point; ++k) {
            Vec x = generator(p, rng);
            Vec w = field(x);
            if (norm2(w) == 0.0 || norm2(v) == 0.0) res.zero_vector_warnings += 1;
            mean += (cosine_similarity(w, v) - mean) / static_cast<double>(++count);
        }
    }
    res.value = mean;
    return res;
}

}  // namespace npf
