#include <cmath>

#include "doctest.h"
#include "npf/metrics.hpp"
#include "oracles.hpp"

using namespace npf;

TEST_SUITE_BEGIN("metrics");

namespace {

Mat random_cloud(int n, int d, Rng& rng, double scale = 1.0) {
    Mat m(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = scale * rng.normal();
    return m;
}

}  // namespace

TEST_CASE("sinkhorn: dirac pair has the squared-distance closed form") {
    Mat a(1, 2), b(1, 2);
    a.set_row(0, Vec{0.0, 0.0});
    b.set_row(0, Vec{3.0, 4.0});
    SinkhornConfig cfg;
    cfg.epsilon = 0.7;
    SinkhornResult r = sinkhorn_divergence(a, b, cfg);
    CHECK(std::abs(r.value - 25.0) <= 1e-9);
}

TEST_CASE("sinkhorn: self-divergence is zero and values are near-symmetric") {
    Rng rng(31);
    SinkhornConfig cfg;
    cfg.epsilon = 0.5;
    for (int trial = 0; trial < 5; ++trial) {
        Mat a = random_cloud(6 + trial, 2, rng);
        Mat b = random_cloud(5 + trial, 2, rng);
        CHECK(std::abs(sinkhorn_divergence(a, a, cfg).value) <= 1e-9);
        const double ab = sinkhorn_divergence(a, b, cfg).value;
        const double ba = sinkhorn_divergence(b, a, cfg).value;
        CHECK(std::abs(ab - ba) <= 1e-9);
        CHECK(ab >= -1e-9);
    }
}

TEST_CASE("sinkhorn: matches the dense fixed-point oracle on tiny clouds") {
    Rng rng(32);
    SinkhornConfig cfg;
    for (int trial = 0; trial < 12; ++trial) {
        const int n = 1 + rng.uniform_int(4);
        const int m = 1 + rng.uniform_int(4);
        Mat a = random_cloud(n, 2, rng);
        Mat b = random_cloud(m, 2, rng);
        cfg.epsilon = rng.uniform(0.5, 3.0);
        cfg.tolerance = 1e-12;
        cfg.max_iterations = 20000;
        const double mine = entropic_ot(a, b, cfg).value;
        const double oracle = oracles::dense_entropic_ot(a, b, cfg.epsilon);
        CHECK(std::abs(mine - oracle) <= 1e-6);
        const double mine_div = sinkhorn_divergence(a, b, cfg).value;
        const double oracle_div = oracles::dense_sinkhorn_divergence(a, b, cfg.epsilon);
        CHECK(std::abs(mine_div - oracle_div) <= 1e-6);
    }
}

TEST_CASE("sinkhorn: translation invariance of the divergence") {
    Rng rng(33);
    SinkhornConfig cfg;
    cfg.epsilon = 0.8;
    cfg.tolerance = 1e-11;
    Mat a = random_cloud(8, 2, rng);
    Mat b = random_cloud(7, 2, rng);
    const double base = sinkhorn_divergence(a, b, cfg).value;
    for (int i = 0; i < a.rows; ++i) {
        a(i, 0) += 5.0;
        a(i, 1) -= 2.0;
    }
    for (int i = 0; i < b.rows; ++i) {
        b(i, 0) += 5.0;
        b(i, 1) -= 2.0;
    }
    CHECK(std::abs(sinkhorn_divergence(a, b, cfg).value - base) <= 1e-9);
}

TEST_CASE("sinkhorn: iteration cap reports non-convergence") {
    Rng rng(34);
    Mat a = random_cloud(10, 2, rng);
    Mat b = random_cloud(10, 2, rng);
    SinkhornConfig cfg;
    cfg.epsilon = 0.01;
    cfg.max_iterations = 1;
    CHECK_FALSE(entropic_ot(a, b, cfg).converged);
}

TEST_CASE("epsilon rule") {
    Rng rng(35);
    SUBCASE("two points at distance 2, exhaustive pairs with self-pairs") {
        Mat pts(2, 1);
        pts(0, 0) = 0.0;
        pts(1, 0) = 2.0;
        EpsilonResult r = epsilon_rule(pts, rng);
        CHECK(r.value == doctest::Approx(0.1));
        CHECK_FALSE(r.degenerate);
    }
    SUBCASE("identical points floor to the smallest normal value") {
        Mat pts(3, 2, 1.5);
        EpsilonResult r = epsilon_rule(pts, rng);
        CHECK(r.degenerate);
        CHECK(r.value > 0.0);
    }
    SUBCASE("scaling points by s scales epsilon by s^2") {
        Mat pts = random_cloud(40, 2, rng);
        Rng r1(77), r2(77);
        const double e1 = epsilon_rule(pts, r1).value;
        for (double& v : pts.v) v *= 3.0;
        const double e2 = epsilon_rule(pts, r2).value;
        CHECK(e2 == doctest::Approx(9.0 * e1).epsilon(1e-12));
    }
}

TEST_CASE("l2_uvp") {
    Rng rng(36);
    auto t_star = [](std::span<const double> x) {
        return Vec{x[0], std::sqrt(2.0) * x[1]};
    };
    SUBCASE("perfect map scores zero") {
        Mat xs = random_cloud(50, 2, rng);
        CHECK(l2_uvp(t_star, t_star, xs, 3.0) == 0.0);
    }
    SUBCASE("constant-mean map scores 100") {
        // T_hat = target mean (zero); E|T*(x)|^2 = Var(nu) exactly in the limit
        Mat xs = random_cloud(200000, 2, rng);
        auto t_hat = [](std::span<const double>) { return Vec{0.0, 0.0}; };
        const double v = l2_uvp(t_hat, t_star, xs, 3.0);
        CHECK(v == doctest::Approx(100.0).epsilon(0.02));
    }
    SUBCASE("identity map against diag(1, sqrt 2) scores 100(3 - 2 sqrt 2)/3") {
        Mat xs = random_cloud(200000, 2, rng);
        auto t_hat = [](std::span<const double> x) { return Vec{x[0], x[1]}; };
        const double v = l2_uvp(t_hat, t_star, xs, 3.0);
        const double expected = 100.0 * (3.0 - 2.0 * std::sqrt(2.0)) / 3.0;
        CHECK(v == doctest::Approx(expected).epsilon(0.03));
    }
    SUBCASE("zero target variance is rejected") {
        Mat xs = random_cloud(4, 2, rng);
        CHECK_THROWS_AS(l2_uvp(t_star, t_star, xs, 0.0), std::invalid_argument);
    }
}

TEST_CASE("b_alpha_set") {
    Mat images(4, 1);
    images(0, 0) = 0.0;
    images(1, 0) = 1.0;
    images(2, 0) = 2.0;
    images(3, 0) = 3.0;
    SUBCASE("full cardinality returns everything") {
        auto s = b_alpha_set(images, 1, 4);
        CHECK(s.size() == 4);
    }
    SUBCASE("cardinality one returns the anchor itself") {
        auto s = b_alpha_set(images, 2, 1);
        CHECK(s == std::vector<int>{2});
    }
    SUBCASE("collinear images from one end") {
        auto s = b_alpha_set(images, 0, 2);
        CHECK(s == std::vector<int>{0, 1});
    }
    SUBCASE("cardinality larger than the set throws") {
        CHECK_THROWS_AS(b_alpha_set(images, 0, 5), std::invalid_argument);
    }
}

TEST_CASE("posterior metric with stub generators") {
    Rng rng(37);
    const int n = 64;
    Mat points = random_cloud(n, 2, rng);
    Mat images(n, 2);
    for (int i = 0; i < n; ++i) {
        // injective map: images = 2x, exact inverse generator available
        images(i, 0) = 2.0 * points(i, 0);
        images(i, 1) = 2.0 * points(i, 1);
    }
    PosteriorMetricConfig cfg;
    cfg.anchors = 4;
    cfg.cardinality = 16;
    cfg.baseline_size = 16;
    cfg.sinkhorn.tolerance = 1e-10;

    SUBCASE("exact inverse generator drives the metric to zero") {
        GeneratorFn exact = [](std::span<const double> y, Rng&) {
            return Vec{0.5 * y[0], 0.5 * y[1]};
        };
        PosteriorMetricResult r = posterior_metric(exact, points, images, cfg, rng);
        CHECK(std::abs(r.value) <= 1e-6);
        CHECK(r.epsilon > 0.0);
    }
    SUBCASE("independent-draw generator lands at baseline scale") {
        GeneratorFn scrambled = [&points](std::span<const double>, Rng& r) {
            return points.row_vec(r.uniform_int(points.rows));
        };
        PosteriorMetricResult r = posterior_metric(scrambled, points, images, cfg, rng);
        CHECK(r.value <= 4.0 * std::max(r.baseline, 1e-6));
    }
}

TEST_CASE("cosine similarity and inversion metric") {
    CHECK(cosine_similarity(Vec{1.0, 0.0}, Vec{2.0, 0.0}) == doctest::Approx(1.0));
    CHECK(cosine_similarity(Vec{1.0, 0.0}, Vec{-3.0, 0.0}) == doctest::Approx(-1.0));
    CHECK(cosine_similarity(Vec{0.0, 0.0}, Vec{1.0, 0.0}) == 0.0);

    Rng rng(38);
    Mat xs = random_cloud(10, 2, rng);
    FieldFn field = [](std::span<const double> x) { return Vec{x[0], x[1]}; };
    ConjugateFn conj = [](std::span<const double> y) { return Vec(y.begin(), y.end()); };

    SUBCASE("perfect inversion scores 1") {
        GeneratorFn gen = [](std::span<const double> y, Rng&) { return Vec(y.begin(), y.end()); };
        CosineMetricResult r = cosine_inversion_metric(field, conj, gen, xs, rng, 2);
        CHECK(r.value == doctest::Approx(1.0));
        CHECK(r.zero_vector_warnings == 0);
    }
    SUBCASE("antipodal reconstruction scores -1") {
        GeneratorFn gen = [](std::span<const double> y, Rng&) { return Vec{-y[0], -y[1]}; };
        CosineMetricResult r = cosine_inversion_metric(field, conj, gen, xs, rng, 2);
        CHECK(r.value == doctest::Approx(-1.0));
    }
}

TEST_CASE("doubling map is measure-preserving for the sinkhorn metric") {
    Rng rng(39);
    const int n = 256;
    Mat a(n, 1), m(n, 1), b(n, 1);
    for (int i = 0; i < n; ++i) {
        const double x = rng.uniform();
        a(i, 0) = x;
        m(i, 0) = std::fmod(2.0 * x, 1.0);
        b(i, 0) = rng.uniform();
    }
    SinkhornConfig cfg;
    Rng er(40);
    cfg.epsilon = epsilon_rule(a, er).value;
    const double mapped = sinkhorn_divergence(m, a, cfg).value;
    const double baseline = sinkhorn_divergence(b, a, cfg).value;
    CHECK(mapped <= 2.0 * baseline);
}

TEST_SUITE_END();
