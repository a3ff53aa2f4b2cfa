#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "npf/fields.hpp"
#include "npf/metrics.hpp"
#include "oracles.hpp"

using namespace npf;

TEST_SUITE_BEGIN("fields");

TEST_CASE("terrain: no bumps and no noise gives a flat zero grid") {
    Rng rng(41);
    Grid g = terrain_from_bumps(16, {}, 1.5, false, rng);
    for (double v : g.values.v) CHECK(v == 0.0);
}

TEST_CASE("terrain: a centered bump peaks at the center node") {
    Rng rng(42);
    TerrainBump bump{0.5, 0.5, 2.0, 0.15};
    Grid g = terrain_from_bumps(33, {&bump, 1}, 1.0, false, rng);
    int bi = 0, bj = 0;
    double best = -1.0;
    for (int i = 0; i < g.ny(); ++i)
        for (int j = 0; j < g.nx(); ++j)
            if (g.values(i, j) > best) {
                best = g.values(i, j);
                bi = i;
                bj = j;
            }
    CHECK(bi == 16);
    CHECK(bj == 16);
}

TEST_CASE("terrain: same spec and seed reproduce the grid") {
    TerrainSpec spec;
    spec.resolution = 24;
    spec.bumps = 4;
    spec.dequantize = true;
    Rng r1(9), r2(9);
    Grid a = terrain_generate(spec, r1);
    Grid b = terrain_generate(spec, r2);
    CHECK(a.values.v == b.values.v);
}

TEST_CASE("terrain: dequantization noise is smoothed into the surface") {
    TerrainSpec spec;
    spec.resolution = 32;
    spec.bumps = 0;
    spec.dequantize = true;
    Rng rng(10);
    Grid g = terrain_generate(spec, rng);
    double mn = 1e9, mx = -1e9;
    for (double v : g.values.v) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    CHECK(mx > mn);          // noise present
    CHECK(mx - mn < 0.6);    // but smoothed well below the unit noise range
    CHECK(mn >= 0.0);
    CHECK(mx <= 1.0);
}

TEST_CASE("grid_gradient: affine ramp gives the exact constant field inside") {
    Grid g;
    g.xs = {0.0, 0.5, 1.0, 1.5};
    g.ys = {0.0, 0.25, 0.5};
    g.values = Mat(3, 4);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) g.values(i, j) = 2.0 * g.xs[j] - 3.0 * g.ys[i] + 1.0;
    GridField f = grid_gradient(g);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            CHECK(f.fx(i, j) == doctest::Approx(2.0));
            CHECK(f.fy(i, j) == doctest::Approx(-3.0));
        }
}

TEST_CASE("grid_gradient: flat grid gives a zero field; tiny grids throw") {
    Grid g;
    g.xs = {0.0, 1.0, 2.0};
    g.ys = {0.0, 1.0, 2.0};
    g.values = Mat(3, 3, 7.0);
    GridField f = grid_gradient(g);
    for (double v : f.fx.v) CHECK(v == 0.0);
    for (double v : f.fy.v) CHECK(v == 0.0);

    Grid tiny;
    tiny.xs = {0.0, 1.0};
    tiny.ys = {0.0, 1.0};
    tiny.values = Mat(2, 2);
    CHECK_THROWS_AS(grid_gradient(tiny), std::invalid_argument);
}

TEST_CASE("grid_gradient: symmetric surfaces swap gradient components under transpose") {
    Rng rng(43);
    Grid g;
    const int n = 9;
    g.xs.resize(n);
    g.ys.resize(n);
    for (int i = 0; i < n; ++i) g.xs[i] = g.ys[i] = i / (n - 1.0);
    g.values = Mat(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            const double v = rng.normal();
            g.values(i, j) = v;
            g.values(j, i) = v;  // symmetric surface
        }
    GridField f = grid_gradient(g);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) CHECK(f.fx(i, j) == doctest::Approx(f.fy(j, i)));
}

TEST_CASE("gauss benchmark") {
    GaussBenchmark b = gauss_benchmark(2);
    Vec y = b.reference_map(Vec{1.0, 1.0});
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(std::sqrt(2.0)));
    Vec z = b.reference_map(Vec{0.0, 0.0});
    CHECK(norm2(z) == 0.0);
    CHECK(b.target_variance == doctest::Approx(3.0));

    SUBCASE("pushforward covariance matches diag(1..d)") {
        GaussBenchmark b4 = gauss_benchmark(4);
        Rng rng(44);
        Mat xs(20000, 4);
        b4.sample_source(xs, rng);
        for (int k = 0; k < 4; ++k) {
            double var = 0.0;
            for (int i = 0; i < xs.rows; ++i) {
                Vec t = b4.reference_map(xs.row(i));
                var += t[k] * t[k] / xs.rows;
            }
            CHECK(var == doctest::Approx(k + 1.0).epsilon(0.06));
        }
    }
}

TEST_CASE("mixture7 benchmark") {
    CHECK_THROWS_AS(mixture7_benchmark(3), std::invalid_argument);
    MixtureBenchmark b = mixture7_benchmark(4);
    REQUIRE(b.means.size() == 7);
    // component covariance traces are ordered k * d
    for (int k = 0; k < 7; ++k)
        CHECK(b.covariance_scales[k] * b.dim == doctest::Approx((k + 1.0) * b.dim));
    // mixture mean is the average of the component means
    Vec mean_of_means(4, 0.0);
    for (const Vec& m : b.means)
        for (int k = 0; k < 4; ++k) mean_of_means[k] += m[k] / 7.0;

    Rng rng(45);
    Mat ys(140000, 4);
    b.sample_target(ys, rng);
    Vec mc(4, 0.0);
    for (int i = 0; i < ys.rows; ++i)
        for (int k = 0; k < 4; ++k) mc[k] += ys(i, k) / ys.rows;
    for (int k = 0; k < 4; ++k) CHECK(mc[k] == doctest::Approx(mean_of_means[k]).epsilon(0.05));

    SUBCASE("first component mean recovered by conditional MC") {
        // draw from a single-component reconstruction: mean (30,0,30,0)
        CHECK(b.means[0] == Vec{30.0, 0.0, 30.0, 0.0});
        CHECK(b.means[6] == Vec{0.0, 30.0, 0.0, 30.0});
    }
}

namespace {

long hand_count(int d, int q, int depth, int r, int rf, bool iso) {
    long total = 0;
    for (int l = 0; l < depth; ++l) {
        if (l > 0) total += static_cast<long>(q) * q;
        total += static_cast<long>(q) * d + q;
        if (r > 0) total += static_cast<long>(q) * (d + r * d);
    }
    total += q;                       // output weights
    if (rf > 0) total += d + static_cast<long>(rf) * d;
    if (iso) total += 1;              // scalar isotropic quadratic
    total += d + 1;                   // output skip + bias
    return total;
}

}  // namespace

TEST_CASE("architecture variants and parameter counts") {
    for (int d : {4, 32, 128}) {
        BenchmarkSpec spec;
        spec.dim = d;
        spec.variant = ArchitectureVariant::Ours;
        CHECK(icnn_parameter_count(architecture_variant(spec)) ==
              hand_count(d, d, 4, 1, 1, false));
        spec.variant = ArchitectureVariant::FQuad;
        CHECK(icnn_parameter_count(architecture_variant(spec)) ==
              hand_count(d, 2 * d, 4, 0, d, true));
        spec.variant = ArchitectureVariant::Linear;
        CHECK(icnn_parameter_count(architecture_variant(spec)) ==
              hand_count(d, 2 * d, 4, 0, 0, true));
    }

    SUBCASE("linear variant allocates no quadratic arrays") {
        BenchmarkSpec spec;
        spec.dim = 4;
        spec.variant = ArchitectureVariant::Linear;
        IcnnConfig cfg = architecture_variant(spec);
        CHECK_FALSE(cfg.has_hidden_quadratics());
        CHECK_FALSE(cfg.has_final_quadratic());
        Rng rng(46);
        IcnnParams p = init_icnn(cfg, rng);
        CHECK(p.layout.delta_out == -1);
        CHECK(p.layout.a_out == -1);
        for (const auto& h : p.layout.hidden) CHECK(h.quad == -1);
        CHECK(p.layout.alpha_out >= 0);  // scalar convexity floor, not an array
        CHECK(static_cast<long>(p.theta.size()) == hand_count(4, 8, 4, 0, 0, true));
    }
    SUBCASE("count equals the allocated parameter vector") {
        BenchmarkSpec spec;
        spec.dim = 6;
        spec.variant = ArchitectureVariant::Ours;
        IcnnConfig cfg = architecture_variant(spec);
        Rng rng(47);
        CHECK(static_cast<long>(init_icnn(cfg, rng).theta.size()) == icnn_parameter_count(cfg));
    }
}

TEST_CASE("grid csv round trip and validation") {
    const std::string path = "test_grid_tmp.csv";
    SUBCASE("2x2 zero grid round-trips") {
        Grid g;
        g.xs = {0.0, 1.0};
        g.ys = {0.0, 1.0};
        g.values = Mat(2, 2, 0.0);
        grid_emit(g, path);
        Grid h = grid_ingest(path);
        CHECK(h.xs == g.xs);
        CHECK(h.ys == g.ys);
        CHECK(h.values.v == g.values.v);
        grid_emit(h, path + ".2");
        std::ifstream f1(path), f2(path + ".2");
        std::string s1((std::istreambuf_iterator<char>(f1)), {});
        std::string s2((std::istreambuf_iterator<char>(f2)), {});
        CHECK(s1 == s2);
        std::remove((path + ".2").c_str());
    }
    SUBCASE("missing cell is reported with its coordinates") {
        std::ofstream out(path);
        out << "x,y,value\n0,0,1\n1,0,2\n0,1,3\n";
        out.close();
        try {
            grid_ingest(path);
            FAIL("expected throw");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("missing cell (1,1)") != std::string::npos);
        }
    }
    SUBCASE("non-numeric cells carry the line number") {
        std::ofstream out(path);
        out << "x,y,value\n0,0,1\n1,zero,2\n";
        out.close();
        try {
            grid_ingest(path);
            FAIL("expected throw");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find(":3:") != std::string::npos);
        }
    }
    SUBCASE("duplicate coordinates are rejected") {
        std::ofstream out(path);
        out << "x,y,value\n0,0,1\n1,0,2\n0,1,3\n1,1,4\n1,1,9\n";
        out.close();
        CHECK_THROWS_AS(grid_ingest(path), std::runtime_error);
    }
    SUBCASE("ramp file reproduces the ramp gradient") {
        std::ofstream out(path);
        out << "x,y,value\n";
        for (double y : {0.0, 1.0, 2.0})
            for (double x : {0.0, 1.0, 2.0})
                out << x << "," << y << "," << (2.0 * x - 3.0 * y) << "\n";
        out.close();
        GridField f = grid_gradient(grid_ingest(path));
        CHECK(f.fx(1, 1) == doctest::Approx(2.0));
        CHECK(f.fy(1, 1) == doctest::Approx(-3.0));
    }
    std::remove(path.c_str());
}

TEST_CASE("grid field source interpolates and samples nodes") {
    Rng rng(48);
    TerrainSpec spec;
    spec.resolution = 16;
    spec.bumps = 3;
    Grid g = terrain_generate(spec, rng);
    GridField f = grid_gradient(g);
    VectorFieldSource src = field_from_grid(f);
    // node evaluation is exact
    Vec at = src.eval(Vec{g.xs[5], g.ys[7]});
    CHECK(at[0] == doctest::Approx(f.fx(7, 5)));
    CHECK(at[1] == doctest::Approx(f.fy(7, 5)));
    // samples land on nodes inside the support
    PairedData data = src.make_dataset(64, rng);
    for (int i = 0; i < data.size(); ++i) CHECK(src.support.contains(data.xs.row(i)));
}

TEST_SUITE_END();
