#pragma once

// Vector-field sources: analytic fields with samplers, sampled grids
// with the terrain pipeline (bump synthesis, dequantization, Gaussian
// smoothing, finite differences), the Gaussian / 7-mode mixture
// benchmark distributions, and the benchmark architecture variants.

#include <functional>
#include <optional>
#include <string>

#include "npf/icnn.hpp"
#include "npf/numcore.hpp"

namespace npf {

struct Grid {
    Vec xs;      // strictly increasing
    Vec ys;      // strictly increasing
    Mat values;  // ys.size() rows x xs.size() cols

    int nx() const { return static_cast<int>(xs.size()); }
    int ny() const { return static_cast<int>(ys.size()); }
};

struct TerrainSpec {
    int resolution = 64;
    int bumps = 6;
    double amplitude_min = 0.8;
    double amplitude_max = 2.0;
    double width_min = 0.08;
    double width_max = 0.25;
    double smooth_sigma = 1.5;  // in grid cells
    bool dequantize = false;    // add U[0,1) noise before smoothing
    uint64_t seed = 0;
};

struct TerrainBump {
    double cx = 0.5;
    double cy = 0.5;
    double amplitude = 1.0;
    double width = 0.1;
};

// Sum of Gaussian bumps on [0,1]^2, optionally dequantized with U[0,1)
// noise, then smoothed with a separable Gaussian kernel (reflect
// padding). terrain_generate draws the bumps from the spec ranges.
Grid terrain_from_bumps(int resolution, std::span<const TerrainBump> bumps, double smooth_sigma,
                        bool dequantize, Rng& rng);
Grid terrain_generate(const TerrainSpec& spec, Rng& rng);

// Central differences in the interior, one-sided at the borders.
// values(i,j) is sampled at (xs[j], ys[i]).
struct GridField {
    Grid grid;
    Mat fx;  // d/dx at each node, ny x nx
    Mat fy;  // d/dy
};

GridField grid_gradient(const Grid& grid);

struct PairedData {
    Mat xs;
    Mat fxs;
    int size() const { return xs.rows; }
};

// One row per grid node: (x, y) paired with the finite-difference
// gradient at that node.
PairedData grid_field_dataset(const GridField& field);

struct VectorFieldSource {
    enum class Kind { Analytic, GridSampled };
    Kind kind = Kind::Analytic;
    int dim = 0;
    std::function<Vec(std::span<const double>)> eval;        // F(x)
    std::function<void(Mat&, Rng&)> sample;                  // fills rows with draws from rho
    Box support;
    std::optional<GridField> grid;  // set for grid-sampled fields

    PairedData make_dataset(int n, Rng& rng) const;
};

// Bilinear interpolation of the gradient field; nodes are exact.
VectorFieldSource field_from_grid(GridField field);

VectorFieldSource make_identity_field(int d, double halfwidth = 3.0);
VectorFieldSource make_diag_field(Vec diagonal, double halfwidth = 3.0);
// 1-D field F(x) = x^2 on rho = U[-1,1]; every value has two preimages.
VectorFieldSource make_square_1d_field();
// Gradient of an analytic objective on its support box, sampled uniformly.
VectorFieldSource make_gradient_field(int d, std::function<Vec(std::span<const double>)> grad,
                                      Box support);

struct GaussBenchmark {
    int dim = 0;
    std::function<void(Mat&, Rng&)> sample_source;  // N(0, I)
    std::function<void(Mat&, Rng&)> sample_target;  // N(0, diag(1..d))
    std::function<Vec(std::span<const double>)> reference_map;  // x -> diag(sqrt k) x
    double target_variance = 0.0;                   // trace of the target covariance
};

GaussBenchmark gauss_benchmark(int d);

struct MixtureBenchmark {
    int dim = 0;
    std::function<void(Mat&, Rng&)> sample_source;
    std::function<void(Mat&, Rng&)> sample_target;
    std::vector<Vec> means;
    Vec covariance_scales;  // k-th component has covariance scale[k] * I
};

// Seven equally weighted Gaussian components; requires even d.
MixtureBenchmark mixture7_benchmark(int d);

enum class ArchitectureVariant { Ours, FQuad, Linear };

struct BenchmarkSpec {
    std::string benchmark_id = "gauss-diag";  // or "mixture7"
    int dim = 4;
    ArchitectureVariant variant = ArchitectureVariant::Ours;
};

// Ours: rank-1 quadratics everywhere, width d, identity-leaning init.
// FQuad: no hidden quadratics, full-rank final quadratic, width 2d.
// Linear: no quadratics at all, width 2d.
IcnnConfig architecture_variant(const BenchmarkSpec& spec);

long icnn_parameter_count(const IcnnConfig& cfg);

// Grid CSV: header "x,y,value", row-major over a complete rectangular
// grid with strictly increasing unique coordinates. Parse errors carry
// the offending line number or coordinate.
Grid grid_ingest(const std::string& path);
void grid_emit(const Grid& grid, const std::string& path);

ArchitectureVariant variant_from_name(const std::string& name);
std::string variant_name(ArchitectureVariant v);

}  // namespace npf
