#include "npf/fields.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include "npf/csv.hpp"

namespace npf {

namespace {

Vec linspace01(int n) {
    Vec xs(n, 0.0);
    for (int i = 0; i < n; ++i) xs[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    return xs;
}

// separable convolution with reflect padding
void gaussian_smooth(Mat& values, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    Vec kernel(2 * radius + 1, 0.0);
    double ksum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
        ksum += kernel[k + radius];
    }
    for (double& k : kernel) k /= ksum;

    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - 1 - i;
        }
        return i;
    };

    Mat tmp(values.rows, values.cols);
    for (int i = 0; i < values.rows; ++i)
        for (int j = 0; j < values.cols; ++j) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * values(i, reflect(j + k, values.cols));
            tmp(i, j) = acc;
        }
    for (int j = 0; j < values.cols; ++j)
        for (int i = 0; i < values.rows; ++i) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp(reflect(i + k, values.rows), j);
            values(i, j) = acc;
        }
}

}  // namespace

Grid terrain_from_bumps(int resolution, std::span<const TerrainBump> bumps, double smooth_sigma,
                        bool dequantize, Rng& rng) {
    if (resolution < 8) throw std::invalid_argument("terrain: resolution must be >= 8");
    Grid g;
    g.xs = linspace01(resolution);
    g.ys = linspace01(resolution);
    g.values = Mat(resolution, resolution, 0.0);
    for (const TerrainBump& b : bumps) {
        if (b.width <= 0.0) throw std::invalid_argument("terrain: bump width must be positive");
        const double inv = 1.0 / (2.0 * b.width * b.width);
        for (int i = 0; i < resolution; ++i)
            for (int j = 0; j < resolution; ++j) {
                const double dx = g.xs[j] - b.cx;
                const double dy = g.ys[i] - b.cy;
                g.values(i, j) += b.amplitude * std::exp(-(dx * dx + dy * dy) * inv);
            }
    }
    if (dequantize) {
        for (double& v : g.values.v) v += rng.uniform();
    }
    gaussian_smooth(g.values, smooth_sigma);
    return g;
}

Grid terrain_generate(const TerrainSpec& spec, Rng& rng) {
    if (spec.smooth_sigma <= 0.0) throw std::invalid_argument("terrain: kernel width must be positive");
    std::vector<TerrainBump> bumps(spec.bumps);
    for (TerrainBump& b : bumps) {
        b.cx = rng.uniform();
        b.cy = rng.uniform();
        b.amplitude = rng.uniform(spec.amplitude_min, spec.amplitude_max);
        b.width = rng.uniform(spec.width_min, spec.width_max);
    }
    return terrain_from_bumps(spec.resolution, bumps, spec.smooth_sigma, spec.dequantize, rng);
}

GridField grid_gradient(const Grid& grid) {
    if (grid.nx() < 3 || grid.ny() < 3)
        throw std::invalid_argument("grid_gradient: grid must be at least 3x3");
    GridField f;
    f.grid = grid;
    f.fx = Mat(grid.ny(), grid.nx());
    f.fy = Mat(grid.ny(), grid.nx());
    const auto& v = grid.values;
    for (int i = 0; i < grid.ny(); ++i) {
        for (int j = 0; j < grid.nx(); ++j) {
            if (j == 0)
                f.fx(i, j) = (v(i, 1) - v(i, 0)) / (grid.xs[1] - grid.xs[0]);
            else if (j == grid.nx() - 1)
                f.fx(i, j) = (v(i, j) - v(i, j - 1)) / (grid.xs[j] - grid.xs[j - 1]);
            else
                f.fx(i, j) = (v(i, j + 1) - v(i, j - 1)) / (grid.xs[j + 1] - grid.xs[j - 1]);

            if (i == 0)
                f.fy(i, j) = (v(1, j) - v(0, j)) / (grid.ys[1] - grid.ys[0]);
            else if (i == grid.ny() - 1)
                f.fy(i, j) = (v(i, j) - v(i - 1, j)) / (grid.ys[i] - grid.ys[i - 1]);
            else
                f.fy(i, j) = (v(i + 1, j) - v(i - 1, j)) / (grid.ys[i + 1] - grid.ys[i - 1]);
        }
    }
    return f;
}

PairedData grid_field_dataset(const GridField& field) {
    const int n = field.grid.nx() * field.grid.ny();
    PairedData data;
    data.xs = Mat(n, 2);
    data.fxs = Mat(n, 2);
    int r = 0;
    for (int i = 0; i < field.grid.ny(); ++i)
        for (int j = 0; j < field.grid.nx(); ++j, ++r) {
            data.xs(r, 0) = field.grid.xs[j];
            data.xs(r, 1) = field.grid.ys[i];
            data.fxs(r, 0) = field.fx(i, j);
            data.fxs(r, 1) = field.fy(i, j);
        }
    return data;
}

PairedData VectorFieldSource::make_dataset(int n, Rng& rng) const {
    PairedData data;
    data.xs = Mat(n, dim);
    data.fxs = Mat(n, dim);
    sample(data.xs, rng);
    for (int i = 0; i < n; ++i) {
        Vec f = eval(data.xs.row(i));
        data.fxs.set_row(i, f);
    }
    return data;
}

namespace {

int cell_index(const Vec& knots, double x) {
    // interval index for bilinear interpolation, clamped to the grid
    auto it = std::upper_bound(knots.begin(), knots.end(), x);
    int j = static_cast<int>(it - knots.begin()) - 1;
    return std::clamp(j, 0, static_cast<int>(knots.size()) - 2);
}

}  // namespace

VectorFieldSource field_from_grid(GridField field) {
    VectorFieldSource src;
    src.kind = VectorFieldSource::Kind::GridSampled;
    src.dim = 2;
    src.support.lo = {field.grid.xs.front(), field.grid.ys.front()};
    src.support.hi = {field.grid.xs.back(), field.grid.ys.back()};
    auto holder = std::make_shared<GridField>(std::move(field));
    src.grid = *holder;
    src.eval = [holder](std::span<const double> x) -> Vec {
        const Grid& g = holder->grid;
        const int j = cell_index(g.xs, x[0]);
        const int i = cell_index(g.ys, x[1]);
        const double tx = std::clamp((x[0] - g.xs[j]) / (g.xs[j + 1] - g.xs[j]), 0.0, 1.0);
        const double ty = std::clamp((x[1] - g.ys[i]) / (g.ys[i + 1] - g.ys[i]), 0.0, 1.0);
        auto lerp2 = [&](const Mat& m) {
            const double a = m(i, j) * (1 - tx) + m(i, j + 1) * tx;
            const double b = m(i + 1, j) * (1 - tx) + m(i + 1, j + 1) * tx;
            return a * (1 - ty) + b * ty;
        };
        return Vec{lerp2(holder->fx), lerp2(holder->fy)};
    };
    src.sample = [holder](Mat& out, Rng& rng) {
        const Grid& g = holder->grid;
        for (int r = 0; r < out.rows; ++r) {
            const int j = rng.uniform_int(g.nx());
            const int i = rng.uniform_int(g.ny());
            out(r, 0) = g.xs[j];
            out(r, 1) = g.ys[i];
        }
    };
    return src;
}

namespace {

// N(0, I) truncated to the support box by resampling
std::function<void(Mat&, Rng&)> gaussian_sampler(int d, double halfwidth) {
    return [d, halfwidth](Mat& out, Rng& rng) {
        for (int r = 0; r < out.rows; ++r)
            for (int k = 0; k < d; ++k) {
                double z = rng.normal();
                while (std::abs(z) > halfwidth) z = rng.normal();
                out(r, k) = z;
            }
    };
}

}  // namespace

VectorFieldSource make_identity_field(int d, double halfwidth) {
    VectorFieldSource src;
    src.dim = d;
    src.support = Box::cube(d, -halfwidth, halfwidth);
    src.eval = [](std::span<const double> x) { return Vec(x.begin(), x.end()); };
    src.sample = gaussian_sampler(d, halfwidth);
    return src;
}

VectorFieldSource make_diag_field(Vec diagonal, double halfwidth) {
    const int d = static_cast<int>(diagonal.size());
    VectorFieldSource src;
    src.dim = d;
    src.support = Box::cube(d, -halfwidth, halfwidth);
    src.eval = [diag = std::move(diagonal)](std::span<const double> x) {
        Vec f(x.size(), 0.0);
        for (size_t k = 0; k < x.size(); ++k) f[k] = diag[k] * x[k];
        return f;
    };
    src.sample = gaussian_sampler(d, halfwidth);
    return src;
}

VectorFieldSource make_square_1d_field() {
    VectorFieldSource src;
    src.dim = 1;
    src.support = Box::cube(1, -1.0, 1.0);
    src.eval = [](std::span<const double> x) { return Vec{x[0] * x[0]}; };
    src.sample = [](Mat& out, Rng& rng) {
        for (int r = 0; r < out.rows; ++r) out(r, 0) = rng.uniform(-1.0, 1.0);
    };
    return src;
}

VectorFieldSource make_gradient_field(int d, std::function<Vec(std::span<const double>)> grad,
                                      Box support) {
    VectorFieldSource src;
    src.dim = d;
    src.support = std::move(support);
    src.eval = std::move(grad);
    src.sample = [box = src.support, d](Mat& out, Rng& rng) {
        for (int r = 0; r < out.rows; ++r)
            for (int k = 0; k < d; ++k) out(r, k) = rng.uniform(box.lo[k], box.hi[k]);
    };
    return src;
}

GaussBenchmark gauss_benchmark(int d) {
    if (d < 1) throw std::invalid_argument("gauss_benchmark: d must be >= 1");
    GaussBenchmark b;
    b.dim = d;
    b.sample_source = [d](Mat& out, Rng& rng) {
        for (int r = 0; r < out.rows; ++r) rng.fill_normal(out.row(r));
    };
    b.sample_target = [d](Mat& out, Rng& rng) {
        for (int r = 0; r < out.rows; ++r)
            for (int k = 0; k < d; ++k) out(r, k) = std::sqrt(k + 1.0) * rng.normal();
    };
    b.reference_map = [](std::span<const double> x) {
        Vec y(x.size(), 0.0);
        for (size_t k = 0; k < x.size(); ++k) y[k] = std::sqrt(k + 1.0) * x[k];
        return y;
    };
    b.target_variance = 0.5 * d * (d + 1.0);
    return b;
}

MixtureBenchmark mixture7_benchmark(int d) {
    if (d < 2 || d % 2 != 0) throw std::invalid_argument("mixture7_benchmark: d must be even and >= 2");
    MixtureBenchmark b;
    b.dim = d;
    const double h = 30.0;
    const double r = 30.0 / std::sqrt(2.0);
    auto pattern = [d](double even, double odd) {
        Vec m(d, 0.0);
        for (int k = 0; k < d; ++k) m[k] = (k % 2 == 0) ? even : odd;
        return m;
    };
    b.means = {pattern(h, 0.0),  pattern(-h, 0.0), pattern(0.0, -h), pattern(r, r),
               pattern(r, -r),   pattern(-r, r),   pattern(0.0, h)};
    b.covariance_scales = {1, 2, 3, 4, 5, 6, 7};
    b.sample_source = [d](Mat& out, Rng& rng) {
        for (int r2 = 0; r2 < out.rows; ++r2) rng.fill_normal(out.row(r2));
    };
    auto means = b.means;
    auto scales = b.covariance_scales;
    b.sample_target = [d, means, scales](Mat& out, Rng& rng) {
        for (int r2 = 0; r2 < out.rows; ++r2) {
            const int c = rng.uniform_int(static_cast<int>(means.size()));
            const double s = std::sqrt(scales[c]);
            for (int k = 0; k < d; ++k) out(r2, k) = means[c][k] + s * rng.normal();
        }
    };
    return b;
}

IcnnConfig architecture_variant(const BenchmarkSpec& spec) {
    if (spec.benchmark_id != "gauss-diag" && spec.benchmark_id != "mixture7")
        throw std::invalid_argument("unknown benchmark id: " + spec.benchmark_id);
    if (spec.dim < 1) throw std::invalid_argument("architecture_variant: bad dimension");
    IcnnConfig cfg;
    cfg.input_dim = spec.dim;
    cfg.depth = 4;
    cfg.activation = Activation::Elu;
    cfg.delta_min = 1e-2;
    switch (spec.variant) {
        case ArchitectureVariant::Ours:
            cfg.width = spec.dim;
            cfg.quad_rank = 1;
            cfg.final_quad_rank = 1;
            cfg.init = IcnnInit::Identity;
            break;
        case ArchitectureVariant::FQuad:
            cfg.width = 2 * spec.dim;
            cfg.quad_rank = 0;
            cfg.final_quad_rank = spec.dim;
            cfg.iso_quad = true;
            cfg.init = IcnnInit::SmallRandom;
            break;
        case ArchitectureVariant::Linear:
            cfg.width = 2 * spec.dim;
            cfg.quad_rank = 0;
            cfg.final_quad_rank = 0;
            cfg.iso_quad = true;
            cfg.init = IcnnInit::SmallRandom;
            break;
    }
    return cfg;
}

long icnn_parameter_count(const IcnnConfig& cfg) { return IcnnLayout::build(cfg).total; }

ArchitectureVariant variant_from_name(const std::string& name) {
    if (name == "ours") return ArchitectureVariant::Ours;
    if (name == "fquad") return ArchitectureVariant::FQuad;
    if (name == "linear") return ArchitectureVariant::Linear;
    throw std::invalid_argument("unknown architecture variant: " + name);
}

std::string variant_name(ArchitectureVariant v) {
    switch (v) {
        case ArchitectureVariant::Ours: return "ours";
        case ArchitectureVariant::FQuad: return "fquad";
        case ArchitectureVariant::Linear: return "linear";
    }
    return "?";
}

Grid grid_ingest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open grid file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ":1: empty grid file");
    if (line != "x,y,value")
        throw std::runtime_error(path + ":1: expected header 'x,y,value', got '" + line + "'");

    struct Row {
        double x, y, v;
        int line;
    };
    std::vector<Row> rows;
    std::set<double> xset, yset;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        double vals[3];
        for (int c = 0; c < 3; ++c) {
            if (!std::getline(ss, cell, ','))
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 3 cells");
            size_t pos = 0;
            try {
                vals[c] = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": non-numeric cell '" + cell + "'");
            }
            if (pos != cell.size())
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": non-numeric cell '" + cell + "'");
        }
        if (std::getline(ss, cell, ','))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": too many cells");
        rows.push_back({vals[0], vals[1], vals[2], lineno});
        xset.insert(vals[0]);
        yset.insert(vals[1]);
    }
    if (rows.empty()) throw std::runtime_error(path + ": grid has no data rows");

    Grid g;
    g.xs.assign(xset.begin(), xset.end());
    g.ys.assign(yset.begin(), yset.end());
    const int nx = g.nx(), ny = g.ny();
    g.values = Mat(ny, nx);
    std::vector<char> seen(static_cast<size_t>(nx) * ny, 0);
    for (const Row& r : rows) {
        const int j = static_cast<int>(std::lower_bound(g.xs.begin(), g.xs.end(), r.x) - g.xs.begin());
        const int i = static_cast<int>(std::lower_bound(g.ys.begin(), g.ys.end(), r.y) - g.ys.begin());
        char& flag = seen[static_cast<size_t>(i) * nx + j];
        if (flag)
            throw std::runtime_error(path + ":" + std::to_string(r.line) +
                                     ": duplicate coordinate (" + fmt_double(r.x) + "," +
                                     fmt_double(r.y) + ")");
        flag = 1;
        g.values(i, j) = r.v;
    }
    for (int i = 0; i < ny; ++i)
        for (int j = 0; j < nx; ++j)
            if (!seen[static_cast<size_t>(i) * nx + j])
                throw std::runtime_error(path + ": missing cell (" + fmt_double(g.xs[j]) + "," +
                                         fmt_double(g.ys[i]) + ")");
    return g;
}

void grid_emit(const Grid& grid, const std::string& path) {
    CsvWriter out(path, "x,y,value");
    for (int i = 0; i < grid.ny(); ++i)
        for (int j = 0; j < grid.nx(); ++j)
            out.row({fmt_double(grid.xs[j]), fmt_double(grid.ys[i]), fmt_double(grid.values(i, j))});
}

}  // namespace npf
