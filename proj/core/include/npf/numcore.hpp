#pragma once

// Dense float64 vector/matrix helpers, deterministic RNG, Adam with
// learning-rate schedules, and a central-difference gradient checker.
// Everything downstream builds on these primitives.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace npf {

using Vec = std::vector<double>;

struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

    double& operator()(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }

    std::span<double> row(int i) {
        return {v.data() + static_cast<size_t>(i) * cols, static_cast<size_t>(cols)};
    }
    std::span<const double> row(int i) const {
        return {v.data() + static_cast<size_t>(i) * cols, static_cast<size_t>(cols)};
    }
    Vec row_vec(int i) const {
        auto r = row(i);
        return Vec(r.begin(), r.end());
    }
    void set_row(int i, std::span<const double> x);
};

bool all_finite(std::span<const double> xs);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double sq_dist(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(std::span<double> x, double alpha);
void fill(std::span<double> x, double value);

// Splitmix64-based generator. Identical seed gives an identical draw
// sequence; fork(stream) derives an independent substream without
// advancing this generator.
class Rng {
  public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    double uniform();  // [0, 1)
    double uniform(double lo, double hi);
    int uniform_int(int n);  // [0, n)
    double normal();         // N(0, 1)
    void fill_normal(std::span<double> out);
    void fill_uniform(std::span<double> out, double lo, double hi);

    Rng fork(uint64_t stream) const;

  private:
    uint64_t state_ = 0;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

struct LrSchedule {
    enum class Kind { Constant, CosineDecay };
    Kind kind = Kind::Constant;
    double base_lr = 1e-3;
    double floor_fraction = 0.0;  // fraction of base_lr reached at the end of the decay
    long decay_steps = 1;

    // Learning rate for the update following `completed` previous updates.
    double at(long completed) const;

    static LrSchedule constant(double lr);
    static LrSchedule cosine(double lr, double floor_fraction, long decay_steps);
};

struct AdamConfig {
    LrSchedule schedule;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    Vec m;
    Vec v;
    long step = 0;

    AdamState() = default;
    AdamState(AdamConfig c, size_t n) : cfg(c), m(n, 0.0), v(n, 0.0) {}
};

// Standard Adam update with bias correction and the scheduled learning
// rate. Throws std::invalid_argument on shape mismatch and
// std::runtime_error when a gradient entry is not finite; the state and
// parameters are untouched in both cases.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

// Component-wise central differences (f(x+h e_i) - f(x-h e_i)) / 2h.
// Throws std::runtime_error naming the component if f evaluates to a
// non-finite value.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h);

// Axis-aligned box, used as the declared support of fields and the
// clamping region for sampler particles.
struct Box {
    Vec lo;
    Vec hi;

    int dim() const { return static_cast<int>(lo.size()); }
    bool contains(std::span<const double> x) const;
    void clamp(std::span<double> x) const;
    double diameter() const;
    static Box cube(int d, double lo, double hi);
};

}  // namespace npf
