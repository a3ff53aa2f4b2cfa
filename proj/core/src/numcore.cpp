#include "npf/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace npf {

void Mat::set_row(int i, std::span<const double> x) {
    if (static_cast<int>(x.size()) != cols)
        throw std::invalid_argument("Mat::set_row: size mismatch");
    std::copy(x.begin(), x.end(), row(i).begin());
}

bool all_finite(std::span<const double> xs) {
    for (double x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("sq_dist: size mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: size mismatch");
    for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(std::span<double> x, double alpha) {
    for (double& xi : x) xi *= alpha;
}

void fill(std::span<double> x, double value) {
    std::fill(x.begin(), x.end(), value);
}

namespace {

uint64_t splitmix64(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

}  // namespace

Rng::Rng(uint64_t seed) : state_(seed) {
    // scramble so that nearby seeds give unrelated streams
    (void)splitmix64(state_);
}

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
}

double Rng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    // Box-Muller; 1-u keeps the log argument in (0, 1]
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(a);
    has_cached_normal_ = true;
    return r * std::cos(a);
}

void Rng::fill_normal(std::span<double> out) {
    for (double& x : out) x = normal();
}

void Rng::fill_uniform(std::span<double> out, double lo, double hi) {
    for (double& x : out) x = uniform(lo, hi);
}

Rng Rng::fork(uint64_t stream) const {
    return Rng(mix(state_, stream));
}

double LrSchedule::at(long completed) const {
    switch (kind) {
        case Kind::Constant:
            return base_lr;
        case Kind::CosineDecay: {
            long t = std::clamp(completed, 0L, decay_steps);
            double cosine = 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(t) /
                                                  static_cast<double>(std::max(decay_steps, 1L))));
            return base_lr * (floor_fraction + (1.0 - floor_fraction) * cosine);
        }
    }
    return base_lr;
}

LrSchedule LrSchedule::constant(double lr) {
    LrSchedule s;
    s.kind = Kind::Constant;
    s.base_lr = lr;
    return s;
}

LrSchedule LrSchedule::cosine(double lr, double floor_fraction, long decay_steps) {
    LrSchedule s;
    s.kind = Kind::CosineDecay;
    s.base_lr = lr;
    s.floor_fraction = floor_fraction;
    s.decay_steps = decay_steps;
    return s;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: parameter/gradient/state size mismatch");
    for (size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i]))
            throw std::runtime_error("adam_step: non-finite gradient at index " +
                                     std::to_string(i));
    }

    const double lr = state.cfg.schedule.at(state.step);
    state.step += 1;
    const double b1 = state.cfg.beta1;
    const double b2 = state.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.cfg.epsilon);
    }
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: h must be positive");
    Vec grad(x.size(), 0.0);
    Vec probe = x;
    for (size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        double fp = f(probe);
        probe[i] = x[i] - h;
        double fm = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_diff_grad: non-finite value at component " +
                                     std::to_string(i));
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

bool Box::contains(std::span<const double> x) const {
    for (size_t i = 0; i < x.size(); ++i)
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
}

void Box::clamp(std::span<double> x) const {
    for (size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
}

double Box::diameter() const {
    double s = 0.0;
    for (size_t i = 0; i < lo.size(); ++i) {
        double d = hi[i] - lo[i];
        s += d * d;
    }
    return std::sqrt(s);
}

Box Box::cube(int d, double lo, double hi) {
    Box b;
    b.lo.assign(d, lo);
    b.hi.assign(d, hi);
    return b;
}

}  // namespace npf
