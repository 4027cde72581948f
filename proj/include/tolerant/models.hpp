#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace tolerant {

using Vec = std::vector<double>;
using Counts = std::vector<std::int64_t>;

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

struct GaussianSequenceSpec {
    int d = 1;
    double sigma = 1.0;
    Vec v;

    // Returns warnings (sigma > 1 is accepted but flagged).
    std::vector<std::string> validate(bool allow_zero_sigma = false) const {
        require(d >= 1, "GaussianSequenceSpec: d must be >= 1");
        require(std::isfinite(sigma) && (sigma > 0 || (allow_zero_sigma && sigma == 0)),
                "GaussianSequenceSpec: sigma must be > 0");
        require(static_cast<int>(v.size()) == d, "GaussianSequenceSpec: v must have exactly d entries");
        require(all_finite(v), "GaussianSequenceSpec: v entries must be finite");
        std::vector<std::string> warn;
        if (sigma > 1) warn.push_back("sigma > 1 is outside the nominal range (0,1]");
        return warn;
    }

    static GaussianSequenceSpec zero(int d, double sigma) { return {d, sigma, Vec(static_cast<size_t>(d), 0.0)}; }
};

enum class Direction { tolerant, equivalence };

struct HypothesisPair {
    double p = 1.0;
    double eps0 = 0.0;
    double eps1 = 0.0;
    Direction direction = Direction::tolerant;

    void validate() const {
        require(std::isfinite(p) && p >= 1, "HypothesisPair: p must be >= 1");
        require(std::isfinite(eps0) && eps0 >= 0, "HypothesisPair: eps0 must be >= 0");
        require(std::isfinite(eps1) && eps1 >= eps0, "HypothesisPair: eps1 must be >= eps0");
    }
};

inline void validate_simplex(const Vec& F, const char* name) {
    double s = 0;
    for (double x : F) {
        require(std::isfinite(x) && x >= 0 && x <= 1, std::string(name) + ": entries must lie in [0,1]");
        s += x;
    }
    require(std::abs(s - 1.0) <= 1e-12 * std::max<double>(1.0, static_cast<double>(F.size())),
            std::string(name) + ": entries must sum to 1");
}

struct MultinomialSpec {
    int d = 1;
    std::int64_t n = 1;
    Vec F;
    Vec G;

    void validate() const {
        require(d >= 1, "MultinomialSpec: d must be >= 1");
        require(n >= 1, "MultinomialSpec: n must be >= 1");
        require(static_cast<int>(F.size()) == d, "MultinomialSpec: F must have d entries");
        validate_simplex(F, "MultinomialSpec.F");
        if (!G.empty()) {
            require(static_cast<int>(G.size()) == d, "MultinomialSpec: G must have d entries");
            validate_simplex(G, "MultinomialSpec.G");
        }
    }
};

struct PoissonSequenceSpec {
    int d = 1;
    double n = 1.0;
    Vec lambda;
    Vec lambda0;

    void validate() const {
        require(d >= 1, "PoissonSequenceSpec: d must be >= 1");
        require(std::isfinite(n) && n > 0, "PoissonSequenceSpec: n must be > 0");
        require(static_cast<int>(lambda.size()) == d, "PoissonSequenceSpec: lambda must have d entries");
        for (double x : lambda) require(x > 0, "PoissonSequenceSpec: rates must be strictly positive");
        validate_simplex(lambda, "PoissonSequenceSpec.lambda");
        if (!lambda0.empty()) {
            require(static_cast<int>(lambda0.size()) == d, "PoissonSequenceSpec: lambda0 must have d entries");
            for (double x : lambda0) require(x > 0, "PoissonSequenceSpec: rates must be strictly positive");
            validate_simplex(lambda0, "PoissonSequenceSpec.lambda0");
        }
    }
};

// Discretised white-noise path: increments[k] approximates X(t_{k+1}) - X(t_k) on a grid of m cells.
struct WhiteNoisePath {
    Vec increments;
    double sigma = 1.0;
    double n_equiv = 1.0;
    int m() const { return static_cast<int>(increments.size()); }
};

struct DensitySample {
    Vec observations;
    std::function<double(double)> reference_cdf;  // may be empty
    std::function<double(double)> reference_pdf;  // used when no CDF is given

    void validate() const {
        for (double x : observations)
            require(std::isfinite(x) && x >= 0 && x <= 1, "DensitySample: observations must lie in [0,1]");
    }
};

inline double norm_lp(const Vec& v, double p) {
    require(p >= 1, "norm_lp: p must be >= 1");
    if (std::isinf(p)) {
        double m = 0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
    double scale = 0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    if (scale == 0) return 0;
    // Kahan sum of (|x|/scale)^p avoids overflow and drift.
    double s = 0, c = 0;
    for (double x : v) {
        double y = std::pow(std::abs(x) / scale, p) - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return scale * std::pow(s, 1.0 / p);
}

inline void fill_normal(std::mt19937_64& eng, double* out, std::size_t n) {
    std::normal_distribution<double> N(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) out[i] = N(eng);
}

inline Vec sample_gaussian_sequence(const GaussianSequenceSpec& spec, const RandomStream& rng) {
    spec.validate(/*allow_zero_sigma=*/true);
    Vec x(spec.v);
    if (spec.sigma == 0) return x;
    auto eng = rng.engine();
    std::normal_distribution<double> N(0.0, 1.0);
    for (auto& xi : x) xi += spec.sigma * N(eng);
    return x;
}

inline Counts sample_multinomial_counts(std::int64_t n, const Vec& F, std::mt19937_64& eng) {
    Counts c(F.size(), 0);
    std::int64_t left = n;
    double mass_left = 1.0;
    for (std::size_t i = 0; i + 1 < F.size() && left > 0; ++i) {
        double q = mass_left > 0 ? std::clamp(F[i] / mass_left, 0.0, 1.0) : 0.0;
        std::binomial_distribution<std::int64_t> B(left, q);
        c[i] = B(eng);
        left -= c[i];
        mass_left -= F[i];
    }
    if (!F.empty()) c.back() += left;
    return c;
}

inline Counts sample_multinomial(const MultinomialSpec& spec, const RandomStream& rng) {
    spec.validate();
    auto eng = rng.engine();
    return sample_multinomial_counts(spec.n, spec.F, eng);
}

inline Counts sample_poisson_counts(double n, const Vec& lambda, std::mt19937_64& eng) {
    Counts c(lambda.size(), 0);
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        double mu = n * lambda[i];
        if (mu > 0) c[i] = std::poisson_distribution<std::int64_t>(mu)(eng);
    }
    return c;
}

inline Counts sample_poisson(const PoissonSequenceSpec& spec, const RandomStream& rng) {
    spec.validate();
    auto eng = rng.engine();
    return sample_poisson_counts(spec.n, spec.lambda, eng);
}

// Simulates dX = f dt + sigma dW on m cells of [0,1]; f is integrated by 3-point Gauss-Legendre per cell.
inline WhiteNoisePath simulate_white_noise(const std::function<double(double)>& f, double sigma, int m,
                                           const RandomStream& rng) {
    require(m >= 1, "simulate_white_noise: m must be >= 1");
    require(sigma >= 0, "simulate_white_noise: sigma must be >= 0");
    WhiteNoisePath path;
    path.sigma = sigma;
    path.n_equiv = sigma > 0 ? 1.0 / (sigma * sigma) : std::numeric_limits<double>::infinity();
    path.increments.resize(static_cast<size_t>(m));
    auto eng = rng.engine();
    std::normal_distribution<double> N(0.0, 1.0);
    const double h = 1.0 / m;
    const double g = std::sqrt(0.6) / 2;
    for (int k = 0; k < m; ++k) {
        double a = k * h, mid = a + h / 2;
        double integral = h * (5 * f(mid - g * h) + 8 * f(mid) + 5 * f(mid + g * h)) / 18;
        path.increments[static_cast<size_t>(k)] = integral + (sigma > 0 ? sigma * std::sqrt(h) * N(eng) : 0.0);
    }
    return path;
}

}  // namespace tolerant
