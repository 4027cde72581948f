#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "calibration.hpp"
#include "models.hpp"
#include "multinomial.hpp"
#include "special.hpp"

namespace tolerant {

// Besov-ball parameters; q is recorded only.
struct ReductionSpec {
    double s = 1;
    double L_radius = 1;
    double p = 1;
    double q = 2;
    double d_rule_constant = 1;

    void validate() const {
        require(std::isfinite(s) && s > 0, "ReductionSpec: s must be > 0");
        require(std::isfinite(L_radius) && L_radius > 0, "ReductionSpec: L_radius must be > 0");
        require(std::isfinite(p) && p >= 1, "ReductionSpec: p must be >= 1");
        require(q >= 1, "ReductionSpec: q must lie in [1, inf]");
        require(std::isfinite(d_rule_constant) && d_rule_constant > 0, "ReductionSpec: d_rule_constant must be > 0");
    }
};

struct BinnedObservation {
    Vec x;
    double sigma = 1;
};

// X_i = sqrt(d) * (sum of increments over bin i); coordinate i is N(sqrt(d) int_{I_i} f, sigma^2).
inline BinnedObservation bin_white_noise(const WhiteNoisePath& path, int d) {
    require(d >= 1, "bin_white_noise: d must be >= 1");
    const int m = path.m();
    require(m >= 1 && m % d == 0, "bin_white_noise: path resolution m must be divisible by d");
    const int per = m / d;
    BinnedObservation out;
    out.sigma = path.sigma;
    out.x.assign(static_cast<size_t>(d), 0.0);
    const double scale = std::sqrt(static_cast<double>(d));
    for (int i = 0; i < d; ++i) {
        double s = 0;
        for (int k = 0; k < per; ++k) s += path.increments[static_cast<size_t>(i * per + k)];
        out.x[static_cast<size_t>(i)] = scale * s;
    }
    return out;
}

// Counts over bins [(i-1)/d, i/d), last bin closed.
inline Counts histogram_density(const Vec& samples, int d) {
    require(d >= 1, "histogram_density: d must be >= 1");
    Counts c(static_cast<size_t>(d), 0);
    for (double x : samples) {
        require(std::isfinite(x) && x >= 0 && x <= 1, "histogram_density: sample outside [0,1]");
        int i = static_cast<int>(std::floor(x * d));
        ++c[static_cast<size_t>(std::min(i, d - 1))];
    }
    return c;
}

inline Counts histogram_density(const DensitySample& s, int d) {
    s.validate();
    return histogram_density(s.observations, d);
}

// max(1, round(c * eps1^{-1/s})).
inline int choose_dimension(double eps1, const ReductionSpec& spec) {
    spec.validate();
    require(eps1 > 0 && std::isfinite(eps1), "choose_dimension: eps1 must be > 0");
    double d = std::round(spec.d_rule_constant * std::pow(eps1, -1 / spec.s));
    require(d < 1e9, "choose_dimension: dimension too large");
    return std::max(1, static_cast<int>(d));
}

// ||v||_p = factor * ||f||_p for f piecewise constant on d bins and v_i = sqrt(d) int_{I_i} f.
inline double white_noise_rescale(int d, double p) { return std::pow(static_cast<double>(d), 1 / p - 0.5); }

// ||F - G||_p = factor * ||f - g||_p for bin masses of piecewise-constant densities.
inline double density_rescale(int d, double p) { return std::pow(static_cast<double>(d), 1 / p - 1); }

// Bin masses of the reference density: CDF differences when available, else 128-point Gauss-Legendre per bin.
inline Vec reference_bin_masses(const DensitySample& s, int d) {
    require(static_cast<bool>(s.reference_cdf) || static_cast<bool>(s.reference_pdf),
            "reference_bin_masses: a reference CDF or density is required");
    Vec G(static_cast<size_t>(d));
    if (s.reference_cdf) {
        for (int i = 0; i < d; ++i)
            G[static_cast<size_t>(i)] = s.reference_cdf(static_cast<double>(i + 1) / d) - s.reference_cdf(static_cast<double>(i) / d);
    } else {
        static const QuadRule gl = gauss_legendre(128);
        for (int i = 0; i < d; ++i) {
            const double a = static_cast<double>(i) / d, h = 1.0 / d;
            double m = 0;
            for (std::size_t k = 0; k < gl.x.size(); ++k) m += gl.w[k] * s.reference_pdf(a + h * (gl.x[k] + 1) / 2);
            G[static_cast<size_t>(i)] = m * h / 2;
        }
    }
    double total = 0;
    for (double& g : G) {
        require(g >= -1e-12, "reference_bin_masses: negative bin mass");
        g = std::max(g, 0.0);
        total += g;
    }
    require(std::abs(total - 1) < 1e-6, "reference_bin_masses: reference does not integrate to 1 on [0,1]");
    for (double& g : G) g /= total;
    return G;
}

struct TransportedDecision {
    TestDecision decision;
    int d = 0;
    double rescale = 1;
    double eps0_transported = 0;
    double eps1_transported = 0;
};

// Bins the path, rescales the tolerances by d^{1/p-1/2} and runs the Gaussian-sequence test.
inline TransportedDecision transport_white_noise_test(const WhiteNoisePath& path, const ReductionSpec& spec,
                                                      const HypothesisPair& h, double alpha, int d = 0,
                                                      Calibration cal = Calibration::cantelli_envelope,
                                                      const RandomStream& rng = {}) {
    spec.validate();
    h.validate();
    if (d <= 0) d = choose_dimension(h.eps1 > 0 ? h.eps1 : 1.0, spec);
    auto obs = bin_white_noise(path, d);
    TransportedDecision out;
    out.d = d;
    out.rescale = white_noise_rescale(d, h.p);
    TestSpec ts;
    ts.hypothesis = h;
    ts.hypothesis.eps0 = h.eps0 * out.rescale;
    ts.hypothesis.eps1 = h.eps1 * out.rescale;
    ts.statistic_kind = default_kind_for(h.p);
    ts.alpha = alpha;
    ts.beta = std::min(0.1, (1 - alpha) / 2);
    ts.calibration = cal;
    out.eps0_transported = ts.hypothesis.eps0;
    out.eps1_transported = ts.hypothesis.eps1;
    out.decision = run_test(ts, obs.x, obs.sigma, rng);
    return out;
}

// Histograms sample and reference, rescales tolerances by d^{1/p-1} and runs the multinomial test.
// For p = 1 the statistic is total variation, so the l_1 tolerance is halved.
inline TransportedDecision transport_density_test(const DensitySample& sample, const ReductionSpec& spec,
                                                  const HypothesisPair& h, double alpha, int d = 0) {
    spec.validate();
    h.validate();
    sample.validate();
    require(!sample.observations.empty(), "transport_density_test: empty sample");
    if (d <= 0) d = choose_dimension(h.eps1 > 0 ? h.eps1 : 1.0, spec);
    TransportedDecision out;
    out.d = d;
    out.rescale = density_rescale(d, h.p);
    const double unit = h.p == 1 ? 0.5 : 1.0;
    out.eps0_transported = h.eps0 * out.rescale * unit;
    out.eps1_transported = h.eps1 * out.rescale * unit;
    MultinomialTest test(reference_bin_masses(sample, d), h.p, out.eps0_transported, alpha);
    out.decision = test.decide(histogram_density(sample.observations, d));
    return out;
}

}  // namespace tolerant
