#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "calibration.hpp"
#include "experiments.hpp"
#include "lower_bounds.hpp"
#include "models.hpp"
#include "multinomial.hpp"
#include "poly_approx.hpp"
#include "reductions.hpp"
#include "statistics.hpp"

namespace tolerant {

using json = nlohmann::json;

inline double get_real(const json& j, const char* key) {
    require(j.contains(key), std::string("missing field: ") + key);
    require(j.at(key).is_number(), std::string("field must be a number: ") + key);
    double v = j.at(key).get<double>();
    require(std::isfinite(v), std::string("field must be finite: ") + key);
    return v;
}

inline long long get_integer(const json& j, const char* key) {
    require(j.contains(key), std::string("missing field: ") + key);
    require(j.at(key).is_number_integer(), std::string("field must be an integer: ") + key);
    return j.at(key).get<long long>();
}

inline Vec get_vec(const json& j, const char* key) {
    require(j.contains(key) && j.at(key).is_array(), std::string("field must be an array: ") + key);
    Vec v;
    for (const auto& x : j.at(key)) {
        require(x.is_number(), std::string("array entries must be numbers: ") + key);
        v.push_back(x.get<double>());
    }
    require(all_finite(v), std::string("array entries must be finite: ") + key);
    return v;
}

inline std::string to_string(Direction d) { return d == Direction::tolerant ? "tolerant" : "equivalence"; }

inline Direction direction_from_string(const std::string& s) {
    if (s == "tolerant") return Direction::tolerant;
    if (s == "equivalence") return Direction::equivalence;
    throw ValidationError("unknown direction: " + s);
}

inline json to_json(const HypothesisPair& h) {
    return {{"p", h.p}, {"eps0", h.eps0}, {"eps1", h.eps1}, {"direction", to_string(h.direction)}};
}

inline HypothesisPair hypothesis_from_json(const json& j) {
    HypothesisPair h;
    h.p = get_real(j, "p");
    h.eps0 = j.contains("eps0") ? get_real(j, "eps0") : 0.0;
    h.eps1 = j.contains("eps1") ? get_real(j, "eps1") : h.eps0;
    if (j.contains("direction")) h.direction = direction_from_string(j.at("direction").get<std::string>());
    h.validate();
    return h;
}

inline json to_json(const TestDecision& d) {
    return {{"reject", d.reject}, {"value", d.statistic_value}, {"threshold", d.threshold},
            {"p_value_upper", d.p_value_upper}};
}

inline json to_json(const StatisticReport& r) {
    return {{"value", r.value},         {"mean_lower", r.mean_lower}, {"mean_upper", r.mean_upper},
            {"var_upper", r.var_upper}, {"bias_upper", r.bias_upper}, {"statistic_kind", to_string(r.statistic_kind)}};
}

inline json to_json(const TestSpec& s) {
    json j = {{"hypothesis", to_json(s.hypothesis)},
              {"statistic_kind", to_string(s.statistic_kind)},
              {"alpha", s.alpha},
              {"beta", s.beta},
              {"calibration", to_string(s.calibration)},
              {"mc_reps", s.mc_reps}};
    j["null_candidates"] = json::array();
    for (const auto& v : s.null_candidates) j["null_candidates"].push_back(v);
    return j;
}

inline TestSpec test_spec_from_json(const json& j) {
    TestSpec s;
    s.hypothesis = hypothesis_from_json(j.at("hypothesis"));
    s.statistic_kind = j.contains("statistic_kind") ? statistic_kind_from_string(j.at("statistic_kind").get<std::string>())
                                                    : default_kind_for(s.hypothesis.p);
    if (j.contains("alpha")) s.alpha = get_real(j, "alpha");
    if (j.contains("beta")) s.beta = get_real(j, "beta");
    if (j.contains("calibration")) s.calibration = calibration_from_string(j.at("calibration").get<std::string>());
    if (j.contains("mc_reps")) s.mc_reps = j.at("mc_reps").get<int>();
    if (j.contains("null_candidates"))
        for (const auto& v : j.at("null_candidates")) s.null_candidates.push_back(v.get<Vec>());
    s.validate();
    return s;
}

inline json to_json(const GaussianSequenceSpec& s) {
    return {{"model", "gaussian_sequence"}, {"d", s.d}, {"sigma", s.sigma}, {"v", s.v}};
}

inline GaussianSequenceSpec gaussian_spec_from_json(const json& j) {
    GaussianSequenceSpec s;
    s.v = get_vec(j, "v");
    s.d = j.contains("d") ? j.at("d").get<int>() : static_cast<int>(s.v.size());
    s.sigma = get_real(j, "sigma");
    s.validate(true);
    return s;
}

inline json to_json(const MultinomialSpec& s) {
    return {{"model", "multinomial"}, {"d", s.d}, {"n", s.n}, {"F", s.F}, {"G", s.G}};
}

inline MultinomialSpec multinomial_spec_from_json(const json& j) {
    MultinomialSpec s;
    s.F = get_vec(j, "F");
    if (j.contains("G")) s.G = get_vec(j, "G");
    s.d = j.contains("d") ? j.at("d").get<int>() : static_cast<int>(s.F.size());
    s.n = j.at("n").get<std::int64_t>();
    s.validate();
    return s;
}

inline json to_json(const PoissonSequenceSpec& s) {
    return {{"model", "poisson"}, {"d", s.d}, {"n", s.n}, {"lambda", s.lambda}, {"lambda0", s.lambda0}};
}

inline PoissonSequenceSpec poisson_spec_from_json(const json& j) {
    PoissonSequenceSpec s;
    s.lambda = get_vec(j, "lambda");
    if (j.contains("lambda0")) s.lambda0 = get_vec(j, "lambda0");
    s.d = j.contains("d") ? j.at("d").get<int>() : static_cast<int>(s.lambda.size());
    s.n = get_real(j, "n");
    s.validate();
    return s;
}

inline json to_json(const MixingPair& p) {
    return {{"support", p.support}, {"w0", p.w0}, {"w1", p.w1}, {"L", p.L}, {"delta", p.delta}, {"p", p.p}};
}

inline MixingPair mixing_pair_from_json(const json& j) {
    MixingPair p;
    p.support = get_vec(j, "support");
    p.w0 = get_vec(j, "w0");
    p.w1 = get_vec(j, "w1");
    p.L = static_cast<int>(get_integer(j, "L"));
    p.delta = get_real(j, "delta");
    p.p = get_real(j, "p");
    return p;
}

inline json certificate_body(const LowerBoundCertificate& c) {
    return {{"pair", to_json(c.pair)}, {"d", c.d},
            {"sigma", c.sigma},        {"chi2_upper", c.chi2_upper},
            {"mass0", c.mass0},        {"mass1", c.mass1},
            {"eps0", c.eps0},          {"eps1", c.eps1},
            {"alpha", c.alpha},        {"beta", c.beta},
            {"target_risk_floor", c.target_risk_floor}, {"route", c.route}};
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    require(EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) == 1, "sha256 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

// SHA-256 of the canonical (sorted-key) serialisation of every certificate field.
inline std::string certificate_digest(const LowerBoundCertificate& c) { return sha256_hex(certificate_body(c).dump()); }

inline json to_json(const LowerBoundCertificate& c) {
    json j = certificate_body(c);
    j["digest"] = certificate_digest(c);
    return j;
}

inline LowerBoundCertificate certificate_from_json(const json& j) {
    LowerBoundCertificate c;
    c.pair = mixing_pair_from_json(j.at("pair"));
    c.d = get_integer(j, "d");
    c.sigma = get_real(j, "sigma");
    c.chi2_upper = get_real(j, "chi2_upper");
    c.mass0 = get_real(j, "mass0");
    c.mass1 = get_real(j, "mass1");
    c.eps0 = get_real(j, "eps0");
    c.eps1 = get_real(j, "eps1");
    c.alpha = get_real(j, "alpha");
    c.beta = get_real(j, "beta");
    c.target_risk_floor = get_real(j, "target_risk_floor");
    c.route = j.at("route").get<std::string>();
    return c;
}

// "" when the certificate parses, its digest matches and every inequality survives the recheck.
inline std::string verify_certificate_json(const json& j) {
    LowerBoundCertificate c;
    try {
        c = certificate_from_json(j);
    } catch (const std::exception& e) {
        return std::string("malformed certificate: ") + e.what();
    }
    if (!j.contains("digest") || !j.at("digest").is_string()) return "missing digest";
    if (j.at("digest").get<std::string>() != certificate_digest(c)) return "digest mismatch: certificate was modified";
    return recheck_certificate(c);
}

// A bare array, or an object holding the array under `key`.
inline Vec real_array(const json& j, const char* key) {
    if (j.is_array()) return get_vec(json{{key, j}}, key);
    require(j.is_object(), std::string("expected an array or an object with field ") + key);
    return get_vec(j, key);
}

inline Counts counts_array(const json& j, const char* key = "counts") {
    const json& a = j.is_array() ? j : (j.is_object() && j.contains(key) ? j.at(key) : json());
    require(a.is_array(), std::string("expected an array of counts or an object with field ") + key);
    Counts c;
    for (const auto& x : a) {
        require(x.is_number_integer() || (x.is_number() && x.get<double>() == std::floor(x.get<double>())),
                "counts must be integers");
        const auto v = x.get<std::int64_t>();
        require(v >= 0, "counts must be non-negative");
        c.push_back(v);
    }
    require(!c.empty(), "counts must be non-empty");
    return c;
}

inline WhiteNoisePath white_noise_from_json(const json& j) {
    WhiteNoisePath w;
    w.increments = get_vec(j, "increments");
    w.sigma = get_real(j, "sigma");
    require(w.sigma > 0, "white noise: sigma must be > 0");
    if (j.contains("n_equiv")) w.n_equiv = get_real(j, "n_equiv");
    require(!w.increments.empty(), "white noise: increments must be non-empty");
    return w;
}

// reference: {"type":"uniform"} or {"type":"piecewise","masses":[...]} (equal-width pieces on [0,1]).
inline DensitySample density_sample_from_json(const json& j) {
    DensitySample s;
    s.observations = get_vec(j, "observations");
    const json ref = j.contains("reference") ? j.at("reference") : json{{"type", "uniform"}};
    const std::string type = ref.value("type", "uniform");
    if (type == "uniform") {
        s.reference_cdf = [](double t) { return std::clamp(t, 0.0, 1.0); };
    } else if (type == "piecewise") {
        Vec m = get_vec(ref, "masses");
        require(!m.empty(), "piecewise reference: masses must be non-empty");
        validate_simplex(m, "piecewise reference masses");
        Vec cum(m.size() + 1, 0.0);
        for (std::size_t i = 0; i < m.size(); ++i) cum[i + 1] = cum[i] + m[i];
        s.reference_cdf = [cum](double t) {
            t = std::clamp(t, 0.0, 1.0);
            const double k = static_cast<double>(cum.size() - 1);
            const std::size_t i = std::min(static_cast<std::size_t>(t * k), cum.size() - 2);
            return cum[i] + (cum[i + 1] - cum[i]) * (t * k - static_cast<double>(i));
        };
    } else {
        throw ValidationError("unknown reference type: " + type);
    }
    s.validate();
    return s;
}

inline json to_json(const MomentProblemResult& r) {
    return {{"value", r.value}, {"pair", to_json(r.pair)}, {"lp_rounds", r.lp_rounds}, {"max_violation", r.max_violation}};
}

inline json to_json(const PolyApproxResult& r) {
    return {{"degree", r.degree},           {"error", r.error},
            {"claimed_error", r.claimed_error}, {"coefficients", r.coefficients},
            {"reference", r.reference},     {"alternations", r.alternations},
            {"iterations", r.iterations}};
}

inline json to_json(const ToleranceFactor& t) {
    return {{"value", t.value}, {"censored", t.censored}, {"evaluations", t.evaluations}};
}

inline json to_json(const PhysicsReport& r) {
    return {{"decision", to_json(r.decision)},
            {"tolerance_factor", to_json(r.tolerance)},
            {"r", r.r},
            {"n", r.n},
            {"d", r.d},
            {"predicted_floor", r.predicted_floor},
            {"predicted_floor_r0", r.predicted_floor_r0},
            {"no_loss_regime", r.no_loss_regime}};
}

inline json to_json(const WrappedDecision& w) {
    return {{"decision", to_json(w.decision)}, {"size", w.size}, {"forced_accept", w.forced_accept}};
}

inline json to_json(const TransportedDecision& t) {
    return {{"decision", to_json(t.decision)},
            {"d", t.d},
            {"rescale", t.rescale},
            {"eps0_transported", t.eps0_transported},
            {"eps1_transported", t.eps1_transported}};
}

inline json to_json(const PowerCurveRow& r) {
    return {{"eps0", r.eps0},   {"eps1", r.eps1},     {"d", r.d},
            {"sigma", r.sigma}, {"alpha", r.alpha},   {"n_reps", r.n_reps},
            {"type1", r.empirical_type1}, {"power", r.empirical_power}, {"stderr", r.mc_stderr},
            {"type1_stderr", r.type1_stderr}, {"seed", r.seed}, {"label", r.label}};
}

inline json to_json(const RegimePoint& p) {
    return {{"eps0", p.eps0},
            {"critical_sep", p.empirical_critical_sep},
            {"predicted", p.predicted_rate},
            {"label", to_string(p.regime_label)},
            {"monotone", p.monotone}};
}

inline json to_json(const SuboptimalityReport& rep) {
    json rows = json::array();
    for (const auto& r : rep.rows)
        rows.push_back({{"c", r.c},
                        {"eps0", r.eps0},
                        {"eps1", r.eps1},
                        {"chi2_threshold_envelope", r.chi2_threshold_envelope},
                        {"chi2_power_envelope", r.chi2_power_envelope},
                        {"chi2_threshold_mc", r.chi2_threshold_mc},
                        {"chi2_power_mc", r.chi2_power_mc},
                        {"plugin_threshold", r.plugin_threshold},
                        {"plugin_power", r.plugin_power},
                        {"stderr_chi2", r.stderr_chi2},
                        {"stderr_plugin", r.stderr_plugin}});
    return {{"d", rep.d},         {"sigma", rep.sigma}, {"alpha", rep.alpha}, {"beta", rep.beta},
            {"C", rep.C},         {"n_reps", rep.n_reps}, {"rows", rows}};
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("invalid JSON in " + path + ": " + e.what());
    }
}

}  // namespace tolerant
