#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "io.hpp"

namespace tolerant::cli {

// JSON configuration: top-level keys set global options, objects named after a subcommand set its options.
class JsonConfig : public CLI::Config {
   public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw CLI::ConfigError(std::string("invalid JSON config: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConfigError("JSON config must be an object");
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, val] : j.items()) {
            if (val.is_object()) {
                for (const auto& [k2, v2] : val.items()) {
                    if (v2.is_object()) throw CLI::ConfigError("config nesting deeper than one subcommand: " + key + "." + k2);
                    items.push_back({{key}, k2, inputs(v2)});
                }
            } else {
                items.push_back({{}, key, inputs(val)});
            }
        }
        return items;
    }

   private:
    static std::string scalar(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw CLI::ConfigError("unsupported config value: " + v.dump());
    }
    static std::vector<std::string> inputs(const json& v) {
        std::vector<std::string> out;
        if (v.is_array())
            for (const auto& x : v) out.push_back(scalar(x));
        else if (!v.is_null())
            out.push_back(scalar(v));
        return out;
    }
};

enum ExitCode { kOk = 0, kValidation = 1, kCertificate = 2, kConvergence = 3 };

struct Options {
    std::uint64_t seed = 0;
    std::string output;
    std::string format;

    // shared test parameters
    std::string model = "gaussian";
    std::string data;
    std::string reference;
    double p = 1;
    int d = 0;
    double sigma = 1;
    double eps0 = 0;
    double eps1 = std::numeric_limits<double>::quiet_NaN();
    double alpha = 0.05;
    double beta = 0.1;
    std::string statistic;
    std::string calibration;
    int mc_reps = 2000;
    std::string direction = "tolerant";
    std::int64_t n = 0;
    int eval_reps = 0;

    // lowerbound
    int L = 0;
    double eps = -1;
    int grid = 0;
    bool dual = false;
    bool certificate = false;
    std::string construction = "moment";
    double delta = 0;
    long long cert_d = 4096;

    // verify
    std::string certificate_path;

    // sweeps
    Vec eps0_grid;
    int n_reps = 2000;
    Vec c_values{4, 8, 16};
    double C = 4;

    int sub_d = 4096;

    // tolerance factor
    std::string tf_model = "multinomial";
    double bracket_hi = 1;
    double rel_tol = 1e-4;

    // reduce
    std::string reduce_model;
    std::string input;
    bool auto_d = false;
    double s = 1;
    double L_radius = 1;
    double q = 2;
    double d_rule_constant = 1;

    // physics demo
    double r = 0;
};

struct Result {
    json body;
    std::function<void(std::ostream&)> csv;  // set for sweeps
    bool sweep = false;
    int code = kOk;
};

inline void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_array()) {
        std::string s;
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) s += ';';
            s += j[i].is_number_float() ? fmt17(j[i].get<double>()) : (j[i].is_string() ? j[i].get<std::string>() : j[i].dump());
        }
        out.emplace_back(prefix, s);
    } else if (j.is_number_float()) {
        out.emplace_back(prefix, fmt17(j.get<double>()));
    } else if (j.is_string()) {
        out.emplace_back(prefix, j.get<std::string>());
    } else {
        out.emplace_back(prefix, j.dump());
    }
}

// Header line of dotted keys, then one line of values.
inline void write_flat_csv(std::ostream& os, const json& j) {
    std::vector<std::pair<std::string, std::string>> kv;
    flatten(j, "", kv);
    for (std::size_t i = 0; i < kv.size(); ++i) os << (i ? "," : "") << kv[i].first;
    os << '\n';
    for (std::size_t i = 0; i < kv.size(); ++i) os << (i ? "," : "") << kv[i].second;
    os << '\n';
}

inline TestSpec gaussian_test_spec(const Options& o) {
    TestSpec s;
    s.hypothesis.p = o.p;
    s.hypothesis.eps0 = o.eps0;
    s.hypothesis.eps1 = std::isnan(o.eps1) ? o.eps0 : o.eps1;
    s.hypothesis.direction = direction_from_string(o.direction);
    s.statistic_kind = o.statistic.empty() ? default_kind_for(o.p) : statistic_kind_from_string(o.statistic);
    s.alpha = o.alpha;
    s.beta = o.beta;
    s.calibration = calibration_from_string(o.calibration.empty() ? "cantelli_envelope" : o.calibration);
    s.mc_reps = o.mc_reps;
    s.validate();
    return s;
}

inline Vec load_reference(const Options& o, std::size_t d) {
    if (o.reference.empty()) {
        require(d >= 1, "a reference distribution or a dimension is required");
        return Vec(d, 1.0 / static_cast<double>(d));
    }
    Vec G = real_array(read_json_file(o.reference), "G");
    require(d == 0 || G.size() == d, "reference length does not match the data");
    return G;
}

inline MultinomialTest multinomial_test(const Options& o, Vec G, const RandomStream& rng) {
    require(o.direction == "tolerant", "count models support the tolerant direction only");
    auto cal = multinomial_calibration_from_string(o.calibration.empty() ? "mcdiarmid_envelope" : o.calibration);
    return MultinomialTest(std::move(G), o.p, o.eps0, o.alpha, cal, o.mc_reps, rng);
}

inline Result cmd_test(const Options& o, const RandomStream& rng) {
    const json data = read_json_file(o.data);
    Result res;
    if (o.model == "gaussian") {
        Vec x = real_array(data, "x");
        require(o.d == 0 || static_cast<int>(x.size()) == o.d, "data length does not match --d");
        auto spec = gaussian_test_spec(o);
        auto dec = run_test(spec, x, o.sigma, rng);
        res.body = {{"model", o.model}, {"d", x.size()}, {"sigma", o.sigma}, {"spec", to_json(spec)}, {"decision", to_json(dec)}};
        return res;
    }
    Counts c = counts_array(data);
    require(o.d == 0 || static_cast<int>(c.size()) == o.d, "data length does not match --d");
    auto test = multinomial_test(o, load_reference(o, c.size()), rng);
    TestDecision dec = o.model == "poisson" ? PoissonTest{test}.decide(c) : test.decide(c);
    res.body = {{"model", o.model}, {"d", c.size()}, {"p", o.p}, {"eps0", o.eps0}, {"alpha", o.alpha},
                {"calibration", to_string(test.calibration)}, {"decision", to_json(dec)}};
    return res;
}

inline Result cmd_calibrate(const Options& o, const RandomStream& rng) {
    Result res;
    if (o.model == "multinomial") {
        require(o.n >= 1, "--n must be >= 1 for the multinomial model");
        auto test = multinomial_test(o, load_reference(o, static_cast<std::size_t>(std::max(o.d, 0))), rng);
        res.body = {{"model", o.model}, {"d", test.d()}, {"n", o.n}, {"p", o.p}, {"eps0", o.eps0},
                    {"alpha", o.alpha}, {"calibration", to_string(test.calibration)}, {"threshold", test.threshold(o.n)}};
        return res;
    }
    require(o.d >= 1, "--d must be >= 1");
    auto spec = gaussian_test_spec(o);
    const bool tol = spec.hypothesis.direction == Direction::tolerant;
    const double t = tol ? tolerant_threshold(spec, o.d, o.sigma, rng) : equivalence_threshold(spec, o.d, o.sigma, rng);
    res.body = {{"model", "gaussian"}, {"d", o.d}, {"sigma", o.sigma}, {"spec", to_json(spec)}, {"threshold", t},
                {"envelope", to_json(envelope(spec.hypothesis.p, o.sigma, o.d, tol ? spec.hypothesis.eps0 : spec.hypothesis.eps1))}};
    if (o.eval_reps > 0) {
        require(tol, "--eval-reps needs the tolerant direction");
        auto decider = make_decider(spec, o.d, o.sigma, rng);
        auto nulls = as_generators(resolve_null_candidates(spec, o.d), "null");
        auto alts = as_generators(extremal_alternatives(spec.hypothesis.p, spec.hypothesis.eps1, o.d), "alt");
        auto rows = estimate_errors(decider, nulls, alts, o.sigma, o.eval_reps, rng.child(7), spec.hypothesis.eps0,
                                    spec.hypothesis.eps1, spec.alpha);
        res.body["rows"] = json::array();
        for (const auto& r : rows) res.body["rows"].push_back(to_json(r));
        res.csv = [rows](std::ostream& os) { write_power_csv(os, rows); };
    }
    return res;
}

inline Result cmd_lowerbound(const Options& o) {
    require(o.L >= 1, "--L must be >= 1");
    Result res;
    const bool constrained = o.eps >= 0;
    auto solve = [&] { return constrained ? solve_Mp_constrained(o.p, o.eps, o.L, o.grid) : solve_Mp(o.p, o.L, o.grid); };
    if (o.certificate) {
        require(o.cert_d >= 1, "--d must be >= 1");
        LowerBoundCertificate cert;
        if (o.construction == "two-point") {
            cert = assemble_certificate(free_tolerance_pair(o.cert_d, o.sigma, o.alpha, o.beta), o.cert_d, o.sigma,
                                        o.alpha, o.beta, o.p);
        } else {
            const double Ca = 1 - (o.alpha + o.beta);
            require(Ca > 0, "alpha + beta must be < 1");
            const double delta = o.delta > 0 ? o.delta : feasible_delta(o.L, o.cert_d, o.sigma, 0.99 * (Ca / 2) * (Ca / 2));
            cert = assemble_certificate(solve().pair, o.cert_d, o.sigma, o.alpha, o.beta, o.p, delta);
        }
        res.body = to_json(cert);
        return res;
    }
    auto r = solve();
    res.body = {{"p", o.p}, {"L", o.L}, {"constrained", constrained}, {"value", r.value},
                {"pair", to_json(r.pair)}, {"lp_rounds", r.lp_rounds}, {"max_violation", r.max_violation}};
    if (constrained) res.body["eps"] = o.eps;
    if (o.dual) {
        require(!constrained, "--dual applies to the unconstrained problem");
        auto a = best_poly_approx(o.p, o.L);
        res.body["best_poly_approx"] = to_json(a);
        res.body["duality_gap"] = std::abs(r.value - 2 * a.error);
    }
    return res;
}

inline Result cmd_verify(const Options& o) {
    Result res;
    std::string why;
    try {
        why = verify_certificate_json(read_json_file(o.certificate_path));
    } catch (const ValidationError& e) {
        why = e.what();
    }
    res.body = {{"valid", why.empty()}, {"reason", why}};
    res.code = why.empty() ? kOk : kCertificate;
    return res;
}

inline Result cmd_regime_map(const Options& o, const RandomStream& rng, std::ostream& err) {
    require(o.d >= 1, "--d must be >= 1");
    require(!o.eps0_grid.empty(), "--eps0-grid must be non-empty");
    TestSpec fam;
    fam.hypothesis = {o.p, 0, 0, Direction::tolerant};
    fam.statistic_kind = o.statistic.empty() ? default_kind_for(o.p) : statistic_kind_from_string(o.statistic);
    fam.alpha = o.alpha;
    fam.beta = o.beta;
    fam.calibration = calibration_from_string(o.calibration.empty() ? "cantelli_envelope" : o.calibration);
    fam.mc_reps = o.mc_reps;
    fam.validate();
    auto pts = regime_map(fam, o.d, o.sigma, o.beta, o.eps0_grid, o.n_reps, rng);
    Result res;
    res.sweep = true;
    res.body = {{"p", o.p}, {"d", o.d}, {"sigma", o.sigma}, {"alpha", o.alpha}, {"beta", o.beta},
                {"n_reps", o.n_reps}, {"points", json::array()}};
    for (const auto& p : pts) {
        res.body["points"].push_back(to_json(p));
        if (!p.monotone) err << "warning: non-monotone power trace at eps0 = " << fmt17(p.eps0) << "\n";
    }
    res.csv = [pts](std::ostream& os) { write_regime_csv(os, pts); };
    return res;
}

inline Result cmd_suboptimality(const Options& o, const RandomStream& rng) {
    auto rep = chi2_suboptimality_demo(o.sub_d, o.sigma, o.alpha, o.beta, o.n_reps, rng, o.c_values, o.C, o.mc_reps);
    Result res;
    res.sweep = true;
    res.body = to_json(rep);
    res.csv = [rep](std::ostream& os) { write_suboptimality_csv(os, rep); };
    return res;
}

inline Result cmd_tolerance_factor(const Options& o, const RandomStream& rng) {
    const json data = read_json_file(o.data);
    Result res;
    ToleranceFactor tf;
    if (o.tf_model == "gaussian") {
        Vec x = real_array(data, "x");
        TestSpec spec = gaussian_test_spec(o);
        require(spec.hypothesis.direction == Direction::tolerant, "tolerance factor needs the tolerant direction");
        tf = tolerance_factor(
            [&](double e) {
                TestSpec s = spec;
                s.hypothesis.eps0 = e;
                s.hypothesis.eps1 = std::max(s.hypothesis.eps1, e);
                return run_test(s, x, o.sigma, rng).reject;
            },
            o.bracket_hi, o.rel_tol);
    } else {
        Counts c = counts_array(data);
        auto test = multinomial_test(o, load_reference(o, c.size()), rng);
        tf = tolerance_factor(test, c, o.bracket_hi, o.rel_tol);
    }
    res.body = {{"model", o.tf_model}, {"alpha", o.alpha}, {"bracket_hi", o.bracket_hi}, {"tolerance_factor", to_json(tf)}};
    return res;
}

inline Result cmd_reduce(const Options& o, const RandomStream& rng) {
    require(o.auto_d || o.d >= 1, "give --d or --auto-d");
    ReductionSpec spec{o.s, o.L_radius, o.p, o.q, o.d_rule_constant};
    HypothesisPair h{o.p, o.eps0, std::isnan(o.eps1) ? o.eps0 : o.eps1, Direction::tolerant};
    const int d = o.auto_d ? 0 : o.d;
    const json in = read_json_file(o.input);
    TransportedDecision t;
    if (o.reduce_model == "white_noise") {
        auto cal = calibration_from_string(o.calibration.empty() ? "cantelli_envelope" : o.calibration);
        t = transport_white_noise_test(white_noise_from_json(in), spec, h, o.alpha, d, cal, rng);
    } else {
        t = transport_density_test(density_sample_from_json(in), spec, h, o.alpha, d);
    }
    Result res;
    res.body = to_json(t);
    res.body["model"] = o.reduce_model;
    return res;
}

inline Result cmd_physics(const Options& o, const RandomStream& rng) {
    Counts c;
    Vec G;
    Result res;
    if (!o.data.empty()) {
        c = counts_array(read_json_file(o.data));
        G = load_reference(o, c.size());
    } else {
        require(o.n >= 1, "give --data or --n to simulate counts from the reference");
        G = load_reference(o, static_cast<std::size_t>(std::max(o.d, 0)));
        auto eng = rng.engine();
        c = sample_multinomial_counts(o.n, G, eng);
        res.body["counts"] = c;
    }
    auto rep = physics_demo(c, G, o.r, o.alpha);
    json j = to_json(rep);
    j.update(res.body);
    res.body = j;
    return res;
}

inline void add_test_params(CLI::App* sc, Options& o, bool with_direction = true) {
    sc->add_option("--p", o.p, "Norm index p >= 1")->capture_default_str();
    sc->add_option("--sigma", o.sigma, "Noise level sigma > 0")->capture_default_str();
    sc->add_option("--eps0", o.eps0, "Null radius")->capture_default_str();
    sc->add_option("--eps1", o.eps1, "Alternative radius (defaults to eps0)");
    sc->add_option("--alpha", o.alpha, "Type-I level")->capture_default_str();
    sc->add_option("--beta", o.beta, "Type-II target")->capture_default_str();
    sc->add_option("--statistic", o.statistic, "plugin_lp | debiased_lp | chi2 (default depends on p)")
        ->check(CLI::IsMember({"plugin_lp", "debiased_lp", "chi2"}));
    sc->add_option("--calibration", o.calibration,
                   "cantelli_envelope | chebyshev_envelope | mc_worst_case | estimation_based; "
                   "count models: mcdiarmid_envelope | mc_simple_null");
    sc->add_option("--mc-reps", o.mc_reps, "Monte Carlo calibration draws")->capture_default_str();
    if (with_direction)
        sc->add_option("--direction", o.direction, "tolerant | equivalence")
            ->capture_default_str()
            ->check(CLI::IsMember({"tolerant", "equivalence"}));
}

inline std::unique_ptr<CLI::App> build_app(Options& o) {
    auto app = std::make_unique<CLI::App>("Tolerant goodness-of-fit tests, moment-matching lower bounds and experiments", "ttl");
    app->config_formatter(std::make_shared<JsonConfig>());
    app->set_config("--config", "", "JSON config file; explicit flags take precedence");
    app->allow_config_extras(CLI::config_extras_mode::error);
    app->add_option("--seed", o.seed, "Master seed (random and printed to stderr when omitted)");
    app->add_option("-o,--output", o.output, "Write results to this file instead of stdout");
    app->add_option("--format", o.format, "json | csv (default: csv for sweeps, json otherwise)")
        ->check(CLI::IsMember({"json", "csv"}));
    app->require_subcommand(1);
    app->fallthrough();
    app->footer("Environment: TTL_THREADS caps the number of worker threads.");

    auto* test = app->add_subcommand("test", "Run a tolerant test on observed data");
    test->add_option("--model", o.model, "gaussian | multinomial | poisson")
        ->capture_default_str()
        ->check(CLI::IsMember({"gaussian", "multinomial", "poisson"}));
    test->add_option("--data", o.data, "JSON data: array, {\"x\": [...]} or {\"counts\": [...]}")->required()->check(CLI::ExistingFile);
    test->add_option("--d", o.d, "Expected dimension (checked against the data)");
    test->add_option("--reference", o.reference, "JSON reference probabilities for count models (default uniform)")
        ->check(CLI::ExistingFile);
    add_test_params(test, o);

    auto* cal = app->add_subcommand("calibrate", "Compute a rejection threshold, optionally with Monte Carlo error rates");
    cal->add_option("--model", o.model, "gaussian | multinomial")->capture_default_str()->check(CLI::IsMember({"gaussian", "multinomial"}));
    cal->add_option("--d", o.d, "Dimension");
    cal->add_option("--n", o.n, "Sample size (multinomial)");
    cal->add_option("--reference", o.reference, "JSON reference probabilities (multinomial; default uniform)")->check(CLI::ExistingFile);
    cal->add_option("--eval-reps", o.eval_reps, "Replications for empirical type-I/power rows (0 = none)")->capture_default_str();
    add_test_params(cal, o);

    auto* lb = app->add_subcommand("lowerbound", "Solve the moment-matching problem or assemble a lower-bound certificate");
    lb->add_option("--p", o.p, "Norm index p >= 1")->required();
    lb->add_option("--L", o.L, "Number of matched moments")->required();
    lb->add_option("--eps", o.eps, "Solve the constrained problem with E_pi0|v|^p <= eps^p");
    lb->add_option("--grid", o.grid, "Initial grid size (0 = automatic)")->capture_default_str();
    lb->add_flag("--dual", o.dual, "Also compute the best polynomial approximation error");
    lb->add_flag("--certificate", o.certificate, "Emit a certificate instead of the raw solution");
    lb->add_option("--construction", o.construction, "two-point | moment")
        ->capture_default_str()
        ->check(CLI::IsMember({"two-point", "moment"}));
    lb->add_option("--d", o.cert_d, "Dimension for the certificate")->capture_default_str();
    lb->add_option("--sigma", o.sigma, "Noise level")->capture_default_str();
    lb->add_option("--alpha", o.alpha, "Type-I level")->capture_default_str();
    lb->add_option("--beta", o.beta, "Type-II level")->capture_default_str();
    lb->add_option("--delta", o.delta, "Support radius (0 = largest feasible)")->capture_default_str();

    auto* ver = app->add_subcommand("verify", "Recheck a certificate file; exit 2 when it fails");
    ver->add_option("certificate", o.certificate_path, "Certificate JSON file")->required();

    auto* rm = app->add_subcommand("regime-map", "Empirical critical separation over a grid of null radii");
    rm->add_option("--p", o.p, "Norm index p >= 1")->capture_default_str();
    rm->add_option("--d", o.d, "Dimension")->required();
    rm->add_option("--sigma", o.sigma, "Noise level")->capture_default_str();
    rm->add_option("--alpha", o.alpha, "Type-I level")->capture_default_str();
    rm->add_option("--beta", o.beta, "Type-II target")->capture_default_str();
    rm->add_option("--eps0-grid", o.eps0_grid, "Increasing null radii")->required()->expected(1, -1);
    rm->add_option("--n-reps", o.n_reps, "Replications per power evaluation")->capture_default_str();
    rm->add_option("--statistic", o.statistic, "plugin_lp | debiased_lp | chi2 (default depends on p)")
        ->check(CLI::IsMember({"plugin_lp", "debiased_lp", "chi2"}));
    rm->add_option("--calibration", o.calibration, "cantelli_envelope | chebyshev_envelope | mc_worst_case | estimation_based");
    rm->add_option("--mc-reps", o.mc_reps, "Monte Carlo calibration draws")->capture_default_str();

    auto* sub = app->add_subcommand("suboptimality", "Chi-squared versus plug-in power under a tolerant l1 null");
    sub->add_option("--d", o.sub_d, "Dimension (>= 256)")->capture_default_str();
    sub->add_option("--sigma", o.sigma, "Noise level")->capture_default_str();
    sub->add_option("--alpha", o.alpha, "Type-I level")->capture_default_str();
    sub->add_option("--beta", o.beta, "Type-II target")->capture_default_str();
    sub->add_option("--n-reps", o.n_reps, "Replications per power estimate")->capture_default_str();
    sub->add_option("--c", o.c_values, "Null radius multipliers c (eps0 = c sigma d^{1/4})")->capture_default_str()->expected(1, -1);
    sub->add_option("--C", o.C, "Alternative multiplier C (eps1 = C sigma d^{3/4})")->capture_default_str();
    sub->add_option("--mc-reps", o.mc_reps, "Monte Carlo calibration draws")->capture_default_str();

    auto* tf = app->add_subcommand("tolerance-factor", "Largest null radius still rejected by the data");
    tf->add_option("--model", o.tf_model, "multinomial | gaussian")->capture_default_str()->check(CLI::IsMember({"multinomial", "gaussian"}));
    tf->add_option("--data", o.data, "JSON data file")->required()->check(CLI::ExistingFile);
    tf->add_option("--reference", o.reference, "JSON reference probabilities (default uniform)")->check(CLI::ExistingFile);
    tf->add_option("--bracket-hi", o.bracket_hi, "Upper end of the search bracket")->capture_default_str();
    tf->add_option("--rel-tol", o.rel_tol, "Relative bisection tolerance")->capture_default_str();
    add_test_params(tf, o, false);

    auto* red = app->add_subcommand("reduce", "Transport a white-noise or density test to its discrete model");
    red->add_option("--model", o.reduce_model, "white_noise | density")->required()->check(CLI::IsMember({"white_noise", "density"}));
    red->add_option("--input", o.input, "JSON input: {increments, sigma} or {observations, reference}")->required()->check(CLI::ExistingFile);
    red->add_option("--d", o.d, "Number of bins");
    red->add_flag("--auto-d", o.auto_d, "Choose the number of bins from eps1 and s");
    red->add_option("--s", o.s, "Smoothness s > 0")->capture_default_str();
    red->add_option("--L-radius", o.L_radius, "Besov ball radius")->capture_default_str();
    red->add_option("--q", o.q, "Besov index q (recorded only)")->capture_default_str();
    red->add_option("--d-rule-constant", o.d_rule_constant, "Constant in d = c eps1^{-1/s}")->capture_default_str();
    red->add_option("--p", o.p, "Norm index p >= 1")->capture_default_str();
    red->add_option("--eps0", o.eps0, "Null radius")->capture_default_str();
    red->add_option("--eps1", o.eps1, "Alternative radius (defaults to eps0)");
    red->add_option("--alpha", o.alpha, "Type-I level")->capture_default_str();
    red->add_option("--calibration", o.calibration, "Gaussian-sequence calibration (white noise)");

    auto* ph = app->add_subcommand("physics-demo", "TV test against an uncertain reference with tolerance factor");
    ph->add_option("--data", o.data, "JSON counts (omit to simulate --n draws from the reference)")->check(CLI::ExistingFile);
    ph->add_option("--reference", o.reference, "JSON reference probabilities (default uniform)")->check(CLI::ExistingFile);
    ph->add_option("--d", o.d, "Dimension for a uniform reference");
    ph->add_option("--n", o.n, "Sample size when simulating");
    ph->add_option("--r", o.r, "Reference uncertainty radius in TV")->capture_default_str();
    ph->add_option("--alpha", o.alpha, "Type-I level")->capture_default_str();
    return app;
}

inline std::uint64_t fresh_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// Parses argv, runs the subcommand and writes results; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    auto app = build_app(o);
    try {
        app->parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app->exit(e, out, err);
        app->exit(e, out, err);
        return kValidation;
    }
    CLI::App* sc = app->get_subcommands().front();
    const std::string name = sc->get_name();
    const bool random = name != "verify" && name != "lowerbound";
    if (app->get_option("--seed")->count() == 0) {
        o.seed = fresh_seed();
        if (random) err << "seed: " << o.seed << "\n";
    }
    const RandomStream rng{o.seed, 0};
    Result res;
    try {
        if (name == "test") res = cmd_test(o, rng);
        else if (name == "calibrate") res = cmd_calibrate(o, rng);
        else if (name == "lowerbound") res = cmd_lowerbound(o);
        else if (name == "verify") res = cmd_verify(o);
        else if (name == "regime-map") res = cmd_regime_map(o, rng, err);
        else if (name == "suboptimality") res = cmd_suboptimality(o, rng);
        else if (name == "tolerance-factor") res = cmd_tolerance_factor(o, rng);
        else if (name == "reduce") res = cmd_reduce(o, rng);
        else res = cmd_physics(o, rng);
    } catch (const CertificateError& e) {
        err << "error: " << e.what() << "\n";
        return kCertificate;
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << "\n";
        return kConvergence;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }
    if (!res.sweep && random && res.body.is_object() && !res.body.contains("seed"))
        res.body["seed"] = o.seed;

    std::ofstream file;
    if (!o.output.empty()) {
        file.open(o.output);
        if (!file) {
            err << "error: cannot open " << o.output << "\n";
            return kValidation;
        }
    }
    std::ostream& os = o.output.empty() ? out : file;
    const std::string fmt = o.format.empty() ? (res.sweep ? "csv" : "json") : o.format;
    if (fmt == "csv") {
        if (res.csv)
            res.csv(os);
        else
            write_flat_csv(os, res.body);
    } else {
        os << res.body.dump(2) << "\n";
    }
    if (res.code == kCertificate) err << "error: certificate rejected: " << res.body.value("reason", "") << "\n";
    return res.code;
}

}  // namespace tolerant::cli
