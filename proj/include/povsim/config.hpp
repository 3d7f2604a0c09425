#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "povsim/economy.hpp"

namespace povsim {

// Full run configuration: economy constants and sweep ranges (FixedParams),
// plus the scale knobs that distinguish a quick desk sweep from the full one.
// Flat key=value text format; two built-in presets.
struct RunConfig {
    std::string preset = "desk";
    FixedParams fixed;
    int base_samples = 64;
    int rep_count = 5;
    std::optional<std::uint64_t> master_seed;
    int workers = 1;
    std::string out_dir = "out";
    bool unsafe = false;

    RunConfig() { fixed.n_agents = 225; }  // default-constructed == desk preset
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double parse_double(const std::string& v) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("not a number: '" + v + "'");
    }
    if (pos != v.size()) throw std::invalid_argument("trailing characters in number: '" + v + "'");
    return x;
}

inline long long parse_int(const std::string& v) {
    std::size_t pos = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("not an integer: '" + v + "'");
    }
    if (pos != v.size()) throw std::invalid_argument("trailing characters in integer: '" + v + "'");
    return x;
}

inline std::uint64_t parse_u64(const std::string& v) {
    const std::string t = trim(v);
    if (!t.empty() && t[0] == '-') throw std::invalid_argument("negative value: '" + v + "'");
    std::size_t pos = 0;
    unsigned long long x = 0;
    try {
        x = std::stoull(t, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("not an unsigned integer: '" + v + "'");
    }
    if (pos != t.size()) throw std::invalid_argument("trailing characters in integer: '" + v + "'");
    return static_cast<std::uint64_t>(x);
}

inline bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("not a boolean: '" + v + "'");
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// Resets everything the preset owns (economy constants, ranges, scale);
// leaves master_seed, workers, out_dir, and the unsafe flag alone.
inline void apply_preset(RunConfig& c, const std::string& name) {
    if (name == "desk") {
        c.fixed = FixedParams{};
        c.fixed.n_agents = 225;
        c.base_samples = 64;
        c.rep_count = 5;
    } else if (name == "paper") {
        c.fixed = FixedParams{};
        c.base_samples = 1024;
        c.rep_count = 20;
    } else {
        throw std::invalid_argument("unknown preset: '" + name + "' (expected desk or paper)");
    }
    c.preset = name;
}

inline void set_config_key(RunConfig& c, const std::string& key, const std::string& value) {
    auto as_pos_int = [&](const char* what) {
        const long long v = detail::parse_int(value);
        if (v < 1 || v > 1000000000) throw std::invalid_argument(std::string(what) + " out of range");
        return static_cast<int>(v);
    };
    FixedParams& f = c.fixed;
    FreeParamBounds& b = f.bounds;
    if (key == "preset") apply_preset(c, value);
    else if (key == "n_agents") f.n_agents = as_pos_int("n_agents");
    else if (key == "n_steps") f.n_steps = as_pos_int("n_steps");
    else if (key == "update_rate") f.update_rate = detail::parse_double(value);
    else if (key == "wealth_mean") f.wealth_mean = detail::parse_double(value);
    else if (key == "wealth_sd") f.wealth_sd = detail::parse_double(value);
    else if (key == "n_prospect_scenarios") f.n_prospect_scenarios = as_pos_int("n_prospect_scenarios");
    else if (key == "loss_factor_lo") f.loss_factor_lo = detail::parse_double(value);
    else if (key == "loss_factor_hi") f.loss_factor_hi = detail::parse_double(value);
    else if (key == "gain_factor_lo") f.gain_factor_lo = detail::parse_double(value);
    else if (key == "safe_factor") f.safe_factor = detail::parse_double(value);
    else if (key == "gamma_plus_lo") f.gamma_plus_lo = detail::parse_double(value);
    else if (key == "gamma_plus_hi") f.gamma_plus_hi = detail::parse_double(value);
    else if (key == "gamma_minus_lo") f.gamma_minus_lo = detail::parse_double(value);
    else if (key == "gamma_minus_hi") f.gamma_minus_hi = detail::parse_double(value);
    else if (key == "delta_plus_lo") f.delta_plus_lo = detail::parse_double(value);
    else if (key == "delta_plus_hi") f.delta_plus_hi = detail::parse_double(value);
    else if (key == "delta_minus_lo") f.delta_minus_lo = detail::parse_double(value);
    else if (key == "delta_minus_hi") f.delta_minus_hi = detail::parse_double(value);
    else if (key == "ell_lo") b.ell.lo = detail::parse_double(value);
    else if (key == "ell_hi") b.ell.hi = detail::parse_double(value);
    else if (key == "g_upper_lo") b.g_upper.lo = detail::parse_double(value);
    else if (key == "g_upper_hi") b.g_upper.hi = detail::parse_double(value);
    else if (key == "beta_lo") b.beta.lo = detail::parse_double(value);
    else if (key == "beta_hi") b.beta.hi = detail::parse_double(value);
    else if (key == "theta_lo") b.theta.lo = detail::parse_double(value);
    else if (key == "theta_hi") b.theta.hi = detail::parse_double(value);
    else if (key == "alpha_lo") b.alpha.lo = detail::parse_double(value);
    else if (key == "alpha_hi") b.alpha.hi = detail::parse_double(value);
    else if (key == "base_samples") c.base_samples = as_pos_int("base_samples");
    else if (key == "rep_count") c.rep_count = as_pos_int("rep_count");
    else if (key == "master_seed") c.master_seed = detail::parse_u64(value);
    else if (key == "workers") c.workers = as_pos_int("workers");
    else if (key == "out_dir") c.out_dir = value;
    else if (key == "unsafe") c.unsafe = detail::parse_bool(value);
    else throw std::invalid_argument("unknown config key: '" + key + "'");
}

// Applies key=value lines from `text`. '#' starts a comment; blank lines are
// skipped. A preset key anywhere in the file is applied first so later keys
// can override it regardless of their order.
inline void apply_config_text(RunConfig& c, const std::string& text,
                              const std::string& source = "config") {
    struct Entry { int line; std::string key, value; };
    std::vector<Entry> entries;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        const std::string line = detail::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(source + " line " + std::to_string(lineno) +
                                        ": expected key=value");
        entries.push_back({lineno, detail::trim(line.substr(0, eq)),
                           detail::trim(line.substr(eq + 1))});
    }
    auto apply = [&](const Entry& e) {
        try {
            set_config_key(c, e.key, e.value);
        } catch (const std::invalid_argument& ex) {
            throw std::invalid_argument(source + " line " + std::to_string(e.line) + ": " +
                                        ex.what());
        }
    };
    for (const auto& e : entries)
        if (e.key == "preset") apply(e);
    for (const auto& e : entries)
        if (e.key != "preset") apply(e);
}

// The calibrated constants and outer sweep ranges are locked unless the
// config opts out explicitly.
inline void check_calibration_guard(const RunConfig& c) {
    if (c.unsafe) return;
    const FixedParams ref;
    const FreeParamBounds refb;
    auto range_ok = [](const Bounds& have, const Bounds& ref_b) {
        return have.lo >= ref_b.lo && have.hi <= ref_b.hi;
    };
    const FreeParamBounds& b = c.fixed.bounds;
    auto fail = [](const std::string& what) {
        throw std::invalid_argument(what + " outside calibrated bounds (set unsafe=true to override)");
    };
    if (!range_ok(b.ell, refb.ell)) fail("ell range");
    if (!range_ok(b.g_upper, refb.g_upper)) fail("g_upper range");
    if (!range_ok(b.beta, refb.beta)) fail("beta range");
    if (!range_ok(b.theta, refb.theta)) fail("theta range");
    if (!range_ok(b.alpha, refb.alpha)) fail("alpha range");
    const FixedParams& f = c.fixed;
    const bool constants_ok =
        f.n_steps == ref.n_steps && f.update_rate == ref.update_rate &&
        f.wealth_mean == ref.wealth_mean && f.wealth_sd == ref.wealth_sd &&
        f.n_prospect_scenarios == ref.n_prospect_scenarios &&
        f.loss_factor_lo == ref.loss_factor_lo && f.loss_factor_hi == ref.loss_factor_hi &&
        f.gain_factor_lo == ref.gain_factor_lo && f.safe_factor == ref.safe_factor &&
        f.gamma_plus_lo == ref.gamma_plus_lo && f.gamma_plus_hi == ref.gamma_plus_hi &&
        f.gamma_minus_lo == ref.gamma_minus_lo && f.gamma_minus_hi == ref.gamma_minus_hi &&
        f.delta_plus_lo == ref.delta_plus_lo && f.delta_plus_hi == ref.delta_plus_hi &&
        f.delta_minus_lo == ref.delta_minus_lo && f.delta_minus_hi == ref.delta_minus_hi;
    if (!constants_ok) fail("calibrated constant");
}

inline void validate_config(const RunConfig& c) {
    c.fixed.validate();
    if (c.base_samples < 2 || (c.base_samples & (c.base_samples - 1)) != 0)
        throw std::invalid_argument("base_samples must be a power of two >= 2");
    if (c.rep_count < 1) throw std::invalid_argument("rep_count must be >= 1");
    if (c.workers < 1) throw std::invalid_argument("workers must be >= 1");
    check_calibration_guard(c);
}

// Canonical serialization: sorted key=value lines. Execution details
// (master_seed, workers, out_dir) are excluded so that the digest names the
// model configuration, not the machine it ran on.
inline std::string serialize_config(const RunConfig& c) {
    std::vector<std::pair<std::string, std::string>> kv;
    auto d = [&](const char* k, double v) { kv.emplace_back(k, detail::fmt_double(v)); };
    auto i = [&](const char* k, long long v) { kv.emplace_back(k, std::to_string(v)); };
    const FixedParams& f = c.fixed;
    const FreeParamBounds& b = f.bounds;
    kv.emplace_back("preset", c.preset);
    kv.emplace_back("unsafe", c.unsafe ? "true" : "false");
    i("n_agents", f.n_agents);
    i("n_steps", f.n_steps);
    i("n_prospect_scenarios", f.n_prospect_scenarios);
    i("base_samples", c.base_samples);
    i("rep_count", c.rep_count);
    d("update_rate", f.update_rate);
    d("wealth_mean", f.wealth_mean);
    d("wealth_sd", f.wealth_sd);
    d("loss_factor_lo", f.loss_factor_lo);
    d("loss_factor_hi", f.loss_factor_hi);
    d("gain_factor_lo", f.gain_factor_lo);
    d("safe_factor", f.safe_factor);
    d("gamma_plus_lo", f.gamma_plus_lo);
    d("gamma_plus_hi", f.gamma_plus_hi);
    d("gamma_minus_lo", f.gamma_minus_lo);
    d("gamma_minus_hi", f.gamma_minus_hi);
    d("delta_plus_lo", f.delta_plus_lo);
    d("delta_plus_hi", f.delta_plus_hi);
    d("delta_minus_lo", f.delta_minus_lo);
    d("delta_minus_hi", f.delta_minus_hi);
    d("ell_lo", b.ell.lo);
    d("ell_hi", b.ell.hi);
    d("g_upper_lo", b.g_upper.lo);
    d("g_upper_hi", b.g_upper.hi);
    d("beta_lo", b.beta.lo);
    d("beta_hi", b.beta.hi);
    d("theta_lo", b.theta.lo);
    d("theta_hi", b.theta.hi);
    d("alpha_lo", b.alpha.lo);
    d("alpha_hi", b.alpha.hi);
    std::sort(kv.begin(), kv.end());
    std::string out;
    for (const auto& [k, v] : kv) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string config_digest(const RunConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(serialize_config(c))));
    return buf;
}

}  // namespace povsim
