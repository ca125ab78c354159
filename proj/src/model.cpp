#include "pnkit/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pnkit {

namespace {

constexpr double kPi = std::numbers::pi;

void check_positive_finite(double v, const char* what) {
    if (!std::isfinite(v) || v <= 0.0)
        throw std::invalid_argument(std::string("PllNoiseParams: ") + what +
                                    " must be finite and positive");
}

double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

} // namespace

double db_to_linear(double level_db) { return std::pow(10.0, level_db / 10.0); }

double linear_to_db(double value) { return 10.0 * std::log10(value); }

double log10_one_plus_cube(double ratio) {
    // For large ratios 1 + r^3 overflows long before the log does; split at a
    // point where both branches agree to machine precision.
    if (ratio > 1e5) {
        const double inv = 1.0 / ratio;
        return 3.0 * std::log10(ratio) + std::log1p(inv * inv * inv) / std::numbers::ln10;
    }
    return std::log1p(ratio * ratio * ratio) / std::numbers::ln10;
}

PllNoiseParams PllNoiseParams::from_cutoffs(double f0_hz, double f_c_ref_hz,
                                            double f_c_vco_hz, double df_pll_hz,
                                            double b_pll_hz, double df_nf_hz,
                                            double l_pll_dbchz, double l_nf_dbchz) {
    PllNoiseParams p{f0_hz,
                     f_c_ref_hz,
                     constant_from_cutoff(f_c_ref_hz, f0_hz),
                     f_c_vco_hz,
                     constant_from_cutoff(f_c_vco_hz, f0_hz),
                     df_pll_hz,
                     b_pll_hz,
                     df_nf_hz,
                     l_pll_dbchz,
                     l_nf_dbchz};
    p.validate();
    return p;
}

PllNoiseParams PllNoiseParams::from_constants(double f0_hz, double c_ref_s,
                                              double c_vco_s, double df_pll_hz,
                                              double b_pll_hz, double df_nf_hz,
                                              double l_pll_dbchz, double l_nf_dbchz) {
    PllNoiseParams p{f0_hz,
                     cutoff_from_constant(c_ref_s, f0_hz),
                     c_ref_s,
                     cutoff_from_constant(c_vco_s, f0_hz),
                     c_vco_s,
                     df_pll_hz,
                     b_pll_hz,
                     df_nf_hz,
                     l_pll_dbchz,
                     l_nf_dbchz};
    p.validate();
    return p;
}

void PllNoiseParams::validate() const {
    check_positive_finite(f0_hz, "f0_hz");
    if (f0_hz < 1e6)
        throw std::invalid_argument("PllNoiseParams: f0_hz below 1e6 Hz sanity bound");
    check_positive_finite(f_c_ref_hz, "f_c_ref_hz");
    check_positive_finite(c_ref_s, "c_ref_s");
    check_positive_finite(f_c_vco_hz, "f_c_vco_hz");
    check_positive_finite(c_vco_s, "c_vco_s");
    check_positive_finite(df_pll_hz, "df_pll_hz");
    check_positive_finite(b_pll_hz, "b_pll_hz");
    check_positive_finite(df_nf_hz, "df_nf_hz");
    if (!std::isfinite(l_pll_dbchz) || !std::isfinite(l_nf_dbchz))
        throw std::invalid_argument("PllNoiseParams: levels must be finite");
    if (rel_diff(f_c_ref_hz, cutoff_from_constant(c_ref_s, f0_hz)) > 1e-12)
        throw std::invalid_argument(
            "PllNoiseParams: f_c_ref_hz and c_ref_s disagree (f_c = pi*f0^2*c)");
    if (rel_diff(f_c_vco_hz, cutoff_from_constant(c_vco_s, f0_hz)) > 1e-12)
        throw std::invalid_argument(
            "PllNoiseParams: f_c_vco_hz and c_vco_s disagree (f_c = pi*f0^2*c)");
}

std::vector<std::string> PllNoiseParams::ordering_warnings() const {
    std::vector<std::string> w;
    if (!(f_c_ref_hz < df_pll_hz))
        w.push_back("ordering violated: f_c_ref >= df_pll");
    if (!(df_pll_hz < b_pll_hz))
        w.push_back("ordering violated: df_pll >= b_pll");
    if (!(b_pll_hz < df_nf_hz))
        w.push_back("ordering violated: b_pll >= df_nf");
    return w;
}

double eval_full_model(const PllNoiseParams& params, double df_hz) {
    if (!std::isfinite(df_hz) || df_hz <= 0.0)
        throw std::domain_error("eval_full_model: offset frequency must be positive and finite");
    const double num = log10_one_plus_cube(df_hz / params.df_pll_hz) +
                       log10_one_plus_cube(df_hz / params.df_nf_hz);
    const double den = log10_one_plus_cube(df_hz / params.f_c_ref_hz) +
                       log10_one_plus_cube(df_hz / params.b_pll_hz);
    return -10.0 * std::log10(kPi * params.f_c_ref_hz) + 10.0 * (num - den);
}

double eval_lp_model(double f_c_hz, double df_hz) {
    if (!std::isfinite(f_c_hz) || f_c_hz <= 0.0)
        throw std::domain_error("eval_lp_model: cut-off frequency must be positive and finite");
    if (!std::isfinite(df_hz) || df_hz < 0.0)
        throw std::domain_error("eval_lp_model: offset frequency must be non-negative and finite");
    return -10.0 * std::log10(kPi * f_c_hz) - 10.0 * log10_one_plus_cube(df_hz / f_c_hz);
}

double cutoff_from_constant(double c_s, double f0_hz) {
    if (!std::isfinite(c_s) || c_s <= 0.0)
        throw std::domain_error("cutoff_from_constant: oscillator constant must be positive");
    if (!std::isfinite(f0_hz) || f0_hz <= 0.0)
        throw std::domain_error("cutoff_from_constant: carrier frequency must be positive");
    return kPi * f0_hz * f0_hz * c_s;
}

double constant_from_cutoff(double f_c_hz, double f0_hz) {
    if (!std::isfinite(f_c_hz) || f_c_hz <= 0.0)
        throw std::domain_error("constant_from_cutoff: cut-off frequency must be positive");
    if (!std::isfinite(f0_hz) || f0_hz <= 0.0)
        throw std::domain_error("constant_from_cutoff: carrier frequency must be positive");
    return f_c_hz / (kPi * f0_hz * f0_hz);
}

nlohmann::json to_json(const PllNoiseParams& params) {
    params.validate();
    return nlohmann::json{{"f0_hz", params.f0_hz},
                          {"f_c_ref_hz", params.f_c_ref_hz},
                          {"c_ref_s", params.c_ref_s},
                          {"f_c_vco_hz", params.f_c_vco_hz},
                          {"c_vco_s", params.c_vco_s},
                          {"df_pll_hz", params.df_pll_hz},
                          {"b_pll_hz", params.b_pll_hz},
                          {"df_nf_hz", params.df_nf_hz},
                          {"l_pll_dbchz", params.l_pll_dbchz},
                          {"l_nf_dbchz", params.l_nf_dbchz}};
}

PllNoiseParams params_from_json(const nlohmann::json& j) {
    auto get = [&](const char* key) -> double {
        if (!j.contains(key))
            throw std::invalid_argument(std::string("params JSON: missing key ") + key);
        if (!j.at(key).is_number())
            throw std::invalid_argument(std::string("params JSON: key ") + key +
                                        " is not a number (NaN/Inf are not permitted)");
        return j.at(key).get<double>();
    };
    const double f0 = get("f0_hz");

    auto get_pair = [&](const char* fc_key, const char* c_key) -> double {
        const bool has_fc = j.contains(fc_key);
        const bool has_c = j.contains(c_key);
        if (!has_fc && !has_c)
            throw std::invalid_argument(std::string("params JSON: need ") + fc_key + " or " + c_key);
        if (has_fc)
            return get(fc_key); // consistency with c, if also given, checked in validate()
        return cutoff_from_constant(get(c_key), f0);
    };

    const double f_c_ref = get_pair("f_c_ref_hz", "c_ref_s");
    const double f_c_vco = get_pair("f_c_vco_hz", "c_vco_s");

    PllNoiseParams p{f0,
                     f_c_ref,
                     j.contains("c_ref_s") ? get("c_ref_s") : constant_from_cutoff(f_c_ref, f0),
                     f_c_vco,
                     j.contains("c_vco_s") ? get("c_vco_s") : constant_from_cutoff(f_c_vco, f0),
                     get("df_pll_hz"),
                     get("b_pll_hz"),
                     get("df_nf_hz"),
                     get("l_pll_dbchz"),
                     get("l_nf_dbchz")};
    p.validate();
    return p;
}

} // namespace pnkit
