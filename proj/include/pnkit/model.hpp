#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace pnkit {

/// dB <-> linear power conversions, 1 Hz bandwidth implied.
/// Single source of truth for every place that exponentiates a level.
double db_to_linear(double level_db);
double linear_to_db(double value);

/// log10(1 + r^3) for r >= 0, stable for very large and very small r.
double log10_one_plus_cube(double ratio);

/// Fitted parameter set of the PLL output phase-noise PSD model plus the
/// carrier frequency. The (c, f_c) pairs are stored redundantly (both forms
/// are useful in reports); they are tied by f_c = pi * f0^2 * c and the
/// factories derive one from the other.
struct PllNoiseParams {
    double f0_hz;         ///< carrier/oscillator frequency
    double f_c_ref_hz;    ///< reference oscillator 3 dB cut-off
    double c_ref_s;       ///< reference oscillator constant
    double f_c_vco_hz;    ///< free-running VCO 3 dB cut-off
    double c_vco_s;       ///< VCO oscillator constant
    double df_pll_hz;     ///< in-band corner frequency
    double b_pll_hz;      ///< PLL loop bandwidth
    double df_nf_hz;      ///< noise-floor corner frequency
    double l_pll_dbchz;   ///< in-band noise plateau level
    double l_nf_dbchz;    ///< noise-floor level

    static PllNoiseParams from_cutoffs(double f0_hz, double f_c_ref_hz,
                                       double f_c_vco_hz, double df_pll_hz,
                                       double b_pll_hz, double df_nf_hz,
                                       double l_pll_dbchz, double l_nf_dbchz);
    static PllNoiseParams from_constants(double f0_hz, double c_ref_s,
                                         double c_vco_s, double df_pll_hz,
                                         double b_pll_hz, double df_nf_hz,
                                         double l_pll_dbchz, double l_nf_dbchz);

    /// Throws std::invalid_argument on non-finite values, non-positive
    /// frequencies/constants, f0 < 1e6 Hz, or an inconsistent (c, f_c) pair.
    void validate() const;

    /// The four-section spectrum shape needs f_c_ref < df_pll < b_pll < df_nf.
    /// Violations do not make the model unevaluable, so they are reported
    /// rather than rejected.
    std::vector<std::string> ordering_warnings() const;
};

/// SSB phase-noise PSD of the full PLL model at offset df_hz, in dBc/Hz.
///
///   L(df) = -10 log10(pi f_c_ref)
///           + 10 log10[ (1+(df/df_pll)^3)/(1+(df/f_c_ref)^3)
///                     * (1+(df/df_nf)^3)/(1+(df/b_pll)^3) ]
///
/// Throws std::domain_error for df <= 0 or non-finite df.
double eval_full_model(const PllNoiseParams& params, double df_hz);

/// Low-pass oscillator model: -10 log10(pi f_c) - 10 log10[1 + (df/f_c)^3].
/// Valid for df >= 0; throws std::domain_error for f_c <= 0.
double eval_lp_model(double f_c_hz, double df_hz);

/// f_c = pi * f0^2 * c
double cutoff_from_constant(double c_s, double f0_hz);

/// c = f_c / (pi * f0^2); exact inverse of cutoff_from_constant.
double constant_from_cutoff(double f_c_hz, double f0_hz);

/// Flat JSON object with keys f0_hz, f_c_ref_hz, c_ref_s, f_c_vco_hz,
/// c_vco_s, df_pll_hz, b_pll_hz, df_nf_hz, l_pll_dbchz, l_nf_dbchz.
nlohmann::json to_json(const PllNoiseParams& params);

/// Parses the flat object. One member of each (c, f_c) pair may be omitted
/// and is derived from the other; if both are present they must agree to
/// 1e-12 relative. NaN/Inf anywhere is an error.
PllNoiseParams params_from_json(const nlohmann::json& j);

} // namespace pnkit
