#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pnkit/model.hpp"
#include "pnkit/psd_trace.hpp"
#include "pnkit/segmentation.hpp"

namespace pnkit {

/// The cut-off and level estimators divide their M-term sums by 2(M-1) and
/// (M-1) respectively in the printed form ("paper"); "mean" substitutes 2M
/// and M. The printed normalization carries a bias factor of f_c^(1/(M-1))
/// (resp. |L|/(M-1) dB) that only vanishes for large sections, so tight
/// round-trip work wants "mean".
enum class Normalization { paper, mean };

struct CutoffEstimate {
    double f_c_hz;
    double section_slope_db_per_decade; ///< OLS slope over the section points
    std::size_t n_points;
};

struct LevelEstimate {
    double level_dbchz;
    std::size_t n_points;
};

/// 3 dB cut-off of the low-pass oscillator model from the points of a steep
/// (-30 dB/decade) section:
///   f_c = 10^( 1/(2(M-1)) * sum log10( 10^(L_m/10) * pi * df_m^3 ) )
/// Interval selection is half-open [f_lo, f_hi) except that an interval
/// reaching the end of the trace includes the final point.
/// Throws std::invalid_argument for fewer than 2 points.
CutoffEstimate estimate_cutoff(const PsdTrace& trace, double f_lo_hz, double f_hi_hz,
                               Normalization normalization = Normalization::paper);

/// Sample-mean level of a flat section: (1/(M-1)) * sum L_m.
LevelEstimate estimate_level(const PsdTrace& trace, double f_lo_hz, double f_hi_hz,
                             Normalization normalization = Normalization::paper);

/// Offset at which the low-pass model with cut-off f_c crosses the given
/// level: df = f_c * cbrt( 1/(10^(L/10) pi f_c) - 1 ). Algebraic inverse of
/// eval_lp_model. Throws std::domain_error when the level lies at or above
/// the model's DC value (no intersection).
double intersection_freq(double f_c_hz, double level_dbchz);

struct FitConfig {
    ClassifyConfig classify;
    Normalization normalization = Normalization::paper;
    std::optional<double> analyzer_floor_dbchz;
};

struct IntermediateEstimate {
    double value;
    std::string section; ///< section the estimate was computed from
    double f_lo_hz;
    double f_hi_hz;
    std::size_t n_points;
};

/// Parameter set under construction; fields stay empty when the section
/// they derive from is missing.
struct PartialParams {
    double f0_hz = 0.0;
    std::optional<double> f_c_ref_hz, c_ref_s, f_c_vco_hz, c_vco_s;
    std::optional<double> df_pll_hz, b_pll_hz, df_nf_hz;
    std::optional<double> l_pll_dbchz, l_nf_dbchz;

    /// All ten fields present -> a validated PllNoiseParams.
    std::optional<PllNoiseParams> complete() const;
};

struct FitReport {
    PartialParams params;
    std::map<std::string, IntermediateEstimate> intermediates;
    std::optional<double> residual_rms_db; ///< only for complete fits
    std::vector<std::string> warnings;
    std::vector<Segment> segments;
    SectionMap sections;
};

/// The full estimation pipeline: split into half-decade segments, fit
/// per-segment slopes, classify sections, run the cut-off estimator on the
/// reference and VCO sections and the level estimator on the in-band and
/// noise-floor sections, derive the corner frequencies from the
/// intersections, and assemble the parameter set. Missing sections degrade
/// the result to a partial fit with warnings instead of failing.
FitReport fit_params(const PsdTrace& trace, const FitConfig& config = {});

struct ParamAggregate {
    struct Stat {
        double mean;
        std::optional<double> std_dev; ///< absent for a single device
    };
    std::map<std::string, Stat> per_parameter; ///< keyed by JSON field name
    std::size_t n_devices;
};

/// Per-field arithmetic mean and sample standard deviation (n-1 denominator)
/// across device fits; dB-valued fields are averaged in dB. All fits must
/// share f0 within 1e-6 relative.
ParamAggregate aggregate_params(const std::vector<PllNoiseParams>& fits);

nlohmann::json to_json(const FitReport& report);
nlohmann::json to_json(const ParamAggregate& aggregate);

/// Table-shaped CSV: parameter,mean,std,unit
std::string aggregate_to_csv(const ParamAggregate& aggregate);

/// Reads either a flat params object or a fit-report object (its "params"
/// member). Throws if required fields are missing or inconsistent.
PllNoiseParams params_from_json_file(const std::filesystem::path& path);

} // namespace pnkit
