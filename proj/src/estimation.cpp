#include "pnkit/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pnkit {

namespace {

constexpr double kPi = std::numbers::pi;

// Half-open [lo, hi) with the same boundary snap as the segment tiling, so
// interval selection reproduces segment point sets exactly; an interval
// reaching the trace end keeps the final point.
std::pair<std::size_t, std::size_t> points_in_interval(const PsdTrace& trace,
                                                       double f_lo, double f_hi) {
    const auto& f = trace.offsets_hz;
    const auto begin = static_cast<std::size_t>(
        std::lower_bound(f.begin(), f.end(), f_lo * (1.0 - kBoundarySnapRel)) - f.begin());
    const std::size_t end =
        f_hi >= f.back() * (1.0 - kBoundarySnapRel)
            ? f.size()
            : static_cast<std::size_t>(
                  std::lower_bound(f.begin(), f.end(), f_hi * (1.0 - kBoundarySnapRel)) -
                  f.begin());
    return {begin, end};
}

SlopeFit ols_over_range(const PsdTrace& trace, std::size_t begin, std::size_t end) {
    double sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
    const auto n = static_cast<double>(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const double x = std::log10(trace.offsets_hz[i]);
        const double y = trace.levels_dbchz[i];
        sx += x;
        sxx += x * x;
        sy += y;
        sxy += x * y;
    }
    const double det = n * sxx - sx * sx;
    return SlopeFit{(n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det};
}

} // namespace

CutoffEstimate estimate_cutoff(const PsdTrace& trace, double f_lo_hz, double f_hi_hz,
                               Normalization normalization) {
    validate_trace(trace);
    const auto [begin, end] = points_in_interval(trace, f_lo_hz, f_hi_hz);
    const std::size_t m = end - begin;
    if (m < 2)
        throw std::invalid_argument("estimate_cutoff: fewer than 2 points in section");

    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        const double df = trace.offsets_hz[i];
        // log10(10^(L/10) * pi * df^3) without the round trip through pow
        sum += trace.levels_dbchz[i] / 10.0 + std::log10(kPi * df * df * df);
    }
    const double denom = normalization == Normalization::paper
                             ? 2.0 * static_cast<double>(m - 1)
                             : 2.0 * static_cast<double>(m);
    const SlopeFit line = ols_over_range(trace, begin, end);
    return CutoffEstimate{std::pow(10.0, sum / denom), line.slope_db_per_decade, m};
}

LevelEstimate estimate_level(const PsdTrace& trace, double f_lo_hz, double f_hi_hz,
                             Normalization normalization) {
    validate_trace(trace);
    const auto [begin, end] = points_in_interval(trace, f_lo_hz, f_hi_hz);
    const std::size_t m = end - begin;
    if (m < 2)
        throw std::invalid_argument("estimate_level: fewer than 2 points in section");
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i)
        sum += trace.levels_dbchz[i];
    const double denom = normalization == Normalization::paper
                             ? static_cast<double>(m - 1)
                             : static_cast<double>(m);
    return LevelEstimate{sum / denom, m};
}

double intersection_freq(double f_c_hz, double level_dbchz) {
    if (!std::isfinite(f_c_hz) || f_c_hz <= 0.0)
        throw std::domain_error("intersection_freq: cut-off frequency must be positive");
    const double dc = db_to_linear(level_dbchz) * kPi * f_c_hz;
    if (!(dc < 1.0))
        throw std::domain_error(
            "intersection_freq: level at or above the low-pass model's DC value, "
            "no intersection exists");
    return f_c_hz * std::cbrt(1.0 / dc - 1.0);
}

std::optional<PllNoiseParams> PartialParams::complete() const {
    if (!(f_c_ref_hz && c_ref_s && f_c_vco_hz && c_vco_s && df_pll_hz && b_pll_hz &&
          df_nf_hz && l_pll_dbchz && l_nf_dbchz))
        return std::nullopt;
    PllNoiseParams p{f0_hz,    *f_c_ref_hz, *c_ref_s,  *f_c_vco_hz, *c_vco_s,
                     *df_pll_hz, *b_pll_hz,  *df_nf_hz, *l_pll_dbchz, *l_nf_dbchz};
    p.validate();
    return p;
}

FitReport fit_params(const PsdTrace& trace, const FitConfig& config) {
    validate_trace(trace);
    FitReport report;
    report.params.f0_hz = trace.f0_hz;

    report.segments = split_half_decades(trace);
    fit_all_segments(trace, report.segments);
    report.sections = classify_sections(report.segments, config.classify);
    report.warnings = report.sections.warnings;

    const auto range_of = [&](SectionLabel label) -> const SectionRange* {
        const auto it = report.sections.ranges.find(label);
        return it == report.sections.ranges.end() ? nullptr : &it->second;
    };

    const auto run_cutoff = [&](SectionLabel label, const char* key) -> std::optional<double> {
        const SectionRange* range = range_of(label);
        if (!range)
            return std::nullopt;
        const CutoffEstimate est =
            estimate_cutoff(trace, range->f_lo_hz, range->f_hi_hz, config.normalization);
        if (std::abs(est.section_slope_db_per_decade + 30.0) > 5.0) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "%s slope %.1f dB/decade deviates from -30 by more than 5",
                          to_string(label), est.section_slope_db_per_decade);
            report.warnings.emplace_back(buf);
        }
        report.intermediates[key] = IntermediateEstimate{
            est.f_c_hz, to_string(label), range->f_lo_hz, range->f_hi_hz, est.n_points};
        return est.f_c_hz;
    };
    const auto run_level = [&](SectionLabel label, const char* key) -> std::optional<double> {
        const SectionRange* range = range_of(label);
        if (!range)
            return std::nullopt;
        const LevelEstimate est =
            estimate_level(trace, range->f_lo_hz, range->f_hi_hz, config.normalization);
        report.intermediates[key] = IntermediateEstimate{
            est.level_dbchz, to_string(label), range->f_lo_hz, range->f_hi_hz, est.n_points};
        return est.level_dbchz;
    };

    report.params.f_c_ref_hz = run_cutoff(SectionLabel::reference_dominant, "f_c_ref_hz");
    report.params.f_c_vco_hz = run_cutoff(SectionLabel::vco_dominant, "f_c_vco_hz");
    report.params.l_pll_dbchz = run_level(SectionLabel::in_band_floor, "l_pll_dbchz");
    report.params.l_nf_dbchz = run_level(SectionLabel::noise_floor, "l_nf_dbchz");

    if (report.params.f_c_ref_hz)
        report.params.c_ref_s = constant_from_cutoff(*report.params.f_c_ref_hz, trace.f0_hz);
    if (report.params.f_c_vco_hz)
        report.params.c_vco_s = constant_from_cutoff(*report.params.f_c_vco_hz, trace.f0_hz);

    // corner frequencies from the level/low-pass intersections; B_PLL pairs
    // the VCO cut-off with the in-band level (the only combination that
    // reproduces the loop bandwidth)
    const auto derive_corner = [&report](const char* name, const std::optional<double>& f_c,
                                         const std::optional<double>& level)
        -> std::optional<double> {
        if (!f_c || !level)
            return std::nullopt;
        try {
            return intersection_freq(*f_c, *level);
        } catch (const std::domain_error& e) {
            report.warnings.push_back(std::string(name) + " not derivable: " + e.what());
            return std::nullopt;
        }
    };
    report.params.df_pll_hz =
        derive_corner("df_pll", report.params.f_c_ref_hz, report.params.l_pll_dbchz);
    report.params.b_pll_hz =
        derive_corner("b_pll", report.params.f_c_vco_hz, report.params.l_pll_dbchz);
    report.params.df_nf_hz =
        derive_corner("df_nf", report.params.f_c_vco_hz, report.params.l_nf_dbchz);

    if (const auto complete = report.params.complete()) {
        for (auto& w : complete->ordering_warnings())
            report.warnings.push_back(w);
        // residual over the points of the four named sections only
        double sum_sq = 0.0;
        std::size_t count = 0;
        for (const auto& [label, range] : report.sections.ranges) {
            for (const std::size_t seg_idx : range.segment_indices) {
                for (const std::size_t i : report.segments[seg_idx].point_indices) {
                    const double r = trace.levels_dbchz[i] -
                                     eval_full_model(*complete, trace.offsets_hz[i]);
                    sum_sq += r * r;
                    ++count;
                }
            }
        }
        if (count > 0)
            report.residual_rms_db = std::sqrt(sum_sq / static_cast<double>(count));
    }

    if (config.analyzer_floor_dbchz) {
        const FloorMarginReport floor = check_floor_margin(trace, config.analyzer_floor_dbchz);
        if (!floor.pass) {
            char buf[120];
            std::snprintf(buf, sizeof(buf),
                          "floor margin below 8 dB: minimum %.1f dB above analyzer floor",
                          floor.min_margin_db);
            report.warnings.emplace_back(buf);
        }
    }
    return report;
}

ParamAggregate aggregate_params(const std::vector<PllNoiseParams>& fits) {
    if (fits.empty())
        throw std::invalid_argument("aggregate_params: no fits given");
    for (const auto& p : fits) {
        const double rel = std::abs(p.f0_hz - fits.front().f0_hz) / fits.front().f0_hz;
        if (rel > 1e-6)
            throw std::invalid_argument("aggregate_params: fits have mixed carrier frequencies");
    }

    const std::vector<std::pair<std::string, double PllNoiseParams::*>> fields = {
        {"f0_hz", &PllNoiseParams::f0_hz},
        {"f_c_ref_hz", &PllNoiseParams::f_c_ref_hz},
        {"c_ref_s", &PllNoiseParams::c_ref_s},
        {"f_c_vco_hz", &PllNoiseParams::f_c_vco_hz},
        {"c_vco_s", &PllNoiseParams::c_vco_s},
        {"df_pll_hz", &PllNoiseParams::df_pll_hz},
        {"b_pll_hz", &PllNoiseParams::b_pll_hz},
        {"df_nf_hz", &PllNoiseParams::df_nf_hz},
        {"l_pll_dbchz", &PllNoiseParams::l_pll_dbchz},
        {"l_nf_dbchz", &PllNoiseParams::l_nf_dbchz},
    };

    ParamAggregate agg;
    agg.n_devices = fits.size();
    const auto n = static_cast<double>(fits.size());
    for (const auto& [name, member] : fields) {
        double mean = 0.0;
        for (const auto& p : fits)
            mean += p.*member;
        mean /= n;
        ParamAggregate::Stat stat{mean, std::nullopt};
        if (fits.size() > 1) {
            double ss = 0.0;
            for (const auto& p : fits) {
                const double d = p.*member - mean;
                ss += d * d;
            }
            stat.std_dev = std::sqrt(ss / (n - 1.0));
        }
        agg.per_parameter.emplace(name, stat);
    }
    return agg;
}

nlohmann::json to_json(const FitReport& report) {
    nlohmann::json params = nlohmann::json::object();
    params["f0_hz"] = report.params.f0_hz;
    const auto put = [&params](const char* key, const std::optional<double>& v) {
        if (v)
            params[key] = *v;
    };
    put("f_c_ref_hz", report.params.f_c_ref_hz);
    put("c_ref_s", report.params.c_ref_s);
    put("f_c_vco_hz", report.params.f_c_vco_hz);
    put("c_vco_s", report.params.c_vco_s);
    put("df_pll_hz", report.params.df_pll_hz);
    put("b_pll_hz", report.params.b_pll_hz);
    put("df_nf_hz", report.params.df_nf_hz);
    put("l_pll_dbchz", report.params.l_pll_dbchz);
    put("l_nf_dbchz", report.params.l_nf_dbchz);

    nlohmann::json intermediates = nlohmann::json::object();
    for (const auto& [key, est] : report.intermediates)
        intermediates[key] = {{"value", est.value},
                              {"section", est.section},
                              {"f_lo_hz", est.f_lo_hz},
                              {"f_hi_hz", est.f_hi_hz},
                              {"n_points", est.n_points}};

    nlohmann::json j{{"params", std::move(params)},
                     {"intermediates", std::move(intermediates)},
                     {"warnings", report.warnings},
                     {"complete", report.params.complete().has_value()}};
    if (report.residual_rms_db)
        j["residual_rms_db"] = *report.residual_rms_db;
    return j;
}

namespace {

const char* unit_for(const std::string& field) {
    if (field == "c_ref_s" || field == "c_vco_s")
        return "s";
    if (field == "l_pll_dbchz" || field == "l_nf_dbchz")
        return "dBc/Hz";
    return "Hz";
}

} // namespace

nlohmann::json to_json(const ParamAggregate& aggregate) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, stat] : aggregate.per_parameter) {
        nlohmann::json rec{{"mean", stat.mean}, {"unit", unit_for(name)}};
        if (stat.std_dev)
            rec["std"] = *stat.std_dev;
        params[name] = std::move(rec);
    }
    return nlohmann::json{{"n_devices", aggregate.n_devices},
                          {"parameters", std::move(params)}};
}

std::string aggregate_to_csv(const ParamAggregate& aggregate) {
    // row order follows the usual characterization-table layout
    static constexpr const char* kOrder[] = {
        "f0_hz",    "f_c_ref_hz", "c_ref_s",     "f_c_vco_hz", "c_vco_s",
        "l_pll_dbchz", "df_pll_hz", "b_pll_hz",  "l_nf_dbchz", "df_nf_hz"};
    std::string out = "parameter,mean,std,unit\n";
    for (const char* name : kOrder) {
        const auto it = aggregate.per_parameter.find(name);
        if (it == aggregate.per_parameter.end())
            continue;
        const auto& stat = it->second;
        char buf[128];
        if (stat.std_dev)
            std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6g,%s\n", name, stat.mean,
                          *stat.std_dev, unit_for(name));
        else
            std::snprintf(buf, sizeof(buf), "%s,%.6g,,%s\n", name, stat.mean, unit_for(name));
        out += buf;
    }
    return out;
}

PllNoiseParams params_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    if (j.contains("params"))
        return params_from_json(j.at("params"));
    return params_from_json(j);
}

} // namespace pnkit
