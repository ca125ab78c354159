#include "pnkit/segmentation.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace pnkit {

namespace {

struct Run {
    bool steep;
    std::size_t first; // segment indices, inclusive
    std::size_t last;
};

const char* run_name(bool steep) { return steep ? "steep" : "flat"; }

} // namespace

const char* to_string(SectionLabel label) {
    switch (label) {
    case SectionLabel::reference_dominant: return "ReferenceDominant";
    case SectionLabel::in_band_floor: return "InBandFloor";
    case SectionLabel::vco_dominant: return "VcoDominant";
    case SectionLabel::noise_floor: return "NoiseFloor";
    case SectionLabel::transition: return "Transition";
    case SectionLabel::unfit: return "Unfit";
    }
    return "?";
}

std::vector<Segment> split_half_decades(const PsdTrace& trace) {
    validate_trace(trace);
    const double f_min = trace.offsets_hz.front();
    const double f_max = trace.offsets_hz.back();
    const double half_decades = 2.0 * std::log10(f_max / f_min);
    const auto n_seg = static_cast<std::size_t>(
        std::max(1.0, std::ceil(half_decades - 1e-9)));

    std::vector<Segment> segments(n_seg);
    for (std::size_t j = 0; j < n_seg; ++j) {
        segments[j].f_lo_hz = f_min * std::pow(10.0, 0.5 * static_cast<double>(j));
        segments[j].f_hi_hz = f_min * std::pow(10.0, 0.5 * static_cast<double>(j + 1));
    }
    // the last segment ends at the data, which may be short of a half decade
    if (segments.back().f_hi_hz > f_max) {
        segments.back().f_hi_hz = f_max;
        segments.back().truncated =
            segments.back().f_hi_hz / segments.back().f_lo_hz <
            std::pow(10.0, 0.5) * (1.0 - 1e-9);
    }

    std::size_t j = 0;
    for (std::size_t i = 0; i < trace.offsets_hz.size(); ++i) {
        const double f = trace.offsets_hz[i];
        while (j + 1 < n_seg && f >= segments[j].f_hi_hz * (1.0 - kBoundarySnapRel))
            ++j;
        segments[j].point_indices.push_back(i);
    }
    return segments;
}

SlopeFit fit_segment_slope(const PsdTrace& trace, const Segment& segment) {
    const auto& idx = segment.point_indices;
    const auto n = static_cast<double>(idx.size());
    if (idx.size() < 2)
        throw std::invalid_argument("fit_segment_slope: fewer than 2 points in segment");

    double sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
    for (const std::size_t i : idx) {
        const double x = std::log10(trace.offsets_hz[i]);
        const double y = trace.levels_dbchz[i];
        sx += x;
        sxx += x * x;
        sy += y;
        sxy += x * y;
    }
    const double det = n * sxx - sx * sx;
    if (det <= 0.0 || !std::isfinite(det))
        throw std::invalid_argument("fit_segment_slope: singular system (coincident offsets)");
    return SlopeFit{(n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det};
}

void fit_all_segments(const PsdTrace& trace, std::vector<Segment>& segments) {
    for (auto& seg : segments) {
        if (seg.point_indices.size() < 2)
            continue;
        const SlopeFit fit = fit_segment_slope(trace, seg);
        seg.slope_db_per_decade = fit.slope_db_per_decade;
        seg.intercept_db = fit.intercept_db;
    }
}

SectionMap classify_sections(const std::vector<Segment>& segments,
                             const ClassifyConfig& config) {
    std::size_t n_fitted = 0;
    for (const auto& seg : segments)
        if (seg.slope_db_per_decade)
            ++n_fitted;
    if (n_fitted < 4)
        throw std::invalid_argument("classify_sections: fewer than 4 fitted segments");

    SectionMap map;
    map.labels.resize(segments.size(), SectionLabel::unfit);

    // threshold classification: steep / flat / transition
    enum class Cls { steep, flat, transition, unfit };
    std::vector<Cls> cls(segments.size(), Cls::unfit);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (!segments[i].slope_db_per_decade) {
            cls[i] = Cls::unfit;
            map.labels[i] = SectionLabel::unfit;
            continue;
        }
        const double s = *segments[i].slope_db_per_decade;
        if (s <= config.steep_threshold_db_per_decade) {
            cls[i] = Cls::steep;
        } else if (s >= config.flat_threshold_db_per_decade) {
            cls[i] = Cls::flat;
        } else {
            cls[i] = Cls::transition;
            map.labels[i] = SectionLabel::transition;
        }
    }

    // guard band where steep and flat runs touch directly: one segment on
    // each side of the change is excluded; a threshold transition between
    // runs already serves as the guard
    std::vector<bool> guard(segments.size(), false);
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
        const bool a_named = cls[i] == Cls::steep || cls[i] == Cls::flat;
        const bool b_named = cls[i + 1] == Cls::steep || cls[i + 1] == Cls::flat;
        if (a_named && b_named && cls[i] != cls[i + 1]) {
            guard[i] = true;
            guard[i + 1] = true;
        }
    }

    // contiguous same-class runs (transition/unfit segments break them)
    std::vector<Run> runs;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (cls[i] != Cls::steep && cls[i] != Cls::flat)
            continue;
        const bool steep = cls[i] == Cls::steep;
        if (!runs.empty() && runs.back().steep == steep && runs.back().last == i - 1)
            runs.back().last = i;
        else
            runs.push_back(Run{steep, i, i});
    }

    std::string run_sequence;
    for (const auto& r : runs) {
        if (!run_sequence.empty())
            run_sequence += ',';
        run_sequence += run_name(r.steep);
    }

    // align the run sequence as an ordered subsequence of steep,flat,steep,flat
    static constexpr bool kPatternSteep[4] = {true, false, true, false};
    static constexpr SectionLabel kPatternLabel[4] = {
        SectionLabel::reference_dominant, SectionLabel::in_band_floor,
        SectionLabel::vco_dominant, SectionLabel::noise_floor};

    if (runs.size() < 2)
        throw PatternError("classify_sections: cannot map run sequence [" + run_sequence +
                               "] onto the four-section pattern",
                           run_sequence);

    std::size_t slot = 0;
    std::vector<std::pair<SectionLabel, Run>> placed;
    for (const auto& r : runs) {
        while (slot < 4 && kPatternSteep[slot] != r.steep)
            ++slot;
        if (slot >= 4)
            throw PatternError("classify_sections: cannot map run sequence [" + run_sequence +
                                   "] onto the four-section pattern",
                               run_sequence);
        placed.emplace_back(kPatternLabel[slot], r);
        ++slot;
    }

    for (const auto& [label, run] : placed) {
        SectionRange range;
        for (std::size_t i = run.first; i <= run.last; ++i) {
            if (guard[i]) {
                map.labels[i] = SectionLabel::transition;
                continue;
            }
            map.labels[i] = label;
            range.segment_indices.push_back(i);
        }
        if (range.segment_indices.empty())
            continue; // fully consumed by the guard band
        range.f_lo_hz = segments[range.segment_indices.front()].f_lo_hz;
        range.f_hi_hz = segments[range.segment_indices.back()].f_hi_hz;
        map.ranges.emplace(label, std::move(range));
    }

    for (const SectionLabel label :
         {SectionLabel::reference_dominant, SectionLabel::in_band_floor,
          SectionLabel::vco_dominant, SectionLabel::noise_floor}) {
        if (!map.ranges.count(label))
            map.warnings.push_back(std::string(to_string(label)) + " missing");
    }
    return map;
}

nlohmann::json segments_to_json(const std::vector<Segment>& segments,
                                const SectionMap& sections) {
    nlohmann::json seg_array = nlohmann::json::array();
    for (std::size_t i = 0; i < segments.size(); ++i) {
        nlohmann::json rec{{"f_lo_hz", segments[i].f_lo_hz},
                           {"f_hi_hz", segments[i].f_hi_hz},
                           {"n_points", segments[i].point_indices.size()},
                           {"label", to_string(sections.labels[i])}};
        if (segments[i].slope_db_per_decade) {
            rec["slope_db_per_decade"] = *segments[i].slope_db_per_decade;
            rec["intercept_db"] = *segments[i].intercept_db;
        }
        seg_array.push_back(std::move(rec));
    }
    nlohmann::json secs = nlohmann::json::object();
    for (const auto& [label, range] : sections.ranges)
        secs[to_string(label)] = {{"f_lo_hz", range.f_lo_hz}, {"f_hi_hz", range.f_hi_hz}};
    return nlohmann::json{{"segments", std::move(seg_array)}, {"sections", std::move(secs)}};
}

} // namespace pnkit
