#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pnkit/psd_trace.hpp"

namespace pnkit {

/// One half-decade slice of a trace. Segments with fewer than two points
/// carry no fit and are excluded downstream.
struct Segment {
    double f_lo_hz;
    double f_hi_hz;
    std::vector<std::size_t> point_indices; ///< indices into the parent trace
    std::optional<double> slope_db_per_decade;
    std::optional<double> intercept_db;
    bool truncated = false; ///< last segment shorter than a half decade
};

enum class SectionLabel {
    reference_dominant,
    in_band_floor,
    vco_dominant,
    noise_floor,
    transition,
    unfit,
};

const char* to_string(SectionLabel label);

/// Offsets within this relative distance of a segment boundary count as
/// sitting on it (boundary values are derived through pow/log10 and grids
/// sampled at decade anchors land on either side by a few ulps).
inline constexpr double kBoundarySnapRel = 1e-12;

/// Tiles [min offset, max offset] with boundaries at min_offset * 10^(k/2).
/// Interior boundaries are half-open (a point on a boundary belongs to the
/// upper segment); the last segment includes its upper edge.
std::vector<Segment> split_half_decades(const PsdTrace& trace);

struct SlopeFit {
    double slope_db_per_decade; ///< r[1]
    double intercept_db;        ///< r[0], level at 1 Hz
};

/// Ordinary least squares of level against log10 frequency over the
/// segment's points: r = (X^T X)^-1 X^T y with rows [1, log10 f].
/// The 2x2 normal equations are solved in closed form.
/// Throws std::invalid_argument for fewer than 2 points.
SlopeFit fit_segment_slope(const PsdTrace& trace, const Segment& segment);

/// Fits every segment with >= 2 points in place; smaller ones stay unfitted.
void fit_all_segments(const PsdTrace& trace, std::vector<Segment>& segments);

struct ClassifyConfig {
    double steep_threshold_db_per_decade = -20.0;
    double flat_threshold_db_per_decade = -8.0;
};

struct SectionRange {
    double f_lo_hz;
    double f_hi_hz;
    std::vector<std::size_t> segment_indices;
};

struct SectionMap {
    std::vector<SectionLabel> labels; ///< per segment, aligned with input
    std::map<SectionLabel, SectionRange> ranges; ///< the four named sections
    std::vector<std::string> warnings; ///< absent sections
};

struct PatternError : std::runtime_error {
    PatternError(const std::string& msg, std::string runs)
        : std::runtime_error(msg), run_sequence(std::move(runs)) {}
    std::string run_sequence;
};

/// Labels each fitted segment steep / flat / transition by slope, merges
/// contiguous same-class runs, and maps the runs in frequency order onto the
/// reference / in-band / VCO / noise-floor pattern (steep, flat, steep,
/// flat). Runs separated only by transition or unfit segments keep their
/// identity; where a steep and a flat run touch directly, one segment on
/// each side of the change is re-marked transition. Missing sections are
/// flagged in warnings; a run sequence that cannot be aligned with the
/// pattern raises PatternError.
SectionMap classify_sections(const std::vector<Segment>& segments,
                             const ClassifyConfig& config = {});

/// Per-segment records plus a "sections" object with the named ranges.
nlohmann::json segments_to_json(const std::vector<Segment>& segments,
                                const SectionMap& sections);

} // namespace pnkit
