#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnkit {

/// A measured or synthetic SSB phase-noise spectrum.
struct PsdTrace {
    std::vector<double> offsets_hz;    ///< strictly increasing, all > 0
    std::vector<double> levels_dbchz;  ///< same length as offsets_hz
    double f0_hz = 0.0;                ///< carrier frequency
    double rbw_fraction = 0.01;        ///< resolution bandwidth / offset
    int n_averages = 10;               ///< averaged observations
    std::string label;                 ///< device identifier
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg),
          line_number(line) {}
    std::size_t line_number;
};

/// Throws std::invalid_argument naming the violated invariant:
/// offsets strictly increasing and positive, levels finite within
/// [-200, 50] dBc/Hz, at least 8 points, f0 > 0.
void validate_trace(const PsdTrace& trace);

/// Soft checks (span outside the expected 100 Hz - 10 MHz sweep range).
std::vector<std::string> trace_warnings(const PsdTrace& trace);

struct ParseOptions {
    std::optional<double> f0_override_hz; ///< used when the file lacks f0_hz
};

/// CSV format: "# key=value" metadata lines (keys f0_hz, rbw_fraction,
/// n_averages, label), a "offset_hz,psd_dbc_hz" header, then two-column
/// data rows. LF or CRLF. Duplicate offsets are merged by dB-averaging.
PsdTrace parse_psd_csv(std::istream& in, const ParseOptions& options = {});
PsdTrace parse_psd_csv_file(const std::filesystem::path& path,
                            const ParseOptions& options = {});

/// Writes the same format with shortest round-trip number rendering.
void write_psd_csv(std::ostream& out, const PsdTrace& trace);
void write_psd_csv_file(const std::filesystem::path& path, const PsdTrace& trace);

/// Resamples onto a uniform log10 grid spanning [min offset, max offset],
/// interpolating linearly in (log10 f, dB). Grid size is
/// floor(decades * points_per_decade) + 1 with endpoints pinned to the
/// trace extremes; never extrapolates.
/// Throws std::domain_error if the trace spans less than one decade.
PsdTrace resample_log(const PsdTrace& trace, int points_per_decade);

struct FloorMarginReport {
    std::vector<double> margins_db; ///< per-point level - floor
    double min_margin_db;
    bool pass;        ///< min margin >= 8 dB
    bool floor_given; ///< false when no analyzer floor was supplied
};

/// Margin of the trace above the spectrum analyzer's own noise floor.
/// Without a floor the report passes and margins are +inf ("not limited").
FloorMarginReport check_floor_margin(const PsdTrace& trace,
                                     std::optional<double> analyzer_floor_dbchz);

} // namespace pnkit
