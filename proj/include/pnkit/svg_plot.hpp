#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "pnkit/estimation.hpp"
#include "pnkit/psd_trace.hpp"

namespace pnkit {

/// Static SVG rendering of a trace on a log-frequency / dB grid, with the
/// fitted model curve overlaid when the fit is complete and dashed verticals
/// at the section boundaries.
std::string render_fit_svg(const PsdTrace& trace, const FitReport& report);

void write_fit_svg_file(const std::filesystem::path& path, const PsdTrace& trace,
                        const FitReport& report);

} // namespace pnkit
