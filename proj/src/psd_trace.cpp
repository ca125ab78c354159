#include "pnkit/psd_trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace pnkit {

namespace {

constexpr double kLevelMinDb = -200.0;
constexpr double kLevelMaxDb = 50.0;
constexpr double kExpectedSpanLoHz = 100.0;
constexpr double kExpectedSpanHiHz = 1e7;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, std::size_t line) {
    const std::string t = trim(text);
    double value = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (first != last && *first == '+') // from_chars rejects a leading plus
        ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || first == last)
        throw ParseError("malformed number '" + t + "'", line);
    return value;
}

void append_number(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

} // namespace

void validate_trace(const PsdTrace& trace) {
    if (trace.offsets_hz.size() != trace.levels_dbchz.size())
        throw std::invalid_argument("trace: offsets and levels differ in length");
    if (trace.offsets_hz.size() < 8)
        throw std::invalid_argument("trace: fewer than 8 points");
    if (!(trace.f0_hz > 0.0) || !std::isfinite(trace.f0_hz))
        throw std::invalid_argument("trace: carrier frequency f0_hz must be positive");
    double prev = 0.0;
    for (std::size_t i = 0; i < trace.offsets_hz.size(); ++i) {
        const double f = trace.offsets_hz[i];
        if (!std::isfinite(f) || f <= 0.0)
            throw std::invalid_argument("trace: offsets must be positive and finite");
        if (f <= prev)
            throw std::invalid_argument("trace: offsets not strictly increasing");
        prev = f;
        const double l = trace.levels_dbchz[i];
        if (!std::isfinite(l) || l < kLevelMinDb || l > kLevelMaxDb)
            throw std::invalid_argument(
                "trace: level outside the [-200, 50] dBc/Hz sanity window");
    }
}

std::vector<std::string> trace_warnings(const PsdTrace& trace) {
    std::vector<std::string> w;
    if (trace.offsets_hz.empty())
        return w;
    char buf[160];
    if (trace.offsets_hz.front() > kExpectedSpanLoHz * (1.0 + 1e-9) ||
        trace.offsets_hz.back() < kExpectedSpanHiHz * (1.0 - 1e-9)) {
        std::snprintf(buf, sizeof(buf),
                      "trace span [%g, %g] Hz does not cover the expected 100 Hz - 10 MHz sweep",
                      trace.offsets_hz.front(), trace.offsets_hz.back());
        w.emplace_back(buf);
    }
    if (trace.offsets_hz.front() < kExpectedSpanLoHz * (1.0 - 1e-9) ||
        trace.offsets_hz.back() > kExpectedSpanHiHz * (1.0 + 1e-9)) {
        std::snprintf(buf, sizeof(buf),
                      "trace span [%g, %g] Hz extends beyond the expected 100 Hz - 10 MHz sweep",
                      trace.offsets_hz.front(), trace.offsets_hz.back());
        w.emplace_back(buf);
    }
    return w;
}

PsdTrace parse_psd_csv(std::istream& in, const ParseOptions& options) {
    PsdTrace trace;
    bool have_f0 = false;
    bool have_header = false;
    std::string line;
    std::size_t line_no = 0;

    // rows before duplicate merging
    std::vector<std::pair<double, double>> rows;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const std::string t = trim(line);
        if (t.empty())
            continue;
        if (t.front() == '#') {
            const std::string meta = trim(t.substr(1));
            const auto eq = meta.find('=');
            if (eq == std::string::npos)
                continue; // plain comment
            const std::string key = trim(meta.substr(0, eq));
            const std::string value = trim(meta.substr(eq + 1));
            if (key == "f0_hz") {
                trace.f0_hz = parse_number(value, line_no);
                have_f0 = true;
            } else if (key == "rbw_fraction") {
                trace.rbw_fraction = parse_number(value, line_no);
            } else if (key == "n_averages") {
                trace.n_averages = static_cast<int>(parse_number(value, line_no));
            } else if (key == "label") {
                trace.label = value;
            }
            // unknown keys are ignored
            continue;
        }
        if (!have_header) {
            if (t != "offset_hz,psd_dbc_hz")
                throw ParseError("expected header 'offset_hz,psd_dbc_hz', got '" + t + "'",
                                 line_no);
            have_header = true;
            continue;
        }
        const auto comma = t.find(',');
        if (comma == std::string::npos)
            throw ParseError("expected two comma-separated values", line_no);
        const double f = parse_number(t.substr(0, comma), line_no);
        const double l = parse_number(t.substr(comma + 1), line_no);
        if (!rows.empty() && f < rows.back().first)
            throw ParseError("offsets not strictly increasing", line_no);
        rows.emplace_back(f, l);
    }
    if (!have_header)
        throw ParseError("missing 'offset_hz,psd_dbc_hz' header", line_no + 1);

    if (options.f0_override_hz) {
        trace.f0_hz = *options.f0_override_hz;
        have_f0 = true;
    }
    if (!have_f0)
        throw ParseError("missing required metadata f0_hz", line_no + 1);

    // Analyzers emit overlapping sweep segments; equal offsets are merged by
    // averaging their levels in dB.
    for (std::size_t i = 0; i < rows.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < rows.size() && rows[j].first == rows[i].first) {
            sum += rows[j].second;
            ++j;
        }
        trace.offsets_hz.push_back(rows[i].first);
        trace.levels_dbchz.push_back(sum / static_cast<double>(j - i));
        i = j;
    }

    validate_trace(trace);
    return trace;
}

PsdTrace parse_psd_csv_file(const std::filesystem::path& path, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    return parse_psd_csv(in, options);
}

void write_psd_csv(std::ostream& out, const PsdTrace& trace) {
    validate_trace(trace);
    std::string text;
    text += "# f0_hz=";
    append_number(text, trace.f0_hz);
    text += "\n# rbw_fraction=";
    append_number(text, trace.rbw_fraction);
    text += "\n# n_averages=" + std::to_string(trace.n_averages);
    if (!trace.label.empty())
        text += "\n# label=" + trace.label;
    text += "\noffset_hz,psd_dbc_hz\n";
    for (std::size_t i = 0; i < trace.offsets_hz.size(); ++i) {
        append_number(text, trace.offsets_hz[i]);
        text += ',';
        append_number(text, trace.levels_dbchz[i]);
        text += '\n';
    }
    out << text;
}

void write_psd_csv_file(const std::filesystem::path& path, const PsdTrace& trace) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_psd_csv(out, trace);
}

PsdTrace resample_log(const PsdTrace& trace, int points_per_decade) {
    validate_trace(trace);
    if (points_per_decade < 4)
        throw std::invalid_argument("resample_log: points_per_decade must be >= 4");
    const double lmin = std::log10(trace.offsets_hz.front());
    const double lmax = std::log10(trace.offsets_hz.back());
    const double decades = lmax - lmin;
    if (decades < 1.0)
        throw std::domain_error("resample_log: trace spans less than one decade");

    const auto n = static_cast<std::size_t>(
                       std::floor(decades * points_per_decade + 1e-9)) + 1;
    const double step = decades / static_cast<double>(n - 1);

    PsdTrace out = trace;
    out.offsets_hz.assign(n, 0.0);
    out.levels_dbchz.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double f = std::pow(10.0, lmin + step * static_cast<double>(i));
        f = std::clamp(f, trace.offsets_hz.front(), trace.offsets_hz.back());
        out.offsets_hz[i] = f;

        auto it = std::lower_bound(trace.offsets_hz.begin(), trace.offsets_hz.end(), f);
        const auto hi = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(std::distance(trace.offsets_hz.begin(), it),
                                     static_cast<std::ptrdiff_t>(trace.offsets_hz.size()) - 1));
        if (trace.offsets_hz[hi] == f) {
            out.levels_dbchz[i] = trace.levels_dbchz[hi];
            continue;
        }
        const std::size_t lo = hi - 1;
        const double x0 = std::log10(trace.offsets_hz[lo]);
        const double x1 = std::log10(trace.offsets_hz[hi]);
        const double t = (std::log10(f) - x0) / (x1 - x0);
        out.levels_dbchz[i] =
            trace.levels_dbchz[lo] + t * (trace.levels_dbchz[hi] - trace.levels_dbchz[lo]);
    }
    return out;
}

FloorMarginReport check_floor_margin(const PsdTrace& trace,
                                     std::optional<double> analyzer_floor_dbchz) {
    validate_trace(trace);
    FloorMarginReport report;
    report.floor_given = analyzer_floor_dbchz.has_value();
    if (!report.floor_given) {
        report.margins_db.assign(trace.levels_dbchz.size(),
                                 std::numeric_limits<double>::infinity());
        report.min_margin_db = std::numeric_limits<double>::infinity();
        report.pass = true;
        return report;
    }
    report.min_margin_db = std::numeric_limits<double>::infinity();
    report.margins_db.reserve(trace.levels_dbchz.size());
    for (const double l : trace.levels_dbchz) {
        const double m = l - *analyzer_floor_dbchz;
        report.margins_db.push_back(m);
        report.min_margin_db = std::min(report.min_margin_db, m);
    }
    report.pass = report.min_margin_db >= 8.0;
    return report;
}

} // namespace pnkit
