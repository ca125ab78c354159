#include "pnkit/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>

namespace pnkit {

namespace {

struct Axes {
    double x0 = 70, x1 = 840, y0 = 40, y1 = 480; // plot box in pixels
    double lf_min, lf_max;                       // log10 Hz
    double db_min, db_max;

    double x(double f_hz) const {
        return x0 + (std::log10(f_hz) - lf_min) / (lf_max - lf_min) * (x1 - x0);
    }
    double y(double db) const {
        return y1 - (db - db_min) / (db_max - db_min) * (y1 - y0);
    }
};

void append(std::string& s, const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    s += buf;
}

std::string polyline(const Axes& ax, const std::vector<double>& f,
                     const std::vector<double>& db, const char* style) {
    std::string s = "  <polyline fill=\"none\" ";
    s += style;
    s += " points=\"";
    char buf[64];
    for (std::size_t i = 0; i < f.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", ax.x(f[i]), ax.y(db[i]));
        s += buf;
    }
    s += "\"/>\n";
    return s;
}

std::string tick_label_hz(double f) {
    char buf[32];
    if (f >= 1e6)
        std::snprintf(buf, sizeof(buf), "%g MHz", f / 1e6);
    else if (f >= 1e3)
        std::snprintf(buf, sizeof(buf), "%g kHz", f / 1e3);
    else
        std::snprintf(buf, sizeof(buf), "%g Hz", f);
    return buf;
}

} // namespace

std::string render_fit_svg(const PsdTrace& trace, const FitReport& report) {
    Axes ax;
    ax.lf_min = std::floor(std::log10(trace.offsets_hz.front()));
    ax.lf_max = std::ceil(std::log10(trace.offsets_hz.back()));
    const auto [lo_it, hi_it] =
        std::minmax_element(trace.levels_dbchz.begin(), trace.levels_dbchz.end());
    ax.db_min = std::floor(*lo_it / 20.0) * 20.0 - 10.0;
    ax.db_max = std::ceil(*hi_it / 20.0) * 20.0 + 10.0;

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" height=\"560\" "
         "viewBox=\"0 0 900 560\">\n";
    s += "  <rect width=\"900\" height=\"560\" fill=\"white\"/>\n";

    // grid and ticks: decades on x, 20 dB on y
    for (double lf = ax.lf_min; lf <= ax.lf_max + 1e-9; lf += 1.0) {
        const double x = ax.x(std::pow(10.0, lf));
        append(s, "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                  "stroke=\"#dddddd\"/>\n", x, ax.y0, x, ax.y1);
        append(s, "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"middle\">%s"
                  "</text>\n", x, ax.y1 + 18.0, tick_label_hz(std::pow(10.0, lf)).c_str());
    }
    for (double db = ax.db_min; db <= ax.db_max + 1e-9; db += 20.0) {
        const double y = ax.y(db);
        append(s, "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                  "stroke=\"#dddddd\"/>\n", ax.x0, y, ax.x1, y);
        append(s, "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"end\">%.0f"
                  "</text>\n", ax.x0 - 6.0, y + 4.0, db);
    }
    append(s, "  <rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
              "stroke=\"black\"/>\n", ax.x0, ax.y0, ax.x1 - ax.x0, ax.y1 - ax.y0);
    append(s, "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"13\" text-anchor=\"middle\">offset "
              "frequency</text>\n", (ax.x0 + ax.x1) / 2.0, ax.y1 + 40.0);
    append(s, "  <text x=\"18\" y=\"%.1f\" font-size=\"13\" text-anchor=\"middle\" "
              "transform=\"rotate(-90 18 %.1f)\">SSB phase noise (dBc/Hz)</text>\n",
           (ax.y0 + ax.y1) / 2.0, (ax.y0 + ax.y1) / 2.0);

    // section boundaries
    for (const auto& [label, range] : report.sections.ranges) {
        for (const double f : {range.f_lo_hz, range.f_hi_hz}) {
            append(s, "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                      "stroke=\"#888888\" stroke-dasharray=\"5,4\"/>\n",
                   ax.x(f), ax.y0, ax.x(f), ax.y1);
        }
        append(s, "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\" "
                  "fill=\"#555555\">%s</text>\n",
               (ax.x(range.f_lo_hz) + ax.x(range.f_hi_hz)) / 2.0, ax.y0 + 14.0,
               to_string(label));
    }

    // measured trace
    s += polyline(ax, trace.offsets_hz, trace.levels_dbchz,
                  "stroke=\"#1f77b4\" stroke-width=\"1.5\"");

    // fitted model overlay
    if (const auto params = report.params.complete()) {
        std::vector<double> f(trace.offsets_hz), db;
        db.reserve(f.size());
        for (const double fi : f)
            db.push_back(eval_full_model(*params, fi));
        s += polyline(ax, f, db, "stroke=\"#d62728\" stroke-width=\"1.5\"");
        append(s, "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" fill=\"#d62728\">fitted "
                  "model</text>\n", ax.x1 - 120.0, ax.y0 + 34.0);
    }
    append(s, "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" fill=\"#1f77b4\">%s</text>\n",
           ax.x1 - 120.0, ax.y0 + 18.0,
           trace.label.empty() ? "measured" : trace.label.c_str());

    s += "</svg>\n";
    return s;
}

void write_fit_svg_file(const std::filesystem::path& path, const PsdTrace& trace,
                        const FitReport& report) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << render_fit_svg(trace, report);
}

} // namespace pnkit
