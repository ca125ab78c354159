// pnkit - PLL phase-noise model estimation and synthesis toolkit
//
// Subcommands: fit, synth (psd|timeseries), aggregate, eval.
// Exit codes: 0 success, 2 success with warnings / partial fit, 1 error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pnkit/estimation.hpp"
#include "pnkit/model.hpp"
#include "pnkit/psd_trace.hpp"
#include "pnkit/segmentation.hpp"
#include "pnkit/svg_plot.hpp"
#include "pnkit/synthesis.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
    bool quiet = false;
    std::uint64_t seed = 0;
    pnkit::Normalization normalization = pnkit::Normalization::paper;
};

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
}

void write_json_file(const fs::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

struct FitOutcome {
    fs::path input;
    std::optional<pnkit::PllNoiseParams> params;
    std::vector<std::string> warnings;
    std::string error; // non-empty on failure
};

struct FitJob {
    fs::path input;
    std::optional<fs::path> out_params;
    std::optional<fs::path> out_report;
    std::optional<fs::path> out_segments;
    std::optional<fs::path> out_plot;
    std::optional<double> f0_override;
    int resample_ppd = 50; // 0 disables
    pnkit::FitConfig config;
};

FitOutcome run_fit_job(const FitJob& job) {
    FitOutcome outcome;
    outcome.input = job.input;
    try {
        pnkit::ParseOptions popt;
        popt.f0_override_hz = job.f0_override;
        pnkit::PsdTrace trace = pnkit::parse_psd_csv_file(job.input, popt);

        for (auto& w : pnkit::trace_warnings(trace))
            outcome.warnings.push_back(std::move(w));

        if (job.resample_ppd > 0) {
            try {
                trace = pnkit::resample_log(trace, job.resample_ppd);
            } catch (const std::domain_error&) {
                outcome.warnings.emplace_back("trace spans less than one decade, not resampled");
            }
        }

        const pnkit::FitReport report = pnkit::fit_params(trace, job.config);
        outcome.params = report.params.complete();
        for (const auto& w : report.warnings)
            outcome.warnings.push_back(w);
        if (!outcome.params)
            outcome.warnings.emplace_back("partial fit: parameter set is incomplete");

        if (job.out_report)
            write_json_file(*job.out_report, pnkit::to_json(report));
        if (job.out_segments)
            write_json_file(*job.out_segments,
                            pnkit::segments_to_json(report.segments, report.sections));
        if (job.out_plot)
            pnkit::write_fit_svg_file(*job.out_plot, trace, report);
        if (job.out_params) {
            if (outcome.params)
                write_json_file(*job.out_params, pnkit::to_json(*outcome.params));
            else
                write_json_file(*job.out_params, pnkit::to_json(report)["params"]);
        }
    } catch (const std::exception& e) {
        outcome.error = e.what();
    }
    return outcome;
}

int report_outcomes(const std::vector<FitOutcome>& outcomes, const GlobalOptions& global) {
    bool any_error = false;
    bool any_warning = false;
    for (const auto& o : outcomes) {
        if (!o.error.empty()) {
            std::cerr << "pnkit: " << o.input.string() << ": " << o.error << "\n";
            any_error = true;
            continue;
        }
        for (const auto& w : o.warnings) {
            std::cerr << o.input.string() << ": warning: " << w << "\n";
            any_warning = true;
        }
        if (!global.quiet)
            std::cout << o.input.string() << ": "
                      << (o.params ? "fit complete" : "fit partial") << "\n";
    }
    if (any_error)
        return 1;
    return any_warning ? 2 : 0;
}

int cmd_fit(const GlobalOptions& global, const std::string& input,
            const std::string& out, const std::string& report_path,
            const std::string& segments_path, const std::string& plot_path,
            std::optional<double> f0, int ppd, double steep, double flat,
            std::optional<double> floor_dbchz, const std::string& aggregate_path,
            const std::string& out_dir, bool emit_segments, bool emit_plots) {
    pnkit::FitConfig config;
    config.classify.steep_threshold_db_per_decade = steep;
    config.classify.flat_threshold_db_per_decade = flat;
    config.normalization = global.normalization;
    config.analyzer_floor_dbchz = floor_dbchz;

    const fs::path in_path(input);
    std::vector<FitJob> jobs;

    if (fs::is_directory(in_path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(in_path))
            if (entry.is_regular_file() && entry.path().extension() == ".csv")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            std::cerr << "pnkit: no .csv files in " << input << "\n";
            return 1;
        }
        const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
        fs::create_directories(dir);
        for (const auto& f : files) {
            FitJob job;
            job.input = f;
            job.f0_override = f0;
            job.resample_ppd = ppd;
            job.config = config;
            const std::string stem = f.stem().string();
            job.out_params = dir / (stem + ".params.json");
            job.out_report = dir / (stem + ".fit.json");
            if (emit_segments)
                job.out_segments = dir / (stem + ".segments.json");
            if (emit_plots)
                job.out_plot = dir / (stem + ".svg");
            jobs.push_back(std::move(job));
        }
    } else {
        FitJob job;
        job.input = in_path;
        job.f0_override = f0;
        job.resample_ppd = ppd;
        job.config = config;
        if (!out.empty())
            job.out_params = out;
        if (!report_path.empty())
            job.out_report = report_path;
        if (!segments_path.empty())
            job.out_segments = segments_path;
        if (!plot_path.empty())
            job.out_plot = plot_path;
        jobs.push_back(std::move(job));
    }

    // independent per-file pipelines; the aggregate is a terminal reduction
    std::vector<std::future<FitOutcome>> futures;
    futures.reserve(jobs.size());
    for (const auto& job : jobs)
        futures.push_back(std::async(std::launch::async, run_fit_job, std::cref(job)));
    std::vector<FitOutcome> outcomes;
    outcomes.reserve(jobs.size());
    for (auto& f : futures)
        outcomes.push_back(f.get());

    int code = report_outcomes(outcomes, global);
    if (!aggregate_path.empty() && code != 1) {
        std::vector<pnkit::PllNoiseParams> complete;
        for (const auto& o : outcomes)
            if (o.params)
                complete.push_back(*o.params);
        if (complete.empty()) {
            std::cerr << "pnkit: no complete fits to aggregate\n";
            return 1;
        }
        if (complete.size() < outcomes.size()) {
            std::cerr << "pnkit: warning: aggregating " << complete.size() << " of "
                      << outcomes.size() << " fits (others partial)\n";
            code = 2;
        }
        write_json_file(aggregate_path, pnkit::to_json(pnkit::aggregate_params(complete)));
    }
    return code;
}

int cmd_synth_psd(const GlobalOptions& global, const std::string& params_path,
                  double fmin, double fmax, int ppd, double noise_db,
                  const std::string& out, const std::string& label) {
    const pnkit::PllNoiseParams params = pnkit::params_from_json_file(params_path);
    pnkit::SynthPsdConfig cfg;
    cfg.f_lo_hz = fmin;
    cfg.f_hi_hz = fmax;
    cfg.points_per_decade = ppd;
    cfg.noise_sigma_db = noise_db;
    cfg.seed = global.seed;
    cfg.label = label;
    const pnkit::PsdTrace trace = pnkit::synth_psd(params, cfg);
    pnkit::write_psd_csv_file(out, trace);
    if (!global.quiet)
        std::cout << out << ": " << trace.offsets_hz.size() << " points\n";
    return 0;
}

int cmd_synth_timeseries(const GlobalOptions& global, const std::string& params_path,
                         double fs, std::uint64_t n, const std::string& out,
                         const std::string& csv_out, const std::string& verify_out,
                         std::uint64_t segment_length, double overlap) {
    const pnkit::PllNoiseParams params = pnkit::params_from_json_file(params_path);
    const pnkit::PhaseTimeSeries series =
        pnkit::synth_phase_timeseries(params, fs, static_cast<std::size_t>(n), global.seed);
    pnkit::save_pnts_file(out, series);
    if (!csv_out.empty())
        pnkit::write_phase_csv_file(csv_out, series);
    if (!verify_out.empty()) {
        const pnkit::PsdTrace psd = pnkit::welch_psd(
            series, static_cast<std::size_t>(segment_length), overlap, params.f0_hz);
        pnkit::write_psd_csv_file(verify_out, psd);
    }
    if (!global.quiet)
        std::cout << out << ": " << series.phase_rad.size() << " samples at "
                  << fs << " Hz\n";
    return 0;
}

int cmd_aggregate(const GlobalOptions& global, const std::vector<std::string>& inputs,
                  const std::string& out, const std::string& csv_out) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            for (const auto& entry : fs::directory_iterator(p))
                if (entry.is_regular_file() && entry.path().extension() == ".json")
                    files.push_back(entry.path());
        } else {
            files.push_back(p);
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        std::cerr << "pnkit: no input files\n";
        return 1;
    }
    std::vector<pnkit::PllNoiseParams> fits;
    for (const auto& f : files) {
        try {
            fits.push_back(pnkit::params_from_json_file(f));
        } catch (const std::exception& e) {
            std::cerr << "pnkit: " << f.string() << ": " << e.what() << "\n";
            return 1;
        }
    }
    const pnkit::ParamAggregate agg = pnkit::aggregate_params(fits);
    if (!out.empty())
        write_json_file(out, pnkit::to_json(agg));
    if (!csv_out.empty())
        write_text_file(csv_out, pnkit::aggregate_to_csv(agg));
    if (!global.quiet)
        std::cout << "aggregated " << agg.n_devices << " device fits\n";
    return 0;
}

int cmd_eval(const std::string& params_path, std::optional<double> freq,
             std::optional<double> fmin, std::optional<double> fmax, int ppd,
             bool asymptotes, const std::string& out) {
    const pnkit::PllNoiseParams params = pnkit::params_from_json_file(params_path);

    std::vector<double> grid;
    if (freq) {
        grid.push_back(*freq);
    } else if (fmin && fmax) {
        if (!(*fmin > 0.0) || !(*fmax > *fmin)) {
            std::cerr << "pnkit: need 0 < --fmin < --fmax\n";
            return 1;
        }
        const double l0 = std::log10(*fmin), l1 = std::log10(*fmax);
        const auto n = static_cast<std::size_t>(std::floor((l1 - l0) * ppd + 1e-9)) + 1;
        for (std::size_t i = 0; i < n; ++i) {
            const double f = std::pow(10.0, l0 + (l1 - l0) * static_cast<double>(i) /
                                                static_cast<double>(n - 1));
            grid.push_back(std::clamp(f, *fmin, *fmax));
        }
        grid.front() = *fmin;
        grid.back() = *fmax;
    } else {
        std::cerr << "pnkit: need --freq or --fmin/--fmax\n";
        return 1;
    }

    // the single-frequency form prints just the value line
    std::string text;
    if (!freq)
        text = asymptotes ? "offset_hz,model_dbc_hz,ref_lp_dbc_hz,vco_lp_dbc_hz\n"
                          : "offset_hz,model_dbc_hz\n";
    char buf[160];
    for (const double f : grid) {
        if (asymptotes)
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", f,
                          pnkit::eval_full_model(params, f),
                          pnkit::eval_lp_model(params.f_c_ref_hz, f),
                          pnkit::eval_lp_model(params.f_c_vco_hz, f));
        else
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", f,
                          pnkit::eval_full_model(params, f));
        text += buf;
    }
    if (out.empty())
        std::cout << text;
    else
        write_text_file(out, text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PLL phase-noise parameter estimation and synthesis"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    app.add_flag("--quiet", global.quiet, "suppress progress output");
    app.add_option("--seed", global.seed, "RNG seed for synthesis commands");
    app.add_option("--normalization", global.normalization,
                   "estimator normalization: paper (printed forms) or mean")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, pnkit::Normalization>{
                {"paper", pnkit::Normalization::paper},
                {"mean", pnkit::Normalization::mean}},
            CLI::ignore_case));

    // fit
    auto* fit = app.add_subcommand("fit", "estimate model parameters from a PSD trace");
    fit->fallthrough();
    std::string fit_input, fit_out, fit_report, fit_segments, fit_plot;
    std::string fit_aggregate, fit_out_dir;
    std::optional<double> fit_f0, fit_floor;
    double fit_ppd = 50;
    double fit_steep = -20.0, fit_flat = -8.0;
    bool fit_emit_segments = false, fit_emit_plots = false;
    fit->add_option("--input", fit_input, "input CSV file or directory of CSVs")->required();
    fit->add_option("--out", fit_out, "fitted parameters JSON");
    fit->add_option("--report", fit_report, "full fit report JSON");
    fit->add_option("--segments", fit_segments, "segment map JSON");
    fit->add_option("--plot", fit_plot, "SVG overlay plot");
    fit->add_option("--f0", fit_f0, "carrier frequency override, Hz");
    fit->add_option("--ppd", fit_ppd, "resample to this log density first (0 = off)");
    fit->add_option("--steep-threshold", fit_steep, "steep classification bound, dB/decade");
    fit->add_option("--flat-threshold", fit_flat, "flat classification bound, dB/decade");
    fit->add_option("--floor", fit_floor, "analyzer noise floor, dBc/Hz");
    fit->add_option("--aggregate", fit_aggregate, "combined aggregate JSON (directory mode)");
    fit->add_option("--out-dir", fit_out_dir, "output directory (directory mode)");
    fit->add_flag("--emit-segments", fit_emit_segments, "per-file segment maps (directory mode)");
    fit->add_flag("--emit-plots", fit_emit_plots, "per-file SVG plots (directory mode)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate synthetic data from parameters");
    synth->require_subcommand(1);
    synth->fallthrough();

    auto* psd = synth->add_subcommand("psd", "synthesize a PSD trace CSV");
    psd->fallthrough();
    std::string psd_params, psd_out, psd_label;
    double psd_fmin = 100.0, psd_fmax = 1e7, psd_noise = 0.0;
    double psd_ppd = 50;
    psd->add_option("--params", psd_params, "parameters JSON")->required();
    psd->add_option("--fmin", psd_fmin, "lowest offset, Hz");
    psd->add_option("--fmax", psd_fmax, "highest offset, Hz");
    psd->add_option("--ppd", psd_ppd, "points per decade");
    psd->add_option("--noise-db", psd_noise, "Gaussian level noise sigma, dB");
    psd->add_option("--out", psd_out, "output CSV")->required();
    psd->add_option("--label", psd_label, "trace label");

    auto* ts = synth->add_subcommand("timeseries", "synthesize a phase sample path");
    ts->fallthrough();
    std::string ts_params, ts_out, ts_csv, ts_verify;
    double ts_fs = 50e6, ts_overlap = 0.5;
    // double-typed so scientific notation works for every numeric flag
    double ts_n = 1048576.0, ts_seglen = 16384.0;
    ts->add_option("--params", ts_params, "parameters JSON")->required();
    ts->add_option("--fs", ts_fs, "sample rate, Hz");
    ts->add_option("--n", ts_n, "length (power of two)");
    ts->add_option("--out", ts_out, "output PNTS binary")->required();
    ts->add_option("--csv", ts_csv, "optional CSV export");
    ts->add_option("--verify", ts_verify, "optional Welch verification CSV");
    ts->add_option("--segment-length", ts_seglen, "Welch segment length");
    ts->add_option("--overlap", ts_overlap, "Welch overlap fraction [0,1)");

    // aggregate
    auto* agg = app.add_subcommand("aggregate", "mean and spread across device fits");
    agg->fallthrough();
    std::vector<std::string> agg_inputs;
    std::string agg_out, agg_csv;
    agg->add_option("--input", agg_inputs, "params/fit JSON files or a directory")->required();
    agg->add_option("--out", agg_out, "aggregate JSON");
    agg->add_option("--csv", agg_csv, "aggregate CSV table");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate the model curve");
    ev->fallthrough();
    std::string ev_params, ev_out;
    std::optional<double> ev_freq, ev_fmin, ev_fmax;
    double ev_ppd = 50;
    bool ev_asym = false;
    ev->add_option("--params", ev_params, "parameters JSON")->required();
    ev->add_option("--freq", ev_freq, "single offset frequency, Hz");
    ev->add_option("--fmin", ev_fmin, "range start, Hz");
    ev->add_option("--fmax", ev_fmax, "range end, Hz");
    ev->add_option("--ppd", ev_ppd, "points per decade for the range form");
    ev->add_flag("--asymptotes", ev_asym, "add reference/VCO low-pass columns");
    ev->add_option("--out", ev_out, "output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, exits 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (fit->parsed())
            return cmd_fit(global, fit_input, fit_out, fit_report, fit_segments, fit_plot,
                           fit_f0, static_cast<int>(std::lround(fit_ppd)), fit_steep,
                           fit_flat, fit_floor, fit_aggregate, fit_out_dir,
                           fit_emit_segments, fit_emit_plots);
        if (psd->parsed())
            return cmd_synth_psd(global, psd_params, psd_fmin, psd_fmax,
                                 static_cast<int>(std::lround(psd_ppd)), psd_noise, psd_out,
                                 psd_label);
        if (ts->parsed())
            return cmd_synth_timeseries(global, ts_params, ts_fs,
                                        static_cast<std::uint64_t>(std::llround(ts_n)), ts_out,
                                        ts_csv, ts_verify,
                                        static_cast<std::uint64_t>(std::llround(ts_seglen)),
                                        ts_overlap);
        if (agg->parsed())
            return cmd_aggregate(global, agg_inputs, agg_out, agg_csv);
        if (ev->parsed())
            return cmd_eval(ev_params, ev_freq, ev_fmin, ev_fmax,
                            static_cast<int>(std::lround(ev_ppd)), ev_asym, ev_out);
    } catch (const std::exception& e) {
        std::cerr << "pnkit: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
