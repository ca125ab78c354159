#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <fftw3.h>

#include "helpers.hpp"
#include "pnkit/estimation.hpp"
#include "pnkit/synthesis.hpp"

using namespace pnkit;
using pnkit::testing::ubx_means;

namespace {

// independent spectrum for the Parseval check, straight through FFTW
std::vector<std::complex<double>> reference_rfft(const std::vector<double>& x) {
    std::vector<double> in(x);
    std::vector<std::complex<double>> out(x.size() / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(x.size()), in.data(),
                                          reinterpret_cast<fftw_complex*>(out.data()),
                                          FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    return out;
}

// trapezoid quadrature of 10^(L(f)/10) over [f_lo, f_hi] on a fine log grid
double model_power_quadrature(const PllNoiseParams& p, double f_lo, double f_hi,
                              double f_clamp) {
    const int n = 20000;
    double integral = 0.0;
    double prev_f = f_lo;
    double prev_s = db_to_linear(eval_full_model(p, std::max(f_lo, f_clamp)));
    for (int i = 1; i < n; ++i) {
        const double f = f_lo * std::pow(f_hi / f_lo, static_cast<double>(i) / (n - 1));
        const double s = db_to_linear(eval_full_model(p, std::max(f, f_clamp)));
        integral += 0.5 * (s + prev_s) * (f - prev_f);
        prev_f = f;
        prev_s = s;
    }
    return integral;
}

// parameter set whose spectrum is flat across the whole synthesis band: all
// corners sit far above Nyquist, so every bin is clamped to one level
PllNoiseParams flat_params() {
    return PllNoiseParams::from_cutoffs(2e9, 1e8, 2e8, 2e8, 4e8, 8e8, -80.0, -90.0);
}

} // namespace

TEST_CASE("synthetic PSD sampling") {
    const PllNoiseParams p = ubx_means();

    SUBCASE("noiseless levels equal the model exactly") {
        const PsdTrace t = synth_psd(p, {100.0, 1e7, 50, 0.0, 0, ""});
        CHECK(t.offsets_hz.size() == 251);
        CHECK(t.offsets_hz.front() == 100.0);
        CHECK(t.offsets_hz.back() == 1e7);
        for (std::size_t i = 0; i < t.offsets_hz.size(); ++i)
            CHECK(t.levels_dbchz[i] == eval_full_model(p, t.offsets_hz[i]));
    }
    SUBCASE("seeded noise is reproducible and seed-sensitive") {
        const PsdTrace a = synth_psd(p, {100.0, 1e7, 50, 0.5, 42, ""});
        const PsdTrace b = synth_psd(p, {100.0, 1e7, 50, 0.5, 42, ""});
        const PsdTrace c = synth_psd(p, {100.0, 1e7, 50, 0.5, 43, ""});
        CHECK(a.levels_dbchz == b.levels_dbchz);
        CHECK(a.levels_dbchz != c.levels_dbchz);
    }
    SUBCASE("round trip through the fit recovers the parameters") {
        const PsdTrace t = synth_psd(p, {100.0, 1e7, 50, 0.0, 0, ""});
        FitConfig cfg;
        cfg.normalization = Normalization::mean;
        const auto fitted = fit_params(t, cfg).params.complete();
        REQUIRE(fitted.has_value());
        CHECK(std::abs(fitted->f_c_ref_hz / p.f_c_ref_hz - 1.0) < 0.03);
        CHECK(std::abs(fitted->b_pll_hz / p.b_pll_hz - 1.0) < 0.03);
    }
    SUBCASE("invalid ranges are rejected") {
        CHECK_THROWS_AS(synth_psd(p, {0.0, 1e7, 50, 0.0, 0, ""}), std::domain_error);
        CHECK_THROWS_AS(synth_psd(p, {1e7, 100.0, 50, 0.0, 0, ""}), std::domain_error);
        CHECK_THROWS_AS(synth_psd(p, {100.0, 1e7, 50, -1.0, 0, ""}), std::domain_error);
    }
}

TEST_CASE("phase time series generation") {
    const PllNoiseParams p = ubx_means();

    SUBCASE("length must be a power of two of at least 2^12") {
        CHECK_THROWS_AS(synth_phase_timeseries(p, 50e6, 1000, 1), std::domain_error);
        CHECK_THROWS_AS(synth_phase_timeseries(p, 50e6, 2048, 1), std::domain_error);
        CHECK_THROWS_AS(synth_phase_timeseries(p, -5.0, 4096, 1), std::domain_error);
    }
    SUBCASE("deterministic per seed") {
        const PhaseTimeSeries a = synth_phase_timeseries(p, 50e6, 4096, 7);
        const PhaseTimeSeries b = synth_phase_timeseries(p, 50e6, 4096, 7);
        const PhaseTimeSeries c = synth_phase_timeseries(p, 50e6, 4096, 8);
        CHECK(a.phase_rad == b.phase_rad);
        CHECK(a.phase_rad != c.phase_rad);
        CHECK(a.seed == 7);
    }
    SUBCASE("Parseval through the coloring transform") {
        const PhaseTimeSeries series = synth_phase_timeseries(p, 50e6, 1 << 14, 3);
        const auto spectrum = reference_rfft(series.phase_rad);
        const double n = static_cast<double>(series.phase_rad.size());
        double spec_energy = std::norm(spectrum.front()) + std::norm(spectrum.back());
        for (std::size_t k = 1; k + 1 < spectrum.size(); ++k)
            spec_energy += 2.0 * std::norm(spectrum[k]);
        spec_energy /= n;
        double time_energy = 0.0;
        for (const double v : series.phase_rad)
            time_energy += v * v;
        CHECK(std::abs(spec_energy / time_energy - 1.0) < 1e-9);
    }
    SUBCASE("band power matches quadrature of the model") {
        const std::size_t n = 1 << 20;
        const double fs = 50e6;
        const PhaseTimeSeries series = synth_phase_timeseries(p, fs, n, 5);
        const auto spectrum = reference_rfft(series.phase_rad);
        // one-sided power in [10 kHz, 1 MHz] from the synthesized record
        const double bin = fs / static_cast<double>(n);
        double band = 0.0;
        for (std::size_t k = 1; k < spectrum.size() - 1; ++k) {
            const double f = static_cast<double>(k) * bin;
            if (f >= 10e3 && f <= 1e6)
                band += 2.0 * std::norm(spectrum[k]);
        }
        band /= static_cast<double>(n) * static_cast<double>(n); // |X|^2 -> power
        const double expected =
            model_power_quadrature(p, 10e3, 1e6, std::max(p.f_c_ref_hz, bin));
        CHECK(std::abs(band / expected - 1.0) < 0.10);
    }
    SUBCASE("flat-spectrum parameters give white phase and matching variance") {
        const std::size_t n = 1 << 16;
        const double fs = 1e6;
        const PllNoiseParams flat = flat_params();
        const PhaseTimeSeries series = synth_phase_timeseries(flat, fs, n, 11);
        double var = 0.0;
        for (const double v : series.phase_rad)
            var += v * v;
        var /= static_cast<double>(n);
        // every bin is clamped to the same level, so the integral is exact
        const double bin = fs / static_cast<double>(n);
        const double level = db_to_linear(eval_full_model(flat, 1e8));
        const double expected = level * (fs / 2.0 - bin) + level * bin; // incl. Nyquist bin
        CHECK(std::abs(var / expected - 1.0) < 0.10);
    }
}

TEST_CASE("welch estimator") {
    SUBCASE("white input calibrates to sigma^2 / (fs/2)") {
        const double fs = 1e6;
        const std::size_t n = 1 << 16;
        const double sigma2 = 2.5e-9;
        PhaseTimeSeries series;
        series.sample_rate_hz = fs;
        series.seed = 0;
        std::mt19937_64 rng(17);
        std::normal_distribution<double> gauss(0.0, std::sqrt(sigma2));
        series.phase_rad.resize(n);
        for (double& v : series.phase_rad)
            v = gauss(rng);

        const PsdTrace psd = welch_psd(series, 1 << 10, 0.5, 2e9);
        const double expected = linear_to_db(sigma2 / (fs / 2.0));
        // median level over all bins
        std::vector<double> levels = psd.levels_dbchz;
        std::nth_element(levels.begin(), levels.begin() + levels.size() / 2, levels.end());
        CHECK(std::abs(levels[levels.size() / 2] - expected) < 1.0);
    }
    SUBCASE("generator and estimator close the loop on the model") {
        const PllNoiseParams p = ubx_means();
        const double fs = 50e6;
        const std::size_t n = 1 << 20;
        const std::size_t seg = 1 << 14;
        const PhaseTimeSeries series = synth_phase_timeseries(p, fs, n, 21);
        const PsdTrace psd = welch_psd(series, seg, 0.5, p.f0_hz);

        const double f_lo = 10.0 * fs / static_cast<double>(seg);
        const double f_hi = fs / 8.0;
        std::vector<double> dev;
        for (std::size_t i = 0; i < psd.offsets_hz.size(); ++i) {
            const double f = psd.offsets_hz[i];
            if (f < f_lo || f > f_hi)
                continue;
            dev.push_back(std::abs(psd.levels_dbchz[i] - eval_full_model(p, f)));
        }
        REQUIRE(dev.size() > 100);
        std::nth_element(dev.begin(), dev.begin() + dev.size() / 2, dev.end());
        CHECK(dev[dev.size() / 2] < 1.0);
    }
    SUBCASE("a sinusoid stands 30 dB above its neighborhood") {
        const double fs = 1e6;
        const std::size_t n = 1 << 16;
        const std::size_t seg = 1 << 12;
        PhaseTimeSeries series;
        series.sample_rate_hz = fs;
        series.seed = 0;
        series.phase_rad.resize(n);
        std::mt19937_64 rng(23);
        std::normal_distribution<double> gauss(0.0, 1e-6);
        const double f_tone = 100.0 * fs / static_cast<double>(seg); // exact bin center
        for (std::size_t i = 0; i < n; ++i)
            series.phase_rad[i] = 0.01 * std::sin(2.0 * std::numbers::pi * f_tone *
                                                  static_cast<double>(i) / fs) +
                                  gauss(rng);
        const PsdTrace psd = welch_psd(series, seg, 0.5, 2e9);
        const std::size_t peak = 99; // bin grid starts at k=1
        CHECK(psd.offsets_hz[peak] == doctest::Approx(f_tone));
        CHECK(psd.levels_dbchz[peak] - psd.levels_dbchz[peak - 5] > 30.0);
        CHECK(psd.levels_dbchz[peak] - psd.levels_dbchz[peak + 5] > 30.0);
    }
    SUBCASE("insufficient segments are rejected") {
        PhaseTimeSeries series;
        series.sample_rate_hz = 1e6;
        series.seed = 0;
        series.phase_rad.assign(1 << 12, 0.0);
        CHECK_THROWS_AS(welch_psd(series, 1 << 12, 0.0, 2e9), std::invalid_argument);
        CHECK_THROWS_AS(welch_psd(series, 1 << 13, 0.5, 2e9), std::invalid_argument);
    }
}

TEST_CASE("PNTS container round trip") {
    const PhaseTimeSeries series = synth_phase_timeseries(ubx_means(), 50e6, 4096, 77);

    std::stringstream buffer(std::ios::in | std::ios::out | std::ios::binary);
    save_pnts(buffer, series);
    const std::string bytes = buffer.str();
    CHECK(bytes.size() == 32 + 8 * series.phase_rad.size());
    CHECK(bytes.compare(0, 4, "PNTS") == 0);

    buffer.seekg(0);
    const PhaseTimeSeries loaded = load_pnts(buffer);
    CHECK(loaded.sample_rate_hz == series.sample_rate_hz);
    CHECK(loaded.phase_rad == series.phase_rad); // bitwise
    CHECK(loaded.seed == 0);                     // seed is not serialized

    SUBCASE("bad magic is rejected") {
        std::string corrupt = bytes;
        corrupt[0] = 'X';
        std::istringstream in(corrupt, std::ios::binary);
        CHECK_THROWS_WITH_AS(load_pnts(in), doctest::Contains("magic"), std::runtime_error);
    }
    SUBCASE("truncation is detected") {
        std::istringstream in(bytes.substr(0, bytes.size() - 9), std::ios::binary);
        CHECK_THROWS_AS(load_pnts(in), std::runtime_error);
    }
}

TEST_CASE("phase CSV export") {
    PhaseTimeSeries series;
    series.sample_rate_hz = 1e6;
    series.seed = 0;
    series.phase_rad = {0.5, -0.25, 0.125};
    std::ostringstream out;
    write_phase_csv(out, series);
    CHECK(out.str() == "sample_index,phase_rad\n0,0.5\n1,-0.25\n2,0.125\n");
}

TEST_CASE("welch output is a valid ingestible trace") {
    const PhaseTimeSeries series = synth_phase_timeseries(ubx_means(), 50e6, 1 << 16, 9);
    const PsdTrace psd = welch_psd(series, 1 << 12, 0.5, 2e9);
    CHECK_NOTHROW(validate_trace(psd));
    std::ostringstream out;
    write_psd_csv(out, psd);
    std::istringstream in(out.str());
    const PsdTrace back = parse_psd_csv(in);
    CHECK(back.offsets_hz == psd.offsets_hz);
    CHECK(back.levels_dbchz == psd.levels_dbchz);
}
