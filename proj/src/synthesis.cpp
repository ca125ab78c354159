#include "pnkit/synthesis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

#include <fftw3.h>

namespace pnkit {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// FFTW planning is not thread-safe; plan creation is serialized.
std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

// Unnormalized half-complex-to-real inverse transform, scaled by 1/n so the
// result is the inverse DFT of the given positive-frequency coefficients.
std::vector<double> irfft(std::vector<std::complex<double>> half_spectrum, std::size_t n) {
    std::vector<double> out(n);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                    reinterpret_cast<fftw_complex*>(half_spectrum.data()),
                                    out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(plan);
    }
    const double scale = 1.0 / static_cast<double>(n);
    for (double& v : out)
        v *= scale;
    return out;
}

void put_u16le(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u64le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64le(std::string& out, double v) {
    put_u64le(out, std::bit_cast<std::uint64_t>(v));
}

std::uint64_t read_u64le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

} // namespace

PsdTrace synth_psd(const PllNoiseParams& params, const SynthPsdConfig& config) {
    params.validate();
    if (!(config.f_lo_hz > 0.0) || !(config.f_hi_hz > config.f_lo_hz))
        throw std::domain_error("synth_psd: need 0 < f_lo < f_hi");
    if (config.points_per_decade < 2)
        throw std::domain_error("synth_psd: points_per_decade must be >= 2");
    if (config.noise_sigma_db < 0.0)
        throw std::domain_error("synth_psd: noise_sigma_db must be >= 0");

    const double lmin = std::log10(config.f_lo_hz);
    const double lmax = std::log10(config.f_hi_hz);
    const auto n = static_cast<std::size_t>(
                       std::floor((lmax - lmin) * config.points_per_decade + 1e-9)) + 1;
    const double step = (lmax - lmin) / static_cast<double>(n - 1);

    PsdTrace trace;
    trace.f0_hz = params.f0_hz;
    trace.label = config.label;
    trace.offsets_hz.resize(n);
    trace.levels_dbchz.resize(n);

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double f = std::pow(10.0, lmin + step * static_cast<double>(i));
        f = std::clamp(f, config.f_lo_hz, config.f_hi_hz);
        trace.offsets_hz[i] = f;
        double level = eval_full_model(params, f);
        if (config.noise_sigma_db > 0.0)
            level += config.noise_sigma_db * gauss(rng);
        trace.levels_dbchz[i] = level;
    }
    validate_trace(trace);
    return trace;
}

PhaseTimeSeries synth_phase_timeseries(const PllNoiseParams& params,
                                       double sample_rate_hz, std::size_t n,
                                       std::uint64_t seed) {
    params.validate();
    if (!is_pow2(n) || n < 4096)
        throw std::domain_error("synth_phase_timeseries: length must be a power of two >= 4096");
    if (n > (std::size_t{1} << 30)) // FFT plans index with int
        throw std::domain_error("synth_phase_timeseries: length above 2^30 is not supported");
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
        throw std::domain_error("synth_phase_timeseries: sample rate must be positive");

    const double bin_hz = sample_rate_hz / static_cast<double>(n);
    const double f_clamp = std::max(params.f_c_ref_hz, bin_hz);
    const double fs_n_half = sample_rate_hz * static_cast<double>(n) / 2.0;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::complex<double>> spectrum(n / 2 + 1, {0.0, 0.0});
    // DC stays zero; bins get amplitude sqrt(S(f_k) * fs * n / 2) split
    // between the quadratures so E|X_k|^2 matches the one-sided PSD
    for (std::size_t k = 1; k < n / 2; ++k) {
        const double f = std::max(static_cast<double>(k) * bin_hz, f_clamp);
        const double s_phi = db_to_linear(eval_full_model(params, f));
        const double sigma = std::sqrt(s_phi * fs_n_half * 0.5);
        spectrum[k] = {sigma * gauss(rng), sigma * gauss(rng)};
    }
    {
        // Nyquist bin is real and has no conjugate partner, so it carries
        // the full S * fs * n variance
        const double f = std::max(sample_rate_hz / 2.0, f_clamp);
        const double s_phi = db_to_linear(eval_full_model(params, f));
        spectrum[n / 2] = {std::sqrt(s_phi * sample_rate_hz * static_cast<double>(n)) * gauss(rng),
                           0.0};
    }

    PhaseTimeSeries series;
    series.sample_rate_hz = sample_rate_hz;
    series.seed = seed;
    series.phase_rad = irfft(std::move(spectrum), n);
    return series;
}

PsdTrace welch_psd(const PhaseTimeSeries& series, std::size_t segment_length,
                   double overlap_fraction, double f0_hz) {
    const std::size_t n = series.phase_rad.size();
    if (!(series.sample_rate_hz > 0.0) || !std::isfinite(series.sample_rate_hz))
        throw std::invalid_argument("welch_psd: series sample rate must be positive");
    if (!is_pow2(segment_length) || segment_length < 16)
        throw std::invalid_argument("welch_psd: segment_length must be a power of two >= 16");
    if (segment_length > n)
        throw std::invalid_argument("welch_psd: segment_length exceeds series length");
    if (!(overlap_fraction >= 0.0) || overlap_fraction >= 1.0)
        throw std::invalid_argument("welch_psd: overlap_fraction must be in [0, 1)");

    const auto hop = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(
               static_cast<double>(segment_length) * (1.0 - overlap_fraction))));
    const std::size_t n_segments = (n - segment_length) / hop + 1;
    if (n_segments < 8)
        throw std::invalid_argument("welch_psd: fewer than 8 segments after overlap");

    // periodic Hann with power normalization U = mean(w^2)
    std::vector<double> window(segment_length);
    double u = 0.0;
    for (std::size_t i = 0; i < segment_length; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(segment_length)));
        u += window[i] * window[i];
    }
    u /= static_cast<double>(segment_length);

    std::vector<double> buffer(segment_length);
    std::vector<std::complex<double>> spectrum(segment_length / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(segment_length), buffer.data(),
                                    reinterpret_cast<fftw_complex*>(spectrum.data()),
                                    FFTW_ESTIMATE);
    }

    std::vector<double> power(segment_length / 2 - 1, 0.0);
    for (std::size_t s = 0; s < n_segments; ++s) {
        const double* src = series.phase_rad.data() + s * hop;
        for (std::size_t i = 0; i < segment_length; ++i)
            buffer[i] = src[i] * window[i];
        fftw_execute(plan);
        for (std::size_t k = 1; k < segment_length / 2; ++k)
            power[k - 1] += std::norm(spectrum[k]);
    }
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(plan);
    }

    const double scale = 2.0 / (series.sample_rate_hz * static_cast<double>(segment_length) * u *
                                static_cast<double>(n_segments));
    PsdTrace trace;
    trace.f0_hz = f0_hz;
    trace.label = "welch";
    trace.offsets_hz.resize(power.size());
    trace.levels_dbchz.resize(power.size());
    const double bin_hz = series.sample_rate_hz / static_cast<double>(segment_length);
    for (std::size_t k = 0; k < power.size(); ++k) {
        trace.offsets_hz[k] = static_cast<double>(k + 1) * bin_hz;
        trace.levels_dbchz[k] = linear_to_db(power[k] * scale);
    }
    validate_trace(trace);
    return trace;
}

void save_pnts(std::ostream& out, const PhaseTimeSeries& series) {
    std::string data;
    data.reserve(32 + 8 * series.phase_rad.size());
    data += "PNTS";
    put_u16le(data, 1);
    data.append(10, '\0'); // reserved
    put_f64le(data, series.sample_rate_hz);
    put_u64le(data, static_cast<std::uint64_t>(series.phase_rad.size()));
    for (const double v : series.phase_rad)
        put_f64le(data, v);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out)
        throw std::runtime_error("save_pnts: write failed");
}

void save_pnts_file(const std::filesystem::path& path, const PhaseTimeSeries& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    save_pnts(out, series);
}

PhaseTimeSeries load_pnts(std::istream& in) {
    unsigned char header[32];
    if (!in.read(reinterpret_cast<char*>(header), sizeof(header)))
        throw std::runtime_error("load_pnts: truncated header");
    if (std::memcmp(header, "PNTS", 4) != 0)
        throw std::runtime_error("load_pnts: bad magic, not a PNTS file");
    const unsigned version = header[4] | (unsigned{header[5]} << 8);
    if (version != 1)
        throw std::runtime_error("load_pnts: unsupported version " + std::to_string(version));

    PhaseTimeSeries series;
    series.sample_rate_hz = std::bit_cast<double>(read_u64le(header + 16));
    const std::uint64_t length = read_u64le(header + 24);
    if (!(series.sample_rate_hz > 0.0) || !std::isfinite(series.sample_rate_hz))
        throw std::runtime_error("load_pnts: invalid sample rate");
    if (!is_pow2(length) || length > (std::uint64_t{1} << 30))
        throw std::runtime_error("load_pnts: implausible sample count " + std::to_string(length));
    series.seed = 0; // the seed is not part of the container

    series.phase_rad.resize(length);
    std::vector<unsigned char> raw(length * 8);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
        throw std::runtime_error("load_pnts: truncated sample data");
    for (std::uint64_t i = 0; i < length; ++i)
        series.phase_rad[i] = std::bit_cast<double>(read_u64le(raw.data() + 8 * i));
    return series;
}

PhaseTimeSeries load_pnts_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    return load_pnts(in);
}

void write_phase_csv(std::ostream& out, const PhaseTimeSeries& series) {
    std::string text = "sample_index,phase_rad\n";
    char buf[48];
    for (std::size_t i = 0; i < series.phase_rad.size(); ++i) {
        const int len = std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, series.phase_rad[i]);
        text.append(buf, static_cast<std::size_t>(len));
    }
    out << text;
}

void write_phase_csv_file(const std::filesystem::path& path, const PhaseTimeSeries& series) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_phase_csv(out, series);
}

} // namespace pnkit
