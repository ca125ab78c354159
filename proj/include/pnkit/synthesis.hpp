#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pnkit/model.hpp"
#include "pnkit/psd_trace.hpp"

namespace pnkit {

struct SynthPsdConfig {
    double f_lo_hz;
    double f_hi_hz;
    int points_per_decade = 50;
    double noise_sigma_db = 0.0; ///< i.i.d. Gaussian dB perturbation
    std::uint64_t seed = 0;
    std::string label;
};

/// Samples the full model on a log-spaced grid, optionally perturbed by
/// seeded Gaussian dB noise. noise_sigma_db = 0 gives the exact curve.
/// Deterministic: identical (params, config) produce identical traces.
PsdTrace synth_psd(const PllNoiseParams& params, const SynthPsdConfig& config);

/// A time-domain phase-noise sample path, radians.
struct PhaseTimeSeries {
    double sample_rate_hz;
    std::vector<double> phase_rad; ///< length is a power of two
    std::uint64_t seed;
};

/// Generates a real phase-noise record whose one-sided PSD follows the full
/// model, by coloring complex Gaussian spectral coefficients with amplitude
/// sqrt(S_phi(f_k) * fs * n / 2) and inverse-transforming. S_phi is read as
/// 10^(L/10) rad^2/Hz (small-angle regime; the L = S_phi/2 convention is
/// deliberately not applied). The DC bin is zeroed and bins below
/// max(f_c_ref, first bin) are clamped to the model value there.
/// n must be a power of two >= 4096. Deterministic given the seed.
PhaseTimeSeries synth_phase_timeseries(const PllNoiseParams& params,
                                       double sample_rate_hz, std::size_t n,
                                       std::uint64_t seed);

/// Averaged, Hann-windowed, overlapped periodogram, one-sided, in dBc/Hz on
/// the FFT bin grid with the DC bin dropped. Power-normalized so white input
/// of variance sigma^2 reads sigma^2 / (fs/2) flat. Requires at least 8
/// segments after overlap.
PsdTrace welch_psd(const PhaseTimeSeries& series, std::size_t segment_length,
                   double overlap_fraction, double f0_hz);

/// Binary container: magic "PNTS", u16 version, 10 reserved bytes, then
/// little-endian f64 sample rate, u64 length and the f64 samples.
void save_pnts(std::ostream& out, const PhaseTimeSeries& series);
void save_pnts_file(const std::filesystem::path& path, const PhaseTimeSeries& series);
PhaseTimeSeries load_pnts(std::istream& in);
PhaseTimeSeries load_pnts_file(const std::filesystem::path& path);

/// CSV export: sample_index,phase_rad
void write_phase_csv(std::ostream& out, const PhaseTimeSeries& series);
void write_phase_csv_file(const std::filesystem::path& path, const PhaseTimeSeries& series);

} // namespace pnkit
