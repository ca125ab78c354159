#pragma once

#include "pnkit/estimation.hpp"
#include "pnkit/model.hpp"
#include "pnkit/psd_trace.hpp"

namespace pnkit::testing {

// Characterization results for the two daughterboard types, as a consistent
// parameter set: the three corner frequencies are derived from the estimated
// quantities via the level/low-pass intersections, exactly as every fit
// produced by this toolkit derives them.
inline PllNoiseParams params_from_estimates(double f0, double f_c_ref, double f_c_vco,
                                            double l_pll, double l_nf) {
    return PllNoiseParams::from_cutoffs(f0, f_c_ref, f_c_vco,
                                        intersection_freq(f_c_ref, l_pll),
                                        intersection_freq(f_c_vco, l_pll),
                                        intersection_freq(f_c_vco, l_nf), l_pll, l_nf);
}

// UBX daughterboard (MAX2871) population means
inline PllNoiseParams ubx_means() {
    return params_from_estimates(2e9, 0.5853, 537.6, -107.8, -134.0);
}

// CBX daughterboard (MAX2870) population means
inline PllNoiseParams cbx_means() {
    return params_from_estimates(2e9, 0.5570, 193.4, -91.9, -144.4);
}

// Characterization of one individual MAX2871 device
inline PllNoiseParams single_device_ubx() {
    const double f_c_vco = cutoff_from_constant(5.01e-17, 2e9); // 629.57 Hz
    return PllNoiseParams::from_cutoffs(2e9, 0.5755, f_c_vco, 1865.7, 197.9e3, 1439.8e3,
                                        -107.9, -133.7);
}

} // namespace pnkit::testing
