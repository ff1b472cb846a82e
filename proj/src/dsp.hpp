#pragma once

#include <string>
#include <vector>

#include "common.hpp"

namespace x3ecg::dsp {

// One biquad in direct form II transposed: y = (b0 + b1 z^-1 + b2 z^-2) /
// (1 + a1 z^-1 + a2 z^-2).  The cascade carries a single scalar gain applied
// once per pass.
struct BiquadSection {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

struct BiquadCascade {
    std::vector<BiquadSection> sections;
    double gain = 1.0;
};

// Butterworth bandpass of the given analog order (1..8), designed by the
// classic analog-prototype -> lp2bp -> bilinear route with frequency
// prewarping.  Unit gain is pinned at the geometric center of the band.
BiquadCascade design_butterworth_bandpass(int order, double low_hz, double high_hz, double fs);

// Single causal pass through the cascade.  Each section starts from its
// steady state for a constant input equal to the first sample.
std::vector<double> single_pass(const BiquadCascade& c, std::vector<double> x);

// Zero-phase filtering: odd-reflection padding, then the average of the
// forward-backward and backward-forward chains — the mirror symmetry makes
// the output exactly invariant under time reversal.  Requires
// len(x) > 3 * pad_len with pad_len = 6 * number of sections.
std::vector<double> filtfilt(const BiquadCascade& c, const std::vector<double>& x);
size_t filtfilt_pad_len(const BiquadCascade& c);

// Truncate or zero-pad at the tail to exactly target_len samples.
std::vector<double> fix_length(const std::vector<double>& x, size_t target_len);

// Standard 12-lead row order: I II III aVR aVL aVF V1..V6.
int lead_index(const std::string& name);
const std::vector<std::string>& lead_names();
std::vector<std::vector<double>> select_leads(const std::vector<std::vector<double>>& all_leads,
                                              const std::vector<std::string>& names);

// Per-signal z-scoring; near-constant input (std < 1e-8) maps to all zeros.
std::vector<double> standardize(const std::vector<double>& x);

}  // namespace x3ecg::dsp
