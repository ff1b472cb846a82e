#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "common.hpp"

namespace x3ecg::rpeak {

// Parameterization of the synthetic generator.  Beats are Gaussian bumps: a
// dominant QRS at each beat time plus smaller P and T waves offset by fixed
// fractions of the nominal RR interval.
struct SynthSpec {
    int fs = 500;
    double duration_s = 10.0;
    double bpm = 60.0;
    double first_peak_s = 0.5;
    double beat_jitter = 0.0;  // uniform +/- fraction of the RR interval

    double p_amp = 0.15, p_width_s = 0.025;
    double qrs_amp = 1.0, qrs_width_s = 0.012;
    double t_amp = 0.35, t_width_s = 0.045;

    std::optional<double> noise_snr_db;  // absent -> clean signal
    uint64_t seed = 0;
    uint64_t noise_stream = 0;  // vary to decorrelate noise across leads
};

struct SynthResult {
    SignalBuffer signal;
    std::vector<int64_t> true_peaks;  // sample indices of R waves
};

SynthResult synthesize_ecg(const SynthSpec& spec);

struct RPeakResult {
    std::vector<int64_t> peak_indices;  // ascending
    int64_t count = 0;
};

// QRS detection: 5-15 Hz bandpass, derivative, squaring, 150 ms moving-window
// integration, adaptive dual thresholds with a 200 ms refractory period and
// RR-gap search-back, then refinement to the local absolute-amplitude maximum
// of the input within +/- 50 ms.  Scale-invariant: indices are unchanged
// under any positive rescaling of the input.
RPeakResult detect_rpeaks(const SignalBuffer& x);

// Beat count of an already-preprocessed lead-I signal.
int64_t count_heartbeats(const SignalBuffer& lead1);

}  // namespace x3ecg::rpeak
