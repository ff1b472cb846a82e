#include "rpeak.hpp"

#include <algorithm>
#include <cmath>

#include "dsp.hpp"

namespace x3ecg::rpeak {

namespace {

void add_gaussian(std::vector<double>& y, int fs, double center_s, double amp, double width_s) {
    if (width_s <= 0.0) return;
    int n = static_cast<int>(y.size());
    int lo = std::max(0, static_cast<int>(std::floor((center_s - 4.0 * width_s) * fs)));
    int hi = std::min(n - 1, static_cast<int>(std::ceil((center_s + 4.0 * width_s) * fs)));
    for (int i = lo; i <= hi; ++i) {
        double t = static_cast<double>(i) / fs - center_s;
        y[static_cast<size_t>(i)] += amp * std::exp(-0.5 * (t / width_s) * (t / width_s));
    }
}

}  // namespace

SynthResult synthesize_ecg(const SynthSpec& spec) {
    if (spec.fs < 1) fail(Status::invalid_argument, "fs must be positive");
    if (!(spec.duration_s > 0.0)) fail(Status::invalid_argument, "duration must be positive");
    if (!(spec.bpm > 0.0)) fail(Status::invalid_argument, "bpm must be positive");
    if (spec.beat_jitter < 0.0 || spec.beat_jitter >= 1.0)
        fail(Status::invalid_argument, "beat jitter must be in [0, 1)");

    int64_t n = static_cast<int64_t>(std::llround(spec.duration_s * spec.fs));
    SynthResult out;
    out.signal.fs = spec.fs;
    out.signal.samples.assign(static_cast<size_t>(n), 0.0);

    double rr = 60.0 / spec.bpm;
    Rng beat_rng(Rng::derive(spec.seed, 0xbea75ULL));

    // Beat times: jittered RR walk, with each R snapped onto the sample grid
    // so that true_peaks are exact.
    std::vector<double> beat_times;
    double t = spec.first_peak_s;
    while (t < spec.duration_s) {
        int64_t idx = std::llround(t * spec.fs);
        if (idx >= n) break;
        t = static_cast<double>(idx) / spec.fs;  // snap
        beat_times.push_back(t);
        out.true_peaks.push_back(idx);
        double step = rr;
        if (spec.beat_jitter > 0.0) step *= 1.0 + spec.beat_jitter * beat_rng.uniform(-1.0, 1.0);
        t += step;
    }

    for (double c : beat_times) {
        add_gaussian(out.signal.samples, spec.fs, c - 0.20 * rr, spec.p_amp, spec.p_width_s);
        add_gaussian(out.signal.samples, spec.fs, c, spec.qrs_amp, spec.qrs_width_s);
        add_gaussian(out.signal.samples, spec.fs, c + 0.35 * rr, spec.t_amp, spec.t_width_s);
    }

    if (spec.noise_snr_db) {
        double power = 0.0;
        for (double v : out.signal.samples) power += v * v;
        power /= static_cast<double>(n);
        double sigma = std::sqrt(power * std::pow(10.0, -*spec.noise_snr_db / 10.0));
        Rng noise_rng(Rng::derive(spec.seed, 0x401e5ULL + spec.noise_stream));
        for (double& v : out.signal.samples) v += sigma * noise_rng.normal();
    }
    return out;
}

RPeakResult detect_rpeaks(const SignalBuffer& x) {
    if (x.fs < 100) fail(Status::invalid_argument, "detect_rpeaks needs fs >= 100 Hz, got " +
                                                       std::to_string(x.fs));
    int64_t n = static_cast<int64_t>(x.samples.size());
    if (n < 2 * x.fs)
        fail(Status::domain, "signal too short for detection: " + std::to_string(n) +
                                 " samples at " + std::to_string(x.fs) + " Hz (need 2 s)");

    double fs = static_cast<double>(x.fs);

    // 1) QRS-band filter.
    dsp::BiquadCascade bp = dsp::design_butterworth_bandpass(2, 5.0, 15.0, fs);
    std::vector<double> f = dsp::filtfilt(bp, x.samples);

    // 2) Five-point derivative, 3) squaring.
    std::vector<double> sq(static_cast<size_t>(n), 0.0);
    auto at = [&](int64_t i) { return f[static_cast<size_t>(std::clamp<int64_t>(i, 0, n - 1))]; };
    for (int64_t i = 0; i < n; ++i) {
        double d = (2.0 * at(i + 1) + at(i + 2) - 2.0 * at(i - 1) - at(i - 2)) / 8.0;
        sq[static_cast<size_t>(i)] = d * d;
    }

    // 4) Moving-window integration over 150 ms (centered).
    int64_t w = std::max<int64_t>(1, std::llround(0.150 * fs));
    if (w % 2 == 0) ++w;
    int64_t half = w / 2;
    std::vector<double> mwi(static_cast<size_t>(n), 0.0);
    double acc = 0.0;
    for (int64_t i = 0; i < std::min(n, half + 1); ++i) acc += sq[static_cast<size_t>(i)];
    int64_t left = -half, right = half;
    for (int64_t i = 0; i < n; ++i) {
        mwi[static_cast<size_t>(i)] = acc / static_cast<double>(w);
        // slide window to center i+1
        int64_t drop = left, take = right + 1;
        if (drop >= 0) acc -= sq[static_cast<size_t>(drop)];
        if (take < n) acc += sq[static_cast<size_t>(take)];
        ++left;
        ++right;
    }

    // Candidate peaks of the integrated signal. The energy hump of one QRS
    // carries small ripples, so a bare local-max scan would emit several
    // candidates per beat and the first threshold crossing (on the rising
    // edge) would win while the refractory swallows the crest. Keep only
    // local maxima that also dominate a +/- half-window neighborhood: one
    // candidate per hump, at its crest.
    struct Candidate {
        int64_t idx;
        double v;
    };
    std::vector<Candidate> cands;
    for (int64_t i = 1; i + 1 < n; ++i) {
        double v = mwi[static_cast<size_t>(i)];
        if (!(v > mwi[static_cast<size_t>(i - 1)] && v >= mwi[static_cast<size_t>(i + 1)]))
            continue;
        int64_t lo = std::max<int64_t>(0, i - half);
        int64_t hi = std::min<int64_t>(n - 1, i + half);
        bool crest = true;
        for (int64_t j = lo; j <= hi && crest; ++j) {
            if (j == i) continue;
            double u = mwi[static_cast<size_t>(j)];
            if (u > v || (u == v && j < i)) crest = false;  // leftmost wins ties
        }
        if (crest) cands.push_back({i, v});
    }

    // 5) Adaptive dual thresholds learned from the first two seconds.
    int64_t learn = std::min(n, static_cast<int64_t>(2 * x.fs));
    double peak_max = 0.0, mean = 0.0;
    for (int64_t i = 0; i < learn; ++i) {
        peak_max = std::max(peak_max, mwi[static_cast<size_t>(i)]);
        mean += mwi[static_cast<size_t>(i)];
    }
    mean /= static_cast<double>(learn);
    double spki = 0.25 * peak_max;
    double npki = 0.5 * mean;

    int64_t refractory = std::llround(0.200 * fs);
    std::vector<int64_t> accepted;
    std::vector<double> rr_history;
    int64_t last = -1;
    size_t searchback_from = 0;  // first candidate not yet considered by search-back

    auto threshold1 = [&]() { return npki + 0.25 * (spki - npki); };
    auto rr_average = [&]() {
        size_t m = rr_history.size();
        size_t k = std::min<size_t>(8, m);
        double s = 0.0;
        for (size_t i = m - k; i < m; ++i) s += rr_history[i];
        return s / static_cast<double>(k);
    };
    auto accept = [&](int64_t idx, double v, bool from_searchback) {
        if (last >= 0) rr_history.push_back(static_cast<double>(idx - last));
        spki = from_searchback ? 0.25 * v + 0.75 * spki : 0.125 * v + 0.875 * spki;
        accepted.push_back(idx);
        last = idx;
    };

    for (size_t ci = 0; ci < cands.size(); ++ci) {
        const Candidate& c = cands[ci];
        if (last >= 0 && c.idx - last < refractory) continue;  // same beat's hump

        if (c.v > threshold1()) {
            accept(c.idx, c.v, false);
            searchback_from = ci + 1;
        } else {
            npki = 0.125 * c.v + 0.875 * npki;
        }

        // Search-back: if a beat seems missed (gap > 1.66 * average RR), take
        // the strongest skipped candidate above the lower threshold.
        if (last >= 0 && rr_history.size() >= 2) {
            double rr_avg = rr_average();
            if (static_cast<double>(c.idx - last) > 1.66 * rr_avg) {
                double t2 = 0.5 * threshold1();
                size_t best = SIZE_MAX;
                for (size_t j = searchback_from; j <= ci; ++j) {
                    if (cands[j].idx <= last + refractory) continue;
                    if (cands[j].idx > c.idx) break;
                    if (cands[j].v > t2 && (best == SIZE_MAX || cands[j].v > cands[best].v))
                        best = j;
                }
                if (best != SIZE_MAX) {
                    accept(cands[best].idx, cands[best].v, true);
                    searchback_from = best + 1;
                }
            }
        }
    }

    // 6) Refine each detection to the absolute-amplitude maximum of the input
    // within +/- 50 ms, then re-enforce the refractory spacing.
    int64_t r50 = std::llround(0.050 * fs);
    std::vector<int64_t> refined;
    for (int64_t idx : accepted) {
        int64_t lo = std::max<int64_t>(0, idx - r50);
        int64_t hi = std::min<int64_t>(n - 1, idx + r50);
        int64_t best = lo;
        double best_v = std::abs(x.samples[static_cast<size_t>(lo)]);
        for (int64_t i = lo + 1; i <= hi; ++i) {
            double v = std::abs(x.samples[static_cast<size_t>(i)]);
            if (v > best_v) {
                best_v = v;
                best = i;
            }
        }
        refined.push_back(best);
    }
    std::sort(refined.begin(), refined.end());

    RPeakResult out;
    for (int64_t idx : refined) {
        if (!out.peak_indices.empty() && idx - out.peak_indices.back() < refractory) {
            // collision after refinement: keep the larger raw amplitude
            double prev = std::abs(x.samples[static_cast<size_t>(out.peak_indices.back())]);
            double cur = std::abs(x.samples[static_cast<size_t>(idx)]);
            if (cur > prev) out.peak_indices.back() = idx;
            continue;
        }
        out.peak_indices.push_back(idx);
    }
    out.count = static_cast<int64_t>(out.peak_indices.size());
    return out;
}

int64_t count_heartbeats(const SignalBuffer& lead1) { return detect_rpeaks(lead1).count; }

}  // namespace x3ecg::rpeak
