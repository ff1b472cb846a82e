#include "dsp.hpp"

#include <algorithm>
#include <complex>

namespace x3ecg::dsp {

namespace {

using cplx = std::complex<double>;

// Analog Butterworth prototype poles on the unit circle's left half.
std::vector<cplx> prototype_poles(int order) {
    std::vector<cplx> poles;
    poles.reserve(static_cast<size_t>(order));
    for (int k = 0; k < order; ++k) {
        double theta = M_PI * (2.0 * k + order + 1.0) / (2.0 * order);
        poles.emplace_back(std::cos(theta), std::sin(theta));
    }
    return poles;
}

// Lowpass prototype -> bandpass: each pole p maps to the pair
// t +/- sqrt(t^2 - w0^2) with t = bw*p/2.  Doubles the order.
std::vector<cplx> lp2bp_poles(const std::vector<cplx>& lp, double w0, double bw) {
    std::vector<cplx> out;
    out.reserve(lp.size() * 2);
    for (const cplx& p : lp) {
        cplx t = 0.5 * bw * p;
        cplx r = std::sqrt(t * t - cplx(w0 * w0, 0.0));
        out.push_back(t + r);
        out.push_back(t - r);
    }
    return out;
}

cplx bilinear_pole(const cplx& s, double fs2) {
    return (fs2 + s) / (fs2 - s);
}

}  // namespace

BiquadCascade design_butterworth_bandpass(int order, double low_hz, double high_hz, double fs) {
    if (order < 1 || order > 8)
        fail(Status::invalid_argument,
             "filter order must be in [1, 8], got " + std::to_string(order));
    if (!(fs > 0.0))
        fail(Status::invalid_argument, "sampling rate must be positive, got " + format_double(fs));
    if (!(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < fs / 2.0))
        fail(Status::invalid_argument,
             "band edges must satisfy 0 < low < high < fs/2, got low=" + format_double(low_hz) +
                 " high=" + format_double(high_hz) + " fs=" + format_double(fs));

    // Prewarped analog edges, center and bandwidth.
    double fs2 = 2.0 * fs;
    double w1 = fs2 * std::tan(M_PI * low_hz / fs);
    double w2 = fs2 * std::tan(M_PI * high_hz / fs);
    double w0 = std::sqrt(w1 * w2);
    double bw = w2 - w1;

    std::vector<cplx> spoles = lp2bp_poles(prototype_poles(order), w0, bw);
    std::vector<cplx> zpoles;
    zpoles.reserve(spoles.size());
    for (const cplx& s : spoles) zpoles.push_back(bilinear_pole(s, fs2));

    // The bandpass has `order` zeros at z=+1 and `order` at z=-1, so every
    // section takes numerator (1, 0, -1).  Pair poles into second-order
    // sections: conjugate pairs stay together; any residual real poles (wide
    // bands push a conjugate pair onto the real axis) are paired by order.
    std::vector<cplx> complex_poles, real_poles;
    for (const cplx& p : zpoles) {
        if (std::abs(p.imag()) > 1e-10)
            complex_poles.push_back(p);
        else
            real_poles.emplace_back(p.real(), 0.0);
    }
    // keep one of each conjugate pair
    std::vector<cplx> upper;
    for (const cplx& p : complex_poles)
        if (p.imag() > 0.0) upper.push_back(p);
    if (upper.size() * 2 != complex_poles.size() || real_poles.size() % 2 != 0)
        fail(Status::internal, "pole pairing failed in bandpass design");

    struct RawSection {
        double a1, a2, radius2;
    };
    std::vector<RawSection> raw;
    for (const cplx& p : upper)
        raw.push_back({-2.0 * p.real(), std::norm(p), std::norm(p)});
    std::sort(real_poles.begin(), real_poles.end(),
              [](const cplx& a, const cplx& b) { return a.real() < b.real(); });
    for (size_t i = 0; i + 1 < real_poles.size(); i += 2) {
        double r1 = real_poles[i].real(), r2 = real_poles[i + 1].real();
        raw.push_back({-(r1 + r2), r1 * r2, std::max(r1 * r1, r2 * r2)});
    }
    // deterministic order: sections furthest from the unit circle first
    std::sort(raw.begin(), raw.end(), [](const RawSection& a, const RawSection& b) {
        if (a.radius2 != b.radius2) return a.radius2 < b.radius2;
        return a.a1 < b.a1;
    });

    BiquadCascade c;
    for (const RawSection& r : raw) {
        BiquadSection s;
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0;
        s.a1 = r.a1;
        s.a2 = r.a2;
        if (!(std::abs(s.a2) < 1.0) || !(std::abs(s.a1) < 1.0 + s.a2))
            fail(Status::internal, "unstable section in bandpass design: a1=" +
                                       format_double(s.a1) + " a2=" + format_double(s.a2));
        c.sections.push_back(s);
    }

    // Normalize to unit gain at the geometric center of the requested band.
    double wc = 2.0 * M_PI * std::sqrt(low_hz * high_hz) / fs;
    cplx z = std::polar(1.0, -wc);  // e^{-j wc}
    cplx h(1.0, 0.0);
    for (const BiquadSection& s : c.sections) {
        cplx num = s.b0 + s.b1 * z + s.b2 * z * z;
        cplx den = 1.0 + s.a1 * z + s.a2 * z * z;
        h *= num / den;
    }
    double mag = std::abs(h);
    if (!(mag > 0.0)) fail(Status::internal, "degenerate center-frequency response");
    c.gain = 1.0 / mag;
    return c;
}

// One causal pass through the cascade.  Each section starts from the steady
// state it would hold had its input been constant at the first sample
// forever, so a constant signal passes through with no transient at all.
std::vector<double> single_pass(const BiquadCascade& c, std::vector<double> y) {
    for (double& v : y) v *= c.gain;
    for (const BiquadSection& s : c.sections) {
        double h1 = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
        double first = y.empty() ? 0.0 : y[0];
        double z1 = (h1 - s.b0) * first;
        double z2 = (s.b2 - s.a2 * h1) * first;
        for (size_t i = 0; i < y.size(); ++i) {
            double xi = y[i];
            double yi = s.b0 * xi + z1;
            z1 = s.b1 * xi - s.a1 * yi + z2;
            z2 = s.b2 * xi - s.a2 * yi;
            y[i] = yi;
        }
    }
    return y;
}

size_t filtfilt_pad_len(const BiquadCascade& c) { return 6 * c.sections.size(); }

std::vector<double> filtfilt(const BiquadCascade& c, const std::vector<double>& x) {
    size_t pad = filtfilt_pad_len(c);
    if (x.size() <= 3 * pad)
        fail(Status::domain, "signal too short for zero-phase filtering: " +
                                 std::to_string(x.size()) + " samples, need more than " +
                                 std::to_string(3 * pad));

    // odd reflection around both endpoints
    size_t n = x.size();
    std::vector<double> padded;
    padded.reserve(n + 2 * pad);
    for (size_t k = pad; k >= 1; --k) padded.push_back(2.0 * x[0] - x[k]);
    padded.insert(padded.end(), x.begin(), x.end());
    for (size_t k = 1; k <= pad; ++k) padded.push_back(2.0 * x[n - 1] - x[n - 1 - k]);

    // Forward-backward and backward-forward chains, averaged.  The two
    // chains are mirror images of each other, which makes the result exactly
    // symmetric under time reversal instead of symmetric only up to edge
    // transients.
    std::vector<double> fb = single_pass(c, padded);
    std::reverse(fb.begin(), fb.end());
    fb = single_pass(c, std::move(fb));
    std::reverse(fb.begin(), fb.end());

    std::reverse(padded.begin(), padded.end());
    std::vector<double> bf = single_pass(c, std::move(padded));
    std::reverse(bf.begin(), bf.end());
    bf = single_pass(c, std::move(bf));

    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = 0.5 * (fb[pad + i] + bf[pad + i]);
    return out;
}

std::vector<double> fix_length(const std::vector<double>& x, size_t target_len) {
    std::vector<double> y(x.begin(), x.begin() + static_cast<long>(std::min(x.size(), target_len)));
    y.resize(target_len, 0.0);
    return y;
}

const std::vector<std::string>& lead_names() {
    static const std::vector<std::string> names = {"I",  "II", "III", "aVR", "aVL", "aVF",
                                                   "V1", "V2", "V3",  "V4",  "V5",  "V6"};
    return names;
}

int lead_index(const std::string& name) {
    const auto& names = lead_names();
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    fail(Status::invalid_argument,
         "unknown lead '" + name + "' (valid: " + join(names, " ") + ")");
}

std::vector<std::vector<double>> select_leads(const std::vector<std::vector<double>>& all_leads,
                                              const std::vector<std::string>& names) {
    if (all_leads.size() != 12)
        fail(Status::invalid_argument, "select_leads expects 12 rows, got " +
                                           std::to_string(all_leads.size()));
    std::vector<std::vector<double>> out;
    out.reserve(names.size());
    for (const std::string& name : names) out.push_back(all_leads[static_cast<size_t>(lead_index(name))]);
    return out;
}

std::vector<double> standardize(const std::vector<double>& x) {
    if (x.empty()) fail(Status::invalid_argument, "cannot standardize an empty signal");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    double sd = std::sqrt(var);
    std::vector<double> y(x.size());
    if (sd < 1e-8) return y;  // flat signal -> zeros
    for (size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) / sd;
    return y;
}

}  // namespace x3ecg::dsp
