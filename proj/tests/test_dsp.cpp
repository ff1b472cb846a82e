#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <complex>

#include "doctest.h"
#include "dsp.hpp"

using namespace x3ecg;

namespace {

// Independent oracle: evaluate the cascade's frequency response by direct
// complex polynomial evaluation at z = e^{j 2 pi f / fs}.
std::complex<double> response(const dsp::BiquadCascade& c, double freq_hz, double fs) {
    std::complex<double> z = std::polar(1.0, -2.0 * M_PI * freq_hz / fs);
    std::complex<double> h(c.gain, 0.0);
    for (const auto& s : c.sections) {
        std::complex<double> num = s.b0 + (s.b1 + s.b2 * z) * z;
        std::complex<double> den = 1.0 + (s.a1 + s.a2 * z) * z;
        h *= num / den;
    }
    return h;
}

double gain_at(const dsp::BiquadCascade& c, double freq_hz, double fs) {
    return std::abs(response(c, freq_hz, fs));
}

std::vector<double> sine(double freq_hz, double fs, size_t n, double amp = 1.0) {
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * M_PI * freq_hz * i / fs);
    return x;
}

double rms(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s / x.size());
}

std::vector<double> random_signal(uint64_t seed, size_t n) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    return x;
}

}  // namespace

TEST_CASE("bandpass design hits the analytic response oracle") {
    auto c = dsp::design_butterworth_bandpass(3, 1.0, 47.0, 500.0);
    double center = std::sqrt(1.0 * 47.0);
    double g = gain_at(c, center, 500.0);
    CHECK(g >= 0.99);
    CHECK(g <= 1.0 + 1e-9);
    CHECK(gain_at(c, 0.0, 500.0) < 1e-6);

    auto c2 = dsp::design_butterworth_bandpass(1, 10.0, 20.0, 100.0);
    double g2 = gain_at(c2, std::sqrt(10.0 * 20.0), 100.0);
    CHECK(g2 >= 0.999);
    CHECK(g2 <= 1.0 + 1e-9);
}

TEST_CASE("bandpass design rejects bad parameters") {
    CHECK_THROWS_AS(dsp::design_butterworth_bandpass(0, 1.0, 47.0, 500.0), Error);
    CHECK_THROWS_AS(dsp::design_butterworth_bandpass(9, 1.0, 47.0, 500.0), Error);
    CHECK_THROWS_AS(dsp::design_butterworth_bandpass(3, 47.0, 1.0, 500.0), Error);
    CHECK_THROWS_AS(dsp::design_butterworth_bandpass(3, 0.0, 47.0, 500.0), Error);
    CHECK_THROWS_AS(dsp::design_butterworth_bandpass(3, 1.0, 250.0, 500.0), Error);
    try {
        dsp::design_butterworth_bandpass(3, -2.0, 47.0, 500.0);
        FAIL("unreachable");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("-2") != std::string::npos);
    }
}

TEST_CASE("every designed section is stable across a grid") {
    for (int order = 1; order <= 4; ++order) {
        for (auto [lo, hi] : {std::pair{0.5, 40.0}, {1.0, 47.0}, {5.0, 15.0}, {10.0, 20.0}}) {
            for (double fs : {250.0, 500.0}) {
                auto c = dsp::design_butterworth_bandpass(order, lo, hi, fs);
                CHECK(c.sections.size() == static_cast<size_t>(order));
                for (const auto& s : c.sections) {
                    CHECK(std::abs(s.a2) < 1.0);
                    CHECK(std::abs(s.a1) < 1.0 + s.a2);
                }
            }
        }
    }
}

TEST_CASE("stopband gain decreases monotonically above the upper edge") {
    for (int order : {1, 3}) {
        auto c = dsp::design_butterworth_bandpass(order, 1.0, 47.0, 500.0);
        double prev = gain_at(c, 48.0, 500.0);
        for (double f = 49.0; f <= 249.0; f += 1.0) {
            double g = gain_at(c, f, 500.0);
            CHECK(g < prev);
            prev = g;
        }
    }
}

TEST_CASE("filtfilt kills DC") {
    auto c = dsp::design_butterworth_bandpass(3, 1.0, 47.0, 500.0);
    std::vector<double> x(5000, 5.0);
    auto y = dsp::filtfilt(c, x);
    REQUIRE(y.size() == x.size());
    double peak = 0.0;
    for (double v : y) peak = std::max(peak, std::abs(v));
    CHECK(peak < 1e-3);
}

TEST_CASE("filtfilt keeps an impulse in place") {
    auto c = dsp::design_butterworth_bandpass(3, 1.0, 47.0, 500.0);
    std::vector<double> x(5000, 0.0);
    x[2500] = 1.0;
    auto y = dsp::filtfilt(c, x);
    size_t argmax = 0;
    for (size_t i = 1; i < y.size(); ++i)
        if (std::abs(y[i]) > std::abs(y[argmax])) argmax = i;
    CHECK(std::abs(static_cast<long>(argmax) - 2500L) <= 1);
}

TEST_CASE("filtfilt passband gain matches |H|^2") {
    auto c = dsp::design_butterworth_bandpass(3, 1.0, 47.0, 500.0);
    auto x = sine(10.0, 500.0, 5000);
    auto y = dsp::filtfilt(c, x);
    double ratio = rms(y) / rms(x);
    CHECK(ratio >= 0.93);
    CHECK(ratio <= 1.01);
    double h = gain_at(c, 10.0, 500.0);
    CHECK(std::abs(ratio - h * h) < 0.01);
}

TEST_CASE("filtfilt attenuates 100 Hz hard") {
    auto c = dsp::design_butterworth_bandpass(3, 1.0, 47.0, 500.0);
    auto x = sine(100.0, 500.0, 5000);
    auto y = dsp::filtfilt(c, x);
    // 100 Hz spans exactly 1000 cycles here, so the quadrature projection
    // isolates the tone from edge transients
    auto amp = [](const std::vector<double>& v) {
        double s = 0.0, co = 0.0;
        for (size_t i = 0; i < v.size(); ++i) {
            double ph = 2.0 * M_PI * 100.0 * static_cast<double>(i) / 500.0;
            s += v[i] * std::sin(ph);
            co += v[i] * std::cos(ph);
        }
        return 2.0 / static_cast<double>(v.size()) * std::sqrt(s * s + co * co);
    };
    CHECK(amp(y) / amp(x) < 0.05);
}

TEST_CASE("filtfilt is linear") {
    auto c = dsp::design_butterworth_bandpass(3, 1.0, 47.0, 500.0);
    auto x = random_signal(101, 2000);
    auto z = random_signal(102, 2000);
    double a = 1.7, b = -0.6;
    std::vector<double> mix(2000);
    for (size_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * z[i];
    auto ym = dsp::filtfilt(c, mix);
    auto yx = dsp::filtfilt(c, x);
    auto yz = dsp::filtfilt(c, z);
    double scale = 0.0;
    for (double v : ym) scale = std::max(scale, std::abs(v));
    for (size_t i = 0; i < mix.size(); ++i)
        CHECK(std::abs(ym[i] - (a * yx[i] + b * yz[i])) <= 1e-9 * scale);
}

TEST_CASE("filtfilt commutes with time reversal") {
    auto c = dsp::design_butterworth_bandpass(3, 1.0, 47.0, 500.0);
    auto x = random_signal(103, 1500);
    auto forward = dsp::filtfilt(c, x);
    std::vector<double> rev(x.rbegin(), x.rend());
    auto back = dsp::filtfilt(c, rev);
    std::reverse(back.begin(), back.end());
    double scale = 0.0;
    for (double v : forward) scale = std::max(scale, std::abs(v));
    for (size_t i = 0; i < x.size(); ++i) CHECK(std::abs(forward[i] - back[i]) <= 1e-9 * scale);
}

TEST_CASE("filtfilt rejects too-short signals") {
    auto c = dsp::design_butterworth_bandpass(3, 1.0, 47.0, 500.0);
    size_t pad = dsp::filtfilt_pad_len(c);
    CHECK(pad == 18);
    std::vector<double> short_x(3 * pad, 1.0);
    CHECK_THROWS_AS(dsp::filtfilt(c, short_x), Error);
    std::vector<double> ok_x(3 * pad + 1, 1.0);
    CHECK_NOTHROW(dsp::filtfilt(c, ok_x));
}

TEST_CASE("fix_length truncates, pads, and is idempotent") {
    std::vector<double> six(6000);
    for (size_t i = 0; i < six.size(); ++i) six[i] = 0.25 * i;
    auto t = dsp::fix_length(six, 5000);
    REQUIRE(t.size() == 5000);
    CHECK(std::equal(t.begin(), t.end(), six.begin()));

    std::vector<double> three(3000, 1.25);
    auto p = dsp::fix_length(three, 5000);
    REQUIRE(p.size() == 5000);
    CHECK(std::equal(p.begin(), p.begin() + 3000, three.begin()));
    for (size_t i = 3000; i < 5000; ++i) CHECK(p[i] == 0.0);

    auto same = dsp::fix_length(p, 5000);
    CHECK(same == p);
    CHECK(dsp::fix_length(dsp::fix_length(six, 5000), 5000) == t);
}

TEST_CASE("select_leads maps the standard 12-lead order") {
    std::vector<std::vector<double>> all(12, std::vector<double>(10));
    for (int r = 0; r < 12; ++r) std::fill(all[r].begin(), all[r].end(), static_cast<double>(r));
    auto picked = dsp::select_leads(all, {"I", "II", "V1"});
    REQUIRE(picked.size() == 3);
    CHECK(picked[0][0] == 0.0);
    CHECK(picked[1][0] == 1.0);
    CHECK(picked[2][0] == 6.0);

    auto one = dsp::select_leads(all, {"I"});
    REQUIRE(one.size() == 1);
    CHECK(one[0] == all[0]);

    try {
        dsp::select_leads(all, {"V9"});
        FAIL("unreachable");
    } catch (const Error& e) {
        std::string msg = e.what();
        CHECK(msg.find("V9") != std::string::npos);
        CHECK(msg.find("aVR") != std::string::npos);
    }
    std::vector<std::vector<double>> short_matrix(3, std::vector<double>(10));
    CHECK_THROWS_AS(dsp::select_leads(short_matrix, {"I"}), Error);
}

TEST_CASE("standardize zero-means and unit-scales") {
    auto y = dsp::standardize({1.0, 2.0, 3.0, 4.0});
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= y.size();
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= y.size();
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
}

TEST_CASE("standardize maps constants to zeros and ignores units") {
    auto flat = dsp::standardize(std::vector<double>(100, 3.7));
    for (double v : flat) CHECK(v == 0.0);

    auto x = random_signal(104, 500);
    std::vector<double> scaled(x);
    for (double& v : scaled) v *= 1000.0;
    auto a = dsp::standardize(x);
    auto b = dsp::standardize(scaled);
    for (size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9);
}
