#include "common.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <random>

namespace x3ecg {

std::string task_name(Task t) { return t == Task::multi_class ? "multi-class" : "multi-label"; }

Task parse_task(const std::string& s) {
    if (s == "multi-class") return Task::multi_class;
    if (s == "multi-label") return Task::multi_label;
    fail(Status::format, "unknown task '" + s + "' (expected multi-class or multi-label)");
}

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

uint64_t Rng::seed_mix(uint64_t s) {
    // splitmix64 step so that nearby seeds give unrelated streams
    s += 0x9e3779b97f4a7c15ULL;
    s = (s ^ (s >> 30)) * 0xbf58476d1ce4e5b9ULL;
    s = (s ^ (s >> 27)) * 0x94d049bb133111ebULL;
    return s ^ (s >> 31);
}

uint64_t Rng::derive(uint64_t seed, uint64_t stream) { return seed_mix(seed_mix(seed) + stream); }

uint64_t Rng::next_u64() {
    // mt19937_64 has a standard-pinned sequence, which keeps stored corpora
    // reproducible across toolchains.
    return engine_();
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

int64_t Rng::uniform_int(int64_t n) {
    if (n <= 0) fail(Status::invalid_argument, "uniform_int needs n > 0");
    // modulo with rejection to stay unbiased
    uint64_t un = static_cast<uint64_t>(n);
    uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<int64_t>(x % un);
}

// ---------------------------------------------------------------------------
// strings
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::optional<double> parse_double(const std::string& s) {
    std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) return std::nullopt;
    return v;
}

std::optional<int64_t> parse_int(const std::string& s) {
    std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    int64_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) return std::nullopt;
    return v;
}

std::optional<bool> parse_bool(const std::string& s) {
    std::string t = lower(trim(s));
    if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
    if (t == "0" || t == "false" || t == "no" || t == "off") return false;
    return std::nullopt;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    double back = std::strtod(buf, nullptr);
    if (back == v) {
        // try shorter forms that still round-trip
        for (int prec = 1; prec < 17; ++prec) {
            char b2[64];
            std::snprintf(b2, sizeof b2, "%.*g", prec, v);
            if (std::strtod(b2, nullptr) == v) return b2;
        }
    }
    return buf;
}

}  // namespace x3ecg
