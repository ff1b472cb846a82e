#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace x3ecg {

// Error taxonomy shared with the C API / CLI exit-code mapping:
// usage + io -> exit 2, everything else nonzero -> exit 1.
enum class Status {
    ok = 0,
    invalid_argument,  // caller passed bad parameters or config
    io,                // missing/unreadable/unwritable files
    format,            // file exists but contents are malformed
    domain,            // data-dependent failure (divergence, skipped files, ...)
    internal,
};

class Error : public std::runtime_error {
public:
    Error(Status code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Status code() const { return code_; }

private:
    Status code_;
};

[[noreturn]] inline void fail(Status code, const std::string& msg) { throw Error(code, msg); }

enum class Task { multi_class, multi_label };

std::string task_name(Task t);
Task parse_task(const std::string& s);

// A single-channel signal plus its sampling rate.
struct SignalBuffer {
    std::vector<double> samples;
    int fs = 0;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 gives a portable bit stream; the uniform /
// normal transforms are written out here instead of using std::*_distribution
// so the draw sequence is identical on every platform and compiler.
// ---------------------------------------------------------------------------
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed_mix(seed)) {}

    uint64_t next_u64();
    double uniform();                 // [0, 1)
    double uniform(double lo, double hi);
    double normal();                  // standard normal, Box-Muller
    int64_t uniform_int(int64_t n);   // [0, n)

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(static_cast<int64_t>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent stream, e.g. per lead or per round.
    static uint64_t derive(uint64_t seed, uint64_t stream);

private:
    static uint64_t seed_mix(uint64_t s);
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Small string / parsing helpers used by manifest + config code.
// ---------------------------------------------------------------------------
std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
std::string join(const std::vector<std::string>& parts, const std::string& sep);
std::string lower(const std::string& s);

std::optional<double> parse_double(const std::string& s);
std::optional<int64_t> parse_int(const std::string& s);
std::optional<bool> parse_bool(const std::string& s);

std::string format_double(double v);  // shortest round-trip representation

}  // namespace x3ecg
