#pragma once

#include <array>
#include <optional>
#include <string>

#include "common.hpp"

namespace x3ecg::demog {

enum class Gender { male, female };

struct Demographics {
    std::optional<double> age;     // years
    std::optional<Gender> gender;  // absent = missing / unrecognized
};

// Age bins: [0,5) [5,15) [15,23) [23,42) [42,57) [57,69) [69,inf); index 7
// means missing.  Valid ages are 0..130.
int age_group(std::optional<double> age);

constexpr int kVectorLen = 11;

// One-hot layout: [age group 0..6, age missing, male, female, gender missing].
// Exactly one age bit and one gender bit are set.
std::array<double, kVectorLen> encode(const Demographics& d);

// Manifest tokens: m/male -> male, f/female -> female (case-insensitive),
// anything else -> missing.
std::optional<Gender> parse_gender(const std::string& token);

}  // namespace x3ecg::demog
