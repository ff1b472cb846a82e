#include "demographics.hpp"

namespace x3ecg::demog {

int age_group(std::optional<double> age) {
    if (!age) return 7;
    double a = *age;
    if (std::isnan(a) || a < 0.0 || a > 130.0)
        fail(Status::invalid_argument, "age out of range [0, 130]: " + format_double(a));
    static const double edges[] = {5.0, 15.0, 23.0, 42.0, 57.0, 69.0};
    for (int g = 0; g < 6; ++g)
        if (a < edges[g]) return g;
    return 6;
}

std::array<double, kVectorLen> encode(const Demographics& d) {
    std::array<double, kVectorLen> v{};
    v[static_cast<size_t>(age_group(d.age))] = 1.0;
    if (!d.gender)
        v[10] = 1.0;
    else
        v[*d.gender == Gender::male ? 8 : 9] = 1.0;
    return v;
}

std::optional<Gender> parse_gender(const std::string& token) {
    std::string t = lower(trim(token));
    if (t == "m" || t == "male") return Gender::male;
    if (t == "f" || t == "female") return Gender::female;
    return std::nullopt;
}

}  // namespace x3ecg::demog
