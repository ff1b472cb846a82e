#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "demographics.hpp"
#include "doctest.h"

using namespace x3ecg;
using demog::Demographics;
using demog::Gender;

TEST_CASE("age bins follow the seven half-open groups") {
    CHECK(demog::age_group(30.0) == 3);
    CHECK(demog::age_group(4.9) == 0);
    CHECK(demog::age_group(5.0) == 1);
    CHECK(demog::age_group(std::nullopt) == 7);

    // one probe on each side of every boundary
    CHECK(demog::age_group(0.0) == 0);
    CHECK(demog::age_group(14.5) == 1);
    CHECK(demog::age_group(15.0) == 2);
    CHECK(demog::age_group(22.5) == 2);
    CHECK(demog::age_group(23.0) == 3);
    CHECK(demog::age_group(41.5) == 3);
    CHECK(demog::age_group(42.0) == 4);
    CHECK(demog::age_group(56.5) == 4);
    CHECK(demog::age_group(57.0) == 5);
    CHECK(demog::age_group(68.5) == 5);
    CHECK(demog::age_group(69.0) == 6);
    CHECK(demog::age_group(130.0) == 6);

    CHECK_THROWS_AS(demog::age_group(-1.0), Error);
}

TEST_CASE("encode sets one age bit and one gender bit") {
    auto bits = demog::encode({72.9, Gender::male});
    REQUIRE(bits.size() == 11);
    for (int i = 0; i < 11; ++i) CHECK(bits[i] == ((i == 6 || i == 8) ? 1.0 : 0.0));

    bits = demog::encode({std::nullopt, std::nullopt});
    for (int i = 0; i < 11; ++i) CHECK(bits[i] == ((i == 7 || i == 10) ? 1.0 : 0.0));

    bits = demog::encode({0.0, Gender::female});
    for (int i = 0; i < 11; ++i) CHECK(bits[i] == ((i == 0 || i == 9) ? 1.0 : 0.0));
}

TEST_CASE("exhaustive sweep: every vector is a valid two-hot encoding") {
    int prev_group = 0;
    for (double age = 0.0; age <= 130.0; age += 0.5) {
        int g = demog::age_group(age);
        CHECK(g >= prev_group);  // monotone in age
        prev_group = g;
        for (int gender = 0; gender < 3; ++gender) {
            Demographics d;
            d.age = age;
            if (gender == 0) d.gender = Gender::male;
            if (gender == 1) d.gender = Gender::female;
            auto bits = demog::encode(d);
            double sum = 0.0;
            for (double b : bits) {
                CHECK((b == 0.0 || b == 1.0));
                sum += b;
            }
            CHECK(sum == 2.0);
            double age_sum = 0.0, gender_sum = 0.0;
            for (int i = 0; i < 8; ++i) age_sum += bits[i];
            for (int i = 8; i < 11; ++i) gender_sum += bits[i];
            CHECK(age_sum == 1.0);
            CHECK(gender_sum == 1.0);
        }
    }
}

TEST_CASE("gender tokens parse case-insensitively, junk maps to missing") {
    CHECK(demog::parse_gender("m") == Gender::male);
    CHECK(demog::parse_gender("MALE") == Gender::male);
    CHECK(demog::parse_gender("f") == Gender::female);
    CHECK(demog::parse_gender("Female") == Gender::female);
    CHECK(!demog::parse_gender("").has_value());
    CHECK(!demog::parse_gender("x").has_value());
    CHECK(!demog::parse_gender("unknown").has_value());
}
