#include <cmath>
#include <vector>

#include "doctest.h"
#include "slopguard/dist.hpp"
#include "slopguard/errors.hpp"

using namespace slopguard;

namespace {

std::vector<weighted_token> make(std::initializer_list<std::pair<const char*, double>> init) {
    std::vector<weighted_token> out;
    int id = 0;
    for (const auto& [text, p] : init) out.push_back({text, id++, p});
    return out;
}

}  // namespace

TEST_SUITE("dist") {

TEST_CASE("renormalize rescales to unit mass") {
    auto d = make({{"a", 0.2}, {"b", 0.6}});
    renormalize(d);
    CHECK(d[0].prob == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(d[1].prob == doctest::Approx(0.75).epsilon(1e-12));
    std::vector<weighted_token> zero = make({{"a", 0.0}});
    CHECK_THROWS_AS(renormalize(zero), internal_error);
}

TEST_CASE("min_p keeps tokens at or above the scaled cutoff") {
    auto d = make({{"a", 0.5}, {"b", 0.06}, {"c", 0.04}});
    apply_min_p(d, 0.1);  // cutoff 0.05
    REQUIRE(d.size() == 2);
    CHECK(d[0].text == "a");
    CHECK(d[1].text == "b");

    auto untouched = make({{"a", 0.5}, {"b", 0.01}});
    apply_min_p(untouched, 0.0);
    CHECK(untouched.size() == 2);
}

TEST_CASE("temperature exponentiates and renormalizes") {
    auto d = make({{"a", 0.8}, {"b", 0.2}});
    apply_temperature(d, 0.5);  // p^2
    double za = 0.64, zb = 0.04;
    CHECK(d[0].prob == doctest::Approx(za / (za + zb)).epsilon(1e-12));
    CHECK(d[1].prob == doctest::Approx(zb / (za + zb)).epsilon(1e-12));

    auto same = make({{"a", 0.8}, {"b", 0.2}});
    apply_temperature(same, 1.0);
    CHECK(same[0].prob == 0.8);
}

TEST_CASE("top_k keeps the k most probable, zero disables") {
    auto d = make({{"a", 0.1}, {"b", 0.5}, {"c", 0.4}});
    apply_top_k(d, 2);
    REQUIRE(d.size() == 2);
    CHECK(d[0].text == "b");
    CHECK(d[1].text == "c");

    auto d2 = make({{"a", 0.1}, {"b", 0.5}});
    apply_top_k(d2, 0);
    CHECK(d2.size() == 2);
}

TEST_CASE("top_p keeps the smallest prefix reaching the mass") {
    auto d = make({{"a", 0.5}, {"b", 0.3}, {"c", 0.2}});
    apply_top_p(d, 0.7);
    REQUIRE(d.size() == 2);
    CHECK(d[0].text == "a");
    CHECK(d[1].text == "b");

    auto all = make({{"a", 0.5}, {"b", 0.5}});
    apply_top_p(all, 1.0);
    CHECK(all.size() == 2);
}

TEST_CASE("sort_desc breaks probability ties lexicographically") {
    auto d = make({{"zeta", 0.4}, {"alpha", 0.4}, {"mid", 0.2}});
    sort_desc(d);
    CHECK(d[0].text == "alpha");
    CHECK(d[1].text == "zeta");
    CHECK(d[2].text == "mid");
}

TEST_CASE("draw walks the cumulative distribution") {
    auto d = make({{"a", 0.25}, {"b", 0.75}});
    CHECK(draw(d, 0.0).text == "a");
    CHECK(draw(d, 0.2499).text == "a");
    CHECK(draw(d, 0.25).text == "b");
    CHECK(draw(d, 0.9999).text == "b");
    std::vector<weighted_token> empty;
    CHECK_THROWS_AS(draw(empty, 0.5), internal_error);
}

}
