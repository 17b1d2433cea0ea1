#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "groklab/rng.hpp"

using namespace groklab;

TEST_CASE("identical seed and label replay the exact byte sequence", "[rng]") {
    RngStream a(42, "dropout.epoch450");
    RngStream b(42, "dropout.epoch450");
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(a.next_u64() == b.next_u64());
    }
}

TEST_CASE("distinct labels from one master seed decorrelate", "[rng]") {
    RngStream a(42, "init.embedding");
    RngStream b(42, "init.w1");
    int equal = 0;
    for (int i = 0; i < 64; ++i) {
        if (a.next_u64() == b.next_u64()) {
            ++equal;
        }
    }
    REQUIRE(equal == 0);
}

TEST_CASE("unit draws live in [0, 1)", "[rng]") {
    RngStream rng(7, "test.unit");
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_unit();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("normal draws are deterministic including the cached spare", "[rng]") {
    RngStream a(9, "test.normal");
    std::vector<double> first;
    for (int i = 0; i < 101; ++i) {
        first.push_back(a.normal(0.0, 1.0));
    }
    RngStream b(9, "test.normal");
    for (int i = 0; i < 101; ++i) {
        REQUIRE(first[static_cast<std::size_t>(i)] == b.normal(0.0, 1.0));
    }
}

TEST_CASE("normal moments are close to the request", "[rng]") {
    RngStream rng(13, "test.normal.moments");
    const int n = 100000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal(0.5, 2.0);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(0.5, 0.03));
    REQUIRE(std::fabs(std::sqrt(var) - 2.0) / 2.0 < 0.02);
}

TEST_CASE("next_below is bounded and rejects zero", "[rng]") {
    RngStream rng(17, "test.below");
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(rng.next_below(10) < 10);
    }
    REQUIRE_THROWS_AS(rng.next_below(0), Error);
}
