#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "groklab/dataset.hpp"

using namespace groklab;

TEST_CASE("modular task enumerates all pairs in order", "[dataset]") {
    const ModTask task = generate(53);
    REQUIRE(task.size() == 2809);
    // lexicographic order
    REQUIRE(task.pairs[0].lhs == 0);
    REQUIRE(task.pairs[0].rhs == 0);
    REQUIRE(task.pairs[0].label == 0);
    const Example& e = task.pairs[5 * 53 + 50];
    REQUIRE(e.lhs == 5);
    REQUIRE(e.rhs == 50);
    REQUIRE(e.label == 2);
}

TEST_CASE("labels match a brute-force recomputation", "[dataset]") {
    for (int p : {2, 7, 12, 53}) {
        const ModTask task = generate(p);
        REQUIRE(task.size() == static_cast<std::size_t>(p) * static_cast<std::size_t>(p));
        std::set<std::pair<int, int>> seen;
        for (const Example& e : task.pairs) {
            REQUIRE(e.label == (e.lhs + e.rhs) % p);
            REQUIRE(seen.insert({e.lhs, e.rhs}).second);
        }
    }
}

TEST_CASE("generate rejects tiny moduli", "[dataset]") {
    REQUIRE_THROWS_AS(generate(1), Error);
    REQUIRE_THROWS_AS(generate(0), Error);
    REQUIRE_THROWS_AS(generate(-5), Error);
}

TEST_CASE("split is a partition obeying the floor rule", "[dataset]") {
    const ModTask task = generate(53);
    RngStream rng(1234, "split");
    const Split split = make_split(task, 0.5, rng);
    REQUIRE(split.train.size() == 1404);
    REQUIRE(split.test.size() == 1405);
    REQUIRE(split.fraction == 0.5);
    REQUIRE(split.seed == 1234);

    std::set<std::uint32_t> all(split.train.begin(), split.train.end());
    for (std::uint32_t idx : split.test) {
        REQUIRE(all.insert(idx).second); // no overlap
    }
    REQUIRE(all.size() == 2809);
    REQUIRE(*all.rbegin() == 2808);
}

TEST_CASE("split sizes follow floor for assorted fractions", "[dataset]") {
    const ModTask task = generate(11);
    for (double fraction : {0.1, 0.3, 0.5, 0.77, 0.9}) {
        RngStream rng(7, "split");
        const Split split = make_split(task, fraction, rng);
        const auto expected = static_cast<std::size_t>(fraction * 121.0);
        REQUIRE(split.train.size() == expected);
        REQUIRE(split.train.size() + split.test.size() == 121);
    }
}

TEST_CASE("split is deterministic in the seed", "[dataset]") {
    const ModTask task = generate(29);
    RngStream a(99, "split");
    RngStream b(99, "split");
    const Split sa = make_split(task, 0.5, a);
    const Split sb = make_split(task, 0.5, b);
    REQUIRE(sa.train == sb.train);
    REQUIRE(sa.test == sb.test);

    RngStream c(100, "split");
    const Split sc = make_split(task, 0.5, c);
    REQUIRE(sa.train != sc.train);
}

TEST_CASE("split rejects out-of-range fractions", "[dataset]") {
    const ModTask task = generate(5);
    for (double bad : {0.0, 1.0, -0.25, 1.5}) {
        RngStream rng(1, "split");
        REQUIRE_THROWS_AS(make_split(task, bad, rng), Error);
    }
}
