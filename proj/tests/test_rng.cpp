#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "singulate/rng.hpp"

using namespace singulate;

TEST_CASE("splitmix64 matches the reference sequence for state 0") {
    std::uint64_t s = 0;
    CHECK(splitmix64(s) == 0xe220a8397b1dcdafull);
    CHECK(splitmix64(s) == 0x6e789e6aa1b965f4ull);
    CHECK(splitmix64(s) == 0x06c45d188009454full);
}

TEST_CASE("derive_seed separates streams and stays deterministic") {
    CHECK(derive_seed(42, 0) == derive_seed(42, 0));
    CHECK(derive_seed(42, 0) != derive_seed(42, 1));
    CHECK(derive_seed(42, 0) != derive_seed(43, 0));

    std::set<std::uint64_t> seen;
    for (std::uint64_t stream = 0; stream < 1000; ++stream)
        seen.insert(derive_seed(7, stream));
    CHECK(seen.size() == 1000);
}

TEST_CASE("Rng reproduces the same sequence for the same seed") {
    Rng a(123), b(123), c(124);
    bool all_equal = true;
    bool any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        std::uint64_t va = a.next_u64();
        all_equal = all_equal && (va == b.next_u64());
        any_diff = any_diff || (va != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("Rng.uniform stays inside its bounds") {
    Rng rng(99);
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 100000; ++i) {
        double v = rng.uniform(-2.5, 7.5);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        REQUIRE(v >= -2.5);
        REQUIRE(v < 7.5);
    }
    // the sample should come close to both ends
    CHECK(lo < -2.4);
    CHECK(hi > 7.4);
}

TEST_CASE("Rng.uniform_index covers all buckets") {
    Rng rng(5);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
        auto k = rng.uniform_index(7);
        REQUIRE(k < 7);
        ++counts[k];
    }
    for (int c : counts) CHECK(c > 8000);
}

TEST_CASE("Rng.bernoulli respects degenerate probabilities") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        CHECK_FALSE(rng.bernoulli(0.0));
        CHECK(rng.bernoulli(1.0));
    }
    int hits = 0;
    for (int i = 0; i < 100000; ++i) hits += rng.bernoulli(0.25) ? 1 : 0;
    CHECK(hits > 23500);
    CHECK(hits < 26500);
}
