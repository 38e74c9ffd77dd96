#include "doctest.h"

#include <cmath>
#include <set>

#include "pufkit/rng.hpp"

using namespace pufkit;

TEST_CASE("stream is deterministic for a given key") {
    rng::Stream a(rng::stream_key(42, rng::Domain::process_deviation, {1, 2}));
    rng::Stream b(rng::stream_key(42, rng::Domain::process_deviation, {1, 2}));
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
}

TEST_CASE("distinct key fields give distinct streams") {
    std::set<std::uint64_t> keys;
    for (std::uint64_t seed : {0ull, 1ull, 42ull}) {
        for (std::uint64_t a = 0; a < 8; ++a) {
            for (std::uint64_t b = 0; b < 8; ++b) {
                keys.insert(rng::stream_key(seed, rng::Domain::measurement_noise, {a, b}));
                keys.insert(rng::stream_key(seed, rng::Domain::process_deviation, {a, b}));
            }
        }
    }
    CHECK(keys.size() == 3 * 8 * 8 * 2);  // no collisions across domains/fields
}

TEST_CASE("unit draws stay in [0,1)") {
    rng::Stream s(rng::stream_key(7, rng::Domain::info_bits, {}));
    for (int i = 0; i < 10000; ++i) {
        const double u = s.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal draws have the right first two moments") {
    rng::Stream s(rng::stream_key(123, rng::Domain::measurement_noise, {}));
    const int n = 200000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = s.next_normal();
        sum += z;
        sum_sq += z * z;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("next_below covers the whole range") {
    rng::Stream s(rng::stream_key(9, rng::Domain::pair_matching, {}));
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t v = s.next_below(8);
        CHECK(v < 8);
        seen.insert(v);
    }
    CHECK(seen.size() == 8);
}
