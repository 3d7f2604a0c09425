#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "povsim/rng.hpp"

using namespace povsim;

TEST_CASE("mix64 is injective on a sample and not identity") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t x = 0; x < 4096; ++x) seen.insert(mix64(x));
    CHECK(seen.size() == 4096);
    CHECK(mix64(1) != 1);
}

TEST_CASE("derive_seed separates streams and indices") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 1; s <= 8; ++s)
        for (std::uint64_t i = 0; i < 512; ++i) seen.insert(derive_seed(99, s, i));
    CHECK(seen.size() == 8 * 512);
    CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
    CHECK(derive_seed(1, 2, pack_index(4, 5)) != derive_seed(1, 2, pack_index(5, 4)));
}

TEST_CASE("rng is deterministic per seed") {
    Rng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 64; ++i) {
        const double x = a.uniform();
        all_equal = all_equal && (x == b.uniform());
        any_diff = any_diff || (x != c.uniform());
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform stays in range with the right mean") {
    Rng r(7);
    double sum = 0.0;
    for (int i = 0; i < 50000; ++i) {
        const double x = r.uniform();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
        sum += x;
    }
    CHECK(std::abs(sum / 50000 - 0.5) < 0.01);
    for (int i = 0; i < 1000; ++i) {
        const double x = r.uniform(2.0, 5.0);
        REQUIRE(x >= 2.0);
        REQUIRE(x < 5.0);
    }
}

TEST_CASE("uniform_int covers its support uniformly") {
    Rng r(11);
    std::vector<int> hits(6, 0);
    for (int i = 0; i < 60000; ++i) {
        const int k = r.uniform_int(6);
        REQUIRE(k >= 0);
        REQUIRE(k < 6);
        ++hits[static_cast<std::size_t>(k)];
    }
    for (int h : hits) CHECK(std::abs(h - 10000) < 500);
    Rng one(3);
    for (int i = 0; i < 50; ++i) CHECK(one.uniform_int(1) == 0);
    CHECK_THROWS_AS(r.uniform_int(0), std::invalid_argument);
}

TEST_CASE("normal matches its first two moments") {
    Rng r(5);
    const int n = 50000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal(10.0, 1.0);
        sum += x;
        sq += (x - 10.0) * (x - 10.0);
    }
    CHECK(std::abs(sum / n - 10.0) < 0.05);
    CHECK(std::abs(std::sqrt(sq / n) - 1.0) < 0.05);
}

TEST_CASE("poisson matches its rate") {
    Rng r(9);
    const int n = 30000;
    long sum = 0;
    for (int i = 0; i < n; ++i) sum += r.poisson(10.0);
    CHECK(std::abs(static_cast<double>(sum) / n - 10.0) < 0.15);
    for (int i = 0; i < 20; ++i) CHECK(r.poisson(0.0) == 0);
    CHECK_THROWS_AS(r.poisson(-1.0), std::invalid_argument);
}
