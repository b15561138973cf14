#include <doctest.h>

#include <cstdint>
#include <vector>

#include "permpoint/counting.hpp"
#include "permpoint/errors.hpp"

using namespace permpoint;

namespace {

// Independent oracle: sum over unordered partitions of n into exactly l
// positive parts of (ways to assign sizes to labeled values) * (ways to
// assign slots to blocks). Built from multinomials only.
BigCount surjections_by_partitions(unsigned n, unsigned l) {
    BigCount total{0};
    std::vector<unsigned> parts;
    // Enumerate non-increasing partitions recursively.
    auto recurse = [&](auto&& self, unsigned remaining, unsigned max_part,
                       unsigned slots_left) -> void {
        if (slots_left == 0) {
            if (remaining != 0) return;
            // multinomial n! / prod(parts!) via successive binomials
            BigCount ways{1};
            unsigned rem = n;
            for (unsigned p : parts) {
                ways = ways * binomial(rem, p);
                rem -= p;
            }
            // assign sizes to the l labeled values: l! / prod(mult_v!)
            BigCount assign{1};
            unsigned rem_l = l;
            for (std::size_t i = 0; i < parts.size();) {
                std::size_t j = i;
                while (j < parts.size() && parts[j] == parts[i]) ++j;
                assign = assign * binomial(rem_l, static_cast<unsigned>(j - i));
                rem_l -= static_cast<unsigned>(j - i);
                i = j;
            }
            total += ways * assign;
            return;
        }
        for (unsigned p = std::min(max_part, remaining); p >= 1; --p) {
            if (remaining - p > (slots_left - 1) * p) continue;  // cannot fill
            if (remaining < p + (slots_left - 1)) continue;      // parts must be >= 1
            parts.push_back(p);
            self(self, remaining - p, p, slots_left - 1);
            parts.pop_back();
        }
    };
    recurse(recurse, n, n, l);
    return total;
}

}  // namespace

TEST_CASE("BigCount: arithmetic and decimal rendering") {
    CHECK(factorial(0).to_string() == "1");
    CHECK(factorial(5).to_string() == "120");
    CHECK(factorial(20).to_string() == "2432902008176640000");
    CHECK(factorial(30).to_string() == "265252859812191058636308480000000");
    CHECK((BigCount{1000000007} * BigCount{998244353}).to_string() ==
          "998244359987710471");
    BigCount a = factorial(25);
    BigCount b = a - factorial(24);
    CHECK(b == factorial(24) * BigCount{24});
    CHECK(BigCount::gcd(factorial(10), factorial(7)) == factorial(7));
    CHECK_THROWS_AS(BigCount{3} -= BigCount{5}, DomainError);
}

TEST_CASE("binomial: basic values") {
    CHECK(binomial(4, 1).to_u64() == 4);
    CHECK(binomial(4, 2).to_u64() == 6);
    CHECK(binomial(10, 5).to_u64() == 252);
    CHECK(binomial(3, 5).is_zero());
    CHECK(binomial(10000, 3).to_string() == "166616670000");
}

TEST_CASE("surjection_count: bijections, collapse, and the 2^4 maps") {
    CHECK(surjection_count(4, 4) == factorial(4));
    CHECK(surjection_count(7, 7) == factorial(7));
    CHECK(surjection_count(3, 1).to_u64() == 1);
    // All 2^4 maps, minus the two constant maps.
    CHECK(surjection_count(4, 2).to_u64() == 14);
    CHECK_THROWS_AS(surjection_count(3, 4), DomainError);
}

TEST_CASE("surjection_count: matches the partition-sum oracle") {
    for (unsigned n = 1; n <= 9; ++n)
        for (unsigned l = 1; l <= n; ++l)
            CHECK(surjection_count(n, l) == surjections_by_partitions(n, l));
}

TEST_CASE("enumerate_points_bruteforce: small exact values") {
    CHECK(enumerate_points_bruteforce(5, 1).to_u64() == 240);  // 2 * 5!
    CHECK(enumerate_points_bruteforce(4, 2).to_u64() == 14);
    CHECK(enumerate_points_bruteforce(6, 3).to_u64() == 540);
    CHECK_THROWS_AS(enumerate_points_bruteforce(10, 1), DomainError);
}

TEST_CASE("global_minima_count: products of factorials") {
    CHECK(global_minima_count({5}).to_u64() == 120);
    CHECK(global_minima_count({3, 3}).to_u64() == 36);
    CHECK(global_minima_count({1}).to_u64() == 1);
}

TEST_CASE("ratio_formula: closed forms for K = 1, 2, 3") {
    CHECK(ratio_formula(1, 5) == Ratio::make(2, 1));
    CHECK(ratio_formula(2, 4) == Ratio::make(7, 12));
    CHECK(ratio_formula(3, 6) == Ratio::make(3, 4));
    CHECK_THROWS_AS(ratio_formula(3, 5), DomainError);
}

TEST_CASE("ratio_formula: cross-checked against surjection counts") {
    CHECK(Ratio::make(surjection_count(4, 2), factorial(4)) == ratio_formula(2, 4));
    CHECK(Ratio::make(surjection_count(6, 3), factorial(6)) == ratio_formula(3, 6));
    CHECK(Ratio::make(surjection_count(8, 4), factorial(8)) == ratio_formula(4, 8));
}

TEST_CASE("ratio_formula times n! equals the brute-force enumeration") {
    for (unsigned n = 2; n <= 9; ++n) {
        for (unsigned K = 1; 2 * K <= n; ++K) {
            Ratio r = ratio_formula(K, n);
            BigCount lhs = r.num * factorial(n);
            BigCount rhs = enumerate_points_bruteforce(n, K) * r.den;
            CHECK(lhs == rhs);
        }
    }
}

TEST_CASE("lower_bound: values and tightness at K = 1") {
    CHECK(lower_bound(2, 6) == Ratio::make(3, 2));
    CHECK(lower_bound(2, 4) == Ratio::make(1, 4));
    for (unsigned n = 2; n <= 9; ++n) {
        CHECK(lower_bound(1, n) == ratio_formula(1, n));
        for (unsigned K = 1; 2 * K <= n; ++K) {
            CHECK(lower_bound(K, n) <= ratio_formula(K, n));
            if (K > 1 && n > 2 * K)
                CHECK(!(lower_bound(K, n) == ratio_formula(K, n)));
        }
    }
}

TEST_CASE("multilayer_ratio_sum: sums per-layer bounds") {
    CHECK(multilayer_ratio_sum({5, 5}, 1) == Ratio::make(4, 1));
    CHECK(multilayer_ratio_sum({8}, 1) == lower_bound(1, 8));
    CHECK(multilayer_ratio_sum({4, 6}, 2) == Ratio::make(7, 4));
    CHECK_THROWS_AS(multilayer_ratio_sum({4, 3}, 2), DomainError);
}

TEST_CASE("asymptotic_check: ratio approaches one") {
    auto k1 = asymptotic_check(1, 10000);
    CHECK(k1.ratio == doctest::Approx(0.9999).epsilon(1e-6));
    auto k3 = asymptotic_check(3, 10000);
    CHECK(std::abs(k3.ratio - 1.0) < 0.01);

    auto tiny = asymptotic_check(1, 2);
    CHECK(tiny.exact == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tiny.limit == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tiny.ratio == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("asymptotic_check: exact values match the rational path") {
    for (unsigned n : {6u, 12u, 40u, 100u}) {
        for (unsigned K = 1; K <= 3 && 2 * K <= n; ++K) {
            auto a = asymptotic_check(K, n);
            CHECK(a.exact ==
                  doctest::Approx(lower_bound(K, n).to_double()).epsilon(1e-12));
        }
    }
}

TEST_CASE("asymptotic_check: ratio is monotone in n for fixed K") {
    for (unsigned K = 1; K <= 3; ++K) {
        double last = 0.0;
        for (std::uint64_t n = 2 * K; n <= 10000; n = n * 3 / 2 + 1) {
            double r = asymptotic_check(K, n).ratio;
            CHECK(r >= last);
            last = r;
        }
    }
}
