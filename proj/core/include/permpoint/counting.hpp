#pragma once

// Exact combinatorics for counting merged-neuron configurations: factorials,
// binomials, surjection counts via inclusion-exclusion, the closed-form
// count ratios for orders K = 1..3, the general lower bound, and the
// large-width asymptotics. All ratios use exact rational arithmetic.

#include <cstdint>
#include <string>
#include <vector>

namespace permpoint {

// Arbitrary-precision non-negative integer. Factorials overflow 64 bits
// around n = 21, so counts are kept exact with 32-bit limbs.
class BigCount {
  public:
    BigCount() = default;
    BigCount(std::uint64_t v);  // NOLINT: implicit by design

    bool is_zero() const { return limbs_.empty(); }
    bool is_even() const;

    BigCount& operator+=(const BigCount& other);
    BigCount& operator-=(const BigCount& other);  // requires *this >= other
    BigCount operator*(const BigCount& other) const;

    friend BigCount operator+(BigCount a, const BigCount& b) { return a += b; }
    friend BigCount operator-(BigCount a, const BigCount& b) { return a -= b; }

    // -1 / 0 / +1
    int compare(const BigCount& other) const;
    bool operator==(const BigCount& other) const { return compare(other) == 0; }
    bool operator!=(const BigCount& other) const { return compare(other) != 0; }
    bool operator<(const BigCount& other) const { return compare(other) < 0; }
    bool operator<=(const BigCount& other) const { return compare(other) <= 0; }

    BigCount pow(unsigned exponent) const;
    static BigCount gcd(BigCount a, BigCount b);  // binary gcd

    // Quotient in place, returns remainder. divisor must be nonzero.
    std::uint32_t divmod_small(std::uint32_t divisor);

    double to_double() const;
    std::string to_string() const;
    // Exact value if it fits in 64 bits, otherwise throws DomainError.
    std::uint64_t to_u64() const;

  private:
    void normalize();
    void shift_right_one();
    std::vector<std::uint32_t> limbs_;  // little-endian, base 2^32
};

BigCount factorial(unsigned n);
BigCount binomial(unsigned n, unsigned k);  // 0 when k > n

// Exact non-negative rational, kept reduced.
struct Ratio {
    BigCount num;
    BigCount den{1};

    static Ratio make(BigCount num, BigCount den);  // reduces; den != 0
    Ratio operator+(const Ratio& other) const;
    bool operator==(const Ratio& other) const;
    bool operator<=(const Ratio& other) const;
    double to_double() const;
    std::string to_string() const;  // "num/den"
};

// Number of surjective maps from n labeled slots onto l labeled values,
// by inclusion-exclusion: sum_j (-1)^j C(l,j) (l-j)^n. Requires 1 <= l <= n.
BigCount surjection_count(unsigned n, unsigned l);

// Direct enumeration of all maps {1..n} -> {1..n-K}, counting the
// surjective ones. Independent of surjection_count; limited to n <= 9.
BigCount enumerate_points_bruteforce(unsigned n, unsigned K);

// Number of parameter configurations equivalent under hidden-neuron
// reindexing: prod over hidden widths of n_j!.
BigCount global_minima_count(const std::vector<unsigned>& hidden_widths);

// Ratio of order-K merged-configuration count to the count of equivalent
// minima at one layer of width n. Closed partition sums for K <= 3,
// surjection_count(n, n-K)/n! in general. Requires 2K <= n.
Ratio ratio_formula(unsigned K, unsigned n);

// C(n-K, K) / 2^K, the single-partition lower bound. Requires 2K <= n.
Ratio lower_bound(unsigned K, unsigned n);

// Sum of lower_bound over all hidden widths. Requires 2K <= min width.
Ratio multilayer_ratio_sum(const std::vector<unsigned>& hidden_widths, unsigned K);

struct AsymptoticCheck {
    double exact;  // lower_bound(K, n) as a float
    double limit;  // n^K / (2^K K!)
    double ratio;  // exact / limit, -> 1 as n grows
};

// Log-space evaluation for large n so nothing overflows.
AsymptoticCheck asymptotic_check(unsigned K, std::uint64_t n);

}  // namespace permpoint
