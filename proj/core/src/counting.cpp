#include "permpoint/counting.hpp"

#include <algorithm>
#include <cmath>

#include "permpoint/errors.hpp"

namespace permpoint {

BigCount::BigCount(std::uint64_t v) {
    while (v != 0) {
        limbs_.push_back(static_cast<std::uint32_t>(v & 0xFFFFFFFFull));
        v >>= 32;
    }
}

void BigCount::normalize() {
    while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
}

bool BigCount::is_even() const { return limbs_.empty() || (limbs_[0] & 1u) == 0; }

BigCount& BigCount::operator+=(const BigCount& other) {
    const std::size_t n = std::max(limbs_.size(), other.limbs_.size());
    limbs_.resize(n, 0);
    std::uint64_t carry = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t s = carry + limbs_[i] +
                          (i < other.limbs_.size() ? other.limbs_[i] : 0u);
        limbs_[i] = static_cast<std::uint32_t>(s & 0xFFFFFFFFull);
        carry = s >> 32;
    }
    if (carry) limbs_.push_back(static_cast<std::uint32_t>(carry));
    return *this;
}

BigCount& BigCount::operator-=(const BigCount& other) {
    if (compare(other) < 0)
        throw DomainError("BigCount: subtraction would be negative");
    std::int64_t borrow = 0;
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
        std::int64_t d = static_cast<std::int64_t>(limbs_[i]) - borrow -
                         (i < other.limbs_.size() ? other.limbs_[i] : 0u);
        if (d < 0) {
            d += (std::int64_t{1} << 32);
            borrow = 1;
        } else {
            borrow = 0;
        }
        limbs_[i] = static_cast<std::uint32_t>(d);
    }
    normalize();
    return *this;
}

BigCount BigCount::operator*(const BigCount& other) const {
    if (is_zero() || other.is_zero()) return BigCount{};
    BigCount out;
    out.limbs_.assign(limbs_.size() + other.limbs_.size(), 0);
    for (std::size_t i = 0; i < limbs_.size(); ++i) {
        std::uint64_t carry = 0;
        for (std::size_t j = 0; j < other.limbs_.size(); ++j) {
            std::uint64_t cur = out.limbs_[i + j] +
                                static_cast<std::uint64_t>(limbs_[i]) * other.limbs_[j] +
                                carry;
            out.limbs_[i + j] = static_cast<std::uint32_t>(cur & 0xFFFFFFFFull);
            carry = cur >> 32;
        }
        std::size_t k = i + other.limbs_.size();
        while (carry) {
            std::uint64_t cur = out.limbs_[k] + carry;
            out.limbs_[k] = static_cast<std::uint32_t>(cur & 0xFFFFFFFFull);
            carry = cur >> 32;
            ++k;
        }
    }
    out.normalize();
    return out;
}

int BigCount::compare(const BigCount& other) const {
    if (limbs_.size() != other.limbs_.size())
        return limbs_.size() < other.limbs_.size() ? -1 : 1;
    for (std::size_t i = limbs_.size(); i-- > 0;) {
        if (limbs_[i] != other.limbs_[i]) return limbs_[i] < other.limbs_[i] ? -1 : 1;
    }
    return 0;
}

BigCount BigCount::pow(unsigned exponent) const {
    BigCount result{1};
    BigCount base = *this;
    while (exponent) {
        if (exponent & 1u) result = result * base;
        base = base * base;
        exponent >>= 1;
    }
    return result;
}

void BigCount::shift_right_one() {
    std::uint32_t carry = 0;
    for (std::size_t i = limbs_.size(); i-- > 0;) {
        std::uint32_t next = limbs_[i] & 1u;
        limbs_[i] = (limbs_[i] >> 1) | (carry << 31);
        carry = next;
    }
    normalize();
}

BigCount BigCount::gcd(BigCount a, BigCount b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    unsigned shift = 0;
    while (a.is_even() && b.is_even()) {
        a.shift_right_one();
        b.shift_right_one();
        ++shift;
    }
    while (a.is_even()) a.shift_right_one();
    while (!b.is_zero()) {
        while (b.is_even()) b.shift_right_one();
        if (a.compare(b) > 0) std::swap(a, b);
        b -= a;
    }
    BigCount two{2};
    return a * two.pow(shift);
}

std::uint32_t BigCount::divmod_small(std::uint32_t divisor) {
    if (divisor == 0) throw DomainError("BigCount: division by zero");
    std::uint64_t rem = 0;
    for (std::size_t i = limbs_.size(); i-- > 0;) {
        std::uint64_t cur = (rem << 32) | limbs_[i];
        limbs_[i] = static_cast<std::uint32_t>(cur / divisor);
        rem = cur % divisor;
    }
    normalize();
    return static_cast<std::uint32_t>(rem);
}

double BigCount::to_double() const {
    double v = 0.0;
    for (std::size_t i = limbs_.size(); i-- > 0;) v = v * 4294967296.0 + limbs_[i];
    return v;
}

std::string BigCount::to_string() const {
    if (is_zero()) return "0";
    BigCount tmp = *this;
    std::string out;
    while (!tmp.is_zero()) {
        std::uint32_t part = tmp.divmod_small(1000000000u);
        std::string digits = std::to_string(part);
        if (tmp.is_zero()) {
            out.insert(0, digits);
        } else {
            out.insert(0, std::string(9 - digits.size(), '0') + digits);
        }
    }
    return out;
}

std::uint64_t BigCount::to_u64() const {
    if (limbs_.size() > 2) throw DomainError("BigCount: value exceeds 64 bits");
    std::uint64_t v = 0;
    for (std::size_t i = limbs_.size(); i-- > 0;) v = (v << 32) | limbs_[i];
    return v;
}

BigCount factorial(unsigned n) {
    BigCount result{1};
    for (unsigned i = 2; i <= n; ++i) result = result * BigCount{i};
    return result;
}

BigCount binomial(unsigned n, unsigned k) {
    if (k > n) return BigCount{};
    k = std::min(k, n - k);
    BigCount result{1};
    for (unsigned i = 1; i <= k; ++i) {
        result = result * BigCount{n - k + i};
        std::uint32_t rem = result.divmod_small(i);
        (void)rem;  // always divides exactly
    }
    return result;
}

Ratio Ratio::make(BigCount num, BigCount den) {
    if (den.is_zero()) throw DomainError("Ratio: zero denominator");
    if (num.is_zero()) return Ratio{BigCount{}, BigCount{1}};
    BigCount g = BigCount::gcd(num, den);
    if (BigCount{1} < g) {
        // Divide out the gcd by repeated small division is not available for
        // big divisors; use multiply-compare-free exact division.
        // gcd fits the same limb budget, so do long division via doubling.
        auto divide_exact = [](const BigCount& value, const BigCount& divisor) {
            // Binary long division (value / divisor), exact by construction.
            BigCount quotient{0};
            BigCount remainder = value;
            // Build divisor * 2^k ladder.
            std::vector<BigCount> ladder{divisor};
            std::vector<BigCount> powers{BigCount{1}};
            while (ladder.back() <= remainder) {
                ladder.push_back(ladder.back() * BigCount{2});
                powers.push_back(powers.back() * BigCount{2});
            }
            for (std::size_t i = ladder.size(); i-- > 0;) {
                if (ladder[i] <= remainder) {
                    remainder -= ladder[i];
                    quotient += powers[i];
                }
            }
            return quotient;
        };
        num = divide_exact(num, g);
        den = divide_exact(den, g);
    }
    return Ratio{std::move(num), std::move(den)};
}

Ratio Ratio::operator+(const Ratio& other) const {
    return make(num * other.den + other.num * den, den * other.den);
}

bool Ratio::operator==(const Ratio& other) const {
    return num * other.den == other.num * den;
}

bool Ratio::operator<=(const Ratio& other) const {
    return num * other.den <= other.num * den;
}

double Ratio::to_double() const { return num.to_double() / den.to_double(); }

std::string Ratio::to_string() const {
    return num.to_string() + "/" + den.to_string();
}

BigCount surjection_count(unsigned n, unsigned l) {
    if (l < 1 || l > n)
        throw DomainError("surjection_count: need 1 <= l <= n, got l = " +
                          std::to_string(l) + ", n = " + std::to_string(n));
    BigCount positive{}, negative{};
    for (unsigned j = 0; j <= l; ++j) {
        BigCount term = binomial(l, j) * BigCount{l - j}.pow(n);
        if (j % 2 == 0)
            positive += term;
        else
            negative += term;
    }
    return positive - negative;
}

BigCount enumerate_points_bruteforce(unsigned n, unsigned K) {
    if (n > 9)
        throw DomainError("enumerate_points_bruteforce: n = " + std::to_string(n) +
                          " exceeds enumeration limit of 9");
    if (K < 1 || K >= n)
        throw DomainError("enumerate_points_bruteforce: need 1 <= K < n");
    const unsigned l = n - K;
    std::vector<unsigned> map(n, 0);
    std::uint64_t count = 0;
    for (;;) {
        unsigned seen = 0;
        for (unsigned v : map) seen |= (1u << v);
        if (seen == (1u << l) - 1u) ++count;
        // Odometer increment.
        unsigned pos = 0;
        while (pos < n) {
            if (++map[pos] < l) break;
            map[pos] = 0;
            ++pos;
        }
        if (pos == n) break;
    }
    return BigCount{count};
}

BigCount global_minima_count(const std::vector<unsigned>& hidden_widths) {
    BigCount result{1};
    for (unsigned w : hidden_widths) result = result * factorial(w);
    return result;
}

Ratio ratio_formula(unsigned K, unsigned n) {
    if (K < 1 || 2 * K > n)
        throw DomainError("ratio_formula: need 1 <= K <= n/2, got K = " +
                          std::to_string(K) + ", n = " + std::to_string(n));
    switch (K) {
        case 1:
            // C(n-1,1) / 2!
            return Ratio::make(binomial(n - 1, 1), BigCount{2});
        case 2:
            // C(n-2,1)/3! + C(n-2,2)/2!^2
            return Ratio::make(binomial(n - 2, 1), BigCount{6}) +
                   Ratio::make(binomial(n - 2, 2), BigCount{4});
        case 3:
            // C(n-3,1)/4! + C(n-3,2)/3! + C(n-3,3)/2!^3
            return Ratio::make(binomial(n - 3, 1), BigCount{24}) +
                   Ratio::make(binomial(n - 3, 2), BigCount{6}) +
                   Ratio::make(binomial(n - 3, 3), BigCount{8});
        default:
            return Ratio::make(surjection_count(n, n - K), factorial(n));
    }
}

Ratio lower_bound(unsigned K, unsigned n) {
    if (K < 1 || 2 * K > n)
        throw DomainError("lower_bound: need 1 <= K <= n/2");
    return Ratio::make(binomial(n - K, K), BigCount{2}.pow(K));
}

Ratio multilayer_ratio_sum(const std::vector<unsigned>& hidden_widths, unsigned K) {
    if (hidden_widths.empty()) throw DomainError("multilayer_ratio_sum: no widths");
    for (unsigned w : hidden_widths)
        if (2 * K > w)
            throw DomainError("multilayer_ratio_sum: 2K exceeds width " +
                              std::to_string(w));
    Ratio total{BigCount{}, BigCount{1}};
    for (unsigned w : hidden_widths) total = total + lower_bound(K, w);
    return total;
}

AsymptoticCheck asymptotic_check(unsigned K, std::uint64_t n) {
    if (K < 1 || 2ull * K > n)
        throw DomainError("asymptotic_check: need 1 <= K <= n/2");
    AsymptoticCheck out;
    // log C(n-K, K) = lgamma(n-K+1) - lgamma(n-2K+1) - lgamma(K+1)
    double log_exact = std::lgamma(static_cast<double>(n - K) + 1.0) -
                       std::lgamma(static_cast<double>(n - 2ull * K) + 1.0) -
                       std::lgamma(static_cast<double>(K) + 1.0) -
                       static_cast<double>(K) * std::log(2.0);
    double log_limit = static_cast<double>(K) * std::log(static_cast<double>(n)) -
                       static_cast<double>(K) * std::log(2.0) -
                       std::lgamma(static_cast<double>(K) + 1.0);
    out.exact = std::exp(log_exact);
    out.limit = std::exp(log_limit);
    out.ratio = std::exp(log_exact - log_limit);
    return out;
}

}  // namespace permpoint
