#include "permpoint/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "permpoint/errors.hpp"

namespace permpoint {

double DenseVector::norm() const {
    double s = 0.0;
    for (double x : entries) s += x * x;
    return std::sqrt(s);
}

double DenseVector::inf_norm() const {
    double m = 0.0;
    for (double x : entries) m = std::max(m, std::abs(x));
    return m;
}

double DenseVector::dot(const DenseVector& other) const {
    if (size() != other.size())
        throw DimensionError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += entries[i] * other.entries[i];
    return s;
}

bool DenseVector::all_finite() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](double x) { return std::isfinite(x); });
}

DenseVector& DenseVector::operator+=(const DenseVector& other) {
    if (size() != other.size()) throw DimensionError("vector +=: length mismatch");
    for (std::size_t i = 0; i < size(); ++i) entries[i] += other.entries[i];
    return *this;
}

DenseVector& DenseVector::operator-=(const DenseVector& other) {
    if (size() != other.size()) throw DimensionError("vector -=: length mismatch");
    for (std::size_t i = 0; i < size(); ++i) entries[i] -= other.entries[i];
    return *this;
}

DenseVector& DenseVector::operator*=(double s) {
    for (double& x : entries) x *= s;
    return *this;
}

DenseVector operator+(DenseVector a, const DenseVector& b) { return a += b; }
DenseVector operator-(DenseVector a, const DenseVector& b) { return a -= b; }
DenseVector operator*(double s, DenseVector v) { return v *= s; }

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

DenseVector DenseMatrix::row(std::size_t r) const {
    DenseVector v(cols);
    for (std::size_t c = 0; c < cols; ++c) v[c] = at(r, c);
    return v;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols, rows);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) t.at(c, r) = at(r, c);
    return t;
}

double DenseMatrix::frobenius_norm() const {
    double s = 0.0;
    for (double x : entries) s += x * x;
    return std::sqrt(s);
}

double DenseMatrix::max_asymmetry() const {
    double m = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = r + 1; c < cols; ++c)
            m = std::max(m, std::abs(at(r, c) - at(c, r)));
    return m;
}

bool DenseMatrix::all_finite() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](double x) { return std::isfinite(x); });
}

DenseVector matvec(const DenseMatrix& a, const DenseVector& v) {
    if (a.cols != v.size())
        throw DimensionError("matvec: matrix has " + std::to_string(a.cols) +
                             " columns, vector has " + std::to_string(v.size()) +
                             " entries");
    DenseVector out(a.rows);
    for (std::size_t r = 0; r < a.rows; ++r) {
        double s = 0.0;
        const double* row = a.entries.data() + r * a.cols;
        for (std::size_t c = 0; c < a.cols; ++c) s += row[c] * v[c];
        out[r] = s;
    }
    return out;
}

double SpectrumReport::max_abs_eigenvalue() const {
    double m = 0.0;
    for (double e : eigenvalues) m = std::max(m, std::abs(e));
    return m;
}

SpectrumReport classify_spectrum(std::vector<double> eigenvalues_ascending,
                                 double rel_zero_tol) {
    SpectrumReport rep;
    rep.eigenvalues = std::move(eigenvalues_ascending);
    double max_abs = 0.0;
    for (double e : rep.eigenvalues) max_abs = std::max(max_abs, std::abs(e));
    rep.zero_tolerance = rel_zero_tol * std::max(max_abs, 1.0);
    for (double e : rep.eigenvalues) {
        if (e < -rep.zero_tolerance)
            ++rep.n_negative;
        else if (e > rep.zero_tolerance)
            ++rep.n_positive;
        else
            ++rep.n_zero;
    }
    return rep;
}

namespace {

double off_diagonal_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows; ++r)
        for (std::size_t c = 0; c < a.cols; ++c)
            if (r != c) s += a.at(r, c) * a.at(r, c);
    return std::sqrt(s);
}

}  // namespace

EigenDecomposition symmetric_eigen(const DenseMatrix& input, std::size_t max_sweeps,
                                   double rel_zero_tol) {
    if (input.rows != input.cols)
        throw DimensionError("symmetric_eigen: matrix is not square");
    if (input.max_asymmetry() > 1e-10)
        throw DomainError("symmetric_eigen: matrix is not symmetric within 1e-10");

    const std::size_t n = input.rows;
    DenseMatrix a = input;
    // Work on the exactly symmetrized copy.
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = r + 1; c < n; ++c) {
            double v = 0.5 * (a.at(r, c) + a.at(c, r));
            a.at(r, c) = v;
            a.at(c, r) = v;
        }

    DenseMatrix q = DenseMatrix::identity(n);
    const double scale = std::max(a.frobenius_norm(), 1e-300);
    const double target = 1e-12 * scale;

    std::size_t sweep = 0;
    while (off_diagonal_norm(a) > target) {
        if (sweep++ >= max_sweeps)
            throw ConvergenceError("symmetric_eigen: no convergence after " +
                                       std::to_string(max_sweeps) + " sweeps",
                                   off_diagonal_norm(a) / scale);
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t r = p + 1; r < n; ++r) {
                double apr = a.at(p, r);
                if (std::abs(apr) <= 1e-300) continue;
                double theta = (a.at(r, r) - a.at(p, p)) / (2.0 * apr);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                // Rotate rows/columns p and r of A.
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a.at(k, p), akr = a.at(k, r);
                    a.at(k, p) = c * akp - s * akr;
                    a.at(k, r) = s * akp + c * akr;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a.at(p, k), ark = a.at(r, k);
                    a.at(p, k) = c * apk - s * ark;
                    a.at(r, k) = s * apk + c * ark;
                }
                // Accumulate the rotation into Q.
                for (std::size_t k = 0; k < n; ++k) {
                    double qkp = q.at(k, p), qkr = q.at(k, r);
                    q.at(k, p) = c * qkp - s * qkr;
                    q.at(k, r) = s * qkp + c * qkr;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a.at(i, i) < a.at(j, j); });

    std::vector<double> eigs(n);
    DenseMatrix vectors(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        eigs[j] = a.at(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) vectors.at(i, j) = q.at(i, order[j]);
    }

    EigenDecomposition out;
    out.spectrum = classify_spectrum(std::move(eigs), rel_zero_tol);
    out.eigenvectors = std::move(vectors);
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t Rng::next_u64() {
    // xoshiro256++
    std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    // u1 in (0,1] keeps the log finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * 3.14159265358979323846 * u2;
    cached_normal_ = r * std::sin(angle);
    has_cached_normal_ = true;
    return r * std::cos(angle);
}

DenseVector Rng::normal_vector(std::size_t n) {
    DenseVector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = normal();
    return v;
}

DenseVector Rng::uniform_vector(std::size_t n) {
    DenseVector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = uniform();
    return v;
}

DenseVector Rng::unit_sphere(std::size_t n) {
    DenseVector v = normal_vector(n);
    double nrm = v.norm();
    while (nrm < 1e-12) {  // astronomically unlikely; resample
        v = normal_vector(n);
        nrm = v.norm();
    }
    v *= 1.0 / nrm;
    return v;
}

std::size_t Rng::index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

Rng Rng::split() { return Rng(next_u64()); }

}  // namespace permpoint
