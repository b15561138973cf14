#pragma once

// Dense double-precision vectors and matrices, a cyclic Jacobi eigensolver
// for symmetric matrices, and a deterministic PRNG (splitmix64-seeded
// xoshiro256++). Everything downstream builds on these; there are no
// external numeric dependencies.

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace permpoint {

struct DenseVector {
    std::vector<double> entries;

    DenseVector() = default;
    explicit DenseVector(std::size_t n, double fill = 0.0) : entries(n, fill) {}
    DenseVector(std::initializer_list<double> init) : entries(init) {}

    std::size_t size() const { return entries.size(); }
    double& operator[](std::size_t i) { return entries[i]; }
    double operator[](std::size_t i) const { return entries[i]; }

    double norm() const;
    double inf_norm() const;
    double dot(const DenseVector& other) const;
    bool all_finite() const;

    DenseVector& operator+=(const DenseVector& other);
    DenseVector& operator-=(const DenseVector& other);
    DenseVector& operator*=(double s);
};

DenseVector operator+(DenseVector a, const DenseVector& b);
DenseVector operator-(DenseVector a, const DenseVector& b);
DenseVector operator*(double s, DenseVector v);

struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> entries;  // row-major

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), entries(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return entries[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return entries[r * cols + c]; }

    static DenseMatrix identity(std::size_t n);

    DenseVector row(std::size_t r) const;
    DenseMatrix transposed() const;
    double frobenius_norm() const;
    double max_asymmetry() const;  // max |A_ij - A_ji|
    bool all_finite() const;
};

// Standard matrix-vector product. Throws DimensionError on mismatch.
DenseVector matvec(const DenseMatrix& a, const DenseVector& v);

// Eigenvalues sorted ascending plus a classification of each one as
// negative, near-zero, or positive under an absolute threshold derived
// from the largest |eigenvalue|.
struct SpectrumReport {
    std::vector<double> eigenvalues;  // ascending
    double zero_tolerance = 0.0;      // absolute threshold actually used
    std::size_t n_negative = 0;
    std::size_t n_zero = 0;
    std::size_t n_positive = 0;

    double max_abs_eigenvalue() const;
};

// Classifies already-sorted eigenvalues. The absolute threshold is
// rel_zero_tol * max(max|lambda|, 1).
SpectrumReport classify_spectrum(std::vector<double> eigenvalues_ascending,
                                 double rel_zero_tol = 1e-6);

struct EigenDecomposition {
    SpectrumReport spectrum;
    DenseMatrix eigenvectors;  // column j matches eigenvalues[j]
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
// 1e-12 * ||A||_F or max_sweeps is reached. The input must be symmetric
// within 1e-10 absolute; non-convergence throws ConvergenceError with the
// residual attached.
EigenDecomposition symmetric_eigen(const DenseMatrix& a, std::size_t max_sweeps = 100,
                                   double rel_zero_tol = 1e-6);

// Deterministic generator: a 64-bit seed is expanded through splitmix64
// into the four xoshiro256++ state words, so equal seeds give bit-identical
// streams on every platform. Single-owner; clone via split() for an
// independent stream.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform();  // [0, 1)
    double normal();   // standard normal, Box-Muller
    DenseVector normal_vector(std::size_t n);
    DenseVector uniform_vector(std::size_t n);
    DenseVector unit_sphere(std::size_t n);  // ||v|| = 1
    std::size_t index(std::size_t n);        // uniform in [0, n)

    // Derives an independent stream; deterministic in the parent's state.
    Rng split();

  private:
    std::array<std::uint64_t, 4> state_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

}  // namespace permpoint
