#include <doctest.h>

#include <cmath>

#include "permpoint/errors.hpp"
#include "permpoint/numerics.hpp"

using namespace permpoint;

TEST_CASE("matvec: identity and hand-checked products") {
    DenseMatrix id = DenseMatrix::identity(3);
    DenseVector v{1.0, 2.0, 3.0};
    DenseVector out = matvec(id, v);
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 2.0);
    CHECK(out[2] == 3.0);

    DenseMatrix a(2, 2);
    a.at(0, 0) = 1;
    a.at(0, 1) = 2;
    a.at(1, 0) = 3;
    a.at(1, 1) = 4;
    DenseVector ones{1.0, 1.0};
    DenseVector r = matvec(a, ones);
    CHECK(r[0] == 3.0);
    CHECK(r[1] == 7.0);
}

TEST_CASE("matvec: agrees with a naive triple-loop oracle") {
    Rng rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        std::size_t rows = 3 + trial, cols = 2 + 2 * trial;
        DenseMatrix a(rows, cols);
        for (double& x : a.entries) x = rng.normal();
        DenseVector v = rng.normal_vector(cols);
        DenseVector fast = matvec(a, v);
        for (std::size_t r = 0; r < rows; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < cols; ++c) s += a.at(r, c) * v[c];
            CHECK(std::abs(fast[r] - s) < 1e-12);
        }
    }
}

TEST_CASE("matvec: dimension mismatch is an error") {
    DenseMatrix a(2, 3);
    DenseVector v(2);
    CHECK_THROWS_AS(matvec(a, v), DimensionError);
}

TEST_CASE("symmetric_eigen: identity and hand-computable 2x2") {
    auto id = symmetric_eigen(DenseMatrix::identity(2));
    CHECK(id.spectrum.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(id.spectrum.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));

    DenseMatrix a(2, 2);
    a.at(0, 0) = 2;
    a.at(0, 1) = 1;
    a.at(1, 0) = 1;
    a.at(1, 1) = 2;
    auto ed = symmetric_eigen(a);
    CHECK(ed.spectrum.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ed.spectrum.eigenvalues[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("symmetric_eigen: reconstruction and orthogonality on random 20x20") {
    Rng rng(7);
    const std::size_t n = 20;
    DenseMatrix a(n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = r; c < n; ++c) {
            double x = rng.normal();
            a.at(r, c) = x;
            a.at(c, r) = x;
        }
    auto ed = symmetric_eigen(a);
    const DenseMatrix& q = ed.eigenvectors;

    // ||A - Q L Q^T|| / ||A||
    double err = 0.0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                s += q.at(r, k) * ed.spectrum.eigenvalues[k] * q.at(c, k);
            double d = a.at(r, c) - s;
            err += d * d;
        }
    CHECK(std::sqrt(err) / a.frobenius_norm() < 1e-9);

    // Q^T Q = I
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += q.at(k, i) * q.at(k, j);
            CHECK(std::abs(s - (i == j ? 1.0 : 0.0)) < 1e-9);
        }

    // eigenvalue sum equals the trace
    double trace = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += a.at(i, i);
    for (double e : ed.spectrum.eigenvalues) sum += e;
    CHECK(std::abs(sum - trace) < 1e-9 * std::max(1.0, std::abs(trace)));
}

TEST_CASE("symmetric_eigen: rejects non-symmetric input") {
    DenseMatrix a(2, 2);
    a.at(0, 1) = 1.0;
    a.at(1, 0) = 0.5;
    CHECK_THROWS_AS(symmetric_eigen(a), DomainError);
}

TEST_CASE("classify_spectrum: counts are consistent") {
    auto rep = classify_spectrum({-1.0, -1e-9, 0.0, 2e-6, 3.0}, 1e-6);
    // threshold = 1e-6 * max(3, 1) = 3e-6
    CHECK(rep.zero_tolerance == doctest::Approx(3e-6));
    CHECK(rep.n_negative == 1);
    CHECK(rep.n_zero == 3);
    CHECK(rep.n_positive == 1);
    CHECK(rep.n_negative + rep.n_zero + rep.n_positive == rep.eigenvalues.size());
}

TEST_CASE("rng: identical seeds give identical streams") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(123), d(123);
    for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());
}

TEST_CASE("rng: normal draws have the right moments") {
    Rng rng(2024);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("rng: unit sphere draws are normalized") {
    Rng rng(5);
    DenseVector v = rng.unit_sphere(5);
    CHECK(std::abs(v.norm() - 1.0) < 1e-12);
}

TEST_CASE("rng: split streams are independent of later parent use") {
    Rng parent(9);
    Rng child = parent.split();
    double first = child.normal();
    parent.normal();
    Rng parent2(9);
    Rng child2 = parent2.split();
    CHECK(child2.normal() == first);
}
