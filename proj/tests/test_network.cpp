#include <doctest.h>

#include <cmath>

#include "permpoint/errors.hpp"
#include "permpoint/network.hpp"
#include "permpoint/symmetry.hpp"

using namespace permpoint;

namespace {

NetworkParams tiny_relu_1_1_1() {
    NetworkParams net;
    Layer l1;
    l1.weights = DenseMatrix(1, 1);
    l1.weights.at(0, 0) = 2.0;
    l1.bias = DenseVector{-1.0};
    l1.activation = Activation::relu;
    Layer l2;
    l2.weights = DenseMatrix(1, 1);
    l2.weights.at(0, 0) = 3.0;
    l2.bias = DenseVector{0.5};
    l2.activation = Activation::identity;
    net.layers = {l1, l2};
    return net;
}

Dataset normal_dataset(const NetworkParams& teacher, std::size_t count, Rng& rng) {
    Dataset data;
    data.inputs = DenseMatrix(count, teacher.input_dim());
    for (double& v : data.inputs.entries) v = rng.normal();
    data.targets = forward_all(teacher, data.inputs);
    return data;
}

}  // namespace

TEST_CASE("forward: zero network maps everything to zero") {
    NetworkParams net;
    Layer l1;
    l1.weights = DenseMatrix(3, 2);
    l1.bias = DenseVector(3);
    l1.activation = Activation::tanh;
    Layer l2;
    l2.weights = DenseMatrix(1, 3);
    l2.bias = DenseVector(1);
    net.layers = {l1, l2};
    DenseVector y = forward(net, DenseVector{1.5, -2.0});
    CHECK(y[0] == 0.0);
}

TEST_CASE("forward: hand-computed 1-1-1 relu value") {
    NetworkParams net = tiny_relu_1_1_1();
    DenseVector y = forward(net, DenseVector{1.0});
    // relu(2*1 - 1) * 3 + 0.5
    CHECK(y[0] == doctest::Approx(3.5).epsilon(1e-15));
    DenseVector y2 = forward(net, DenseVector{0.0});
    // relu(-1) = 0
    CHECK(y2[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("forward: invariant under hidden-layer reindexing") {
    Rng rng(11);
    NetworkParams net = make_network({3, 6, 4, 2}, Activation::tanh, rng);
    PermutationSpec spec = PermutationSpec::random(net, rng);
    NetworkParams permuted = apply_permutation(net, spec);
    for (int trial = 0; trial < 20; ++trial) {
        DenseVector x = rng.normal_vector(3);
        DenseVector a = forward(net, x);
        DenseVector b = forward(permuted, x);
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(std::abs(a[j] - b[j]) < 1e-12);
    }
}

TEST_CASE("loss: exact fit, single sample, normalization") {
    Rng rng(3);
    NetworkParams teacher = make_network({2, 4, 2}, Activation::softplus, rng);
    Dataset data = normal_dataset(teacher, 50, rng);
    CHECK(loss(teacher, data, LossKind::mse) == 0.0);
    CHECK(loss(teacher, data, LossKind::normalized_mse) == 0.0);

    NetworkParams zero;
    {
        Layer l;
        l.weights = DenseMatrix(1, 1);
        l.bias = DenseVector(1);
        zero.layers = {l};
    }
    Dataset single;
    single.inputs = DenseMatrix(1, 1, 0.0);
    single.targets = DenseMatrix(1, 1, 1.0);
    CHECK(loss(zero, single, LossKind::mse) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("loss: normalized_mse is scale invariant and rejects zero targets") {
    Rng rng(4);
    NetworkParams teacher = make_network({2, 3, 1}, Activation::tanh, rng);
    NetworkParams student = make_network({2, 3, 1}, Activation::tanh, rng);
    Dataset data = normal_dataset(teacher, 40, rng);
    double base = loss(student, data, LossKind::normalized_mse);

    // Scale targets and outputs by c: multiply the output layer and targets.
    const double c = 7.5;
    NetworkParams scaled_student = student;
    for (double& w : scaled_student.layers.back().weights.entries) w *= c;
    for (double& b : scaled_student.layers.back().bias.entries) b *= c;
    Dataset scaled = data;
    for (double& t : scaled.targets.entries) t *= c;
    double after = loss(scaled_student, scaled, LossKind::normalized_mse);
    CHECK(after == doctest::Approx(base).epsilon(1e-12));

    Dataset zeros = data;
    for (double& t : zeros.targets.entries) t = 0.0;
    CHECK_THROWS_AS(loss(student, zeros, LossKind::normalized_mse), DomainError);
}

TEST_CASE("flatten/unflatten: bit-exact round trip") {
    Rng rng(15);
    NetworkParams net = make_network({3, 5, 2}, Activation::relu, rng);
    DenseVector flat = flatten(net);
    NetworkParams back = unflatten(net, flat);
    DenseVector flat2 = flatten(back);
    REQUIRE(flat.size() == flat2.size());
    for (std::size_t i = 0; i < flat.size(); ++i) CHECK(flat[i] == flat2[i]);
}

TEST_CASE("gradient: zero at an exact fit") {
    Rng rng(5);
    NetworkParams teacher = make_network({2, 4, 1}, Activation::tanh, rng);
    Dataset data = normal_dataset(teacher, 30, rng);
    DenseVector g = gradient(teacher, data, LossKind::mse);
    CHECK(g.norm() == 0.0);
}

TEST_CASE("gradient: matches central finite differences") {
    Rng rng(6);
    for (Activation act : {Activation::tanh, Activation::softplus}) {
        NetworkParams net = make_network({3, 5, 2}, act, rng);
        NetworkParams teacher = make_network({3, 5, 2}, act, rng);
        Dataset data = normal_dataset(teacher, 25, rng);
        DenseVector g = gradient(net, data, LossKind::mse);
        DenseVector theta = flatten(net);
        const double h = 1e-5;
        double err2 = 0.0, norm2 = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            DenseVector probe = theta;
            probe[i] = theta[i] + h;
            double lp = loss(unflatten(net, probe), data, LossKind::mse);
            probe[i] = theta[i] - h;
            double lm = loss(unflatten(net, probe), data, LossKind::mse);
            double fd = (lp - lm) / (2.0 * h);
            err2 += (fd - g[i]) * (fd - g[i]);
            norm2 += g[i] * g[i];
        }
        CHECK(std::sqrt(err2) / std::sqrt(norm2) < 1e-6);
    }
}

TEST_CASE("gradient: reindexing the net reindexes the gradient") {
    Rng rng(8);
    NetworkParams net = make_network({2, 4, 3, 1}, Activation::softplus, rng);
    NetworkParams teacher = make_network({2, 4, 3, 1}, Activation::softplus, rng);
    Dataset data = normal_dataset(teacher, 20, rng);
    PermutationSpec spec = PermutationSpec::random(net, rng);

    DenseVector g = gradient(net, data, LossKind::mse);
    DenseVector g_perm = gradient(apply_permutation(net, spec), data, LossKind::mse);

    // Pack the gradient into a network of the same shape and permute it the
    // same way; the two must agree within rounding.
    NetworkParams g_net = unflatten(net, g);
    DenseVector expected = flatten(apply_permutation(g_net, spec));
    for (std::size_t i = 0; i < expected.size(); ++i)
        CHECK(std::abs(expected[i] - g_perm[i]) < 1e-12);
}

TEST_CASE("hessian: analytic second derivative of a linear single-weight net") {
    // f(x) = w x with one sample dimension; L = mean (w x - y)^2, so
    // d2L/dw2 = 2 <x^2> regardless of the bias entry.
    NetworkParams net;
    Layer l;
    l.weights = DenseMatrix(1, 1);
    l.weights.at(0, 0) = 0.7;
    l.bias = DenseVector(1);
    net.layers = {l};

    Rng rng(9);
    Dataset data;
    data.inputs = DenseMatrix(40, 1);
    for (double& v : data.inputs.entries) v = rng.normal();
    data.targets = DenseMatrix(40, 1);
    for (std::size_t mu = 0; mu < 40; ++mu)
        data.targets.at(mu, 0) = 1.3 * data.inputs.at(mu, 0);

    double x2 = 0.0;
    for (double v : data.inputs.entries) x2 += v * v;
    x2 /= 40.0;

    DenseMatrix h = hessian(net, data, LossKind::mse);
    CHECK(h.at(0, 0) == doctest::Approx(2.0 * x2).epsilon(1e-6));
    CHECK(h.max_asymmetry() == 0.0);  // symmetrized by construction
}

TEST_CASE("hessian: respects the parameter cap") {
    Rng rng(10);
    NetworkParams net = make_network({4, 8, 2}, Activation::tanh, rng);
    Dataset data = normal_dataset(net, 10, rng);
    CHECK_THROWS_AS(hessian(net, data, LossKind::mse, 10), DomainError);
}

TEST_CASE("hessian: no spurious negative curvature at a trained tanh minimum") {
    Rng rng(12);
    NetworkParams teacher = make_network({2, 3, 1}, Activation::tanh, rng);
    Dataset data = normal_dataset(teacher, 60, rng);
    NetworkParams student = make_network({2, 3, 1}, Activation::tanh, rng);
    GdResult trained = gd_minimize(student, data, LossKind::mse);
    REQUIRE(trained.converged);
    DenseMatrix h = hessian(trained.params, data, LossKind::mse);
    auto spectrum = symmetric_eigen(h).spectrum;
    double floor = -1e-6 * std::max(spectrum.max_abs_eigenvalue(), 1.0);
    for (double e : spectrum.eigenvalues) CHECK(e >= floor);
}

TEST_CASE("gd_minimize: immediate return at the teacher, convex 1-d case") {
    Rng rng(13);
    NetworkParams teacher = make_network({2, 4, 1}, Activation::softplus, rng);
    Dataset data = normal_dataset(teacher, 30, rng);
    GdResult at_teacher = gd_minimize(teacher, data, LossKind::mse);
    CHECK(at_teacher.converged);
    CHECK(at_teacher.iterations == 0);

    // One linear weight, no bias freedom: converges to <xy>/<x^2>.
    NetworkParams lin;
    Layer l;
    l.weights = DenseMatrix(1, 1);
    l.weights.at(0, 0) = -4.0;
    l.bias = DenseVector(1);
    lin.layers = {l};
    Dataset d;
    d.inputs = DenseMatrix(25, 1);
    for (double& v : d.inputs.entries) v = rng.normal();
    d.targets = DenseMatrix(25, 1);
    for (std::size_t mu = 0; mu < 25; ++mu)
        d.targets.at(mu, 0) = 0.9 * d.inputs.at(mu, 0);
    std::vector<bool> frozen{false, true};  // keep the bias at zero
    GdResult r = gd_minimize(lin, d, LossKind::mse, frozen);
    CHECK(r.converged);
    CHECK(r.params.layers[0].weights.at(0, 0) == doctest::Approx(0.9).epsilon(1e-8));
    CHECK(r.params.layers[0].bias[0] == 0.0);
}

TEST_CASE("gd_minimize: accepted losses never increase") {
    Rng rng(14);
    NetworkParams teacher = make_network({2, 5, 1}, Activation::tanh, rng);
    Dataset data = normal_dataset(teacher, 40, rng);
    NetworkParams student = make_network({2, 5, 1}, Activation::tanh, rng);
    GdSettings settings;
    settings.record_log = true;
    settings.max_iters = 500;
    GdResult r = gd_minimize(student, data, LossKind::mse, {}, settings);
    REQUIRE(r.log.size() > 2);
    for (std::size_t i = 1; i < r.log.size(); ++i)
        CHECK(r.log[i].loss <= r.log[i - 1].loss);
}

TEST_CASE("gd_minimize: converged loss does not depend on the initial step") {
    Rng rng(16);
    NetworkParams teacher = make_network({2, 3, 1}, Activation::softplus, rng);
    Dataset data = normal_dataset(teacher, 50, rng);
    NetworkParams start = teacher;
    start.layers[0].weights.at(0, 0) += 0.3;
    start.layers[1].bias[0] -= 0.2;

    GdSettings a;
    a.initial_step = 1.0;
    GdSettings b;
    b.initial_step = 0.01;
    double la = gd_minimize(start, data, LossKind::mse, {}, a).final_loss;
    double lb = gd_minimize(start, data, LossKind::mse, {}, b).final_loss;
    CHECK(std::abs(la - lb) < 1e-8);
}

TEST_CASE("gd_minimize: non-convergence within the budget is flagged, not fatal") {
    Rng rng(17);
    NetworkParams teacher = make_network({2, 6, 1}, Activation::tanh, rng);
    Dataset data = normal_dataset(teacher, 40, rng);
    NetworkParams student = make_network({2, 6, 1}, Activation::tanh, rng);
    GdSettings settings;
    settings.max_iters = 3;
    GdResult r = gd_minimize(student, data, LossKind::mse, {}, settings);
    CHECK(!r.converged);
    CHECK(r.iterations == 3);
}

TEST_CASE("gradient: relu agrees with finite differences away from kinks") {
    Rng rng(19);
    NetworkParams net;
    Dataset data;
    // Resample until no pre-activation sits within 1e-3 of zero, so the
    // finite-difference probes stay inside one smooth piece.
    for (int attempt = 0; attempt < 50; ++attempt) {
        net = make_network({2, 4, 1}, Activation::relu, rng);
        NetworkParams teacher = make_network({2, 4, 1}, Activation::relu, rng);
        data.inputs = DenseMatrix(15, 2);
        for (double& v : data.inputs.entries) v = rng.normal();
        data.targets = forward_all(teacher, data.inputs);
        bool safe = true;
        for (std::size_t mu = 0; mu < data.size() && safe; ++mu) {
            DenseVector h = data.inputs.row(mu);
            DenseVector z = matvec(net.layers[0].weights, h);
            z += net.layers[0].bias;
            for (std::size_t i = 0; i < z.size(); ++i)
                safe = safe && std::abs(z[i]) > 1e-3;
        }
        if (safe) break;
    }

    DenseVector g = gradient(net, data, LossKind::mse);
    DenseVector theta = flatten(net);
    const double h = 1e-6;
    double err2 = 0.0, norm2 = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        DenseVector probe = theta;
        probe[i] = theta[i] + h;
        double lp = loss(unflatten(net, probe), data, LossKind::mse);
        probe[i] = theta[i] - h;
        double lm = loss(unflatten(net, probe), data, LossKind::mse);
        double fd = (lp - lm) / (2.0 * h);
        err2 += (fd - g[i]) * (fd - g[i]);
        norm2 += g[i] * g[i];
    }
    CHECK(std::sqrt(err2 / norm2) < 1e-6);
}

TEST_CASE("hessian: finite-difference asymmetry is small before symmetrization") {
    Rng rng(20);
    NetworkParams net = make_network({2, 3, 1}, Activation::softplus, rng);
    NetworkParams teacher = make_network({2, 3, 1}, Activation::softplus, rng);
    Dataset data;
    data.inputs = DenseMatrix(30, 2);
    for (double& v : data.inputs.entries) v = rng.normal();
    data.targets = forward_all(teacher, data.inputs);

    // Re-derive the unsymmetrized finite-difference matrix.
    DenseVector theta = flatten(net);
    const std::size_t n = theta.size();
    const double h = 1e-5 * std::max(1.0, theta.inf_norm());
    DenseMatrix raw(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        DenseVector probe = theta;
        probe[i] = theta[i] + h;
        DenseVector gp = gradient(unflatten(net, probe), data, LossKind::mse);
        probe[i] = theta[i] - h;
        DenseVector gm = gradient(unflatten(net, probe), data, LossKind::mse);
        for (std::size_t j = 0; j < n; ++j) raw.at(j, i) = (gp[j] - gm[j]) / (2.0 * h);
    }
    CHECK(raw.max_asymmetry() < 1e-5 * std::max(1.0, raw.frobenius_norm()));

    // And the shipped Hessian is the symmetrized version of it.
    DenseMatrix shipped = hessian(net, data, LossKind::mse);
    CHECK(shipped.max_asymmetry() == 0.0);
    double dev = 0.0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            dev = std::max(dev, std::abs(shipped.at(r, c) -
                                         0.5 * (raw.at(r, c) + raw.at(c, r))));
    CHECK(dev == 0.0);
}
