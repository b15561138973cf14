#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "permpoint/errors.hpp"
#include "permpoint/network.hpp"
#include "permpoint/pathfinder.hpp"
#include "permpoint/symmetry.hpp"

using namespace permpoint;

namespace {

Dataset teacher_data(const NetworkParams& teacher, std::size_t count, Rng& rng) {
    Dataset data;
    data.inputs = DenseMatrix(count, teacher.input_dim());
    for (double& v : data.inputs.entries) v = rng.normal();
    data.targets = forward_all(teacher, data.inputs);
    return data;
}

// Small merge problem used by several cases: a 2-4-1 softplus teacher and a
// student starting at the teacher's own parameters.
struct ToyMerge {
    NetworkParams teacher;
    Dataset data;
    MergeSettings settings;
};

ToyMerge make_toy_merge(std::uint64_t seed) {
    Rng rng(seed);
    ToyMerge toy;
    toy.teacher = make_network({2, 4, 1}, Activation::softplus, rng);
    toy.data = teacher_data(toy.teacher, 200, rng);
    toy.settings.n_delta_steps = 30;
    toy.settings.equalization_steps = 20;
    toy.settings.inner.loss_flat_window = 0;  // gradient criterion only
    return toy;
}

}  // namespace

TEST_CASE("split_pair_exact: recomputed sums match bit-exactly") {
    Rng rng(41);
    for (int trial = 0; trial < 2000; ++trial) {
        double w = 10.0 * rng.normal();
        double sum = 2.0 * w;  // the same-sign regime the stages live in
        double frac = rng.uniform();
        double a, b;
        bool ok = split_pair_exact(sum, w * (1.0 - frac), a, b);
        CHECK(ok);
        CHECK(a + b == sum);
    }
}

TEST_CASE("merge_descent: pre-merged pair keeps the loss at zero everywhere") {
    Rng rng(42);
    NetworkParams small = make_network({2, 3, 1}, Activation::relu, rng);
    MergePlan plan;
    plan.layer = 0;
    plan.groups = {{0, 1}, {2}, {3}};
    plan.representatives = {0, 2, 3};
    // Neuron 1 carries the shared vector but none of the output weight, so
    // the data is fit exactly no matter where its parameters sit.
    NetworkParams student = build_kth_order_point(small, plan, {{1.0, 0.0}, {1.0}, {1.0}});
    DenseVector moved = neuron_vector(student, 0, 1).values;
    moved[0] += 0.8;
    moved[2] -= 0.3;
    student = set_neuron_vector(student, 0, 1, moved);
    Dataset data = teacher_data(student, 100, rng);

    MergeSettings settings;
    settings.n_delta_steps = 10;
    PathTrace trace = merge_descent(student, data, LossKind::mse, 0, 0, 1, settings);
    CHECK(trace.all_inner_converged);
    for (const PathSample& s : trace.samples) CHECK(s.loss == 0.0);
    CHECK(neuron_distance(trace.back().params, 0, 0, 1) == 0.0);
}

TEST_CASE("merge_descent: schedule, exact distances, and converged endpoint") {
    ToyMerge toy = make_toy_merge(15);
    PathTrace trace =
        merge_descent(toy.teacher, toy.data, LossKind::mse, 0, 0, 1, toy.settings);

    REQUIRE(trace.samples.size() == toy.settings.n_delta_steps + 1);
    CHECK(trace.start_was_minimum);
    CHECK(trace.all_inner_converged);

    const double d0 = neuron_distance(toy.teacher, 0, 0, 1);
    for (std::size_t j = 0; j + 1 < trace.samples.size(); ++j) {
        const PathSample& s = trace.samples[j];
        double expected =
            d0 * std::pow(toy.settings.delta_floor_ratio,
                          static_cast<double>(j) /
                              static_cast<double>(toy.settings.n_delta_steps - 1));
        CHECK(s.delta == doctest::Approx(expected).epsilon(1e-12));
        // The reparametrization enforces the constraint exactly.
        CHECK(std::abs(neuron_distance(s.params, 0, 0, 1) - s.delta) <=
              1e-12 * std::max(1.0, s.delta));
        if (j > 0) CHECK(s.delta < trace.samples[j - 1].delta);
        CHECK(s.t < trace.samples[j + 1].t);
    }
    CHECK(trace.back().delta == 0.0);
    CHECK(trace.back().t == 0.25);
    CHECK(neuron_distance(trace.back().params, 0, 0, 1) == 0.0);
    CHECK(std::isfinite(trace.back().loss));
}

TEST_CASE("merge_descent: rejects coincident pairs and bad settings") {
    ToyMerge toy = make_toy_merge(15);
    NetworkParams dup =
        set_neuron_vector(toy.teacher, 0, 1, neuron_vector(toy.teacher, 0, 0).values);
    CHECK_THROWS_AS(merge_descent(dup, toy.data, LossKind::mse, 0, 0, 1, toy.settings),
                    DomainError);
    CHECK_THROWS_AS(merge_descent(toy.teacher, toy.data, LossKind::mse, 0, 2, 2,
                                  toy.settings),
                    DomainError);
    MergeSettings bad = toy.settings;
    bad.delta_floor_ratio = 1.5;
    CHECK_THROWS_AS(merge_descent(toy.teacher, toy.data, LossKind::mse, 0, 0, 1, bad),
                    DomainError);
}

TEST_CASE("equalize_outputs: hand-checked midpoint with constant sums") {
    Rng rng(43);
    NetworkParams net = make_network({2, 3, 1}, Activation::relu, rng);
    net = set_neuron_vector(net, 0, 2, neuron_vector(net, 0, 1).values);
    net.layers[1].weights.at(0, 1) = 3.0;
    net.layers[1].weights.at(0, 2) = 1.0;
    Dataset data = teacher_data(net, 50, rng);

    PathTrace seg = equalize_outputs(net, data, LossKind::mse, 0, 1, 2, 8);
    REQUIRE(seg.samples.size() == 9);
    for (const PathSample& s : seg.samples) {
        double wl = s.params.layers[1].weights.at(0, 1);
        double wm = s.params.layers[1].weights.at(0, 2);
        CHECK(wl + wm == 4.0);
    }
    const PathSample& endpoint = seg.samples.back();
    CHECK(endpoint.params.layers[1].weights.at(0, 1) == 2.0);
    CHECK(endpoint.params.layers[1].weights.at(0, 2) == 2.0);
    CHECK(endpoint.t == 0.5);
}

TEST_CASE("equalize_outputs: no-op when already equal; loss stays constant") {
    ToyMerge toy = make_toy_merge(18);
    PathTrace merged =
        merge_descent(toy.teacher, toy.data, LossKind::mse, 0, 1, 2, toy.settings);
    NetworkParams at_zero = merged.back().params;

    PathTrace seg = equalize_outputs(at_zero, toy.data, LossKind::mse, 0, 1, 2, 50);
    const double L0 = seg.samples.front().loss;
    const double denom = std::max(std::abs(L0), 1e-12);
    for (const PathSample& s : seg.samples)
        CHECK(std::abs(s.loss - L0) / denom < 1e-10);

    // Running it again from the equalized endpoint changes nothing.
    NetworkParams equalized = seg.samples.back().params;
    PathTrace again = equalize_outputs(equalized, toy.data, LossKind::mse, 0, 1, 2, 5);
    DenseVector a = flatten(again.samples.back().params);
    DenseVector b = flatten(equalized);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    // Refuses to run before the vectors have merged.
    CHECK_THROWS_AS(equalize_outputs(toy.teacher, toy.data, LossKind::mse, 0, 1, 2, 5),
                    DomainError);
}

TEST_CASE("assemble_full_path: palindrome losses and swapped endpoint, bit-exact") {
    ToyMerge toy = make_toy_merge(23);
    PathTrace half =
        merge_descent(toy.teacher, toy.data, LossKind::mse, 0, 0, 2, toy.settings);
    PathTrace seg = equalize_outputs(half.back().params, toy.data, LossKind::mse, 0, 0,
                                     2, toy.settings.equalization_steps);
    append_segment(half, seg);
    CHECK(half.back().t == 0.5);

    PathTrace full = assemble_full_path(half);
    REQUIRE(full.samples.size() == 2 * half.samples.size() - 1);

    const std::size_t n = full.samples.size();
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(full.samples[i].loss == full.samples[n - 1 - i].loss);
        if (i > 0) CHECK(full.samples[i].t > full.samples[i - 1].t);
    }
    CHECK(full.samples.back().t == 1.0);

    // The start is recorded untouched, so it matches the teacher bit for
    // bit, and gamma(1) equals the start with the pair swapped.
    DenseVector start = flatten(full.samples.front().params);
    DenseVector teacher_flat = flatten(toy.teacher);
    for (std::size_t i = 0; i < start.size(); ++i) CHECK(start[i] == teacher_flat[i]);
    DenseVector expected = flatten(swap_pair(full.samples.front().params, 0, 0, 2));
    DenseVector actual = flatten(full.samples.back().params);
    REQUIRE(expected.size() == actual.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(expected[i] == actual[i]);

    // Both ends compute the same function.
    Rng rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        DenseVector x = rng.normal_vector(2);
        DenseVector y0 = forward(full.samples.front().params, x);
        DenseVector y1 = forward(full.samples.back().params, x);
        CHECK(std::abs(y0[0] - y1[0]) < 1e-12);
    }
}

TEST_CASE("verify_path_properties: clean run has no violations, tampering is caught") {
    ToyMerge toy = make_toy_merge(40);
    PathTrace half =
        merge_descent(toy.teacher, toy.data, LossKind::mse, 0, 0, 1, toy.settings);
    PathTrace seg = equalize_outputs(half.back().params, toy.data, LossKind::mse, 0, 0,
                                     1, toy.settings.equalization_steps);
    append_segment(half, seg);
    PathTrace full = assemble_full_path(half);

    VerifySettings settings;
    settings.parallel_tol = 1e-6;
    PathPropertyReport report =
        verify_path_properties(full, toy.data, LossKind::mse, settings);
    CHECK(report.ok());
    CHECK(report.samples_checked == full.samples.size());

    // The start is a minimum: the full gradient vanishes there.
    CHECK(gradient(full.samples.front().params, toy.data, LossKind::mse).norm() < 1e-8);

    // Perturb one sample; the verifier must point at its t.
    PathTrace tampered = full;
    std::size_t victim = tampered.samples.size() / 3;
    tampered.samples[victim].params.layers[1].bias[0] += 0.05;
    PathPropertyReport bad =
        verify_path_properties(tampered, toy.data, LossKind::mse, settings);
    REQUIRE(!bad.ok());
    bool found = false;
    for (const auto& v : bad.violations)
        found |= v.t == tampered.samples[victim].t && v.kind == "parallelism";
    CHECK(found);
}

TEST_CASE("verify_path_properties: spectra stay within one negative direction") {
    ToyMerge toy = make_toy_merge(20);
    MergeSettings settings = toy.settings;
    settings.n_delta_steps = 12;
    PathTrace half =
        merge_descent(toy.teacher, toy.data, LossKind::mse, 0, 0, 1, settings);
    PathTrace seg =
        equalize_outputs(half.back().params, toy.data, LossKind::mse, 0, 0, 1, 10);
    append_segment(half, seg);

    VerifySettings verify;
    verify.check_spectra = true;
    verify.spectrum_stride = 5;
    PathPropertyReport report =
        verify_path_properties(half, toy.data, LossKind::mse, verify);
    CHECK(report.spectra_checked > 0);
    for (const auto& v : report.violations) CHECK(v.kind != "spectrum");
}

TEST_CASE("pick_max_cosine_pair: finds the aligned pair") {
    Rng rng(45);
    NetworkParams net = make_network({2, 5, 1}, Activation::relu, rng);
    DenseVector v = neuron_vector(net, 0, 2).values;
    DenseVector almost = v;
    for (std::size_t i = 0; i < almost.size(); ++i) almost[i] *= 1.7;  // same direction
    net = set_neuron_vector(net, 0, 4, almost);
    auto pair = pick_max_cosine_pair(net, 0);
    CHECK(pair.first == 2);
    CHECK(pair.second == 4);
}

TEST_CASE("write_trace_csv: header and row count") {
    ToyMerge toy = make_toy_merge(22);
    MergeSettings settings = toy.settings;
    settings.n_delta_steps = 5;
    PathTrace trace =
        merge_descent(toy.teacher, toy.data, LossKind::mse, 0, 0, 1, settings);
    auto path = std::filesystem::temp_directory_path() / "permpoint_trace_test.csv";
    write_trace_csv(trace, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,t,delta,loss,grad_norm,inner_iters");
    std::size_t rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == trace.samples.size());
    std::filesystem::remove(path);
}
