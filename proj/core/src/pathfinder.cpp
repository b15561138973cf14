#include "permpoint/pathfinder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "descent_detail.hpp"
#include "permpoint/errors.hpp"

namespace permpoint {

DenseVector ConstraintFrame::offset_vector() const {
    DenseVector v = base;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += delta * direction[i];
    return v;
}

double PathTrace::max_loss() const {
    double m = 0.0;
    for (const PathSample& s : samples) m = std::max(m, s.loss);
    return m;
}

namespace {

void check_pair(const NetworkParams& net, std::size_t layer, std::size_t l,
                std::size_t m) {
    if (net.depth() < 2 || layer + 1 >= net.depth())
        throw DimensionError("merge pair: layer " + std::to_string(layer) +
                             " is not hidden");
    std::size_t width = net.layers[layer].weights.rows;
    if (l >= width || m >= width)
        throw DimensionError("merge pair: neuron index out of range");
    if (l == m) throw DomainError("merge pair: base and offset must differ");
}

// Free-variable view of the constrained problem. The offset neuron's slots
// in the flat vector hold the direction e instead of its parameters.
struct MergeProblem {
    MergeProblem(const NetworkParams& shape_, const Dataset& data_, LossKind kind_,
                 std::vector<std::size_t> base_idx_, std::vector<std::size_t> off_idx_,
                 double delta_)
        : shape(shape_), data(data_), kind(kind_), base_idx(std::move(base_idx_)),
          off_idx(std::move(off_idx_)), delta(delta_), scratch(shape_) {}

    const NetworkParams& shape;
    const Dataset& data;
    LossKind kind;
    std::vector<std::size_t> base_idx;
    std::vector<std::size_t> off_idx;
    double delta = 0.0;
    mutable NetworkParams scratch;
    mutable DenseVector full;

    // The offset block stores the scaled direction v with theta_m =
    // theta_l + delta * v/||v||. Keeping v at norm delta (instead of a unit
    // e) makes the block's gradient scale match the other parameters, so
    // the inner problem stays well conditioned as delta shrinks.
    const NetworkParams& materialize(const DenseVector& x) const {
        full = x;
        if (delta > 0.0) {
            double norm = 0.0;
            for (std::size_t i : off_idx) norm += x[i] * x[i];
            norm = std::sqrt(norm);
            for (std::size_t i = 0; i < off_idx.size(); ++i)
                full[off_idx[i]] = x[base_idx[i]] + delta * x[off_idx[i]] / norm;
        } else {
            for (std::size_t i = 0; i < off_idx.size(); ++i)
                full[off_idx[i]] = x[base_idx[i]];
        }
        unflatten_into(scratch, full);
        return scratch;
    }

    double value(const DenseVector& x) const {
        return loss(materialize(x), data, kind);
    }

    double value_and_gradient(const DenseVector& x, DenseVector& gfree) const {
        LossAndGradient lg = loss_and_gradient(materialize(x), data, kind);
        const DenseVector& g = lg.gradient;
        gfree = g;
        const std::size_t p = off_idx.size();
        std::vector<double> gm(p);
        for (std::size_t i = 0; i < p; ++i) gm[i] = g[off_idx[i]];
        for (std::size_t i = 0; i < p; ++i)
            gfree[base_idx[i]] = g[base_idx[i]] + gm[i];
        if (delta > 0.0) {
            double norm = 0.0, dot = 0.0;
            for (std::size_t i = 0; i < p; ++i) norm += x[off_idx[i]] * x[off_idx[i]];
            norm = std::sqrt(norm);
            for (std::size_t i = 0; i < p; ++i) dot += gm[i] * x[off_idx[i]] / norm;
            double scale = delta / norm;
            for (std::size_t i = 0; i < p; ++i) {
                double vhat = x[off_idx[i]] / norm;
                gfree[off_idx[i]] = scale * (gm[i] - dot * vhat);
            }
        } else {
            for (std::size_t i : off_idx) gfree[i] = 0.0;
        }
        return lg.loss;
    }

    // Rescales the direction block back to norm delta.
    void renormalize(DenseVector& x) const {
        if (delta <= 0.0) return;
        double norm = 0.0;
        for (std::size_t i : off_idx) norm += x[i] * x[i];
        norm = std::sqrt(norm);
        if (norm <= 0.0)
            throw NumericError("merge descent: constraint direction collapsed");
        double scale = delta / norm;
        for (std::size_t i : off_idx) x[i] *= scale;
    }
};

}  // namespace

DenseVector constrained_free_gradient(const NetworkParams& net, const Dataset& data,
                                      LossKind kind, std::size_t layer,
                                      std::size_t base, std::size_t offset,
                                      double delta) {
    check_pair(net, layer, base, offset);
    MergeProblem problem{net, data, kind,
                         neuron_flat_indices(net, layer, base),
                         neuron_flat_indices(net, layer, offset), delta};
    DenseVector x = flatten(net);
    if (delta > 0.0) {
        // Recover the direction from the parameters themselves.
        DenseVector vl = neuron_vector(net, layer, base).values;
        DenseVector vm = neuron_vector(net, layer, offset).values;
        vm -= vl;
        if (vm.norm() <= 0.0)
            throw DomainError("constrained_free_gradient: delta > 0 but vectors coincide");
        for (std::size_t i = 0; i < problem.off_idx.size(); ++i)
            x[problem.off_idx[i]] = vm[i];
    }
    DenseVector gfree;
    problem.value_and_gradient(x, gfree);
    return gfree;
}

PathTrace merge_descent(const NetworkParams& net0, const Dataset& data, LossKind kind,
                        std::size_t layer, std::size_t base, std::size_t offset,
                        const MergeSettings& settings) {
    net0.validate();
    data.validate();
    check_pair(net0, layer, base, offset);
    if (settings.n_delta_steps < 2)
        throw DomainError("merge descent: need at least 2 delta steps");
    if (settings.delta_floor_ratio <= 0.0 || settings.delta_floor_ratio >= 1.0)
        throw DomainError("merge descent: delta_floor_ratio must be in (0,1)");

    const double d0 = neuron_distance(net0, layer, base, offset);
    if (d0 <= 0.0)
        throw DomainError("merge descent: parameter vectors already coincide");

    PathTrace trace;
    trace.layer = layer;
    trace.base = base;
    trace.offset = offset;

    MergeProblem problem{net0, data, kind,
                         neuron_flat_indices(net0, layer, base),
                         neuron_flat_indices(net0, layer, offset), d0};

    // Starting point should be (close to) a minimum.
    {
        DenseVector g0 = gradient(net0, data, kind);
        trace.start_was_minimum = g0.norm() < settings.start_grad_warn;
    }

    DenseVector x = flatten(net0);
    {
        // The offset block already holds theta_m; rewrite it as the scaled
        // direction v = theta_m - theta_l, whose norm is the initial delta.
        DenseVector vl = neuron_vector(net0, layer, base).values;
        DenseVector vm = neuron_vector(net0, layer, offset).values;
        vm -= vl;
        for (std::size_t i = 0; i < problem.off_idx.size(); ++i)
            x[problem.off_idx[i]] = vm[i];
    }

    const std::size_t S = settings.n_delta_steps;
    std::vector<double> deltas(S + 1);
    for (std::size_t i = 0; i < S; ++i)
        deltas[i] = d0 * std::pow(settings.delta_floor_ratio,
                                  static_cast<double>(i) / static_cast<double>(S - 1));
    deltas[S] = 0.0;

    for (std::size_t j = 0; j <= S; ++j) {
        problem.delta = deltas[j];
        if (problem.delta > 0.0) problem.renormalize(x);
        std::size_t free_count =
            problem.delta > 0.0 ? x.size() : x.size() - problem.off_idx.size();
        double tol = settings.inner.grad_tolerance;
        if (tol < 0.0) tol = 1e-8 * std::sqrt(static_cast<double>(free_count));

        detail::Objective objective;
        objective.value = [&](const DenseVector& v) { return problem.value(v); };
        objective.value_and_gradient = [&](const DenseVector& v, DenseVector& g) {
            return problem.value_and_gradient(v, g);
        };
        objective.after_accept = [&](DenseVector& v) { problem.renormalize(v); };

        detail::DescentResult r;
        try {
            r = detail::armijo_descent(objective, x, settings.inner, tol);
        } catch (const NumericError&) {
            throw MergeDivergence("merge descent: loss diverged at delta = " +
                                      std::to_string(problem.delta),
                                  std::move(trace));
        }
        x = std::move(r.x);

        PathSample sample;
        sample.t = 0.25 * static_cast<double>(j) / static_cast<double>(S);
        sample.delta = problem.delta;
        // An untouched start stays bit-identical to net0; reconstruction
        // through the frame would otherwise shift it by rounding.
        sample.params =
            (j == 0 && r.iterations == 0) ? net0 : problem.materialize(x);
        sample.loss = r.final_value;
        sample.grad_norm = r.final_grad_norm;
        sample.inner_iters = r.iterations;
        sample.converged = r.converged || r.stalled;
        if (!sample.converged) trace.all_inner_converged = false;
        trace.samples.push_back(std::move(sample));
    }
    return trace;
}

GdResult minimize_with_pair_tied(const NetworkParams& net, const Dataset& data,
                                 LossKind kind, std::size_t layer, std::size_t base,
                                 std::size_t offset, const GdSettings& settings) {
    net.validate();
    data.validate();
    check_pair(net, layer, base, offset);
    if (neuron_distance(net, layer, base, offset) > 1e-9)
        throw DomainError("minimize_with_pair_tied: parameter vectors differ");

    MergeProblem problem{net, data, kind, neuron_flat_indices(net, layer, base),
                         neuron_flat_indices(net, layer, offset), 0.0};
    double tol = settings.grad_tolerance;
    if (tol < 0.0)
        tol = 1e-8 * std::sqrt(static_cast<double>(
                  flatten(net).size() - problem.off_idx.size()));

    detail::Objective objective;
    objective.value = [&](const DenseVector& v) { return problem.value(v); };
    objective.value_and_gradient = [&](const DenseVector& v, DenseVector& g) {
        return problem.value_and_gradient(v, g);
    };
    detail::DescentResult r =
        detail::armijo_descent(objective, flatten(net), settings, tol);

    GdResult out;
    out.params = problem.materialize(r.x);
    out.converged = r.converged || r.stalled;
    out.iterations = r.iterations;
    out.final_loss = r.final_value;
    out.final_grad_norm = r.final_grad_norm;
    out.log = std::move(r.log);
    return out;
}

bool split_pair_exact(double sum, double b_target, double& a_out, double& b_out) {
    double b = b_target;
    for (int k = 0; k < 33; ++k) {
        double a = sum - b;
        if (a + b == sum) {
            a_out = a;
            b_out = b;
            return true;
        }
        // Walk outward: +1, -1, +2, -2, ... ulps from the target.
        int steps = k / 2 + 1;
        b = b_target;
        double toward =
            (k % 2 == 0) ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
        for (int s = 0; s < steps; ++s) b = std::nextafter(b, toward);
    }
    a_out = sum - b_target;
    b_out = b_target;
    return false;
}

PathTrace equalize_outputs(const NetworkParams& net_at_zero_delta, const Dataset& data,
                           LossKind kind, std::size_t layer, std::size_t base,
                           std::size_t offset, std::size_t steps) {
    net_at_zero_delta.validate();
    check_pair(net_at_zero_delta, layer, base, offset);
    if (steps == 0) throw DomainError("equalize_outputs: need at least one step");
    if (neuron_distance(net_at_zero_delta, layer, base, offset) > 1e-9)
        throw DomainError("equalize_outputs: parameter vectors have not merged");

    const Layer& out_layer = net_at_zero_delta.layers[layer + 1];
    const std::size_t n_out = out_layer.weights.rows;
    std::vector<double> sums(n_out), m_start(n_out);
    for (std::size_t n = 0; n < n_out; ++n) {
        double wl = out_layer.weights.at(n, base);
        double wm = out_layer.weights.at(n, offset);
        sums[n] = wl + wm;
        m_start[n] = wm;
    }

    PathTrace segment;
    segment.layer = layer;
    segment.base = base;
    segment.offset = offset;

    for (std::size_t s = 0; s <= steps; ++s) {
        NetworkParams net = net_at_zero_delta;
        Layer& out = net.layers[layer + 1];
        if (s == steps) {
            for (std::size_t n = 0; n < n_out; ++n) {
                double half = 0.5 * sums[n];
                out.weights.at(n, base) = half;
                out.weights.at(n, offset) = half;
            }
        } else {
            double frac = static_cast<double>(s) / static_cast<double>(steps);
            for (std::size_t n = 0; n < n_out; ++n) {
                double target = m_start[n] + (0.5 * sums[n] - m_start[n]) * frac;
                double a, b;
                split_pair_exact(sums[n], target, a, b);
                out.weights.at(n, base) = a;
                out.weights.at(n, offset) = b;
            }
        }

        PathSample sample;
        sample.t = 0.25 + 0.25 * static_cast<double>(s) / static_cast<double>(steps);
        sample.delta = 0.0;
        sample.loss = loss(net, data, kind);
        sample.grad_norm =
            constrained_free_gradient(net, data, kind, layer, base, offset, 0.0).norm();
        sample.params = std::move(net);
        sample.inner_iters = 0;
        sample.converged = true;
        segment.samples.push_back(std::move(sample));
    }
    return segment;
}

void append_segment(PathTrace& trace, const PathTrace& segment) {
    if (trace.layer != segment.layer || trace.base != segment.base ||
        trace.offset != segment.offset)
        throw DomainError("append_segment: segments describe different pairs");
    if (trace.samples.empty() || segment.samples.empty())
        throw DomainError("append_segment: empty trace");
    std::size_t start = 0;
    if (segment.samples.front().t == trace.samples.back().t) start = 1;
    else if (segment.samples.front().t < trace.samples.back().t)
        throw DomainError("append_segment: t would not be increasing");
    for (std::size_t i = start; i < segment.samples.size(); ++i)
        trace.samples.push_back(segment.samples[i]);
    trace.all_inner_converged = trace.all_inner_converged && segment.all_inner_converged;
}

PathTrace assemble_full_path(const PathTrace& first_half) {
    if (first_half.samples.size() < 2)
        throw DomainError("assemble_full_path: trace too short");
    const PathSample& last = first_half.samples.back();
    if (neuron_distance(last.params, first_half.layer, first_half.base,
                        first_half.offset) > 1e-9)
        throw DomainError("assemble_full_path: endpoint is not a merged configuration");

    PathTrace full = first_half;
    for (std::size_t j = first_half.samples.size() - 1; j-- > 0;) {
        const PathSample& src = first_half.samples[j];
        PathSample mirrored;
        mirrored.t = 1.0 - src.t;
        mirrored.delta = src.delta;
        mirrored.params =
            swap_pair(src.params, first_half.layer, first_half.base, first_half.offset);
        mirrored.loss = src.loss;
        mirrored.grad_norm = src.grad_norm;
        mirrored.inner_iters = 0;
        mirrored.converged = src.converged;
        full.samples.push_back(std::move(mirrored));
    }
    return full;
}

PathPropertyReport verify_path_properties(const PathTrace& trace, const Dataset& data,
                                          LossKind kind, const VerifySettings& settings) {
    PathPropertyReport report;
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const PathSample& s = trace.samples[i];
        double g = constrained_free_gradient(s.params, data, kind, trace.layer,
                                             trace.base, trace.offset, s.delta)
                       .norm();
        ++report.samples_checked;
        if (g > settings.parallel_tol)
            report.violations.push_back({s.t, "parallelism", g});

        if (settings.check_spectra &&
            (i % settings.spectrum_stride == 0 || i + 1 == trace.samples.size()) &&
            parameter_count(s.params) <= settings.hessian_cap) {
            DenseMatrix h = hessian(s.params, data, kind, settings.hessian_cap);
            SpectrumReport spec =
                symmetric_eigen(h, 100, settings.negative_tol).spectrum;
            ++report.spectra_checked;
            if (spec.n_negative > 1)
                report.violations.push_back(
                    {s.t, "spectrum", static_cast<double>(spec.n_negative)});
        }
    }
    return report;
}

std::pair<std::size_t, std::size_t> pick_max_cosine_pair(const NetworkParams& net,
                                                         std::size_t layer) {
    check_pair(net, layer, 0, net.layers[layer].weights.rows > 1 ? 1 : 0);
    const std::size_t n = net.layers[layer].weights.rows;
    double best = -2.0;
    std::pair<std::size_t, std::size_t> pair{0, 1};
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t m = l + 1; m < n; ++m) {
            double c = neuron_cosine(net, layer, l, m);
            if (c > best) {
                best = c;
                pair = {l, m};
            }
        }
    return pair;
}

void write_trace_csv(const PathTrace& trace, const std::filesystem::path& path,
                     const std::vector<double>& accuracy) {
    if (!accuracy.empty() && accuracy.size() != trace.samples.size())
        throw DimensionError("write_trace_csv: accuracy column length mismatch");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "step,t,delta,loss,grad_norm,inner_iters";
    if (!accuracy.empty()) out << ",accuracy";
    out << "\n";
    char buf[128];
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const PathSample& s = trace.samples[i];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%zu", i, s.t,
                      s.delta, s.loss, s.grad_norm, s.inner_iters);
        out << buf;
        if (!accuracy.empty()) {
            std::snprintf(buf, sizeof(buf), ",%.17g", accuracy[i]);
            out << buf;
        }
        out << "\n";
    }
}

}  // namespace permpoint
