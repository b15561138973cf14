#include "permpoint/plateau.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "permpoint/errors.hpp"
#include "permpoint/pathfinder.hpp"

namespace permpoint {

std::string to_string(Criticality c) {
    switch (c) {
        case Criticality::local_min: return "local-min";
        case Criticality::weak_first_order_saddle: return "weak-first-order-saddle";
        case Criticality::higher_order: return "higher-order";
        case Criticality::non_critical: return "non-critical";
    }
    return "non-critical";
}

std::string CriticalityReport::to_json() const {
    nlohmann::json j;
    j["loss"] = loss;
    j["grad_norm"] = grad_norm;
    j["eigenvalues"] = spectrum.eigenvalues;
    j["zero_tolerance"] = spectrum.zero_tolerance;
    j["n_negative"] = spectrum.n_negative;
    j["n_zero"] = spectrum.n_zero;
    j["n_positive"] = spectrum.n_positive;
    j["n_zero_required"] = n_zero_required;
    j["classification"] = to_string(classification);
    return j.dump(2);
}

CriticalityReport analyze_point(const NetworkParams& net, const Dataset& data,
                                LossKind kind, std::size_t layer, std::size_t order_K,
                                const AnalyzeSettings& settings) {
    if (layer + 1 >= net.depth())
        throw DimensionError("analyze_point: layer " + std::to_string(layer) +
                             " is not hidden");
    CriticalityReport report;
    LossAndGradient lg = loss_and_gradient(net, data, kind);
    report.loss = lg.loss;
    report.grad_norm = lg.gradient.norm();

    DenseMatrix h = hessian(net, data, kind, settings.hessian_cap);
    report.spectrum =
        symmetric_eigen(h, settings.max_sweeps, settings.zero_tol_rel).spectrum;
    report.n_zero_required = order_K * net.layers[layer + 1].weights.rows;

    if (report.grad_norm >= settings.noncritical_rel * (1.0 + std::abs(report.loss)))
        report.classification = Criticality::non_critical;
    else if (report.spectrum.n_negative >= 2)
        report.classification = Criticality::higher_order;
    else if (report.spectrum.n_negative == 1)
        report.classification = Criticality::weak_first_order_saddle;
    else
        report.classification = Criticality::local_min;
    return report;
}

namespace {

// Shifts per-output-unit weight between two layer-(k+1) columns, holding
// each pair sum bit-exact. `from_start` -> `from_end` describes the moving
// column's schedule.
void set_column_pair(NetworkParams& net, std::size_t layer, std::size_t moving,
                     std::size_t fixed, const std::vector<double>& sums,
                     const std::vector<double>& moving_start,
                     const std::vector<double>& moving_end, double frac, bool final_half) {
    Layer& out = net.layers[layer + 1];
    for (std::size_t n = 0; n < out.weights.rows; ++n) {
        double a, b;
        if (final_half) {
            b = 0.5 * sums[n];
            a = sums[n] - b;  // exact: sums - sums/2 == sums/2
        } else {
            double target = moving_start[n] + (moving_end[n] - moving_start[n]) * frac;
            split_pair_exact(sums[n], target, a, b);
        }
        out.weights.at(n, moving) = b;
        out.weights.at(n, fixed) = a;
    }
}

std::vector<double> column_of(const NetworkParams& net, std::size_t layer,
                              std::size_t col) {
    const Layer& out = net.layers[layer + 1];
    std::vector<double> v(out.weights.rows);
    for (std::size_t n = 0; n < out.weights.rows; ++n) v[n] = out.weights.at(n, col);
    return v;
}

}  // namespace

ExchangePath equal_loss_exchange(const NetworkParams& net_at_pp, const Dataset& data,
                                 LossKind kind, std::size_t layer, std::size_t base,
                                 std::size_t offset, std::size_t target,
                                 std::size_t steps_per_stage, double rel_tol) {
    net_at_pp.validate();
    if (layer + 1 >= net_at_pp.depth())
        throw DimensionError("equal_loss_exchange: layer is not hidden");
    const std::size_t width = net_at_pp.layers[layer].weights.rows;
    if (base >= width || offset >= width || target >= width)
        throw DimensionError("equal_loss_exchange: neuron index out of range");
    if (base == offset)
        throw DomainError("equal_loss_exchange: base and offset must differ");
    if (target == base)
        throw DomainError("equal_loss_exchange: target may not be the base neuron");

    if (neuron_distance(net_at_pp, layer, base, offset) > 1e-9)
        throw DomainError("equal_loss_exchange: parameter vectors of the pair differ");
    {
        const Layer& out = net_at_pp.layers[layer + 1];
        for (std::size_t n = 0; n < out.weights.rows; ++n)
            if (std::abs(out.weights.at(n, base) - out.weights.at(n, offset)) > 1e-9)
                throw DomainError("equal_loss_exchange: outgoing weights are not equal");
    }

    ExchangePath path;
    path.layer = layer;
    path.base = base;
    path.offset = offset;
    path.target = target;
    path.start_loss = loss(net_at_pp, data, kind);
    const double denom = std::max(std::abs(path.start_loss), 1e-12);

    const DenseVector shared_vector = neuron_vector(net_at_pp, layer, base).values;
    const DenseVector target_vector = neuron_vector(net_at_pp, layer, target).values;
    const std::size_t p = shared_vector.size();

    NetworkParams current = net_at_pp;

    auto run_stage = [&](int index, const std::string& what,
                         auto&& make_sample) {
        ExchangeStage stage;
        stage.index = index;
        stage.description = what;
        for (std::size_t s = 0; s <= steps_per_stage; ++s) {
            double frac = static_cast<double>(s) / static_cast<double>(steps_per_stage);
            NetworkParams net = make_sample(frac, s == steps_per_stage);
            double l = loss(net, data, kind);
            double dev = std::abs(l - path.start_loss) / denom;
            path.max_rel_loss_dev = std::max(path.max_rel_loss_dev, dev);
            if (dev > rel_tol)
                throw NumericError("equal_loss_exchange: loss drifted by " +
                                   std::to_string(dev) + " (relative) in stage " +
                                   std::to_string(index) + " at position " +
                                   std::to_string(frac));
            stage.losses.push_back(l);
            stage.samples.push_back(std::move(net));
        }
        current = stage.samples.back();
        path.stages.push_back(std::move(stage));
    };

    // Stage 1: move m's outgoing weights onto l.
    {
        NetworkParams start = current;
        std::vector<double> m0 = column_of(start, layer, offset);
        std::vector<double> l0 = column_of(start, layer, base);
        std::vector<double> sums(m0.size());
        for (std::size_t n = 0; n < m0.size(); ++n) sums[n] = l0[n] + m0[n];
        std::vector<double> zeros(m0.size(), 0.0);
        run_stage(1, "shift outgoing weights of m onto l", [&](double frac, bool) {
            NetworkParams net = start;
            set_column_pair(net, layer, offset, base, sums, m0, zeros, frac, false);
            return net;
        });
    }

    // Stage 2: move m's parameter vector onto i's (m is inert).
    {
        NetworkParams start = current;
        run_stage(2, "move parameter vector of m onto i", [&](double frac, bool last) {
            DenseVector v(p);
            for (std::size_t j = 0; j < p; ++j)
                v[j] = last ? target_vector[j]
                            : shared_vector[j] + (target_vector[j] - shared_vector[j]) * frac;
            return set_neuron_vector(start, layer, offset, v);
        });
    }

    // Stage 3: move i's outgoing weights onto m.
    {
        NetworkParams start = current;
        std::vector<double> i0 = column_of(start, layer, target);
        std::vector<double> m0 = column_of(start, layer, offset);  // zeros
        std::vector<double> sums(i0.size());
        for (std::size_t n = 0; n < i0.size(); ++n) sums[n] = i0[n] + m0[n];
        run_stage(3, "shift outgoing weights of i onto m", [&](double frac, bool) {
            NetworkParams net = start;
            set_column_pair(net, layer, offset, target, sums, m0, sums, frac, false);
            return net;
        });
    }

    // Stage 4: zero i's parameter vector (i is inert).
    {
        NetworkParams start = current;
        DenseVector i_vec = neuron_vector(start, layer, target).values;
        run_stage(4, "zero the parameter vector of i", [&](double frac, bool last) {
            DenseVector v(p);
            for (std::size_t j = 0; j < p; ++j)
                v[j] = last ? 0.0 : i_vec[j] * (1.0 - frac);
            return set_neuron_vector(start, layer, target, v);
        });
    }

    // Stage 5: move i's parameter vector onto the shared one.
    {
        NetworkParams start = current;
        run_stage(5, "move parameter vector of i onto the shared one",
                  [&](double frac, bool last) {
                      DenseVector v(p);
                      for (std::size_t j = 0; j < p; ++j)
                          v[j] = last ? shared_vector[j] : shared_vector[j] * frac;
                      return set_neuron_vector(start, layer, target, v);
                  });
    }

    // Stage 6: split l's outgoing weights equally between l and i.
    {
        NetworkParams start = current;
        std::vector<double> l0 = column_of(start, layer, base);
        std::vector<double> i0 = column_of(start, layer, target);  // zeros
        std::vector<double> sums(l0.size());
        for (std::size_t n = 0; n < l0.size(); ++n) sums[n] = l0[n] + i0[n];
        std::vector<double> halves(l0.size());
        for (std::size_t n = 0; n < l0.size(); ++n) halves[n] = 0.5 * sums[n];
        run_stage(6, "share outgoing weights equally between l and i",
                  [&](double frac, bool last) {
                      NetworkParams net = start;
                      set_column_pair(net, layer, target, base, sums, i0, halves, frac,
                                      last);
                      return net;
                  });
    }

    return path;
}

HyperplaneFrame constraint_null_basis(const NetworkParams& big_net,
                                      const MergePlan& plan) {
    big_net.validate();
    if (plan.layer + 1 >= big_net.depth())
        throw DimensionError("constraint_null_basis: layer is not hidden");
    const std::size_t width = big_net.layers[plan.layer].weights.rows;
    plan.validate(width);

    // The net must actually realize the plan: grouped vectors equal.
    for (std::size_t g = 0; g < plan.groups.size(); ++g) {
        for (std::size_t idx : plan.groups[g]) {
            if (idx == plan.representatives[g]) continue;
            if (neuron_distance(big_net, plan.layer, plan.representatives[g], idx) > 1e-9)
                throw DomainError(
                    "constraint_null_basis: group members do not share a parameter "
                    "vector");
        }
    }

    HyperplaneFrame frame;
    frame.layer = plan.layer;
    frame.plan = plan;

    const std::size_t n_flat = parameter_count(big_net);
    const Layer& out = big_net.layers[plan.layer + 1];
    const std::size_t n_out = out.weights.rows;

    // Flat index of W^{(k+1)}_{n, j}.
    std::size_t out_base = 0;
    for (std::size_t t = 0; t <= plan.layer; ++t)
        out_base += big_net.layers[t].weights.entries.size() + big_net.layers[t].bias.size();
    auto out_index = [&](std::size_t n, std::size_t j) {
        return out_base + n * out.weights.cols + j;
    };

    // Per output unit and group: an orthonormal zero-sum basis over the
    // group members (size s gives s - 1 directions).
    for (std::size_t n = 0; n < n_out; ++n) {
        for (const auto& members : frame.plan.groups) {
            const std::size_t s = members.size();
            for (std::size_t r = 1; r < s; ++r) {
                DenseVector v(n_flat, 0.0);
                double scale = 1.0 / std::sqrt(static_cast<double>(r * (r + 1)));
                for (std::size_t j = 0; j < r; ++j)
                    v[out_index(n, members[j])] = scale;
                v[out_index(n, members[r])] = -static_cast<double>(r) * scale;
                frame.basis.push_back(std::move(v));
            }
        }
    }
    return frame;
}

std::string ProbeReport::to_json() const {
    nlohmann::json j;
    j["n_probes"] = n_probes;
    j["base_loss"] = base_loss;
    j["max_rel_loss_dev"] = max_rel_loss_dev;
    j["max_grad_norm"] = max_grad_norm;
    j["deviations"] = deviations;
    j["control_ran"] = control_ran;
    j["control_deviation"] = control_deviation;
    j["all_within_tol"] = all_within_tol;
    return j.dump(2);
}

ProbeReport probe_hyperplane(const NetworkParams& net, const Dataset& data,
                             LossKind kind, const HyperplaneFrame& frame,
                             std::size_t n_probes, double radius, Rng& rng,
                             const ProbeSettings& settings) {
    ProbeReport report;
    report.base_loss = loss(net, data, kind);
    report.n_probes = n_probes;
    const double denom = std::max(std::abs(report.base_loss), settings.loss_floor);
    const DenseVector theta = flatten(net);
    const std::size_t dim = frame.basis.size();

    for (std::size_t probe = 0; probe < n_probes; ++probe) {
        DenseVector x = theta;
        if (dim > 0) {
            // Uniform in the radius ball of coefficient space.
            DenseVector c = rng.unit_sphere(dim);
            double scale =
                radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
            for (std::size_t b = 0; b < dim; ++b) {
                double coeff = scale * c[b];
                const DenseVector& dir = frame.basis[b];
                for (std::size_t i = 0; i < x.size(); ++i) x[i] += coeff * dir[i];
            }
        }
        NetworkParams probed = unflatten(net, x);
        double l = loss(probed, data, kind);
        double dev = std::abs(l - report.base_loss) / denom;
        report.deviations.push_back(dev);
        report.max_rel_loss_dev = std::max(report.max_rel_loss_dev, dev);
        if (dev > settings.rel_tol) report.all_within_tol = false;
        if (settings.check_gradients) {
            double g = gradient(probed, data, kind).norm();
            report.max_grad_norm = std::max(report.max_grad_norm, g);
            if (g > settings.grad_tol) report.all_within_tol = false;
        }
    }

    if (settings.negative_control) {
        // Bump one outgoing weight of a duplicated group without
        // compensating its partner; this violates the sum constraint.
        const auto& plan = frame.plan;
        std::size_t group = 0;
        for (std::size_t g = 0; g < plan.groups.size(); ++g)
            if (plan.groups[g].size() >= 2) group = g;
        if (plan.groups[group].size() >= 2) {
            std::size_t out_base = 0;
            for (std::size_t t = 0; t <= frame.layer; ++t)
                out_base += net.layers[t].weights.entries.size() +
                            net.layers[t].bias.size();
            const Layer& out_layer = net.layers[frame.layer + 1];
            std::size_t idx =
                out_base + 0 * out_layer.weights.cols + plan.groups[group].front();
            DenseVector x = theta;
            x[idx] += radius;
            report.control_deviation =
                std::abs(loss(unflatten(net, x), data, kind) - report.base_loss) / denom;
            report.control_ran = true;
        }
    }
    return report;
}

}  // namespace permpoint
