#include "permpoint/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "permpoint/errors.hpp"

namespace permpoint {

namespace {

void check_hidden_layer(const NetworkParams& net, std::size_t layer) {
    if (net.depth() < 2) throw DimensionError("network has no hidden layer");
    if (layer + 1 >= net.depth())
        throw DimensionError("layer " + std::to_string(layer) + " is not hidden");
}

void check_neuron(const NetworkParams& net, std::size_t layer, std::size_t neuron) {
    if (layer >= net.depth()) throw DimensionError("layer index out of range");
    if (neuron >= net.layers[layer].weights.rows)
        throw DimensionError("neuron index " + std::to_string(neuron) +
                             " out of range in layer " + std::to_string(layer));
}

}  // namespace

NeuronVector neuron_vector(const NetworkParams& net, std::size_t layer,
                           std::size_t neuron) {
    check_neuron(net, layer, neuron);
    const Layer& l = net.layers[layer];
    NeuronVector v;
    v.layer = layer;
    v.neuron = neuron;
    v.values = DenseVector(l.weights.cols + 1);
    for (std::size_t j = 0; j < l.weights.cols; ++j) v.values[j] = l.weights.at(neuron, j);
    v.values[l.weights.cols] = l.bias[neuron];
    return v;
}

NetworkParams set_neuron_vector(const NetworkParams& net, std::size_t layer,
                                std::size_t neuron, const DenseVector& values) {
    check_neuron(net, layer, neuron);
    NetworkParams out = net;
    Layer& l = out.layers[layer];
    if (values.size() != l.weights.cols + 1)
        throw DimensionError("set_neuron_vector: expected length " +
                             std::to_string(l.weights.cols + 1));
    for (std::size_t j = 0; j < l.weights.cols; ++j) l.weights.at(neuron, j) = values[j];
    l.bias[neuron] = values[l.weights.cols];
    return out;
}

double neuron_distance(const NetworkParams& net, std::size_t layer, std::size_t l,
                       std::size_t m) {
    if (l == m) throw DomainError("neuron_distance: l == m");
    DenseVector a = neuron_vector(net, layer, l).values;
    DenseVector b = neuron_vector(net, layer, m).values;
    a -= b;
    return a.norm();
}

double neuron_cosine(const NetworkParams& net, std::size_t layer, std::size_t l,
                     std::size_t m) {
    DenseVector a = neuron_vector(net, layer, l).values;
    DenseVector b = neuron_vector(net, layer, m).values;
    double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

PermutationSpec PermutationSpec::identity(const NetworkParams& net) {
    PermutationSpec spec;
    for (std::size_t t = 0; t + 1 < net.depth(); ++t) {
        std::vector<std::size_t> p(net.layers[t].weights.rows);
        std::iota(p.begin(), p.end(), std::size_t{0});
        spec.perms.push_back(std::move(p));
    }
    return spec;
}

PermutationSpec PermutationSpec::random(const NetworkParams& net, Rng& rng) {
    PermutationSpec spec = identity(net);
    for (auto& p : spec.perms) {
        // Fisher-Yates
        for (std::size_t i = p.size(); i > 1; --i)
            std::swap(p[i - 1], p[rng.index(i)]);
    }
    return spec;
}

PermutationSpec PermutationSpec::transposition(const NetworkParams& net,
                                               std::size_t layer, std::size_t l,
                                               std::size_t m) {
    check_hidden_layer(net, layer);
    check_neuron(net, layer, l);
    check_neuron(net, layer, m);
    PermutationSpec spec = identity(net);
    std::swap(spec.perms[layer][l], spec.perms[layer][m]);
    return spec;
}

void PermutationSpec::validate(const NetworkParams& net) const {
    if (perms.size() != net.depth() - 1)
        throw DimensionError("permutation spec: expected one permutation per hidden layer");
    for (std::size_t k = 0; k < perms.size(); ++k) {
        const auto& p = perms[k];
        if (p.size() != net.layers[k].weights.rows)
            throw DimensionError("permutation spec: wrong size at layer " +
                                 std::to_string(k));
        std::vector<bool> seen(p.size(), false);
        for (std::size_t v : p) {
            if (v >= p.size() || seen[v])
                throw DomainError("permutation spec: not a bijection at layer " +
                                  std::to_string(k));
            seen[v] = true;
        }
    }
}

NetworkParams apply_permutation(const NetworkParams& net, const PermutationSpec& spec) {
    spec.validate(net);
    NetworkParams out = net;
    const std::size_t d = net.depth();
    auto sigma = [&](std::size_t t, std::size_t i) -> std::size_t {
        // Identity on the input (t == 0 handled by caller) and output layers.
        return t < d - 1 ? spec.perms[t][i] : i;
    };
    for (std::size_t t = 0; t < d; ++t) {
        const Layer& src = net.layers[t];
        Layer& dst = out.layers[t];
        for (std::size_t i = 0; i < src.weights.rows; ++i) {
            std::size_t ri = sigma(t, i);
            for (std::size_t j = 0; j < src.weights.cols; ++j) {
                std::size_t cj = (t == 0) ? j : sigma(t - 1, j);
                dst.weights.at(ri, cj) = src.weights.at(i, j);
            }
            dst.bias[ri] = src.bias[i];
        }
    }
    return out;
}

NetworkParams swap_pair(const NetworkParams& net, std::size_t layer, std::size_t l,
                        std::size_t m) {
    return apply_permutation(net, PermutationSpec::transposition(net, layer, l, m));
}

namespace {

// Greedy grouping of layer neurons by parameter-vector distance. With
// include_outgoing the outgoing-weight column is appended, so only neurons
// that are interchangeable without moving any parameter group together.
std::vector<std::vector<std::size_t>> group_equal_neurons(const NetworkParams& net,
                                                          std::size_t layer,
                                                          double tolerance,
                                                          bool include_outgoing = false) {
    const std::size_t n = net.layers[layer].weights.rows;
    std::vector<std::vector<std::size_t>> groups;
    std::vector<DenseVector> reps;
    for (std::size_t i = 0; i < n; ++i) {
        DenseVector v = neuron_vector(net, layer, i).values;
        if (include_outgoing) {
            const Layer& out = net.layers[layer + 1];
            for (std::size_t r = 0; r < out.weights.rows; ++r)
                v.entries.push_back(out.weights.at(r, i));
        }
        bool placed = false;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            DenseVector diff = v;
            diff -= reps[g];
            if (diff.norm() <= tolerance) {
                groups[g].push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) {
            groups.push_back({i});
            reps.push_back(std::move(v));
        }
    }
    return groups;
}

}  // namespace

BigCount permutation_set_size(const NetworkParams& net, double distinctness_tolerance) {
    BigCount total{1};
    for (std::size_t k = 0; k + 1 < net.depth(); ++k) {
        const std::size_t n = net.layers[k].weights.rows;
        // n! / prod(multiplicity!) as a product of binomials (multinomial).
        // Neurons count as duplicates only when swapping them moves no
        // parameter at all, i.e. incoming vectors and outgoing columns both
        // coincide (as they do at permutation points).
        BigCount layer_count{1};
        unsigned remaining = static_cast<unsigned>(n);
        for (const auto& group :
             group_equal_neurons(net, k, distinctness_tolerance, true)) {
            layer_count = layer_count * binomial(remaining, static_cast<unsigned>(group.size()));
            remaining -= static_cast<unsigned>(group.size());
        }
        total = total * layer_count;
    }
    return total;
}

std::size_t MergePlan::order() const {
    std::size_t members = 0;
    for (const auto& g : groups) members += g.size();
    return members - groups.size();
}

void MergePlan::validate(std::size_t layer_width) const {
    if (groups.empty()) throw DomainError("merge plan: no groups");
    if (representatives.size() != groups.size())
        throw DomainError("merge plan: one representative per group required");
    std::vector<bool> seen(layer_width, false);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw DomainError("merge plan: empty group");
        bool rep_found = false;
        for (std::size_t idx : groups[g]) {
            if (idx >= layer_width)
                throw DomainError("merge plan: index out of range");
            if (seen[idx]) throw DomainError("merge plan: groups overlap");
            seen[idx] = true;
            if (idx == representatives[g]) rep_found = true;
        }
        if (!rep_found)
            throw DomainError("merge plan: representative not in its group");
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
        throw DomainError("merge plan: groups do not cover the layer");
}

void MergePlan::canonicalize() {
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (auto& g : groups) std::sort(g.begin(), g.end());
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return groups[a].front() < groups[b].front();
    });
    std::vector<std::vector<std::size_t>> new_groups;
    std::vector<std::size_t> new_reps;
    for (std::size_t g : order) {
        new_groups.push_back(std::move(groups[g]));
        new_reps.push_back(representatives[g]);
    }
    groups = std::move(new_groups);
    representatives = std::move(new_reps);
}

std::string MergePlan::to_json() const {
    nlohmann::json j;
    j["layer"] = layer;
    j["groups"] = groups;
    j["representatives"] = representatives;
    return j.dump();
}

MergePlan MergePlan::from_json(const std::string& text) {
    MergePlan plan;
    try {
        nlohmann::json j = nlohmann::json::parse(text);
        plan.layer = j.at("layer").get<std::size_t>();
        plan.groups = j.at("groups").get<std::vector<std::vector<std::size_t>>>();
        plan.representatives = j.at("representatives").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("merge plan json: ") + e.what());
    }
    return plan;
}

NetworkParams build_kth_order_point(const NetworkParams& small_net, const MergePlan& plan,
                                    const std::vector<std::vector<double>>& output_split) {
    check_hidden_layer(small_net, plan.layer);
    const std::size_t k = plan.layer;
    const std::size_t l = small_net.layers[k].weights.rows;
    if (plan.groups.size() != l)
        throw DimensionError("build_kth_order_point: plan has " +
                             std::to_string(plan.groups.size()) + " groups, small net has " +
                             std::to_string(l) + " neurons at layer " + std::to_string(k));
    std::size_t big_width = 0;
    for (const auto& g : plan.groups) big_width += g.size();
    plan.validate(big_width);

    if (!output_split.empty()) {
        if (output_split.size() != plan.groups.size())
            throw DimensionError("build_kth_order_point: one share list per group");
        for (std::size_t g = 0; g < output_split.size(); ++g) {
            if (output_split[g].size() != plan.groups[g].size())
                throw DimensionError("build_kth_order_point: share count mismatch");
            double sum = 0.0;
            for (double s : output_split[g]) sum += s;
            if (std::abs(sum - 1.0) > 1e-12)
                throw DomainError("build_kth_order_point: shares must sum to 1");
        }
    }

    NetworkParams big = small_net;
    const Layer& small_in = small_net.layers[k];
    const Layer& small_out = small_net.layers[k + 1];

    Layer& big_in = big.layers[k];
    big_in.weights = DenseMatrix(big_width, small_in.weights.cols);
    big_in.bias = DenseVector(big_width);
    Layer& big_out = big.layers[k + 1];
    big_out.weights = DenseMatrix(small_out.weights.rows, big_width);

    for (std::size_t g = 0; g < plan.groups.size(); ++g) {
        const auto& members = plan.groups[g];
        for (std::size_t pos = 0; pos < members.size(); ++pos) {
            std::size_t j = members[pos];
            for (std::size_t c = 0; c < small_in.weights.cols; ++c)
                big_in.weights.at(j, c) = small_in.weights.at(g, c);
            big_in.bias[j] = small_in.bias[g];
            double share = output_split.empty()
                               ? 1.0 / static_cast<double>(members.size())
                               : output_split[g][pos];
            for (std::size_t n = 0; n < small_out.weights.rows; ++n)
                big_out.weights.at(n, j) = share * small_out.weights.at(n, g);
        }
    }
    return big;
}

ReducedNetwork reduce_network(const NetworkParams& big_net, std::size_t layer,
                              double grouping_tolerance) {
    check_hidden_layer(big_net, layer);
    auto groups = group_equal_neurons(big_net, layer, grouping_tolerance);

    MergePlan plan;
    plan.layer = layer;
    plan.groups = std::move(groups);
    for (const auto& g : plan.groups) plan.representatives.push_back(g.front());
    plan.canonicalize();

    const Layer& big_in = big_net.layers[layer];
    const Layer& big_out = big_net.layers[layer + 1];
    const std::size_t l = plan.groups.size();

    NetworkParams small = big_net;
    Layer& small_in = small.layers[layer];
    small_in.weights = DenseMatrix(l, big_in.weights.cols);
    small_in.bias = DenseVector(l);
    Layer& small_out = small.layers[layer + 1];
    small_out.weights = DenseMatrix(big_out.weights.rows, l);

    for (std::size_t g = 0; g < l; ++g) {
        std::size_t rep = plan.representatives[g];
        for (std::size_t c = 0; c < big_in.weights.cols; ++c)
            small_in.weights.at(g, c) = big_in.weights.at(rep, c);
        small_in.bias[g] = big_in.bias[rep];
        for (std::size_t n = 0; n < big_out.weights.rows; ++n) {
            double sum = 0.0;
            for (std::size_t j : plan.groups[g]) sum += big_out.weights.at(n, j);
            small_out.weights.at(n, g) = sum;
        }
    }
    return {std::move(small), std::move(plan)};
}

}  // namespace permpoint
