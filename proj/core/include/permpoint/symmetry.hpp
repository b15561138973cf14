#pragma once

// Hidden-neuron reindexing: per-layer permutations that leave the network
// function unchanged, neuron parameter vectors and distances, duplication
// of neurons into a wider net (order-K merged configurations) and the
// inverse reduction to a smaller net.
//
// Layer indices are 0-based throughout: "hidden layer k" means
// net.layers[k] holds the incoming parameters and net.layers[k+1] the
// outgoing weights, for k in [0, depth-2].

#include <cstddef>
#include <string>
#include <vector>

#include "permpoint/counting.hpp"
#include "permpoint/network.hpp"
#include "permpoint/numerics.hpp"

namespace permpoint {

// Incoming weight row and bias of one neuron, as a single vector
// (weights first, bias last).
struct NeuronVector {
    std::size_t layer = 0;
    std::size_t neuron = 0;
    DenseVector values;
};

NeuronVector neuron_vector(const NetworkParams& net, std::size_t layer,
                           std::size_t neuron);
NetworkParams set_neuron_vector(const NetworkParams& net, std::size_t layer,
                                std::size_t neuron, const DenseVector& values);

// Euclidean distance between the parameter vectors of two distinct neurons
// in the same hidden layer.
double neuron_distance(const NetworkParams& net, std::size_t layer, std::size_t l,
                       std::size_t m);

// Cosine similarity of two neuron parameter vectors.
double neuron_cosine(const NetworkParams& net, std::size_t layer, std::size_t l,
                     std::size_t m);

// One permutation per hidden layer; input and output indices stay fixed.
// perms[k][i] is the new index of neuron i in hidden layer k.
struct PermutationSpec {
    std::vector<std::vector<std::size_t>> perms;

    static PermutationSpec identity(const NetworkParams& net);
    static PermutationSpec random(const NetworkParams& net, Rng& rng);
    // Transposition of l and m in hidden layer `layer`, identity elsewhere.
    static PermutationSpec transposition(const NetworkParams& net, std::size_t layer,
                                         std::size_t l, std::size_t m);
    void validate(const NetworkParams& net) const;
};

// Reindexes parameters; the network function is unchanged.
NetworkParams apply_permutation(const NetworkParams& net, const PermutationSpec& spec);

NetworkParams swap_pair(const NetworkParams& net, std::size_t layer, std::size_t l,
                        std::size_t m);

// Number of distinct parameter configurations reachable by hidden-layer
// reindexing: prod_k n_k! / prod(multiplicity!), where multiplicities count
// groups of neuron vectors equal within `distinctness_tolerance`.
BigCount permutation_set_size(const NetworkParams& net,
                              double distinctness_tolerance = 1e-9);

// Partition of a hidden layer's neuron indices into groups that share one
// parameter vector; each group names a representative member. Groups are
// kept sorted by their smallest member so build/reduce round-trips are
// stable.
struct MergePlan {
    std::size_t layer = 0;
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::size_t> representatives;

    std::size_t order() const;  // K = n_k - #groups
    void validate(std::size_t layer_width) const;
    void canonicalize();

    std::string to_json() const;
    static MergePlan from_json(const std::string& text);
};

// Builds the wide network that computes the same function as `small_net`
// by duplicating each group's representative vector across the group and
// splitting the outgoing weights by `output_split` (one share per group
// member, each group summing to 1; empty means equal shares).
NetworkParams build_kth_order_point(
    const NetworkParams& small_net, const MergePlan& plan,
    const std::vector<std::vector<double>>& output_split = {});

struct ReducedNetwork {
    NetworkParams net;
    MergePlan plan;
};

// Groups neurons whose parameter vectors agree within grouping_tolerance,
// sums their outgoing weights, and returns the smaller net plus the plan
// that rebuilds the original.
ReducedNetwork reduce_network(const NetworkParams& big_net, std::size_t layer,
                              double grouping_tolerance = 1e-9);

}  // namespace permpoint
