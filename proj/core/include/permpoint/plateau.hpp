#pragma once

// Properties of merged-neuron configurations: criticality and Hessian
// null-space counts, the six-stage equal-loss exchange that lets any two
// hidden-layer indices trade places, and probes of the equal-loss
// hyperplane spanned by the outgoing-weight sum constraints.

#include <cstddef>
#include <string>
#include <vector>

#include "permpoint/network.hpp"
#include "permpoint/numerics.hpp"
#include "permpoint/symmetry.hpp"

namespace permpoint {

enum class Criticality { local_min, weak_first_order_saddle, higher_order, non_critical };

std::string to_string(Criticality c);

struct CriticalityReport {
    double loss = 0.0;
    double grad_norm = 0.0;
    SpectrumReport spectrum;
    std::size_t n_zero_required = 0;  // K * n_{k+1}
    Criticality classification = Criticality::non_critical;

    bool has_required_null_space() const { return spectrum.n_zero >= n_zero_required; }
    std::string to_json() const;
};

struct AnalyzeSettings {
    double zero_tol_rel = 1e-6;       // |lambda| < tol * max(|lambda|_max, 1) counts as zero
    double noncritical_rel = 1e-5;    // grad_norm >= tol * (1 + |loss|) -> non-critical
    std::size_t hessian_cap = 3000;
    std::size_t max_sweeps = 100;
};

// Gradient norm plus Hessian spectrum at a configuration where K merged
// groups are expected in hidden layer `layer`; checks the null-space count
// against K * n_{k+1}.
CriticalityReport analyze_point(const NetworkParams& net, const Dataset& data,
                                LossKind kind, std::size_t layer, std::size_t order_K,
                                const AnalyzeSettings& settings = {});

struct ExchangeStage {
    int index = 0;             // 1..6
    std::string description;
    std::vector<NetworkParams> samples;
    std::vector<double> losses;
};

struct ExchangePath {
    std::size_t layer = 0;
    std::size_t base = 0;    // l
    std::size_t offset = 0;  // m
    std::size_t target = 0;  // i
    double start_loss = 0.0;
    double max_rel_loss_dev = 0.0;
    std::vector<ExchangeStage> stages;

    const NetworkParams& endpoint() const { return stages.back().samples.back(); }
};

// Six linear stages that move neuron m's role onto neuron i at constant
// loss, starting from a configuration where neurons l and m share both
// their parameter vector and their outgoing weights:
//   1. shift m's outgoing weights onto l (pair sums fixed)
//   2. move m's parameter vector onto i's        (m has zero out-weights)
//   3. shift i's outgoing weights onto m (pair sums fixed)
//   4. zero i's parameter vector                 (i has zero out-weights)
//   5. move i's parameter vector onto the shared one
//   6. split l's outgoing weights equally between l and i (sums fixed)
// target == m composes to the identity; any loss drift beyond rel_tol
// throws NumericError naming the stage and position.
ExchangePath equal_loss_exchange(const NetworkParams& net_at_pp, const Dataset& data,
                                 LossKind kind, std::size_t layer, std::size_t base,
                                 std::size_t offset, std::size_t target,
                                 std::size_t steps_per_stage = 25, double rel_tol = 1e-9);

// Orthonormal directions in the outgoing-weight block of layer+1 that
// preserve every group's per-output-unit weight sum. Dimension is exactly
// K * n_{k+1}. Vectors are stored in flat parameter coordinates.
struct HyperplaneFrame {
    std::size_t layer = 0;
    MergePlan plan;
    std::vector<DenseVector> basis;  // flat-space, orthonormal

    std::size_t dimension() const { return basis.size(); }
};

// Requires the net to be consistent with the plan (grouped parameter
// vectors equal within 1e-9).
HyperplaneFrame constraint_null_basis(const NetworkParams& big_net,
                                      const MergePlan& plan);

struct ProbeSettings {
    double rel_tol = 1e-9;          // loss deviation threshold (relative)
    double loss_floor = 1e-12;      // denominator floor for the relative test
    bool check_gradients = false;   // also require small gradients at probes
    double grad_tol = 1e-5;
    bool negative_control = true;   // bump one coordinate off the hyperplane
};

struct ProbeReport {
    std::size_t n_probes = 0;
    double base_loss = 0.0;
    double max_rel_loss_dev = 0.0;
    double max_grad_norm = 0.0;
    std::vector<double> deviations;    // per probe, relative
    bool control_ran = false;
    double control_deviation = 0.0;    // relative deviation off-hyperplane
    bool all_within_tol = true;
    std::string to_json() const;
};

// Evaluates the loss at n_probes random points theta + sum c_b basis_b with
// ||c|| <= radius, plus one sum-violating direction of the same magnitude
// as a negative control.
ProbeReport probe_hyperplane(const NetworkParams& net, const Dataset& data,
                             LossKind kind, const HyperplaneFrame& frame,
                             std::size_t n_probes, double radius, Rng& rng,
                             const ProbeSettings& settings = {});

}  // namespace permpoint
