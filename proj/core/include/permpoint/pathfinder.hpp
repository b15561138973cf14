#pragma once

// Low-loss paths between reindexing-equivalent minima: shrink the distance
// between two neurons' parameter vectors under an exact scalar constraint,
// equalize their outgoing weights at constant loss, then mirror the path
// with the pair swapped.
//
// The constraint is handled by reparametrization: with base neuron l and
// offset neuron m in hidden layer k, the offset's parameters are
// theta_m = theta_l + delta * e / ||e||, and minimization runs over all
// remaining parameters plus e. The distance therefore equals delta exactly
// at every accepted step.

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "permpoint/errors.hpp"
#include "permpoint/network.hpp"
#include "permpoint/symmetry.hpp"

namespace permpoint {

struct MergeSettings {
    MergeSettings() {
        // Relu minimizers frequently sit on activation boundaries where the
        // loss bottoms out while the gradient norm stays finite; the inner
        // runs therefore also accept loss-progress convergence.
        inner.loss_flat_window = 400;
    }
    std::size_t n_delta_steps = 200;    // log-spaced distance schedule length
    double delta_floor_ratio = 1e-4;    // last positive delta / initial distance
    GdSettings inner;                   // settings for each inner minimization
    std::size_t equalization_steps = 50;
    double start_grad_warn = 1e-4;      // warn when the start is not a minimum
};

struct PathSample {
    double t = 0.0;
    double delta = 0.0;
    NetworkParams params;
    double loss = 0.0;
    double grad_norm = 0.0;    // free-parameter gradient at this sample
    std::size_t inner_iters = 0;
    bool converged = true;
};

struct PathTrace {
    std::vector<PathSample> samples;
    std::size_t layer = 0;
    std::size_t base = 0;    // neuron l
    std::size_t offset = 0;  // neuron m
    bool all_inner_converged = true;
    bool start_was_minimum = true;

    double max_loss() const;
    const PathSample& back() const { return samples.back(); }
};

// Reconstruction frame for the offset neuron: theta_m = base + delta * e.
struct ConstraintFrame {
    DenseVector base;       // parameter vector of neuron l
    DenseVector direction;  // unit vector e
    double delta = 0.0;

    DenseVector offset_vector() const;  // base + delta * direction
};

// Divergence during merge descent; carries whatever was traced so far.
struct MergeDivergence : NumericError {
    MergeDivergence(const std::string& what, PathTrace partial_)
        : NumericError(what), partial(std::move(partial_)) {}
    PathTrace partial;
};

// Covers t in [0, 1/4]: n_delta_steps log-spaced delta values from the
// initial distance down to its delta_floor_ratio multiple, then delta = 0
// with the two parameter vectors assigned exactly equal. Each step warm
// starts from the previous solution. Divergence throws NumericError; an
// inner run that merely hits its iteration cap flags the sample and
// continues.
PathTrace merge_descent(const NetworkParams& net0, const Dataset& data, LossKind kind,
                        std::size_t layer, std::size_t base, std::size_t offset,
                        const MergeSettings& settings = {});

// Covers t in [1/4, 1/2]: linearly moves each outgoing-weight pair
// (W_{n,l}, W_{n,m}) to its midpoint while holding every pair sum fixed.
// Requires the two parameter vectors to already coincide.
PathTrace equalize_outputs(const NetworkParams& net_at_zero_delta, const Dataset& data,
                           LossKind kind, std::size_t layer, std::size_t base,
                           std::size_t offset, std::size_t steps = 50);

// Appends a later segment, checking t-continuity and dropping the
// duplicated boundary sample.
void append_segment(PathTrace& trace, const PathTrace& segment);

// Mirrors the first half: for t in (1/2, 1] the sample at 1 - t is the
// earlier sample with neurons l and m swapped. Losses and gradient norms
// carry over, so the recorded loss sequence is an exact palindrome and the
// final parameters equal swap_pair of the initial ones bit-exactly.
PathTrace assemble_full_path(const PathTrace& first_half);

struct VerifySettings {
    double parallel_tol = 1e-6;    // free-gradient norm bound per sample
    bool check_spectra = false;    // also examine Hessian eigenvalues
    double negative_tol = 1e-6;    // relative threshold for "negative"
    std::size_t hessian_cap = 600;
    std::size_t spectrum_stride = 10;  // check every n-th sample
};

struct PathViolation {
    double t;
    std::string kind;  // "parallelism" or "spectrum"
    double value;
};

struct PathPropertyReport {
    std::vector<PathViolation> violations;
    std::size_t samples_checked = 0;
    std::size_t spectra_checked = 0;
    bool ok() const { return violations.empty(); }
};

// Re-derives the free-parameter gradient at each first-half sample (using
// that sample's delta and constraint frame) and checks it stays below
// parallel_tol; optionally verifies the Hessian has at most one eigenvalue
// below -negative_tol * max|lambda| on a sample stride.
PathPropertyReport verify_path_properties(const PathTrace& trace, const Dataset& data,
                                          LossKind kind,
                                          const VerifySettings& settings = {});

// Pair with the highest cosine similarity between parameter vectors in the
// given hidden layer.
std::pair<std::size_t, std::size_t> pick_max_cosine_pair(const NetworkParams& net,
                                                         std::size_t layer);

// CSV export: header step,t,delta,loss,grad_norm,inner_iters with floats
// printed to 17 significant digits. `accuracy` (optional, same length as
// samples) adds a trailing column.
void write_trace_csv(const PathTrace& trace, const std::filesystem::path& path,
                     const std::vector<double>& accuracy = {});

// Splits `sum` into a pair (sum - b, b) with b as close as possible to
// b_target such that the recomputed pair sum equals `sum` bit-exactly.
// Returns false (keeping the unadjusted pair) when no nearby b achieves
// this, which only happens for near-cancelling pairs.
bool split_pair_exact(double sum, double b_target, double& a_out, double& b_out);

// Minimizes the loss with the two parameter vectors held exactly equal
// (the delta = 0 frame). Used to tighten a merged endpoint before loss
// comparisons; the pair's rows stay bit-identical throughout.
GdResult minimize_with_pair_tied(const NetworkParams& net, const Dataset& data,
                                 LossKind kind, std::size_t layer, std::size_t base,
                                 std::size_t offset, const GdSettings& settings = {});

// The free-parameter gradient of the constrained problem at an arbitrary
// point: the offset block is replaced by the direction derivative, the base
// block accumulates both rows. Used by merge_descent and the verifier.
DenseVector constrained_free_gradient(const NetworkParams& net, const Dataset& data,
                                      LossKind kind, std::size_t layer,
                                      std::size_t base, std::size_t offset,
                                      double delta);

}  // namespace permpoint
