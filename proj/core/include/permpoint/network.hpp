#pragma once

// Multilayer perceptron: forward evaluation, mse / normalized-mse losses,
// exact reverse-mode gradients, finite-difference Hessians of the exact
// gradient, and full-batch gradient descent with Armijo backtracking.

#include <cstddef>
#include <string>
#include <vector>

#include "permpoint/numerics.hpp"

namespace permpoint {

enum class Activation { relu, tanh, softplus, identity };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

double apply_activation(Activation a, double x);
double activation_derivative(Activation a, double x);  // relu uses g'(0) = 0

enum class LossKind { mse, normalized_mse };

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind k);

struct Layer {
    DenseMatrix weights;  // n_k x n_{k-1}
    DenseVector bias;     // n_k
    Activation activation = Activation::identity;
};

struct NetworkParams {
    std::vector<Layer> layers;

    std::size_t depth() const { return layers.size(); }
    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::vector<std::size_t> widths() const;  // n_0 .. n_d

    // Checks dimension chaining, finite entries, affine output layer.
    void validate() const;
};

// Seeded He-style initialization: normal entries scaled by 1/sqrt(fan-in),
// hidden layers share one activation, output layer affine.
// `widths` lists n_0 .. n_d.
NetworkParams make_network(const std::vector<std::size_t>& widths, Activation hidden,
                           Rng& rng);

struct Dataset {
    DenseMatrix inputs;       // T x n_0
    DenseMatrix targets;      // T x n_d
    std::vector<int> labels;  // optional (class labels for accuracy tracking)

    std::size_t size() const { return inputs.rows; }
    void validate() const;
};

DenseVector forward(const NetworkParams& net, const DenseVector& x);
DenseMatrix forward_all(const NetworkParams& net, const DenseMatrix& inputs);

// mse: (1/T) sum_mu ||y - f(x)||^2.
// normalized_mse additionally divides by the mean squared target component
// (mean over patterns and output dimensions); all-zero targets are an error.
double loss(const NetworkParams& net, const Dataset& data, LossKind kind);

// --- flat parameter vector -------------------------------------------------
//
// Canonical order: layers in order; within a layer the weight matrix
// row-major, then the bias. flatten/unflatten round-trip bit-exactly.

std::size_t parameter_count(const NetworkParams& net);
DenseVector flatten(const NetworkParams& net);
NetworkParams unflatten(const NetworkParams& shape_like, const DenseVector& flat);
// In-place variant for hot loops; `target` supplies the shapes.
void unflatten_into(NetworkParams& target, const DenseVector& flat);

// Flat indices of one neuron's incoming parameters: its weight row
// followed by its bias entry (n_{k-1} + 1 indices in total).
std::vector<std::size_t> neuron_flat_indices(const NetworkParams& net,
                                             std::size_t layer, std::size_t neuron);

// Exact reverse-mode gradient in canonical flat order.
DenseVector gradient(const NetworkParams& net, const Dataset& data, LossKind kind);

struct LossAndGradient {
    double loss;
    DenseVector gradient;
};
LossAndGradient loss_and_gradient(const NetworkParams& net, const Dataset& data,
                                  LossKind kind);

// Dense symmetric Hessian: central finite differences of the exact gradient
// with h = h_scale * max(1, ||theta||_inf), symmetrized as (H + H^T)/2.
// Throws DomainError when the parameter count exceeds `cap`.
DenseMatrix hessian(const NetworkParams& net, const Dataset& data, LossKind kind,
                    std::size_t cap = 3000, double h_scale = 1e-5);

// --- gradient descent --------------------------------------------------------

struct GdSettings {
    std::size_t max_iters = 50000;
    // Negative means "auto": 1e-8 * sqrt(#unfrozen parameters).
    double grad_tolerance = -1.0;
    double initial_step = 1.0;
    double armijo_c = 1e-4;
    double min_step = 1e-18;
    bool record_log = false;
    // When > 0, also declare convergence once the loss improves by less
    // than loss_flat_rtol * (1 + |loss|) across loss_flat_window accepted
    // iterations. Piecewise-linear activations can pin a minimizer to a
    // non-differentiable point where the loss sits at its floor but the
    // gradient norm cannot vanish; this stops such runs honestly.
    std::size_t loss_flat_window = 0;
    double loss_flat_rtol = 1e-12;
};

struct GdLogEntry {
    std::size_t iteration;
    double loss;
    double grad_norm;
    double step;
};

struct GdResult {
    NetworkParams params;
    bool converged = false;
    std::size_t iterations = 0;
    double final_loss = 0.0;
    double final_grad_norm = 0.0;
    std::vector<GdLogEntry> log;
};

// Full-batch descent with Armijo backtracking on the unfrozen parameters.
// frozen_mask is empty (nothing frozen) or one flag per flat parameter.
// Accepted-step losses are non-increasing. Non-finite loss throws
// NumericError; hitting max_iters returns converged = false.
GdResult gd_minimize(const NetworkParams& net, const Dataset& data, LossKind kind,
                     const std::vector<bool>& frozen_mask = {},
                     const GdSettings& settings = {});

}  // namespace permpoint
