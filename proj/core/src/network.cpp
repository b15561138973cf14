#include "permpoint/network.hpp"

#include <algorithm>
#include <cmath>

#include "descent_detail.hpp"
#include "permpoint/errors.hpp"

namespace permpoint {

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "softplus") return Activation::softplus;
    if (name == "identity") return Activation::identity;
    throw DomainError("unknown activation: " + name);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::softplus: return "softplus";
        case Activation::identity: return "identity";
    }
    return "identity";
}

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::tanh: return std::tanh(x);
        case Activation::softplus:
            return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        case Activation::identity: return x;
    }
    return x;
}

double activation_derivative(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: {
            double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::softplus:
            return x > 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "mse") return LossKind::mse;
    if (name == "normalized_mse") return LossKind::normalized_mse;
    throw DomainError("unknown loss kind: " + name);
}

std::string to_string(LossKind k) {
    return k == LossKind::mse ? "mse" : "normalized_mse";
}

std::size_t NetworkParams::input_dim() const {
    if (layers.empty()) throw DimensionError("empty network");
    return layers.front().weights.cols;
}

std::size_t NetworkParams::output_dim() const {
    if (layers.empty()) throw DimensionError("empty network");
    return layers.back().weights.rows;
}

std::vector<std::size_t> NetworkParams::widths() const {
    std::vector<std::size_t> w;
    w.push_back(input_dim());
    for (const Layer& layer : layers) w.push_back(layer.weights.rows);
    return w;
}

void NetworkParams::validate() const {
    if (layers.empty()) throw DimensionError("network has no layers");
    for (std::size_t t = 0; t < layers.size(); ++t) {
        const Layer& layer = layers[t];
        if (layer.bias.size() != layer.weights.rows)
            throw DimensionError("layer " + std::to_string(t) + ": bias length " +
                                 std::to_string(layer.bias.size()) + " != rows " +
                                 std::to_string(layer.weights.rows));
        if (t > 0 && layer.weights.cols != layers[t - 1].weights.rows)
            throw DimensionError("layer " + std::to_string(t) +
                                 ": input width does not chain");
        if (!layer.weights.all_finite() || !layer.bias.all_finite())
            throw NumericError("layer " + std::to_string(t) + ": non-finite entries");
    }
    if (layers.back().activation != Activation::identity)
        throw DomainError("output layer must be affine");
}

NetworkParams make_network(const std::vector<std::size_t>& widths, Activation hidden,
                           Rng& rng) {
    if (widths.size() < 2) throw DimensionError("need at least input and output width");
    NetworkParams net;
    for (std::size_t t = 1; t < widths.size(); ++t) {
        Layer layer;
        layer.weights = DenseMatrix(widths[t], widths[t - 1]);
        layer.bias = DenseVector(widths[t]);
        double scale = 1.0 / std::sqrt(static_cast<double>(widths[t - 1]));
        for (double& w : layer.weights.entries) w = scale * rng.normal();
        for (std::size_t i = 0; i < layer.bias.size(); ++i)
            layer.bias[i] = scale * rng.normal();
        layer.activation = (t + 1 < widths.size()) ? hidden : Activation::identity;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

void Dataset::validate() const {
    if (inputs.rows != targets.rows)
        throw DimensionError("dataset: input/target row counts differ");
    if (inputs.rows == 0) throw DimensionError("dataset: empty");
    if (!labels.empty() && labels.size() != inputs.rows)
        throw DimensionError("dataset: label count differs from row count");
    if (!inputs.all_finite() || !targets.all_finite())
        throw NumericError("dataset: non-finite entries");
}

DenseVector forward(const NetworkParams& net, const DenseVector& x) {
    if (x.size() != net.input_dim())
        throw DimensionError("forward: input has " + std::to_string(x.size()) +
                             " entries, network expects " +
                             std::to_string(net.input_dim()));
    // Accumulation order (bias first, then the weight row) matches the
    // batched evaluation paths bit for bit.
    DenseVector h = x;
    for (const Layer& layer : net.layers) {
        DenseVector z(layer.weights.rows);
        for (std::size_t i = 0; i < layer.weights.rows; ++i) {
            const double* row = layer.weights.entries.data() + i * layer.weights.cols;
            double s = layer.bias[i];
            for (std::size_t j = 0; j < layer.weights.cols; ++j) s += row[j] * h[j];
            z[i] = layer.activation == Activation::identity
                       ? s
                       : apply_activation(layer.activation, s);
        }
        h = std::move(z);
    }
    return h;
}

DenseMatrix forward_all(const NetworkParams& net, const DenseMatrix& inputs) {
    DenseMatrix out(inputs.rows, net.output_dim());
    for (std::size_t mu = 0; mu < inputs.rows; ++mu) {
        DenseVector y = forward(net, inputs.row(mu));
        for (std::size_t j = 0; j < y.size(); ++j) out.at(mu, j) = y[j];
    }
    return out;
}

namespace {

double mean_squared_target(const Dataset& data) {
    double s = 0.0;
    for (double y : data.targets.entries) s += y * y;
    double mean = s / static_cast<double>(data.targets.entries.size());
    if (mean == 0.0)
        throw DomainError("normalized_mse: targets are identically zero");
    return mean;
}

double loss_normalizer(const Dataset& data, LossKind kind) {
    return kind == LossKind::normalized_mse ? 1.0 / mean_squared_target(data) : 1.0;
}

// Reused per-sample buffers: pre-activations and activations per layer for
// the backward sweep, plus the running error signals.
struct EvalWorkspace {
    std::vector<DenseVector> pre;  // z per layer
    std::vector<DenseVector> act;  // h per layer (post-activation)
    DenseVector delta, next_delta;

    void prepare(const NetworkParams& net) {
        const std::size_t d = net.depth();
        pre.resize(d);
        act.resize(d);
        for (std::size_t t = 0; t < d; ++t) {
            pre[t].entries.resize(net.layers[t].weights.rows);
            act[t].entries.resize(net.layers[t].weights.rows);
        }
    }
};

// Forward pass from a raw input pointer into the workspace.
void forward_traced(const NetworkParams& net, const double* x, EvalWorkspace& ws) {
    const std::size_t d = net.depth();
    const double* below = x;
    for (std::size_t t = 0; t < d; ++t) {
        const Layer& layer = net.layers[t];
        DenseVector& z = ws.pre[t];
        DenseVector& h = ws.act[t];
        for (std::size_t i = 0; i < layer.weights.rows; ++i) {
            const double* row = layer.weights.entries.data() + i * layer.weights.cols;
            double s = layer.bias[i];
            for (std::size_t j = 0; j < layer.weights.cols; ++j) s += row[j] * below[j];
            z[i] = s;
            h[i] = layer.activation == Activation::identity
                       ? s
                       : apply_activation(layer.activation, s);
        }
        below = h.entries.data();
    }
}

// Hot path: dimension checks only. Full finiteness validation happens once
// at the optimizer entry points.
void check_dataset(const NetworkParams& net, const Dataset& data, const char* op) {
    if (data.inputs.rows != data.targets.rows || data.inputs.rows == 0)
        throw DimensionError(std::string(op) + ": malformed dataset");
    if (data.inputs.cols != net.input_dim() || data.targets.cols != net.output_dim())
        throw DimensionError(std::string(op) + ": dataset dimensions do not match network");
}

}  // namespace

double loss(const NetworkParams& net, const Dataset& data, LossKind kind) {
    check_dataset(net, data, "loss");
    const double normalizer = loss_normalizer(data, kind);
    const std::size_t T = data.size();
    EvalWorkspace ws;
    ws.prepare(net);
    double total = 0.0;
    for (std::size_t mu = 0; mu < T; ++mu) {
        forward_traced(net, data.inputs.entries.data() + mu * data.inputs.cols, ws);
        const DenseVector& y = ws.act.back();
        double s = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) {
            double r = y[j] - data.targets.at(mu, j);
            s += r * r;
        }
        total += s;
    }
    return total / static_cast<double>(T) * normalizer;
}

std::size_t parameter_count(const NetworkParams& net) {
    std::size_t n = 0;
    for (const Layer& layer : net.layers)
        n += layer.weights.entries.size() + layer.bias.size();
    return n;
}

DenseVector flatten(const NetworkParams& net) {
    DenseVector flat(parameter_count(net));
    std::size_t pos = 0;
    for (const Layer& layer : net.layers) {
        for (double w : layer.weights.entries) flat[pos++] = w;
        for (double b : layer.bias.entries) flat[pos++] = b;
    }
    return flat;
}

NetworkParams unflatten(const NetworkParams& shape_like, const DenseVector& flat) {
    NetworkParams net = shape_like;
    unflatten_into(net, flat);
    return net;
}

void unflatten_into(NetworkParams& target, const DenseVector& flat) {
    if (flat.size() != parameter_count(target))
        throw DimensionError("unflatten: length mismatch");
    std::size_t pos = 0;
    for (Layer& layer : target.layers) {
        for (double& w : layer.weights.entries) w = flat[pos++];
        for (double& b : layer.bias.entries) b = flat[pos++];
    }
}

std::vector<std::size_t> neuron_flat_indices(const NetworkParams& net,
                                             std::size_t layer, std::size_t neuron) {
    if (layer >= net.depth()) throw DimensionError("neuron_flat_indices: bad layer");
    const Layer& l = net.layers[layer];
    if (neuron >= l.weights.rows) throw DimensionError("neuron_flat_indices: bad neuron");
    std::size_t base = 0;
    for (std::size_t t = 0; t < layer; ++t)
        base += net.layers[t].weights.entries.size() + net.layers[t].bias.size();
    std::vector<std::size_t> idx;
    idx.reserve(l.weights.cols + 1);
    for (std::size_t j = 0; j < l.weights.cols; ++j)
        idx.push_back(base + neuron * l.weights.cols + j);
    idx.push_back(base + l.weights.entries.size() + neuron);
    return idx;
}

DenseVector gradient(const NetworkParams& net, const Dataset& data, LossKind kind) {
    return loss_and_gradient(net, data, kind).gradient;
}

LossAndGradient loss_and_gradient(const NetworkParams& net, const Dataset& data,
                                  LossKind kind) {
    check_dataset(net, data, "gradient");

    const double normalizer = loss_normalizer(data, kind);
    const std::size_t T = data.size();
    const std::size_t d = net.depth();

    NetworkParams grads = net;  // same shapes, zeroed
    for (Layer& layer : grads.layers) {
        std::fill(layer.weights.entries.begin(), layer.weights.entries.end(), 0.0);
        std::fill(layer.bias.entries.begin(), layer.bias.entries.end(), 0.0);
    }

    EvalWorkspace ws;
    ws.prepare(net);
    double total = 0.0;
    const double grad_scale = 2.0 / static_cast<double>(T) * normalizer;
    for (std::size_t mu = 0; mu < T; ++mu) {
        const double* x = data.inputs.entries.data() + mu * data.inputs.cols;
        forward_traced(net, x, ws);

        const DenseVector& out = ws.act[d - 1];
        double s = 0.0;
        ws.delta.entries.resize(out.size());
        for (std::size_t j = 0; j < out.size(); ++j) {
            double r = out[j] - data.targets.at(mu, j);
            s += r * r;
            ws.delta[j] = grad_scale * r;  // output layer is affine
        }
        total += s;

        for (std::size_t t = d; t-- > 0;) {
            const Layer& layer = net.layers[t];
            Layer& g = grads.layers[t];
            const double* below = (t == 0) ? x : ws.act[t - 1].entries.data();
            for (std::size_t i = 0; i < layer.weights.rows; ++i) {
                double di = ws.delta[i];
                if (di != 0.0) {
                    double* grow = g.weights.entries.data() + i * layer.weights.cols;
                    for (std::size_t j = 0; j < layer.weights.cols; ++j)
                        grow[j] += di * below[j];
                    g.bias[i] += di;
                }
            }
            if (t == 0) break;
            DenseVector& next = ws.next_delta;
            next.entries.assign(layer.weights.cols, 0.0);
            for (std::size_t i = 0; i < layer.weights.rows; ++i) {
                double di = ws.delta[i];
                if (di == 0.0) continue;
                const double* row = layer.weights.entries.data() + i * layer.weights.cols;
                for (std::size_t j = 0; j < layer.weights.cols; ++j)
                    next[j] += di * row[j];
            }
            Activation act = net.layers[t - 1].activation;
            if (act != Activation::identity) {
                const DenseVector& z = ws.pre[t - 1];
                for (std::size_t j = 0; j < next.size(); ++j)
                    next[j] *= activation_derivative(act, z[j]);
            }
            std::swap(ws.delta, ws.next_delta);
        }
    }

    return {total / static_cast<double>(T) * normalizer, flatten(grads)};
}

DenseMatrix hessian(const NetworkParams& net, const Dataset& data, LossKind kind,
                    std::size_t cap, double h_scale) {
    const std::size_t n = parameter_count(net);
    if (n > cap)
        throw DomainError("hessian: " + std::to_string(n) +
                          " parameters exceed cap " + std::to_string(cap));
    DenseVector theta = flatten(net);
    const double h = h_scale * std::max(1.0, theta.inf_norm());

    DenseMatrix hess(n, n);
    DenseVector probe = theta;
    for (std::size_t i = 0; i < n; ++i) {
        probe[i] = theta[i] + h;
        DenseVector gp = gradient(unflatten(net, probe), data, kind);
        probe[i] = theta[i] - h;
        DenseVector gm = gradient(unflatten(net, probe), data, kind);
        probe[i] = theta[i];
        for (std::size_t j = 0; j < n; ++j)
            hess.at(j, i) = (gp[j] - gm[j]) / (2.0 * h);
    }
    // Symmetrize.
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = r + 1; c < n; ++c) {
            double v = 0.5 * (hess.at(r, c) + hess.at(c, r));
            hess.at(r, c) = v;
            hess.at(c, r) = v;
        }
    return hess;
}

GdResult gd_minimize(const NetworkParams& net, const Dataset& data, LossKind kind,
                     const std::vector<bool>& frozen_mask, const GdSettings& settings) {
    net.validate();
    data.validate();
    const std::size_t n = parameter_count(net);
    if (!frozen_mask.empty() && frozen_mask.size() != n)
        throw DimensionError("gd_minimize: frozen mask length mismatch");

    std::size_t n_unfrozen = n;
    if (!frozen_mask.empty())
        n_unfrozen = static_cast<std::size_t>(
            std::count(frozen_mask.begin(), frozen_mask.end(), false));
    double tol = settings.grad_tolerance;
    if (tol < 0.0) tol = 1e-8 * std::sqrt(static_cast<double>(std::max<std::size_t>(n_unfrozen, 1)));

    detail::Objective objective;
    objective.value = [&](const DenseVector& x) {
        return loss(unflatten(net, x), data, kind);
    };
    objective.value_and_gradient = [&](const DenseVector& x, DenseVector& grad) {
        LossAndGradient lg = loss_and_gradient(unflatten(net, x), data, kind);
        grad = std::move(lg.gradient);
        if (!frozen_mask.empty())
            for (std::size_t i = 0; i < grad.size(); ++i)
                if (frozen_mask[i]) grad[i] = 0.0;
        return lg.loss;
    };

    detail::DescentResult r =
        detail::armijo_descent(objective, flatten(net), settings, tol);

    GdResult out;
    out.params = unflatten(net, r.x);
    out.converged = r.converged;
    out.iterations = r.iterations;
    out.final_loss = r.final_value;
    out.final_grad_norm = r.final_grad_norm;
    out.log = std::move(r.log);
    return out;
}

}  // namespace permpoint
