#pragma once

// Internal Armijo backtracking engine shared by gd_minimize and the
// constrained merge descent. Not installed.

#include <functional>

#include "permpoint/network.hpp"

namespace permpoint::detail {

struct Objective {
    // Plain value, used by the line search.
    std::function<double(const DenseVector&)> value;
    // Fused value + gradient; must compute the value bit-identically to
    // value() so accepted losses stay exactly non-increasing.
    std::function<double(const DenseVector&, DenseVector&)> value_and_gradient;
    // Optional post-acceptance hook (e.g. renormalizing a direction block);
    // must leave the objective value unchanged.
    std::function<void(DenseVector&)> after_accept;
};

struct DescentResult {
    DenseVector x;
    bool converged = false;
    bool stalled = false;    // line search hit min_step without descent
    bool flat_stop = false;  // converged via the loss-progress criterion
    std::size_t iterations = 0;
    double final_value = 0.0;
    double final_grad_norm = 0.0;
    std::vector<GdLogEntry> log;
};

DescentResult armijo_descent(const Objective& objective, DenseVector x0,
                             const GdSettings& settings, double grad_tolerance);

}  // namespace permpoint::detail
