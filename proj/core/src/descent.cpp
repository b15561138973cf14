#include "descent_detail.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "permpoint/errors.hpp"

namespace permpoint::detail {

namespace {

// Limited-memory quasi-Newton direction (two-loop recursion). Falls back
// to the raw negative gradient whenever the memory is empty or the result
// fails to be a descent direction.
class LbfgsMemory {
  public:
    explicit LbfgsMemory(std::size_t capacity) : capacity_(capacity) {}

    void update(const DenseVector& s, const DenseVector& y) {
        double sy = s.dot(y);
        if (!(sy > 1e-12 * s.norm() * y.norm())) return;  // curvature unusable
        if (pairs_.size() == capacity_) pairs_.pop_front();
        pairs_.push_back({s, y, sy});
    }

    void clear() { pairs_.clear(); }
    bool empty() const { return pairs_.empty(); }

    DenseVector direction(const DenseVector& grad) const {
        DenseVector q = grad;
        std::vector<double> alpha(pairs_.size());
        for (std::size_t i = pairs_.size(); i-- > 0;) {
            const Pair& p = pairs_[i];
            alpha[i] = p.s.dot(q) / p.sy;
            for (std::size_t k = 0; k < q.size(); ++k) q[k] -= alpha[i] * p.y[k];
        }
        const Pair& last = pairs_.back();
        double gamma = last.sy / last.y.dot(last.y);
        q *= gamma;
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            const Pair& p = pairs_[i];
            double beta = p.y.dot(q) / p.sy;
            for (std::size_t k = 0; k < q.size(); ++k)
                q[k] += (alpha[i] - beta) * p.s[k];
        }
        q *= -1.0;
        return q;
    }

  private:
    struct Pair {
        DenseVector s, y;
        double sy;
    };
    std::size_t capacity_;
    std::deque<Pair> pairs_;
};

}  // namespace

DescentResult armijo_descent(const Objective& objective, DenseVector x0,
                             const GdSettings& settings, double grad_tolerance) {
    DescentResult result;
    DenseVector x = std::move(x0);
    DenseVector grad;
    double value = objective.value_and_gradient(x, grad);
    if (!std::isfinite(value))
        throw NumericError("armijo_descent: non-finite objective at start");

    LbfgsMemory memory(10);
    DenseVector direction;
    double window_value = value;
    std::size_t window_start = 0;
    std::size_t iter = 0;
    for (; iter < settings.max_iters; ++iter) {
        double grad_norm = grad.norm();
        if (grad_norm <= grad_tolerance) {
            result.converged = true;
            if (settings.record_log)
                result.log.push_back({iter, value, grad_norm, 0.0});
            break;
        }
        if (settings.loss_flat_window > 0 &&
            iter - window_start >= settings.loss_flat_window) {
            if (window_value - value <=
                settings.loss_flat_rtol * (1.0 + std::abs(value))) {
                result.converged = true;
                result.flat_stop = true;
                if (settings.record_log)
                    result.log.push_back({iter, value, grad_norm, 0.0});
                break;
            }
            window_value = value;
            window_start = iter;
        }

        double slope;  // directional derivative along the step
        double step;
        if (memory.empty()) {
            direction = grad;
            direction *= -1.0;
            slope = -grad_norm * grad_norm;
            step = settings.initial_step;
        } else {
            direction = memory.direction(grad);
            slope = direction.dot(grad);
            if (!(slope < -1e-14 * direction.norm() * grad_norm)) {
                direction = grad;
                direction *= -1.0;
                slope = -grad_norm * grad_norm;
            }
            step = 1.0;
        }

        bool accepted = false;
        DenseVector trial(x.size());
        double trial_value = 0.0;
        while (step >= settings.min_step) {
            for (std::size_t i = 0; i < x.size(); ++i)
                trial[i] = x[i] + step * direction[i];
            trial_value = objective.value(trial);
            if (std::isfinite(trial_value) &&
                trial_value <= value + settings.armijo_c * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (settings.record_log)
            result.log.push_back({iter, value, grad_norm, accepted ? step : 0.0});
        if (!accepted) {
            result.stalled = true;  // no acceptable decrease at the rounding floor
            break;
        }

        DenseVector prev_x = x;
        DenseVector prev_grad = grad;
        x = std::move(trial);
        if (objective.after_accept) objective.after_accept(x);
        value = objective.value_and_gradient(x, grad);
        if (!std::isfinite(value))
            throw NumericError("armijo_descent: objective diverged");

        DenseVector s = x;
        s -= prev_x;
        DenseVector y = grad;
        y -= prev_grad;
        memory.update(s, y);
    }

    result.x = std::move(x);
    result.iterations = iter;
    result.final_value = value;
    result.final_grad_norm = grad.norm();
    return result;
}

}  // namespace permpoint::detail
