#include "flowalign/fmasolve.hpp"

#include <cmath>
#include <string>

#include "flowalign/classify.hpp"
#include "flowalign/errors.hpp"

namespace flowalign {
namespace {

constexpr double kTimeSlack = 1e-12;

void check_step(double t, double h) {
    if (!(t >= 0.0 && t <= 1.0) || !(h >= 0.0) || t + h > 1.0 + kTimeSlack) {
        throw ArgError("euler_step: [t, t + h] = [" + std::to_string(t) + ", " + std::to_string(t + h) +
                       "] leaves [0, 1]");
    }
}

}  // namespace

void validate(const SolverConfig& cfg) {
    if (!(cfg.h > 0.0 && cfg.h <= 1.0)) throw ArgError("solver step size h must lie in (0, 1]");
    if (cfg.workers == 0) throw ArgError("solver worker count must be positive");
    if (cfg.h * static_cast<double>(cfg.steps) > 1.0 + kTimeSlack) {
        throw ArgError("solver final time h * M exceeds 1");
    }
    if (cfg.h * static_cast<double>(cfg.max_steps) > 1.0 + kTimeSlack) {
        throw ArgError("solver sweep limit h * max_M exceeds 1");
    }
}

StepSpan step_span(std::size_t m, double h) {
    const double t = static_cast<double>(m) * h;
    const double end = t + h;
    return {t, end > 1.0 ? 1.0 - t : h};
}

Vector euler_step(const Vector& x, double t, double h, const VelocityField& field) {
    check_step(t, h);
    Vector out = x;
    const Vector u = field(x, t);
    if (u.dim() != x.dim()) throw DimError("euler_step: field returned wrong dimension");
    axpy(h, u.values(), out.values());
    return out;
}

Vector euler_step(const Vector& x, double t, double h, const VelocityFieldParams& params) {
    check_step(t, h);
    Vector out = x;
    const Vector u = forward(params, x, t);
    axpy(h, u.values(), out.values());
    return out;
}

Trajectory solve_ess(const Vector& x0, const VelocityField& field, const SolverConfig& cfg) {
    validate(cfg);
    Trajectory traj;
    traj.points.reserve(cfg.steps + 1);
    traj.points.push_back(x0);
    for (std::size_t m = 0; m < cfg.steps; ++m) {
        const auto [t, h] = step_span(m, cfg.h);
        traj.points.push_back(euler_step(traj.points.back(), t, h, field));
    }
    return traj;
}

Trajectory solve_ess(const Vector& x0, const VelocityFieldParams& params, const SolverConfig& cfg) {
    validate(cfg);
    Trajectory traj;
    traj.points.reserve(cfg.steps + 1);
    traj.points.push_back(x0);
    for (std::size_t m = 0; m < cfg.steps; ++m) {
        const auto [t, h] = step_span(m, cfg.h);
        traj.points.push_back(euler_step(traj.points.back(), t, h, params));
    }
    return traj;
}

std::vector<Matrix> solve_ess_batch(const Matrix& x0s, const VelocityFieldParams& params, double h,
                                    std::size_t steps) {
    validate(SolverConfig{h, steps, steps});
    std::vector<Matrix> states;
    states.reserve(steps + 1);
    states.push_back(x0s);
    std::vector<double> ts(x0s.rows());
    for (std::size_t m = 0; m < steps; ++m) {
        const auto span = step_span(m, h);
        check_step(span.t, span.h);
        std::fill(ts.begin(), ts.end(), span.t);
        const Matrix u = forward_batch(params, states.back(), ts);
        Matrix next = states.back();
        axpy(span.h, u.values(), next.values());
        states.push_back(std::move(next));
    }
    return states;
}

std::size_t argmax_first(const std::vector<double>& values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

StepSelection select_steps(const VelocityFieldParams& params, const Dataset& val, double h,
                           std::size_t max_steps, std::size_t workers) {
    if (val.records.empty()) throw ArgError("select_steps: empty validation set");
    const auto curve = step_curves(val, params, h, max_steps, workers);
    StepSelection sel;
    sel.accuracy = curve.accuracy;
    sel.best_steps = argmax_first(sel.accuracy);
    return sel;
}

}  // namespace flowalign
