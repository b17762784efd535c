#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "flowalign/featureio.hpp"
#include "flowalign/linalg.hpp"
#include "flowalign/velocitynet.hpp"

namespace flowalign {

struct SolverConfig {
    double h = 0.1;
    std::size_t steps = 10;  // M; the solver stops at T = h * M
    std::size_t max_steps = 10;
    /// Threads used to transport records in evaluate/select_steps. Results
    /// do not depend on this value.
    std::size_t workers = 1;

    double final_time() const noexcept { return h * static_cast<double>(steps); }
};

/// h in (0, 1], h * M <= 1 and h * max_M <= 1 (up to rounding).
void validate(const SolverConfig& cfg);

/// Any velocity field u(x, t).
using VelocityField = std::function<Vector(const Vector&, double)>;

/// x + h * u(x, t). Requires t, t + h in [0, 1].
Vector euler_step(const Vector& x, double t, double h, const VelocityFieldParams& params);
Vector euler_step(const Vector& x, double t, double h, const VelocityField& field);

/// points[m] is the state at t = m * h, m = 0..M.
struct Trajectory {
    std::vector<Vector> points;

    const Vector& final_point() const { return points.back(); }
};

/// Start time and length of step m (0-based). Step m starts at m * h; when
/// m * h + h would overshoot 1 by rounding, the step is shortened to end at
/// exactly 1.
struct StepSpan {
    double t = 0.0;
    double h = 0.0;
};
StepSpan step_span(std::size_t m, double h);

/// M Euler steps from t = 0 with fixed step size (early stopping at h * M).
Trajectory solve_ess(const Vector& x0, const VelocityFieldParams& params, const SolverConfig& cfg);
Trajectory solve_ess(const Vector& x0, const VelocityField& field, const SolverConfig& cfg);

/// Trajectories for a batch of rows at once: result[m] holds every row's
/// state after m steps. Row results equal solve_ess bit-for-bit.
std::vector<Matrix> solve_ess_batch(const Matrix& x0s, const VelocityFieldParams& params, double h,
                                    std::size_t steps);

struct StepSelection {
    std::size_t best_steps = 0;         // M*
    std::vector<double> accuracy;       // accuracy[M] for M = 0..max_M
};

/// Classification accuracy of every intermediate trajectory point, using one
/// trajectory of length max_M per record; M* is the argmax with ties going
/// to the smallest M.
StepSelection select_steps(const VelocityFieldParams& params, const Dataset& val, double h,
                           std::size_t max_steps, std::size_t workers = 1);

/// Index of the first maximum.
std::size_t argmax_first(const std::vector<double>& values);

}  // namespace flowalign
