#pragma once

#include <functional>
#include <span>
#include <vector>

#include "flowalign/fmatrain.hpp"
#include "flowalign/linalg.hpp"
#include "flowalign/velocitynet.hpp"

// Closed-form and brute-force references used to check the learned pieces.
namespace flowalign::oracle {

/// (x1 - x) / (1 - t): the straight-line field toward x1. Throws ArgError
/// for t >= 1.
Vector ideal_field(const Vector& x, double t, const CoupledPair& pair);

/// A finite set of bridges (x0_j, x1_j), each equally likely, with bridge
/// noise std sqrt(t (1 - t)) * sigma.
struct DiscreteFlowProblem {
    std::vector<CoupledPair> pairs;
    double sigma = 0.0;
};

void validate(const DiscreteFlowProblem& problem);

/// Exact marginal velocity at (x, t):
///   sum_j w_j (x1_j - x) / (1 - t),
///   w_j proportional to N(x; t x1_j + (1 - t) x0_j, t (1 - t) sigma^2 I).
/// Weights are formed in log space with max subtraction.
Vector marginal_velocity_bruteforce(const Vector& x, double t, const DiscreteFlowProblem& problem);

/// Normalized posterior weights w_j used above.
std::vector<double> bridge_posterior(const Vector& x, double t, const DiscreteFlowProblem& problem);

/// Central differences (f(p + s e_i) - f(p - s e_i)) / 2s for every entry.
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& loss,
                                std::span<const double> point, double step);

VelocityFieldParams fd_gradient(const std::function<double(const VelocityFieldParams&)>& loss,
                                const VelocityFieldParams& params, double step);

}  // namespace flowalign::oracle
