#include "flowalign/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flowalign/errors.hpp"

namespace flowalign::oracle {

Vector ideal_field(const Vector& x, double t, const CoupledPair& pair) {
    if (x.dim() != pair.x1.dim()) throw DimError("ideal_field: dimension mismatch");
    if (!(t < 1.0)) throw ArgError("ideal_field: t must be below 1");
    const double inv = 1.0 / (1.0 - t);
    Vector out(x.dim());
    for (std::size_t i = 0; i < x.dim(); ++i) out[i] = (pair.x1[i] - x[i]) * inv;
    return out;
}

void validate(const DiscreteFlowProblem& problem) {
    if (problem.pairs.empty()) throw ArgError("discrete flow problem has no pairs");
    const std::size_t d = problem.pairs.front().x0.dim();
    for (const auto& p : problem.pairs) {
        if (p.x0.dim() != d || p.x1.dim() != d) throw DimError("discrete flow problem has mixed dimensions");
    }
}

std::vector<double> bridge_posterior(const Vector& x, double t, const DiscreteFlowProblem& problem) {
    validate(problem);
    if (!(problem.sigma > 0.0)) throw ArgError("marginal velocity needs sigma > 0");
    if (!(t > 0.0 && t < 1.0)) throw ArgError("marginal velocity needs t in (0, 1)");
    const double var = t * (1.0 - t) * problem.sigma * problem.sigma;

    std::vector<double> logw;
    logw.reserve(problem.pairs.size());
    for (const auto& p : problem.pairs) {
        const Vector mean = interpolate(p.x0, p.x1, t);
        logw.push_back(-squared_distance(x, mean) / (2.0 * var));
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    if (!std::isfinite(top)) throw NumericalError("bridge log-weights are not finite");
    double total = 0.0;
    for (double& w : logw) {
        w = std::exp(w - top);
        total += w;
    }
    if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("bridge weights underflow");
    for (double& w : logw) w /= total;
    return logw;
}

Vector marginal_velocity_bruteforce(const Vector& x, double t, const DiscreteFlowProblem& problem) {
    const auto w = bridge_posterior(x, t, problem);
    Vector out(x.dim());
    for (std::size_t j = 0; j < w.size(); ++j) {
        axpy(w[j], ideal_field(x, t, problem.pairs[j]).values(), out.values());
    }
    return out;
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& loss,
                                std::span<const double> point, double step) {
    if (!(step > 0.0)) throw ArgError("fd_gradient: step must be positive");
    std::vector<double> p(point.begin(), point.end());
    std::vector<double> grad(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + step;
        const double up = loss(p);
        p[i] = saved - step;
        const double down = loss(p);
        p[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

VelocityFieldParams fd_gradient(const std::function<double(const VelocityFieldParams&)>& loss,
                                const VelocityFieldParams& params, double step) {
    if (!(step > 0.0)) throw ArgError("fd_gradient: step must be positive");
    VelocityFieldParams probe = params;
    VelocityFieldParams grad = params;
    auto ptensors = probe.tensors();
    auto gtensors = grad.tensors();
    for (std::size_t k = 0; k < ptensors.size(); ++k) {
        for (std::size_t i = 0; i < ptensors[k].size(); ++i) {
            const double saved = ptensors[k][i];
            ptensors[k][i] = saved + step;
            const double up = loss(probe);
            ptensors[k][i] = saved - step;
            const double down = loss(probe);
            ptensors[k][i] = saved;
            gtensors[k][i] = (up - down) / (2.0 * step);
        }
    }
    return grad;
}

}  // namespace flowalign::oracle
