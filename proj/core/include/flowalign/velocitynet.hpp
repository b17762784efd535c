#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flowalign/linalg.hpp"

namespace flowalign {

/// Hidden-layer nonlinearity. SiLU is z * sigmoid(z): smooth, ReLU-shaped.
enum class Activation { silu };

/// Sinusoidal embedding of t in [0, 1]: first half sin(w_i t), second half
/// cos(w_i t), with w_i spaced geometrically from pi/2 to 16 pi. The lowest
/// frequency keeps cos(w_0 t) strictly decreasing on [0, 1], so distinct
/// times map to distinct embeddings. embed_dim must be even and positive.
Vector time_embedding(double t, std::size_t embed_dim);

struct NetConfig {
    std::size_t dim = 0;
    std::vector<std::size_t> hidden{256, 256};
    std::size_t time_embed_dim = 16;
};

/// Parameters of the velocity field u(x, t): an MLP over concat(x, emb(t)).
///
/// weights[l] has shape (fan_in x fan_out) so that a batch of row vectors is
/// propagated as Z = X W + b. widths = [d + time_embed_dim, hidden..., d].
struct VelocityFieldParams {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    std::vector<std::size_t> widths;
    std::size_t time_embed_dim = 0;
    Activation activation = Activation::silu;

    std::size_t dim() const noexcept { return widths.empty() ? 0 : widths.back(); }
    std::size_t layer_count() const noexcept { return weights.size(); }
    std::size_t param_count() const noexcept;

    /// Every parameter tensor in layer order: W0, b0, W1, b1, ...
    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;

    bool operator==(const VelocityFieldParams&) const = default;
};

/// All-zero parameters with the given architecture.
VelocityFieldParams zero_params(const NetConfig& cfg);

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
VelocityFieldParams init_params(std::size_t dim, const std::vector<std::size_t>& hidden,
                                std::size_t time_embed_dim, std::uint64_t seed);
VelocityFieldParams init_params(const NetConfig& cfg, std::uint64_t seed);

/// Throws DimError if shapes are inconsistent with widths.
void validate(const VelocityFieldParams& params);

Vector forward(const VelocityFieldParams& params, const Vector& x, double t);

/// Row b of the result is forward(params, row b of xs, ts[b]); per-row
/// arithmetic is identical to the single-vector overload.
Matrix forward_batch(const VelocityFieldParams& params, const Matrix& xs, std::span<const double> ts);

struct RegressionItem {
    Vector x;
    double t = 0.0;
    Vector target;
};

struct BackwardResult {
    double loss = 0.0;
    VelocityFieldParams grads;
};

/// loss = mean over the batch of ||forward(x, t) - target||^2, with exact
/// reverse-mode gradients of that loss.
BackwardResult backward(const VelocityFieldParams& params, std::span<const RegressionItem> batch);

struct AdamWConfig {
    double base_lr = 2e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct OptState {
    AdamWConfig config;
    VelocityFieldParams first_moment;
    VelocityFieldParams second_moment;
    std::uint64_t step = 0;
};

OptState make_opt_state(const VelocityFieldParams& params, const AdamWConfig& config);

/// One decoupled-weight-decay Adam update in place:
///   p <- p * (1 - lr * wd);  p <- p - lr * m_hat / (sqrt(v_hat) + eps)
void adamw_step(VelocityFieldParams& params, const VelocityFieldParams& grads, OptState& opt,
                double lr_now);

/// base_lr * 0.5 * (1 + cos(pi * step / total_steps)).
double cosine_anneal(double base_lr, std::size_t step, std::size_t total_steps);

}  // namespace flowalign
