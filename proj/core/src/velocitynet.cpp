#include "flowalign/velocitynet.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "flowalign/errors.hpp"
#include "flowalign/rng.hpp"

namespace flowalign {
namespace {

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double silu(double z) noexcept { return z * sigmoid(z); }

double silu_grad(double z) noexcept {
    const double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}

void check_time(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw ArgError("velocity field time " + std::to_string(t) + " outside [0, 1]");
}

/// Activations of one forward pass, kept for the backward sweep.
struct Tape {
    std::vector<Matrix> inputs;       // input to layer l, (B x fan_in)
    std::vector<Matrix> preacts;      // Z_l = inputs[l] W_l + b_l
};

Matrix input_matrix(const VelocityFieldParams& params, const Matrix& xs, std::span<const double> ts) {
    const std::size_t d = params.dim();
    if (xs.cols() != d) {
        throw DimError("velocity field expects dim " + std::to_string(d) + ", got " + std::to_string(xs.cols()));
    }
    if (ts.size() != xs.rows()) throw DimError("batch has mismatched time count");
    Matrix in(xs.rows(), d + params.time_embed_dim);
    for (std::size_t b = 0; b < xs.rows(); ++b) {
        check_time(ts[b]);
        auto row = in.row(b);
        const auto x = xs.row(b);
        for (std::size_t i = 0; i < d; ++i) row[i] = x[i];
        const Vector emb = time_embedding(ts[b], params.time_embed_dim);
        for (std::size_t i = 0; i < emb.dim(); ++i) row[d + i] = emb[i];
    }
    return in;
}

Matrix affine(const Matrix& a, const Matrix& w, const Vector& bias) {
    Matrix z(a.rows(), w.cols());
    for (std::size_t b = 0; b < a.rows(); ++b) {
        auto zrow = z.row(b);
        for (std::size_t o = 0; o < w.cols(); ++o) zrow[o] = bias[o];
        const auto arow = a.row(b);
        for (std::size_t i = 0; i < w.rows(); ++i) axpy(arow[i], w.row(i), zrow);
    }
    return z;
}

Matrix run(const VelocityFieldParams& params, Matrix in, Tape* tape) {
    const std::size_t layers = params.layer_count();
    Matrix act = std::move(in);
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix z = affine(act, params.weights[l], params.biases[l]);
        if (tape) tape->inputs.push_back(std::move(act));
        if (l + 1 == layers) {
            if (tape) tape->preacts.push_back(z);
            return z;
        }
        Matrix next(z.rows(), z.cols());
        auto zs = z.values();
        auto ns = next.values();
        for (std::size_t i = 0; i < zs.size(); ++i) ns[i] = silu(zs[i]);
        if (tape) tape->preacts.push_back(std::move(z));
        act = std::move(next);
    }
    return act;
}

}  // namespace

Vector time_embedding(double t, std::size_t embed_dim) {
    if (embed_dim == 0 || embed_dim % 2 != 0) throw ArgError("time embedding width must be even and positive");
    const std::size_t half = embed_dim / 2;
    Vector out(embed_dim);
    for (std::size_t i = 0; i < half; ++i) {
        const double frac = half == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(half - 1);
        const double w = 0.5 * std::numbers::pi * std::pow(32.0, frac);
        out[i] = std::sin(w * t);
        out[half + i] = std::cos(w * t);
    }
    return out;
}

std::size_t VelocityFieldParams::param_count() const noexcept {
    std::size_t n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.dim();
    return n;
}

std::vector<std::span<double>> VelocityFieldParams::tensors() {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(weights[l].values());
        out.push_back(biases[l].values());
    }
    return out;
}

std::vector<std::span<const double>> VelocityFieldParams::tensors() const {
    std::vector<std::span<const double>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(weights[l].values());
        out.push_back(biases[l].values());
    }
    return out;
}

VelocityFieldParams zero_params(const NetConfig& cfg) {
    if (cfg.dim == 0) throw ArgError("velocity field dim must be positive");
    if (cfg.time_embed_dim == 0 || cfg.time_embed_dim % 2 != 0) {
        throw ArgError("time embedding width must be even and positive");
    }
    VelocityFieldParams p;
    p.time_embed_dim = cfg.time_embed_dim;
    p.widths.push_back(cfg.dim + cfg.time_embed_dim);
    for (std::size_t h : cfg.hidden) {
        if (h == 0) throw ArgError("hidden widths must be positive");
        p.widths.push_back(h);
    }
    p.widths.push_back(cfg.dim);
    for (std::size_t l = 0; l + 1 < p.widths.size(); ++l) {
        p.weights.emplace_back(p.widths[l], p.widths[l + 1]);
        p.biases.emplace_back(p.widths[l + 1]);
    }
    return p;
}

VelocityFieldParams init_params(const NetConfig& cfg, std::uint64_t seed) {
    VelocityFieldParams p = zero_params(cfg);
    Rng rng(seed);
    for (auto& w : p.weights) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows()));
        for (double& v : w.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
    }
    return p;
}

VelocityFieldParams init_params(std::size_t dim, const std::vector<std::size_t>& hidden,
                                std::size_t time_embed_dim, std::uint64_t seed) {
    return init_params(NetConfig{dim, hidden, time_embed_dim}, seed);
}

void validate(const VelocityFieldParams& params) {
    const std::size_t layers = params.weights.size();
    if (layers == 0 || params.biases.size() != layers || params.widths.size() != layers + 1) {
        throw DimError("velocity field has inconsistent layer count");
    }
    if (params.widths.front() != params.widths.back() + params.time_embed_dim) {
        throw DimError("velocity field input width must equal d + time_embed_dim");
    }
    for (std::size_t l = 0; l < layers; ++l) {
        if (params.weights[l].rows() != params.widths[l] || params.weights[l].cols() != params.widths[l + 1] ||
            params.biases[l].dim() != params.widths[l + 1]) {
            throw DimError("velocity field layer " + std::to_string(l) + " has wrong shape");
        }
    }
}

Matrix forward_batch(const VelocityFieldParams& params, const Matrix& xs, std::span<const double> ts) {
    return run(params, input_matrix(params, xs, ts), nullptr);
}

Vector forward(const VelocityFieldParams& params, const Vector& x, double t) {
    Matrix xs(1, x.dim());
    for (std::size_t i = 0; i < x.dim(); ++i) xs(0, i) = x[i];
    const double ts[1] = {t};
    const Matrix out = forward_batch(params, xs, ts);
    return Vector(std::vector<double>(out.values().begin(), out.values().end()));
}

BackwardResult backward(const VelocityFieldParams& params, std::span<const RegressionItem> batch) {
    if (batch.empty()) throw ArgError("backward: empty batch");
    const std::size_t d = params.dim();
    const std::size_t bsz = batch.size();
    Matrix xs(bsz, d);
    std::vector<double> ts(bsz);
    for (std::size_t b = 0; b < bsz; ++b) {
        if (batch[b].x.dim() != d || batch[b].target.dim() != d) {
            throw DimError("backward: batch item " + std::to_string(b) + " has wrong dimension");
        }
        for (std::size_t i = 0; i < d; ++i) xs(b, i) = batch[b].x[i];
        ts[b] = batch[b].t;
    }

    Tape tape;
    const Matrix out = run(params, input_matrix(params, xs, ts), &tape);

    BackwardResult result;
    result.grads = params;
    for (auto t : result.grads.tensors()) std::fill(t.begin(), t.end(), 0.0);

    // dL/dOut for L = (1/B) sum_b ||out_b - target_b||^2
    const double inv_b = 1.0 / static_cast<double>(bsz);
    Matrix delta(bsz, d);
    double loss = 0.0;
    for (std::size_t b = 0; b < bsz; ++b) {
        double sq = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double r = out(b, i) - batch[b].target[i];
            sq += r * r;
            delta(b, i) = 2.0 * r * inv_b;
        }
        loss += sq;
    }
    result.loss = loss * inv_b;

    for (std::size_t l = params.layer_count(); l-- > 0;) {
        const Matrix& a = tape.inputs[l];
        const Matrix& w = params.weights[l];
        Matrix& dw = result.grads.weights[l];
        Vector& db = result.grads.biases[l];
        for (std::size_t b = 0; b < bsz; ++b) {
            const auto drow = delta.row(b);
            axpy(1.0, drow, db.values());
            const auto arow = a.row(b);
            for (std::size_t i = 0; i < w.rows(); ++i) axpy(arow[i], drow, dw.row(i));
        }
        if (l == 0) break;
        const Matrix& z_prev = tape.preacts[l - 1];
        Matrix next(bsz, w.rows());
        for (std::size_t b = 0; b < bsz; ++b) {
            const auto drow = delta.row(b);
            for (std::size_t i = 0; i < w.rows(); ++i) {
                next(b, i) = dot(drow, w.row(i)) * silu_grad(z_prev(b, i));
            }
        }
        delta = std::move(next);
    }
    return result;
}

OptState make_opt_state(const VelocityFieldParams& params, const AdamWConfig& config) {
    OptState s;
    s.config = config;
    s.first_moment = params;
    for (auto t : s.first_moment.tensors()) std::fill(t.begin(), t.end(), 0.0);
    s.second_moment = s.first_moment;
    return s;
}

void adamw_step(VelocityFieldParams& params, const VelocityFieldParams& grads, OptState& opt, double lr_now) {
    auto p = params.tensors();
    const auto g = grads.tensors();
    auto m = opt.first_moment.tensors();
    auto v = opt.second_moment.tensors();
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
        throw DimError("adamw_step: parameter/gradient/moment tensor count mismatch");
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (g[k].size() != p[k].size() || m[k].size() != p[k].size() || v[k].size() != p[k].size()) {
            throw DimError("adamw_step: tensor " + std::to_string(k) + " shape mismatch");
        }
    }
    const AdamWConfig& c = opt.config;
    ++opt.step;
    const double step = static_cast<double>(opt.step);
    const double bc1 = 1.0 - std::pow(c.beta1, step);
    const double bc2 = 1.0 - std::pow(c.beta2, step);
    const double decay = 1.0 - lr_now * c.weight_decay;
    for (std::size_t k = 0; k < p.size(); ++k) {
        for (std::size_t i = 0; i < p[k].size(); ++i) {
            const double gi = g[k][i];
            m[k][i] = c.beta1 * m[k][i] + (1.0 - c.beta1) * gi;
            v[k][i] = c.beta2 * v[k][i] + (1.0 - c.beta2) * gi * gi;
            const double m_hat = m[k][i] / bc1;
            const double v_hat = v[k][i] / bc2;
            p[k][i] = p[k][i] * decay - lr_now * m_hat / (std::sqrt(v_hat) + c.eps);
        }
    }
}

double cosine_anneal(double base_lr, std::size_t step, std::size_t total_steps) {
    if (total_steps == 0) throw ArgError("cosine_anneal: total_steps must be positive");
    if (step > total_steps) throw ArgError("cosine_anneal: step beyond schedule");
    if (step == total_steps) return 0.0;
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace flowalign
