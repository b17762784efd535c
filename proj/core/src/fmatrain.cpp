#include "flowalign/fmatrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "flowalign/errors.hpp"

namespace flowalign {

std::string_view to_string(CouplingMode mode) noexcept {
    return mode == CouplingMode::coupled ? "coupled" : "random";
}

CouplingMode parse_coupling(std::string_view text) {
    if (text == "coupled") return CouplingMode::coupled;
    if (text == "random") return CouplingMode::random;
    throw ArgError("unknown coupling mode '" + std::string(text) + "'");
}

void validate(const TrainConfig& cfg) {
    if (!(cfg.sigma >= 0.0) || !std::isfinite(cfg.sigma)) throw ArgError("sigma must be a finite value >= 0");
    if (!(cfg.t_clamp > 0.0 && cfg.t_clamp < 0.5)) throw ArgError("t_clamp must lie in (0, 0.5)");
    if (cfg.epochs == 0) throw ArgError("epochs must be positive");
    if (cfg.batch_size == 0) throw ArgError("batch_size must be positive");
    if (!(cfg.optim.base_lr >= 0.0)) throw ArgError("learning rate must be non-negative");
}

std::vector<CoupledPair> couple(std::span<const FeatureRecord> records, const ClassEmbeddingTable& table) {
    std::vector<CoupledPair> pairs;
    pairs.reserve(records.size());
    for (const auto& rec : records) pairs.push_back({rec.vec, table[rec.label]});
    return pairs;
}

std::vector<CoupledPair> couple_random(std::span<const FeatureRecord> records,
                                       const ClassEmbeddingTable& table, Rng& rng) {
    std::vector<CoupledPair> pairs;
    pairs.reserve(records.size());
    for (const auto& rec : records) {
        (void)table[rec.label];
        const auto pick = static_cast<Label>(rng.uniform_index(table.size()));
        pairs.push_back({rec.vec, table[pick]});
    }
    return pairs;
}

Vector interpolate(const Vector& x0, const Vector& x1, double t) {
    if (x0.dim() != x1.dim()) throw DimError("interpolate: dimension mismatch");
    if (!(t >= 0.0 && t <= 1.0)) throw ArgError("interpolate: t outside [0, 1]");
    Vector out(x0.dim());
    for (std::size_t i = 0; i < x0.dim(); ++i) out[i] = t * x1[i] + (1.0 - t) * x0[i];
    return out;
}

double noise_std(double t, double sigma) {
    if (!(t >= 0.0 && t <= 1.0)) throw ArgError("noise_std: t outside [0, 1]");
    if (!(sigma >= 0.0)) throw ArgError("noise_std: negative sigma");
    return std::sqrt(t * (1.0 - t)) * sigma;
}

Vector augment(const Vector& x_t, double t, double sigma, Rng& rng) {
    const double std = noise_std(t, sigma);
    if (std == 0.0) return x_t;
    Vector out = x_t;
    for (double& v : out) v += gauss(rng, 0.0, std);
    return out;
}

Vector retarget(const Vector& x_hat, const Vector& x1, double t, double t_clamp) {
    if (x_hat.dim() != x1.dim()) throw DimError("retarget: dimension mismatch");
    if (!(t >= 0.0)) throw ArgError("retarget: negative t");
    if (t >= 1.0 - t_clamp) {
        throw TimeClampError("retarget: t = " + std::to_string(t) + " is inside the clamp band near 1");
    }
    const double inv = 1.0 / (1.0 - t);
    Vector out(x1.dim());
    for (std::size_t i = 0; i < x1.dim(); ++i) out[i] = (x1[i] - x_hat[i]) * inv;
    return out;
}

TrainSample draw_sample(const CoupledPair& pair, const TrainConfig& cfg, Rng& rng) {
    TrainSample s;
    s.t = rng.uniform() * (1.0 - cfg.t_clamp);
    s.x0 = pair.x0;
    s.x1 = pair.x1;
    s.x_hat_t = augment(interpolate(pair.x0, pair.x1, s.t), s.t, cfg.sigma, rng);
    s.target = retarget(s.x_hat_t, pair.x1, s.t, cfg.t_clamp);
    return s;
}

TrainResult train(const Dataset& dataset, const NetConfig& net, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    NetConfig resolved = net;
    resolved.dim = dataset.table.dim();
    // The parameter init stream is derived from, but independent of, the
    // sampling stream.
    Rng seeder(cfg.seed);
    const std::uint64_t init_seed = seeder.next_u64();
    return train_from(dataset, init_params(resolved, init_seed), cfg, on_epoch);
}

TrainResult train_from(const Dataset& dataset, VelocityFieldParams init, const TrainConfig& cfg,
                       const EpochCallback& on_epoch) {
    validate(cfg);
    validate(dataset);
    validate(init);
    if (dataset.records.empty()) throw ArgError("train: empty dataset");
    if (init.dim() != dataset.table.dim()) {
        throw DimError("train: network dim " + std::to_string(init.dim()) + " does not match data dim " +
                       std::to_string(dataset.table.dim()));
    }

    Rng seeder(cfg.seed);
    (void)seeder.next_u64();  // consumed by train() for the init seed
    Rng rng = seeder.split();

    TrainResult result;
    result.params = std::move(init);
    OptState opt = make_opt_state(result.params, cfg.optim);

    const std::size_t n = dataset.records.size();
    const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = per_epoch * cfg.epochs;
    std::vector<std::size_t> order(n);
    std::vector<FeatureRecord> shuffled(n);
    std::vector<RegressionItem> batch;
    batch.reserve(cfg.batch_size);
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
        for (std::size_t i = 0; i < n; ++i) shuffled[i] = dataset.records[order[i]];
        const auto pairs = cfg.coupling == CouplingMode::coupled
                               ? couple(shuffled, dataset.table)
                               : couple_random(shuffled, dataset.table, rng);

        double loss_sum = 0.0;
        double lr_now = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) {
                TrainSample s = draw_sample(pairs[i], cfg, rng);
                batch.push_back({std::move(s.x_hat_t), s.t, std::move(s.target)});
            }
            auto [loss, grads] = backward(result.params, batch);
            if (!std::isfinite(loss)) {
                throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
            }
            lr_now = cosine_anneal(cfg.optim.base_lr, step, total_steps);
            adamw_step(result.params, grads, opt, lr_now);
            ++step;
            loss_sum += loss * static_cast<double>(stop - start);
        }
        const EpochLog log{epoch, loss_sum / static_cast<double>(n), lr_now};
        result.history.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    for (auto t : result.params.tensors()) {
        if (!all_finite(t)) throw NumericalError("training produced non-finite parameters");
    }
    return result;
}

}  // namespace flowalign
