#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "flowalign/featureio.hpp"
#include "flowalign/linalg.hpp"
#include "flowalign/rng.hpp"
#include "flowalign/velocitynet.hpp"

namespace flowalign {

enum class CouplingMode {
    /// Each source feature is paired with its own class embedding.
    coupled,
    /// Each source feature is paired with a uniformly drawn class embedding,
    /// redrawn every epoch. Exists to reproduce the class-averaging baseline.
    random,
};

std::string_view to_string(CouplingMode mode) noexcept;
CouplingMode parse_coupling(std::string_view text);

struct TrainConfig {
    /// Bridge noise scale; the interpolant noise std is sqrt(t (1 - t)) * sigma.
    double sigma = 0.1;
    /// Training times are drawn from [0, 1 - t_clamp).
    double t_clamp = 0.05;
    std::size_t epochs = 300;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    CouplingMode coupling = CouplingMode::coupled;
    AdamWConfig optim;
};

void validate(const TrainConfig& cfg);

struct CoupledPair {
    Vector x0;
    Vector x1;
};

/// One pair per record, x1 = table[label], record order preserved.
std::vector<CoupledPair> couple(std::span<const FeatureRecord> records, const ClassEmbeddingTable& table);

/// As couple, but x1 is drawn uniformly from the table for every pair.
std::vector<CoupledPair> couple_random(std::span<const FeatureRecord> records,
                                       const ClassEmbeddingTable& table, Rng& rng);

/// t * x1 + (1 - t) * x0.
Vector interpolate(const Vector& x0, const Vector& x1, double t);

/// sqrt(t (1 - t)) * sigma
double noise_std(double t, double sigma);

/// x_t plus i.i.d. N(0, noise_std(t, sigma)^2) noise per coordinate.
Vector augment(const Vector& x_t, double t, double sigma, Rng& rng);

/// (x1 - x_hat) / (1 - t). Throws TimeClampError when t >= 1 - t_clamp.
Vector retarget(const Vector& x_hat, const Vector& x1, double t, double t_clamp = 0.05);

struct TrainSample {
    Vector x0;
    Vector x1;
    double t = 0.0;
    Vector x_hat_t;
    Vector target;
};

/// Draws t, interpolates, augments and re-targets one pair.
TrainSample draw_sample(const CoupledPair& pair, const TrainConfig& cfg, Rng& rng);

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double lr_now = 0.0;
};

struct TrainResult {
    VelocityFieldParams params;
    std::vector<EpochLog> history;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Regression training of the velocity field on (x_hat_t, t) -> target.
///
/// Each epoch shuffles the records, (re)builds the pairs, and walks
/// minibatches; every item draws its own t. The learning rate follows a
/// cosine schedule over all optimizer steps. Deterministic in cfg.seed.
/// Throws NumericalError if the loss becomes non-finite.
TrainResult train(const Dataset& dataset, const NetConfig& net, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Same as above but starting from the given parameters.
TrainResult train_from(const Dataset& dataset, VelocityFieldParams init, const TrainConfig& cfg,
                       const EpochCallback& on_epoch = {});

}  // namespace flowalign
