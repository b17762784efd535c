#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "flowalign/featureio.hpp"
#include "flowalign/fmasolve.hpp"
#include "flowalign/linalg.hpp"
#include "flowalign/velocitynet.hpp"

namespace flowalign {

struct Prediction {
    Label label = 0;
    std::vector<double> scores;  // cosine similarity to each class embedding
};

/// Nearest class embedding by cosine similarity; ties go to the smallest
/// label. Throws ZeroNormError on a zero x, DimError on a size mismatch.
Prediction classify(const Vector& x, const ClassEmbeddingTable& table);
Label classify_label(std::span<const double> x, const ClassEmbeddingTable& table);

/// Per-step diagnostics over trajectories of every record.
struct StepCurves {
    std::vector<double> accuracy;             // [m] for m = 0..steps
    std::vector<std::size_t> correct;         // [m]
    std::vector<double> mean_dist_to_target;  // [m], L2 to the record's class embedding
    std::vector<std::vector<Label>> predicted;  // [m][record]
};

StepCurves step_curves(const Dataset& dataset, const VelocityFieldParams& params, double h, std::size_t steps,
                       std::size_t workers = 1);

struct RunMetrics {
    double accuracy = 0.0;  // correct / total at the chosen M
    std::size_t correct = 0;
    std::size_t total = 0;
    std::size_t selected_steps = 0;
    std::vector<double> per_step_accuracy;
    std::vector<double> mean_dist_to_target;
    std::vector<Label> predictions;  // per record at the chosen M
};

/// Transports every record for max(M, max_M) steps, classifies the point at
/// M and records the per-step accuracy and distance curves.
RunMetrics evaluate(const Dataset& dataset, const VelocityFieldParams& params, const SolverConfig& cfg);

/// counts[true][predicted], N x N, row-major.
struct ConfusionMatrix {
    std::size_t n = 0;
    std::vector<std::size_t> counts;

    std::size_t operator()(std::size_t truth, std::size_t predicted) const { return counts[truth * n + predicted]; }
    std::size_t total() const noexcept;
};

ConfusionMatrix confusion(std::span<const Label> truth, std::span<const Label> predicted, std::size_t n_classes);

}  // namespace flowalign
