#include "flowalign/classify.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "flowalign/errors.hpp"

namespace flowalign {
namespace {

/// states[m] row r = record r after m steps. Records are split into
/// contiguous chunks, one per worker; each row's arithmetic is independent
/// of the chunking.
std::vector<Matrix> transport_records(const Dataset& dataset, const VelocityFieldParams& params, double h,
                                      std::size_t steps, std::size_t workers) {
    const std::size_t n = dataset.records.size();
    const std::size_t d = dataset.table.dim();
    std::vector<Matrix> states(steps + 1, Matrix(n, d));
    if (n == 0) return states;
    workers = std::clamp<std::size_t>(workers, 1, n);
    const std::size_t chunk = (n + workers - 1) / workers;

    auto run_chunk = [&](std::size_t begin, std::size_t end) {
        Matrix x0s(end - begin, d);
        for (std::size_t r = begin; r < end; ++r) {
            std::copy(dataset.records[r].vec.begin(), dataset.records[r].vec.end(), x0s.row(r - begin).begin());
        }
        const auto local = solve_ess_batch(x0s, params, h, steps);
        for (std::size_t m = 0; m <= steps; ++m) {
            for (std::size_t r = begin; r < end; ++r) {
                std::copy(local[m].row(r - begin).begin(), local[m].row(r - begin).end(), states[m].row(r).begin());
            }
        }
    };

    if (workers == 1) {
        run_chunk(0, n);
        return states;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&, w, begin, end] {
            try {
                run_chunk(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return states;
}

}  // namespace


Prediction classify(const Vector& x, const ClassEmbeddingTable& table) {
    if (table.size() == 0) throw ArgError("classify: empty class table");
    Prediction p;
    p.scores.reserve(table.size());
    for (const auto& e : table.embeddings()) p.scores.push_back(cosine(x, e));
    p.label = static_cast<Label>(argmax_first(p.scores));
    return p;
}

Label classify_label(std::span<const double> x, const ClassEmbeddingTable& table) {
    return classify(Vector(std::vector<double>(x.begin(), x.end())), table).label;
}

StepCurves step_curves(const Dataset& dataset, const VelocityFieldParams& params, double h, std::size_t steps,
                       std::size_t workers) {
    validate(dataset);
    const std::size_t n = dataset.records.size();
    const std::size_t d = dataset.table.dim();
    if (params.dim() != d) {
        throw DimError("network dim " + std::to_string(params.dim()) + " does not match data dim " +
                       std::to_string(d));
    }
    const auto states = transport_records(dataset, params, h, steps, workers);

    StepCurves c;
    c.accuracy.resize(steps + 1);
    c.correct.resize(steps + 1);
    c.mean_dist_to_target.resize(steps + 1);
    c.predicted.assign(steps + 1, std::vector<Label>(n));
    for (std::size_t m = 0; m <= steps; ++m) {
        std::size_t correct = 0;
        double dist_sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const auto row = states[m].row(r);
            const Vector& target = dataset.table[dataset.records[r].label];
            const Label pred = classify_label(row, dataset.table);
            c.predicted[m][r] = pred;
            if (pred == dataset.records[r].label) ++correct;
            double sq = 0.0;
            for (std::size_t i = 0; i < d; ++i) sq += (row[i] - target[i]) * (row[i] - target[i]);
            dist_sum += std::sqrt(sq);
        }
        c.correct[m] = correct;
        c.accuracy[m] = n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
        c.mean_dist_to_target[m] = n == 0 ? 0.0 : dist_sum / static_cast<double>(n);
    }
    return c;
}

RunMetrics evaluate(const Dataset& dataset, const VelocityFieldParams& params, const SolverConfig& cfg) {
    validate(cfg);
    const std::size_t horizon = std::max(cfg.steps, cfg.max_steps);
    auto c = step_curves(dataset, params, cfg.h, horizon, cfg.workers);
    RunMetrics m;
    m.selected_steps = cfg.steps;
    m.total = dataset.records.size();
    m.correct = c.correct[cfg.steps];
    m.accuracy = c.accuracy[cfg.steps];
    m.per_step_accuracy = std::move(c.accuracy);
    m.mean_dist_to_target = std::move(c.mean_dist_to_target);
    m.predictions = std::move(c.predicted[cfg.steps]);
    return m;
}

std::size_t ConfusionMatrix::total() const noexcept {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

ConfusionMatrix confusion(std::span<const Label> truth, std::span<const Label> predicted, std::size_t n_classes) {
    if (truth.size() != predicted.size()) throw DimError("confusion: label lists differ in length");
    ConfusionMatrix cm{n_classes, std::vector<std::size_t>(n_classes * n_classes, 0)};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= n_classes || predicted[i] >= n_classes) throw LabelError("confusion: label out of range");
        ++cm.counts[truth[i] * n_classes + predicted[i]];
    }
    return cm;
}

}  // namespace flowalign
