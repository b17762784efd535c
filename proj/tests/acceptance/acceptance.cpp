// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria (0 when everything passes).
//
//   flowalign_acceptance [--only N]...

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flowalign/classify.hpp"
#include "flowalign/featureio.hpp"
#include "flowalign/fmasolve.hpp"
#include "flowalign/fmatrain.hpp"
#include "flowalign/oracle.hpp"
#include "flowalign/velocitynet.hpp"

using namespace flowalign;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kFdRelFloor = 1e-6;  // denominator floor for near-zero gradient entries
constexpr double kGradSeconds = 10.0;
constexpr double kEulerTol = 1e-9;
constexpr double kEulerSeconds = 1.0;
constexpr double kRetargetTol = 1e-12;
constexpr double kAlgebraSeconds = 1.0;
constexpr double kCouplingMargin = 0.10;
constexpr double kCouplingSeconds = 180.0;
constexpr double kEasyGainNote = 0.01;
// K=1 runs see as many (pair, t) draws as a K=16 run: 300 epochs * 128 / 8.
constexpr std::size_t kFewShotEpochs = 4800;
constexpr double kMcSigmas = 3.0;
constexpr int kMcSamples = 1000000;
constexpr double kMcRoundoff = 1e-9;  // summation rounding of 1e6 terms
constexpr int kProbePoints = 20;
// Wide bridges for the Monte Carlo check so most probes see several bridges.
constexpr double kMcBridgeSigma = 1.0;
constexpr double kFieldAgreement = 0.9;
constexpr std::size_t kFieldEpochs = 5000;
constexpr double kFieldLr = 3e-3;
constexpr std::size_t kFieldReplicas = 16;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

std::string fmt_list(const std::vector<double>& v, const char* f = "%.4f") {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(f, v[i]);
    return s + "]";
}

// ---------------------------------------------------------------- 1
Outcome gradient_exactness() {
    const auto start = Clock::now();
    Rng rng(1001);
    double worst = 0.0;
    std::size_t entries = 0;
    for (int net = 0; net < 20; ++net) {
        const std::size_t d = 1 + rng.uniform_index(8);
        std::vector<std::size_t> hidden(1 + rng.uniform_index(2));
        for (auto& h : hidden) h = 1 + rng.uniform_index(16);
        const std::size_t te = 2 * (1 + rng.uniform_index(2));
        const auto params = init_params(d, hidden, te, rng.next_u64());
        std::vector<RegressionItem> batch(4);
        for (auto& it : batch) {
            it.x = Vector(d);
            it.target = Vector(d);
            for (auto& v : it.x) v = rng.normal();
            for (auto& v : it.target) v = rng.normal();
            it.t = rng.uniform();
        }
        const auto exact = backward(params, batch).grads;
        const auto fd = oracle::fd_gradient(
            [&](const VelocityFieldParams& q) { return backward(q, batch).loss; }, params, kFdStep);
        const auto a = exact.tensors();
        const auto b = fd.tensors();
        for (std::size_t k = 0; k < a.size(); ++k) {
            for (std::size_t i = 0; i < a[k].size(); ++i) {
                const double denom = std::max({std::abs(a[k][i]), std::abs(b[k][i]), kFdRelFloor});
                worst = std::max(worst, std::abs(a[k][i] - b[k][i]) / denom);
                ++entries;
            }
        }
    }
    const double secs = seconds_since(start);
    return {worst < kFdRelTol && secs < kGradSeconds,
            "max rel err " + fmt("%.2e", worst) + " over " + std::to_string(entries) + " entries of 20 nets, " +
                fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- 2
Outcome euler_exactness() {
    const auto start = Clock::now();
    Rng rng(2002);
    double worst = 0.0;
    for (std::size_t d : {2u, 32u}) {
        for (std::size_t m : {1u, 2u, 4u, 5u, 10u}) {
            for (int trial = 0; trial < 20; ++trial) {
                CoupledPair pair{Vector(d), Vector(d)};
                for (auto& v : pair.x0) v = rng.normal();
                for (auto& v : pair.x1) v = rng.normal();
                const VelocityField field = [&](const Vector& x, double t) {
                    return oracle::ideal_field(x, t, pair);
                };
                const auto traj = solve_ess(pair.x0, field, SolverConfig{1.0 / static_cast<double>(m), m, m});
                worst = std::max(worst, distance(traj.final_point(), pair.x1));
            }
        }
    }
    const double secs = seconds_since(start);
    return {worst < kEulerTol && secs < kEulerSeconds,
            "max endpoint error " + fmt("%.2e", worst) + ", " + fmt("%.3f", secs) + " s"};
}

// ---------------------------------------------------------------- 3
Outcome bridge_algebra() {
    const auto start = Clock::now();
    bool pinned = true;
    for (double sigma : {0.0, 0.1, 1.0, 7.5}) {
        pinned = pinned && noise_std(0.0, sigma) == 0.0 && noise_std(1.0, sigma) == 0.0;
    }
    Rng rng(3003);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        Vector x0(8), x1(8);
        for (auto& v : x0) v = rng.normal();
        for (auto& v : x1) v = rng.normal();
        const double t = rng.uniform() * 0.95;
        const Vector v = retarget(interpolate(x0, x1, t), x1, t);
        for (std::size_t k = 0; k < 8; ++k) worst = std::max(worst, std::abs(v[k] - (x1[k] - x0[k])));
    }
    const double secs = seconds_since(start);
    return {pinned && worst <= kRetargetTol && secs < kAlgebraSeconds,
            std::string("noise_std endpoints ") + (pinned ? "exactly 0" : "NONZERO") + ", max retarget error " +
                fmt("%.2e", worst) + " over 1e4 triples, " + fmt("%.3f", secs) + " s"};
}

// ------------------------------------------------- shared workload runs
struct WorkloadRun {
    double test_acc = 0.0;      // at the run's own M*
    double test_acc0 = 0.0;     // M = 0
    std::size_t m_star = 0;
    std::vector<double> val_curve;
    double dist_t0 = 0.0;       // train-set mean distance to own embedding
    double dist_t1 = 0.0;
};

WorkloadRun run_workload(const SyntheticSplits& s, const TrainConfig& tc) {
    const auto params = train(s.train, NetConfig{s.train.table.dim(), {256, 256}, 16}, tc).params;
    WorkloadRun r;
    const auto sel = select_steps(params, s.val, 0.1, 10);
    r.m_star = sel.best_steps;
    r.val_curve = sel.accuracy;
    const auto m = evaluate(s.test, params, SolverConfig{0.1, sel.best_steps, 10});
    r.test_acc = m.accuracy;
    r.test_acc0 = m.per_step_accuracy.front();
    const auto curves = step_curves(s.train, params, 0.1, 10);
    r.dist_t0 = curves.mean_dist_to_target.front();
    r.dist_t1 = curves.mean_dist_to_target.back();
    return r;
}

SyntheticSplits workload(std::uint64_t seed, double offset_std, std::size_t shots = 16) {
    SynthConfig sc;
    sc.seed = seed;
    sc.modality_offset_std = offset_std;
    sc.shots = shots;
    return generate_synthetic(sc);
}

struct DifficultRuns {
    std::vector<WorkloadRun> coupled, random;
    double seconds = 0.0;
};

const DifficultRuns& difficult_runs() {
    static const DifficultRuns runs = [] {
        DifficultRuns out;
        const auto start = Clock::now();
        for (std::uint64_t seed : {1, 2, 3}) {
            const auto s = workload(seed, 0.3);
            TrainConfig tc;
            tc.seed = seed;
            out.coupled.push_back(run_workload(s, tc));
            tc.coupling = CouplingMode::random;
            out.random.push_back(run_workload(s, tc));
        }
        out.seconds = seconds_since(start);
        return out;
    }();
    return runs;
}

// ---------------------------------------------------------------- 4
Outcome coupling_separation() {
    const auto& runs = difficult_runs();
    bool pass = runs.seconds < kCouplingSeconds;
    std::vector<double> gaps, c, r;
    for (std::size_t i = 0; i < 3; ++i) {
        c.push_back(runs.coupled[i].test_acc);
        r.push_back(runs.random[i].test_acc);
        gaps.push_back(c.back() - r.back());
        pass = pass && gaps.back() >= kCouplingMargin;
    }
    return {pass, "coupled " + fmt_list(c) + " vs random " + fmt_list(r) + ", gap " + fmt_list(gaps) +
                      " (need >= " + fmt("%.2f", kCouplingMargin) + "), " + fmt("%.1f", runs.seconds) + " s"};
}

// ---------------------------------------------------------------- 5
Outcome improves_over_baseline() {
    const auto& runs = difficult_runs();
    bool never_worse = true;
    int strictly = 0;
    std::vector<double> at_m, at_0;
    for (const auto& run : runs.coupled) {
        at_m.push_back(run.test_acc);
        at_0.push_back(run.test_acc0);
        never_worse = never_worse && run.test_acc >= run.test_acc0;
        strictly += run.test_acc > run.test_acc0;
    }
    std::vector<double> easy_gain;
    for (std::uint64_t seed : {1, 2, 3}) {
        TrainConfig tc;
        tc.seed = seed;
        const auto run = run_workload(workload(seed, 0.05), tc);
        easy_gain.push_back(run.test_acc - run.test_acc0);
    }
    const double easy_mean = std::accumulate(easy_gain.begin(), easy_gain.end(), 0.0) / 3;
    return {never_worse && strictly >= 2,
            "difficult: acc(M*) " + fmt_list(at_m) + " vs acc(0) " + fmt_list(at_0) + ", strictly better on " +
                std::to_string(strictly) + "/3; easy workload gain " + fmt_list(easy_gain) +
                (easy_mean <= kEasyGainNote ? " (within 1 point)" : " (above 1 point)")};
}

// ---------------------------------------------------------------- 6
Outcome curve_shape() {
    bool pass = true;
    std::string detail;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& run = difficult_runs().coupled[i];
        const auto& a = run.val_curve;
        pass = pass && a[run.m_star] >= a.front() && a.back() <= a[run.m_star];
        detail += (i ? "; " : "") + std::string("seed ") + std::to_string(i + 1) + " M*=" +
                  std::to_string(run.m_star) + " acc(0)=" + fmt("%.3f", a.front()) + " acc(M*)=" +
                  fmt("%.3f", a[run.m_star]) + " acc(10)=" + fmt("%.3f", a.back());
    }
    return {pass, detail};
}

// ---------------------------------------------------------------- 7
Outcome noise_ablation() {
    std::vector<double> with, without;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto s = workload(seed, 0.3, 1);
        TrainConfig tc;
        tc.seed = seed;
        tc.epochs = kFewShotEpochs;
        with.push_back(run_workload(s, tc).test_acc);
        tc.sigma = 0.0;
        without.push_back(run_workload(s, tc).test_acc);
    }
    const double mw = std::accumulate(with.begin(), with.end(), 0.0) / 5;
    const double mo = std::accumulate(without.begin(), without.end(), 0.0) / 5;
    return {mw >= mo, "K=1 mean test acc sigma=0.1 " + fmt("%.4f", mw) + " " + fmt_list(with, "%.3f") +
                          ", sigma=0 " + fmt("%.4f", mo) + " " + fmt_list(without, "%.3f") + ", " +
                          std::to_string(kFewShotEpochs) + " epochs"};
}

// ---------------------------------------------------------------- 8
Outcome distance_curve() {
    bool pass = true;
    std::vector<double> d0, d1;
    for (const auto& run : difficult_runs().coupled) {
        d0.push_back(run.dist_t0);
        d1.push_back(run.dist_t1);
        pass = pass && run.dist_t0 > run.dist_t1;
    }
    return {pass, "train mean distance to class embedding at t=0 " + fmt_list(d0) + ", at t=1 " + fmt_list(d1)};
}

// ---------------------------------------------------------------- 9
struct FourPoints {
    std::vector<Vector> sources, targets;
};

FourPoints four_point_geometry() {
    Rng rng(9009);
    FourPoints g;
    const double pi = 3.14159265358979323846;
    for (int j = 0; j < 4; ++j) {
        const double a = 2 * pi * (j + 0.3 * rng.uniform()) / 4;
        g.sources.push_back(Vector{std::cos(a), std::sin(a)});
    }
    for (int j = 0; j < 4; ++j) {
        const double a = 2 * pi * (j + 0.5 + 0.3 * rng.uniform()) / 4;
        g.targets.push_back(Vector{1.5 * std::cos(a), 1.5 * std::sin(a)});
    }
    return g;
}

// Probe points drawn from the bridge distribution of the problem.
std::vector<std::pair<Vector, double>> probes(const oracle::DiscreteFlowProblem& p, Rng& rng) {
    std::vector<std::pair<Vector, double>> out;
    for (int i = 0; i < kProbePoints; ++i) {
        const auto& pair = p.pairs[rng.uniform_index(p.pairs.size())];
        const double t = 0.1 + 0.7 * rng.uniform();
        out.emplace_back(augment(interpolate(pair.x0, pair.x1, t), t, p.sigma, rng), t);
    }
    return out;
}

Outcome marginal_velocity_oracle() {
    const auto geo = four_point_geometry();
    const double sigma = TrainConfig{}.sigma;

    // (a) brute force vs self-normalized importance sampling, linear-space
    // densities, delta-method standard errors.
    oracle::DiscreteFlowProblem four;
    four.sigma = kMcBridgeSigma;
    for (int j = 0; j < 4; ++j) four.pairs.push_back({geo.sources[j], geo.targets[j]});
    Rng mc(9010);
    double worst_z = 0.0;
    int mixed = 0;
    for (const auto& [x, t] : probes(four, mc)) {
        const auto w = oracle::bridge_posterior(x, t, four);
        mixed += *std::max_element(w.begin(), w.end()) < 0.99;
        const double var = t * (1 - t) * four.sigma * four.sigma;
        double sw = 0, sw2 = 0, swv[2] = {0, 0}, swv2[2] = {0, 0}, sw2v[2] = {0, 0};
        for (int i = 0; i < kMcSamples; ++i) {
            const auto& pr = four.pairs[mc.uniform_index(4)];
            double d2 = 0.0;
            for (int k = 0; k < 2; ++k) {
                const double m = t * pr.x1[k] + (1 - t) * pr.x0[k];
                d2 += (x[k] - m) * (x[k] - m);
            }
            const double w = std::exp(-d2 / (2 * var));
            sw += w;
            sw2 += w * w;
            for (int k = 0; k < 2; ++k) {
                const double v = (pr.x1[k] - x[k]) / (1 - t);
                swv[k] += w * v;
                swv2[k] += w * w * v * v;
                sw2v[k] += w * w * v;
            }
        }
        const Vector exact = oracle::marginal_velocity_bruteforce(x, t, four);
        for (int k = 0; k < 2; ++k) {
            const double est = swv[k] / sw;
            const double se = std::sqrt(std::max(0.0, swv2[k] - 2 * est * sw2v[k] + est * est * sw2)) / sw;
            const double z = std::abs(est - exact[k]) / std::max(se, 1e-300);
            if (std::abs(est - exact[k]) > kMcRoundoff) worst_z = std::max(worst_z, z);
        }
    }

    // (b) random-coupling net on the same sources and targets: its regression
    // target is the marginal over all 16 source/target combinations.
    oracle::DiscreteFlowProblem cross;
    cross.sigma = sigma;
    for (const auto& a : geo.sources)
        for (const auto& b : geo.targets) cross.pairs.push_back({a, b});
    Dataset ds;
    ds.table = ClassEmbeddingTable(geo.targets);
    ds.meta = {4, kFieldReplicas, 2, Split::train};
    for (std::size_t r = 0; r < kFieldReplicas; ++r)
        for (Label j = 0; j < 4; ++j) ds.records.push_back({geo.sources[j], j});
    TrainConfig tc;
    tc.seed = 1;
    tc.coupling = CouplingMode::random;
    tc.epochs = kFieldEpochs;
    tc.optim.base_lr = kFieldLr;
    const auto params = train(ds, NetConfig{2, {64, 64}, 16}, tc).params;
    Rng pr(9011);
    double sum_cos = 0.0;
    for (const auto& [x, t] : probes(cross, pr)) {
        sum_cos += cosine(forward(params, x, t), oracle::marginal_velocity_bruteforce(x, t, cross));
    }
    const double mean_cos = sum_cos / kProbePoints;
    return {worst_z <= kMcSigmas && mean_cos > kFieldAgreement,
            "brute force vs 1e6-sample Monte Carlo: worst |z| " + fmt("%.2f", worst_z) + " over " +
                std::to_string(kProbePoints) + " probes, " + std::to_string(mixed) +
                " with a mixed posterior (need <= 3); random-coupling net mean direction cosine " +
                fmt("%.4f", mean_cos) + " (need > 0.9)"};
}

// ---------------------------------------------------------------- 10
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int shell(const std::string& cmd) { return std::system(cmd.c_str()); }

Outcome determinism_and_formats() {
    const fs::path root = fs::temp_directory_path() / "flowalign_acceptance_cli";
    fs::remove_all(root);
    const std::string cli = FMA_CLI_PATH;
    std::vector<std::string> mismatched;
    bool all_ok = true;
    std::size_t compared = 0;
    for (const char* run : {"a", "b"}) {
        const fs::path dir = root / run;
        fs::create_directories(dir);
        const std::string d = dir.string();
        const std::string q = "cd '" + d + "' && '" + cli + "' ";
        all_ok = all_ok && shell(q + "gen --seed 5 --out data > gen.out") == 0;
        all_ok = all_ok && shell(q + "gen --seed 5 --format csv --out csvdata > gencsv.out") == 0;
        all_ok = all_ok && shell(q + "train --seed 5 --epochs 20 --data data/train.fma --out model.json > train.out") == 0;
        all_ok = all_ok && shell(q + "sweep --data data/val.fma --checkpoint model.json > sweep.out") == 0;
        all_ok = all_ok && shell(q + "eval --data data/test.fma --checkpoint model.json --m-from sweep.json "
                                     "--baseline --predictions pred.csv > eval.out") == 0;
    }
    if (all_ok) {
        for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
            if (!entry.is_regular_file()) continue;
            const auto rel = fs::relative(entry.path(), root / "a");
            ++compared;
            if (slurp(entry.path()) != slurp(root / "b" / rel)) mismatched.push_back(rel.string());
        }
    }

    // binary round trip: load, save, compare bytes and CRC trailer
    bool round_trip = false;
    if (all_ok) {
        const fs::path src = root / "a/data/train.fma";
        const Dataset ds = load_features(src, FileFormat::binary);
        save_features(ds, root / "rt.fma", FileFormat::binary);
        const std::string a = slurp(src), b = slurp(root / "rt.fma");
        std::uint32_t trailer = 0;
        for (int i = 0; i < 4; ++i) {
            trailer |= static_cast<std::uint32_t>(static_cast<unsigned char>(a[a.size() - 4 + i])) << (8 * i);
        }
        const auto body = std::as_bytes(std::span(a.data(), a.size() - 4));
        round_trip = a == b && trailer == crc32(body) && load_features(root / "rt.fma", FileFormat::binary) == ds;
    }
    fs::remove_all(root);
    std::string detail = all_ok ? std::to_string(compared) + " CLI artifacts compared across reruns, " +
                                      std::to_string(mismatched.size()) + " differ"
                                : "a CLI command failed";
    for (const auto& m : mismatched) detail += " " + m;
    detail += round_trip ? "; binary round trip byte-identical with valid CRC32" : "; binary round trip FAILED";
    return {all_ok && mismatched.empty() && compared > 0 && round_trip, detail};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::string(argv[i]) == "--only") only.insert(std::atoi(argv[i + 1]));
    }
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"gradient exactness", gradient_exactness},
        {"Euler exactness on the ideal field", euler_exactness},
        {"bridge noise and re-targeting algebra", bridge_algebra},
        {"coupled beats random coupling", coupling_separation},
        {"improvement over the no-flow baseline", improves_over_baseline},
        {"early-stopping curve shape", curve_shape},
        {"noise augmentation at K=1", noise_ablation},
        {"trajectory distance to class embedding", distance_curve},
        {"marginal velocity oracle", marginal_velocity_oracle},
        {"determinism and file formats", determinism_and_formats},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s  %2d  %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
