#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowalign/featureio.hpp"
#include "flowalign/fmasolve.hpp"
#include "flowalign/fmatrain.hpp"
#include "flowalign/velocitynet.hpp"

namespace flowalign::cli {

enum class Command { gen, train, eval, sweep };

/// Exit codes of the fma tool.
enum ExitCode : int { ok = 0, usage_error = 1, data_error = 2, numerical_error = 3 };

/// Everything one invocation needs, after merging defaults, the optional
/// JSON config file and command-line flags (flags win).
struct RunConfig {
    Command command = Command::gen;
    std::uint64_t seed = 0;

    SynthConfig synth;
    FileFormat format = FileFormat::binary;

    TrainConfig train;
    NetConfig net;

    SolverConfig solver;
    std::optional<std::filesystem::path> steps_from;  // sweep summary providing M*
    bool baseline = false;

    std::filesystem::path data;
    std::filesystem::path checkpoint;
    std::filesystem::path out;
    std::filesystem::path log;
    std::filesystem::path metrics;
    std::filesystem::path summary;
    std::optional<std::filesystem::path> predictions;
};

/// Writes train/val/test feature files plus gen.json into cfg.out.
void cmd_gen(const RunConfig& cfg, std::ostream& out);

/// Trains on cfg.data; writes the checkpoint to cfg.out and the JSON-lines
/// loss log to cfg.log.
void cmd_train(const RunConfig& cfg, std::ostream& out);

/// Evaluates cfg.checkpoint on cfg.data at M steps; writes cfg.metrics.
void cmd_eval(const RunConfig& cfg, std::ostream& out);

/// Accuracy for every M in [0, max_M] on cfg.data; writes the CSV to
/// cfg.out and the M* summary to cfg.summary.
void cmd_sweep(const RunConfig& cfg, std::ostream& out);

/// Parses argv into a RunConfig. Throws CLI::ParseError-derived exceptions
/// for usage problems and flowalign errors for bad inputs.
RunConfig parse_args(int argc, const char* const* argv);

/// Full entry point: parse, dispatch, map failures to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Shortest decimal that round-trips the double.
std::string format_double(double v);

}  // namespace flowalign::cli
