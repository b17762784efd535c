#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flowalign/checkpoint.hpp"
#include "flowalign/classify.hpp"
#include "flowalign/errors.hpp"

namespace flowalign::cli {
namespace {

using Json = nlohmann::ordered_json;

enum class Kind { u64, count, real, text, count_list, flag };

struct Key {
    const char* name;
    Kind kind;
    const char* help;
    std::vector<Command> commands;
};

const std::vector<Key>& keys() {
    using C = Command;
    static const std::vector<Key> table = {
        {"seed", Kind::u64, "Random seed", {C::gen, C::train, C::eval, C::sweep}},
        {"classes", Kind::count, "Number of classes N", {C::gen}},
        {"shots", Kind::count, "Records per class K in the train split", {C::gen}},
        {"dim", Kind::count, "Feature dimension d", {C::gen}},
        {"center-scale", Kind::real, "Norm scale of class centers", {C::gen}},
        {"cluster-std", Kind::real, "Per-coordinate std of per-sample noise", {C::gen}},
        {"offset-std", Kind::real, "Per-coordinate std of the per-class modality offset", {C::gen}},
        {"format", Kind::text, "Feature file format: binary or csv", {C::gen}},
        {"sigma", Kind::real, "Noise-augmentation scale", {C::train}},
        {"t-clamp", Kind::real, "Training times are drawn from [0, 1 - t-clamp)", {C::train}},
        {"epochs", Kind::count, "Training epochs", {C::train}},
        {"batch-size", Kind::count, "Minibatch size", {C::train}},
        {"lr", Kind::real, "Base AdamW learning rate", {C::train}},
        {"weight-decay", Kind::real, "AdamW decoupled weight decay", {C::train}},
        {"coupling", Kind::text, "Pairing strategy: coupled or random", {C::train}},
        {"hidden", Kind::count_list, "Hidden layer widths", {C::train}},
        {"time-embed", Kind::count, "Sinusoidal time embedding width", {C::train}},
        {"h", Kind::real, "Euler step size", {C::eval, C::sweep}},
        {"m", Kind::count, "Number of Euler steps M", {C::eval}},
        {"m-from", Kind::text, "Read M from a sweep summary JSON (M_star)", {C::eval}},
        {"max-m", Kind::count, "Largest M in the per-step curves", {C::eval, C::sweep}},
        {"workers", Kind::count, "Threads used to transport records", {C::eval, C::sweep}},
        {"data", Kind::text, "Input feature file", {C::train, C::eval, C::sweep}},
        {"checkpoint", Kind::text, "Checkpoint manifest to load", {C::eval, C::sweep}},
        {"out", Kind::text, "Output directory (gen), checkpoint manifest (train) or CSV (sweep)",
         {C::gen, C::train, C::sweep}},
        {"log", Kind::text, "JSON-lines loss log path", {C::train}},
        {"metrics", Kind::text, "Metrics JSON path", {C::eval}},
        {"summary", Kind::text, "Sweep summary JSON path", {C::sweep}},
        {"predictions", Kind::text, "Optional per-record prediction CSV", {C::eval}},
        {"baseline", Kind::flag, "Also report the no-flow (M = 0) accuracy", {C::eval}},
    };
    return table;
}

const Key* find_key(const std::string& name) {
    for (const auto& k : keys()) {
        if (name == k.name) return &k;
    }
    return nullptr;
}

bool applies(const Key& key, Command cmd) {
    return std::find(key.commands.begin(), key.commands.end(), cmd) != key.commands.end();
}

const char* command_name(Command cmd) {
    switch (cmd) {
        case Command::gen: return "gen";
        case Command::train: return "train";
        case Command::eval: return "eval";
        case Command::sweep: return "sweep";
    }
    return "?";
}

Json flag_value(const Key& key, const std::string& raw) {
    try {
        switch (key.kind) {
            case Kind::u64: return std::stoull(raw);
            case Kind::count: return std::stoull(raw);
            case Kind::real: return std::stod(raw);
            case Kind::text: return raw;
            case Kind::flag: return raw == "true" || raw == "1";
            case Kind::count_list: {
                Json list = Json::array();
                std::stringstream ss(raw);
                std::string item;
                while (std::getline(ss, item, ',')) list.push_back(std::stoull(item));
                return list;
            }
        }
    } catch (const std::exception&) {
        throw ArgError("--" + std::string(key.name) + ": cannot parse '" + raw + "'");
    }
    return nullptr;
}

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        Json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + " is not valid JSON: " + e.what());
    }
}

template <typename T>
T get_as(const Json& merged, const char* name, T fallback) {
    const auto it = merged.find(name);
    if (it == merged.end()) return fallback;
    try {
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (it->is_number_float() || (it->is_number_integer() && it->template get<long long>() < 0)) {
                throw ArgError(std::string(name) + " must be a non-negative integer");
            }
        }
        return it->template get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ArgError(std::string("config value for '") + name + "' has the wrong type");
    }
}

void require_input(const std::filesystem::path& path, const char* what) {
    if (path.empty()) throw ArgError(std::string("missing --") + what);
    if (!std::filesystem::exists(path)) throw IoError(std::string(what) + " file not found: " + path.string());
}

void ensure_parent(const std::filesystem::path& path) {
    const auto parent = path.parent_path();
    if (parent.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

Json to_json_array(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(x);
    return a;
}

std::size_t default_steps(double h) {
    return static_cast<std::size_t>(std::floor(1.0 / h + 1e-9));
}

RunConfig build_config(Command cmd, const Json& merged) {
    RunConfig cfg;
    cfg.command = cmd;
    cfg.seed = get_as<std::uint64_t>(merged, "seed", 0);

    cfg.synth.n_classes = get_as<std::size_t>(merged, "classes", cfg.synth.n_classes);
    cfg.synth.shots = get_as<std::size_t>(merged, "shots", cfg.synth.shots);
    cfg.synth.dim = get_as<std::size_t>(merged, "dim", cfg.synth.dim);
    cfg.synth.class_center_scale = get_as<double>(merged, "center-scale", cfg.synth.class_center_scale);
    cfg.synth.cluster_std = get_as<double>(merged, "cluster-std", cfg.synth.cluster_std);
    cfg.synth.modality_offset_std = get_as<double>(merged, "offset-std", cfg.synth.modality_offset_std);
    cfg.synth.seed = cfg.seed;
    const auto format = get_as<std::string>(merged, "format", "binary");
    if (format == "binary") {
        cfg.format = FileFormat::binary;
    } else if (format == "csv") {
        cfg.format = FileFormat::csv;
    } else {
        throw ArgError("unknown format '" + format + "'");
    }

    cfg.train.sigma = get_as<double>(merged, "sigma", cfg.train.sigma);
    cfg.train.t_clamp = get_as<double>(merged, "t-clamp", cfg.train.t_clamp);
    cfg.train.epochs = get_as<std::size_t>(merged, "epochs", cfg.train.epochs);
    cfg.train.batch_size = get_as<std::size_t>(merged, "batch-size", cfg.train.batch_size);
    cfg.train.optim.base_lr = get_as<double>(merged, "lr", cfg.train.optim.base_lr);
    cfg.train.optim.weight_decay = get_as<double>(merged, "weight-decay", cfg.train.optim.weight_decay);
    cfg.train.coupling = parse_coupling(get_as<std::string>(merged, "coupling", "coupled"));
    cfg.train.seed = cfg.seed;
    cfg.net.hidden = get_as<std::vector<std::size_t>>(merged, "hidden", cfg.net.hidden);
    cfg.net.time_embed_dim = get_as<std::size_t>(merged, "time-embed", cfg.net.time_embed_dim);

    cfg.solver.h = get_as<double>(merged, "h", cfg.solver.h);
    cfg.solver.max_steps = get_as<std::size_t>(merged, "max-m", cfg.solver.max_steps);
    cfg.solver.workers = get_as<std::size_t>(merged, "workers", cfg.solver.workers);
    if (!(cfg.solver.h > 0.0 && cfg.solver.h <= 1.0)) throw ArgError("--h must lie in (0, 1]");
    cfg.solver.steps = get_as<std::size_t>(merged, "m", default_steps(cfg.solver.h));
    if (merged.contains("m-from")) cfg.steps_from = get_as<std::string>(merged, "m-from", "");
    cfg.baseline = get_as<bool>(merged, "baseline", false);

    cfg.data = get_as<std::string>(merged, "data", "");
    cfg.checkpoint = get_as<std::string>(merged, "checkpoint", "");
    cfg.metrics = get_as<std::string>(merged, "metrics", "metrics.json");
    cfg.summary = get_as<std::string>(merged, "summary", "sweep.json");
    if (merged.contains("predictions")) cfg.predictions = get_as<std::string>(merged, "predictions", "");

    switch (cmd) {
        case Command::gen: cfg.out = get_as<std::string>(merged, "out", "data"); break;
        case Command::train: cfg.out = get_as<std::string>(merged, "out", "model.json"); break;
        case Command::sweep: cfg.out = get_as<std::string>(merged, "out", "sweep.csv"); break;
        case Command::eval: break;
    }
    const auto default_log = cfg.out.parent_path() / (cfg.out.stem().string() + "_loss.jsonl");
    cfg.log = get_as<std::string>(merged, "log", default_log.string());

    switch (cmd) {
        case Command::gen: validate(cfg.synth); break;
        case Command::train:
            validate(cfg.train);
            require_input(cfg.data, "data");
            break;
        case Command::eval:
        case Command::sweep:
            require_input(cfg.data, "data");
            require_input(cfg.checkpoint, "checkpoint");
            if (cfg.steps_from) require_input(*cfg.steps_from, "m-from");
            break;
    }
    return cfg;
}

Dataset load_input(const std::filesystem::path& path, Split split) {
    return load_features(path, format_for_path(path), split);
}

VelocityFieldParams load_params_for(const RunConfig& cfg, const Dataset& data) {
    const auto ck = load_checkpoint(cfg.checkpoint);
    if (ck.params.dim() != data.table.dim()) {
        throw DimError("checkpoint dim " + std::to_string(ck.params.dim()) + " does not match data dim " +
                       std::to_string(data.table.dim()));
    }
    return ck.params;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void cmd_gen(const RunConfig& cfg, std::ostream& out) {
    const auto splits = generate_synthetic(cfg.synth);
    std::error_code ec;
    std::filesystem::create_directories(cfg.out, ec);
    if (ec) throw IoError("cannot create directory " + cfg.out.string() + ": " + ec.message());

    const std::string ext = cfg.format == FileFormat::csv ? ".csv" : ".fma";
    Json files = Json::object();
    Json counts = Json::object();
    for (const Dataset* ds : {&splits.train, &splits.val, &splits.test}) {
        const std::string name = std::string(to_string(ds->meta.split)) + ext;
        save_features(*ds, cfg.out / name, cfg.format);
        files[std::string(to_string(ds->meta.split))] = name;
        counts[std::string(to_string(ds->meta.split))] = ds->records.size();
        out << "wrote " << (cfg.out / name).string() << " (" << ds->records.size() << " records)\n";
    }

    Json sidecar;
    sidecar["seed"] = cfg.seed;
    sidecar["classes"] = cfg.synth.n_classes;
    sidecar["shots"] = cfg.synth.shots;
    sidecar["dim"] = cfg.synth.dim;
    sidecar["center-scale"] = cfg.synth.class_center_scale;
    sidecar["cluster-std"] = cfg.synth.cluster_std;
    sidecar["offset-std"] = cfg.synth.modality_offset_std;
    sidecar["format"] = cfg.format == FileFormat::csv ? "csv" : "binary";
    sidecar["files"] = files;
    sidecar["records"] = counts;
    write_text(cfg.out / "gen.json", sidecar.dump(2) + "\n");
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
    const Dataset data = load_input(cfg.data, Split::train);
    ensure_parent(cfg.out);
    ensure_parent(cfg.log);
    std::ofstream log(cfg.log, std::ios::trunc | std::ios::binary);
    if (!log) throw IoError("cannot open " + cfg.log.string() + " for writing");

    const auto result = train(data, cfg.net, cfg.train, [&](const EpochLog& e) {
        Json line;
        line["epoch"] = e.epoch;
        line["mean_loss"] = e.mean_loss;
        line["lr_now"] = e.lr_now;
        log << line.dump() << '\n';
    });
    if (!log) throw IoError("write failed: " + cfg.log.string());

    CheckpointInfo info;
    info.seed = cfg.seed;
    info.hyperparameters = {
        {"sigma", cfg.train.sigma},
        {"t_clamp", cfg.train.t_clamp},
        {"epochs", static_cast<double>(cfg.train.epochs)},
        {"batch_size", static_cast<double>(cfg.train.batch_size)},
        {"lr", cfg.train.optim.base_lr},
        {"weight_decay", cfg.train.optim.weight_decay},
        {"beta1", cfg.train.optim.beta1},
        {"beta2", cfg.train.optim.beta2},
        {"eps", cfg.train.optim.eps},
        {"random_coupling", cfg.train.coupling == CouplingMode::random ? 1.0 : 0.0},
    };
    save_checkpoint(cfg.out, result.params, info);
    out << "trained " << result.history.size() << " epochs on " << data.records.size()
        << " records; final loss " << format_double(result.history.back().mean_loss) << "\n"
        << "checkpoint " << cfg.out.string() << "\n";
}

void cmd_eval(const RunConfig& cfg, std::ostream& out) {
    const Dataset data = load_input(cfg.data, Split::test);
    const auto params = load_params_for(cfg, data);
    SolverConfig solver = cfg.solver;
    if (cfg.steps_from) {
        const Json summary = read_json(*cfg.steps_from);
        if (!summary.contains("M_star") || !summary["M_star"].is_number_unsigned()) {
            throw FormatError(cfg.steps_from->string() + " has no M_star");
        }
        solver.steps = summary["M_star"].get<std::size_t>();
    }
    validate(solver);
    const RunMetrics m = evaluate(data, params, solver);

    Json j;
    j["accuracy"] = m.accuracy;
    j["correct"] = m.correct;
    j["total"] = m.total;
    j["selected_M"] = m.selected_steps;
    j["h"] = solver.h;
    j["baseline_accuracy"] = m.per_step_accuracy.front();
    j["per_step_accuracy"] = to_json_array(m.per_step_accuracy);
    j["mean_dist_to_target"] = to_json_array(m.mean_dist_to_target);
    write_text(cfg.metrics, j.dump(2) + "\n");

    if (cfg.predictions) {
        std::string csv = "index,label,predicted\n";
        for (std::size_t r = 0; r < data.records.size(); ++r) {
            csv += std::to_string(r) + "," + std::to_string(data.records[r].label) + "," +
                   std::to_string(m.predictions[r]) + "\n";
        }
        write_text(*cfg.predictions, csv);
    }

    out << "accuracy " << format_double(m.accuracy) << " (" << m.correct << "/" << m.total << ") at M="
        << m.selected_steps << "\n";
    if (cfg.baseline) {
        out << "baseline accuracy " << format_double(m.per_step_accuracy.front()) << " at M=0\n";
    }
}

void cmd_sweep(const RunConfig& cfg, std::ostream& out) {
    const Dataset data = load_input(cfg.data, Split::val);
    const auto params = load_params_for(cfg, data);
    validate(SolverConfig{cfg.solver.h, 0, cfg.solver.max_steps, cfg.solver.workers});
    const auto sel = select_steps(params, data, cfg.solver.h, cfg.solver.max_steps, cfg.solver.workers);

    std::string csv = "M,accuracy\n";
    for (std::size_t m = 0; m < sel.accuracy.size(); ++m) {
        csv += std::to_string(m) + "," + format_double(sel.accuracy[m]) + "\n";
    }
    write_text(cfg.out, csv);

    Json j;
    j["M_star"] = sel.best_steps;
    j["acc_at_M_star"] = sel.accuracy[sel.best_steps];
    j["acc_at_0"] = sel.accuracy.front();
    j["h"] = cfg.solver.h;
    j["max_M"] = cfg.solver.max_steps;
    write_text(cfg.summary, j.dump(2) + "\n");

    out << "M* = " << sel.best_steps << " (validation accuracy " << format_double(sel.accuracy[sel.best_steps])
        << ", M=0: " << format_double(sel.accuracy.front()) << ")\n";
}

RunConfig parse_args(int argc, const char* const* argv) {
    CLI::App app{"Flow-matching feature alignment: generate data, train, sweep and evaluate", "fma"};
    app.set_help_flag("--help", "Print this help message and exit");
    app.require_subcommand(1);

    struct Sub {
        Command cmd;
        CLI::App* app;
        std::string config;
        std::map<std::string, std::string> raw;
        std::map<std::string, bool> flags;
    };
    std::vector<Sub> subs;
    subs.reserve(4);
    const std::pair<Command, const char*> described[] = {
        {Command::gen, "Generate synthetic train/val/test feature files"},
        {Command::train, "Train a velocity field on a feature file"},
        {Command::eval, "Transport and classify a feature file with a trained field"},
        {Command::sweep, "Accuracy for every step count on a validation file; select M*"},
    };
    for (const auto& [cmd, desc] : described) {
        subs.push_back(Sub{cmd, app.add_subcommand(command_name(cmd), desc), {}, {}, {}});
    }
    for (auto& s : subs) {
        s.app->add_option("--config", s.config, "JSON config file; flags override its values")->check(CLI::ExistingFile);
        for (const auto& k : keys()) {
            if (!applies(k, s.cmd)) continue;
            const std::string flag = "--" + std::string(k.name);
            if (k.kind == Kind::flag) {
                s.app->add_flag(flag, s.flags[k.name], k.help);
            } else {
                s.app->add_option(flag, s.raw[k.name], k.help);
            }
        }
    }

    app.parse(argc, argv);

    for (auto& s : subs) {
        if (!s.app->parsed()) continue;
        Json merged = Json::object();
        if (!s.config.empty()) {
            const Json file = read_json(s.config);
            if (!file.is_object()) throw ArgError("config file must hold a JSON object");
            for (const auto& [name, value] : file.items()) {
                const Key* key = find_key(name);
                if (!key) throw ArgError("unknown config key '" + name + "'");
                if (applies(*key, s.cmd)) merged[name] = value;
            }
        }
        for (const auto& k : keys()) {
            if (!applies(k, s.cmd)) continue;
            const std::string flag = "--" + std::string(k.name);
            if (s.app->count(flag) == 0) continue;
            merged[k.name] = k.kind == Kind::flag ? Json(s.flags[k.name]) : flag_value(k, s.raw[k.name]);
        }
        return build_config(s.cmd, merged);
    }
    throw ArgError("no subcommand given");
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
        const RunConfig cfg = parse_args(argc, argv);
        switch (cfg.command) {
            case Command::gen: cmd_gen(cfg, out); break;
            case Command::train: cmd_train(cfg, out); break;
            case Command::eval: cmd_eval(cfg, out); break;
            case Command::sweep: cmd_sweep(cfg, out); break;
        }
        return ExitCode::ok;
    } catch (const CLI::CallForHelp& e) {
        out << e.what();
        return ExitCode::ok;
    } catch (const CLI::ParseError& e) {
        err << "fma: " << e.what() << "\n";
        return e.get_exit_code() == 0 ? ExitCode::ok : ExitCode::usage_error;
    } catch (const ArgError& e) {
        err << "fma: " << e.what() << "\n";
        return ExitCode::usage_error;
    } catch (const TimeClampError& e) {
        err << "fma: " << e.what() << "\n";
        return ExitCode::usage_error;
    } catch (const NumericalError& e) {
        err << "fma: numerical failure: " << e.what() << "\n";
        return ExitCode::numerical_error;
    } catch (const Error& e) {
        err << "fma: " << e.what() << "\n";
        return ExitCode::data_error;
    } catch (const std::exception& e) {
        err << "fma: " << e.what() << "\n";
        return ExitCode::data_error;
    }
}

}  // namespace flowalign::cli
