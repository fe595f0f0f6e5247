#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "commands.hpp"
#include "objtrans/calibration.hpp"
#include "objtrans/config.hpp"
#include "objtrans/errors.hpp"

namespace {

using objtrans::ConfigError;
using objtrans::ExitCode;
using objtrans::RunConfig;

struct Flags {
    std::string config;
    std::optional<std::string> seed, jobs, split, adapter_cmd, k, conf, u_th, weights, out;
    std::optional<std::string> dataset, mock, records, profile;
    std::vector<std::string> sets;
};

void add_common(CLI::App& cmd, Flags& f) {
    cmd.add_option("--config", f.config, "key = value config file");
    cmd.add_option("--seed", f.seed, "master seed");
    cmd.add_option("--jobs", f.jobs, "worker threads / adapter processes");
    cmd.add_option("--split", f.split, "dataset split");
    cmd.add_option("--adapter-cmd", f.adapter_cmd, "external detector command (objtrans/1 over stdio)");
    cmd.add_option("--k", f.k, "perturbations per detection");
    cmd.add_option("--conf", f.conf, "confidence threshold");
    cmd.add_option("--u-th", f.u_th, "uncertainty threshold");
    cmd.add_option("--weights", f.weights, "W_BBOX,W_CLASS");
    cmd.add_option("--out", f.out, "output directory");
    cmd.add_option("--dataset", f.dataset, "dataset root");
    cmd.add_option("--mock", f.mock, "in-process mock detector spec (JSON)");
    cmd.add_option("--records", f.records, "UQ records (uq.jsonl)");
    cmd.add_option("--profile", f.profile, "calibration profile (JSON)");
    cmd.add_option("--set", f.sets, "override any config key: key=value")->allow_extra_args(false);
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

RunConfig merge(const Flags& f, const std::string& command) {
    RunConfig cfg = f.config.empty() ? RunConfig() : RunConfig::from_file(f.config);
    // a calibration profile overrides the config file; flags override both
    if (f.profile) {
        cfg.set("profile", *f.profile);
    }
    if (auto profile = cfg.opt_str("profile")) {
        auto p = objtrans::load_profile(*profile);
        cfg.set("uq.w_bbox", format_real(p.weights.w_bbox));
        cfg.set("uq.w_class", format_real(p.weights.w_class));
        cfg.set("uq.u_threshold", format_real(p.u_threshold));
    }
    auto put = [&](const std::optional<std::string>& v, const std::string& key) {
        if (v) {
            cfg.set(key, *v);
        }
    };
    put(f.seed, "seed");
    put(f.jobs, "jobs");
    put(f.split, "split");
    put(f.adapter_cmd, "adapter.cmd");
    put(f.k, "uq.k");
    put(f.conf, "uq.conf");
    put(f.u_th, "uq.u_threshold");
    put(f.out, "out");
    put(f.dataset, "dataset");
    put(f.mock, command == "decompose" ? "decompose.mock" : "adapter.mock");
    if (f.records) {
        cfg.set(command == "calibrate" ? "calibrate.records" : "eval.records", *f.records);
    }
    if (f.weights) {
        auto comma = f.weights->find(',');
        if (comma == std::string::npos) {
            throw ConfigError("--weights expects W_BBOX,W_CLASS");
        }
        cfg.set("uq.w_bbox", f.weights->substr(0, comma));
        cfg.set("uq.w_class", f.weights->substr(comma + 1));
    }
    for (const auto& kv : f.sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        }
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Object-level HSV transforms: augmentation and test-time uncertainty for detectors"};
    app.require_subcommand(1);
    Flags flags;
    using Fn = int (*)(const RunConfig&, objtrans::cli::Streams);
    std::vector<std::pair<CLI::App*, Fn>> commands = {
        {app.add_subcommand("augment", "write HSV-augmented copies of a dataset"), objtrans::cli::cmd_augment},
        {app.add_subcommand("uq", "anchor pass plus K perturbed re-detections; writes uq.jsonl"), objtrans::cli::cmd_uq},
        {app.add_subcommand("eval", "match UQ records to ground truth; counts, PR curves, separation, histogram"),
         objtrans::cli::cmd_eval},
        {app.add_subcommand("calibrate", "grid search for weights and threshold; writes profile.json"),
         objtrans::cli::cmd_calibrate},
        {app.add_subcommand("decompose", "analytic vs Monte Carlo variance decomposition"),
         objtrans::cli::cmd_decompose},
        {app.add_subcommand("bench", "per-frame timing of the UQ pipeline on synthetic frames"),
         objtrans::cli::cmd_bench},
    };
    for (auto& [cmd, fn] : commands) {
        add_common(*cmd, flags);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ExitCode::config);
    }

    objtrans::cli::Streams io{std::cout, std::cerr};
    for (auto& [cmd, fn] : commands) {
        if (!cmd->parsed()) {
            continue;
        }
        try {
            auto cfg = merge(flags, cmd->get_name());
            return fn(cfg, io);
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return static_cast<int>(ExitCode::config);
        } catch (const objtrans::AdapterError& e) {
            std::cerr << "adapter error: " << e.what() << '\n';
            return static_cast<int>(ExitCode::adapter);
        } catch (const objtrans::DataError& e) {
            std::cerr << "data error: " << e.what() << '\n';
            return static_cast<int>(ExitCode::data);
        } catch (const objtrans::InfeasibleCalibration& e) {
            std::cerr << "calibration infeasible: " << e.what() << '\n';
            return static_cast<int>(ExitCode::data);
        } catch (const std::invalid_argument& e) {
            std::cerr << "invalid input: " << e.what() << '\n';
            return static_cast<int>(ExitCode::config);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }
    return 1;
}
