// Command-line front end: run/validate experiment configs and emit builtin
// presets. Exit codes: 0 success, 2 config error, 3 internal error.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ptft/runner.hpp"

namespace {

ptft::ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ptft::ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ptft::ConfigError("config parse error in " + path + ": " + e.what());
    }
    try {
        return ptft::config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ptft::ConfigError("config field error in " + path + ": " + e.what());
    }
}

void print_summary(const ptft::RunSummary& s) {
    std::cout << "wrote " << s.csv_path << " (" << s.rows << " rows, " << s.unconverged
              << " flagged)\n";
    if (!s.compare_path.empty()) std::cout << "wrote " << s.compare_path << "\n";
    std::cout << "wrote " << s.meta_path << "\nconfig hash " << s.config_hash << "\n";
}

int do_run(const ptft::ExperimentConfig& cfg, const ptft::RunOptions& opts) {
    ptft::RunSummary s = ptft::run_experiment(cfg, opts);
    print_summary(s);
    return 0;
}

int do_validate(const ptft::ExperimentConfig& cfg) {
    ptft::ValidationReport rep = ptft::validate_config(cfg);
    std::cout << "config points: " << rep.config_points << "\n"
              << "alpha points:  " << rep.alpha_count << "\n"
              << "seeds:         " << rep.seed_count << "\n"
              << "output rows:   " << rep.cardinality << "\n";
    if (!rep.cost_note.empty()) std::cout << "estimated cost: " << rep.cost_note << "\n";
    if (!rep.ok) {
        for (const auto& e : rep.errors) std::cerr << "error: " << e << "\n";
        return 2;
    }
    std::cout << "config is valid\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pretrain/fine-tune generalization pipeline (replica, empirical, ridge)"};
    app.require_subcommand(1);

    std::string config_path, preset_name, out_path;
    int workers = 1, chunks = 1;
    std::uint64_t seed_offset = 0;
    bool emit_config = false;

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--workers", workers, "worker thread count");
        cmd->add_option("--out", out_path, "output path prefix (overrides config)");
        cmd->add_option("--seed-offset", seed_offset, "offset added to every seed");
        cmd->add_option("--chunks", chunks, "contiguous alpha-grid chunks per replica sweep");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "run an experiment config");
    run_cmd->add_option("config", config_path, "config file (JSON)")->required();
    add_run_flags(run_cmd);

    CLI::App* val_cmd = app.add_subcommand("validate", "validate a config without running");
    val_cmd->add_option("config", config_path, "config file (JSON)")->required();

    CLI::App* pre_cmd = app.add_subcommand("preset", "run (or emit) a builtin preset");
    pre_cmd->add_option("name", preset_name, "exp1|exp2|exp3|exp4|fig3|figA1")->required();
    pre_cmd->add_flag("--emit-config", emit_config, "print the preset config instead of running");
    add_run_flags(pre_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ptft::RunOptions opts{workers, chunks, seed_offset, out_path};
        if (run_cmd->parsed()) return do_run(load_config(config_path), opts);
        if (val_cmd->parsed()) return do_validate(load_config(config_path));
        if (pre_cmd->parsed()) {
            ptft::ExperimentConfig cfg = ptft::make_preset(preset_name);
            if (emit_config) {
                std::string text = ptft::config_to_json(cfg).dump(2) + "\n";
                if (out_path.empty()) {
                    std::cout << text;
                } else {
                    std::ofstream out(out_path);
                    if (!out) throw std::runtime_error("cannot open " + out_path);
                    out << text;
                    std::cout << "wrote " << out_path << "\n";
                }
                return 0;
            }
            return do_run(cfg, opts);
        }
    } catch (const ptft::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 3;
}
