#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptft/diagnet.hpp"
#include "ptft/penalty.hpp"
#include "ptft/replica.hpp"
#include "ptft/ridge.hpp"
#include "ptft/task.hpp"

// Experiment configuration: parsing, sweep expansion, validation, presets.
// A config is a single JSON document; every run embeds the fully resolved
// config and its content hash in the output metadata so any row can be
// reproduced from its recorded provenance.

namespace ptft {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RunMode { replica_curve, empirical_curve, phase_portrait, ridge_check, compare };
enum class Protocol { ptft, single_task };

inline const char* mode_name(RunMode m) {
    switch (m) {
        case RunMode::replica_curve: return "replica-curve";
        case RunMode::empirical_curve: return "empirical-curve";
        case RunMode::phase_portrait: return "phase-portrait";
        case RunMode::ridge_check: return "ridge-check";
        case RunMode::compare: return "compare";
    }
    return "?";
}

struct AlphaGridSpec {
    int count = 11;
    double min = 0.01;
    double max = 0.5;
    std::string spacing = "geometric";

    std::vector<double> values() const {
        if (count < 1) throw ConfigError("alpha_grid: count >= 1 required");
        if (!(min > 0.0) || !(max >= min)) throw ConfigError("alpha_grid: need 0 < min <= max");
        std::vector<double> v(count);
        if (count == 1) {
            v[0] = min;
            return v;
        }
        for (int i = 0; i < count; ++i) {
            double t = static_cast<double>(i) / (count - 1);
            if (spacing == "geometric")
                v[i] = min * std::pow(max / min, t);
            else if (spacing == "linear")
                v[i] = min + t * (max - min);
            else
                throw ConfigError("alpha_grid: spacing must be geometric or linear");
        }
        return v;
    }
};

struct PhaseSpec {
    InitAxis row_axis = InitAxis::c_pt;
    InitAxis col_axis = InitAxis::gamma_ft;
    std::vector<double> row_values;
    std::vector<double> col_values;
    double beta_pt = 0.0;
    double beta_ft = 1.0;
};

struct RidgeCheckSpec {
    RidgeModel model;
    int n = 0;       // finite-size oracle sample count (0 = analytic only)
    int trials = 0;
};

/// One fully resolved (init, task) pair produced by sweep expansion.
struct ConfigPoint {
    InitParams init;
    TaskSpec task;
    std::string label;
    bool degenerate = false;  // k_law would reject (lambda_pt = -1, gamma_ft = 0)
};

struct Sweeps {
    std::vector<double> c_pt;
    std::vector<double> lambda_tilde_pt;  // unnormalized; divided by baseline c_pt
    std::vector<double> gamma_ft;
    std::vector<double> omega;
    std::vector<double> rho_ft;
    std::vector<double> rho_ft_new;
    std::vector<double> rho_ft_shared;
    std::vector<double> rho_pt;  // single-task sparsity sweep

    bool empty() const {
        return c_pt.empty() && lambda_tilde_pt.empty() && gamma_ft.empty() && omega.empty() &&
               rho_ft.empty() && rho_ft_new.empty() && rho_ft_shared.empty() && rho_pt.empty();
    }
};

struct ExperimentConfig {
    RunMode mode = RunMode::replica_curve;
    Protocol protocol = Protocol::ptft;
    InitParams init;
    TaskSpec task;
    Sweeps sweeps;
    std::vector<InitParams> init_list;  // explicit grids; exclusive with sweeps
    std::vector<TaskSpec> task_list;
    AlphaGridSpec alpha_grid;
    SolverConfig solver;
    TrainConfig train;
    int d = 2000;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::string output_path = "ptft_out";
    std::optional<PhaseSpec> phase;
    std::optional<RidgeCheckSpec> ridge;
};

// ---------------------------------------------------------------------------
// JSON <-> config

namespace cfgjson {

using nlohmann::json;

inline double num(const json& j, const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

inline InitParams parse_init(const json& j) {
    InitParams p;
    p.c_pt = num(j, "c_pt", p.c_pt);
    p.gamma_ft = num(j, "gamma_ft", p.gamma_ft);
    if (j.contains("lambda_pt") && j.contains("lambda_tilde_pt"))
        throw ConfigError("init: give lambda_pt or lambda_tilde_pt, not both");
    if (j.contains("lambda_tilde_pt"))
        p.lambda_pt = j.at("lambda_tilde_pt").get<double>() / p.c_pt;
    else
        p.lambda_pt = num(j, "lambda_pt", p.lambda_pt);
    return p;
}

inline TaskSpec parse_task(const json& j, Protocol protocol) {
    TaskSpec t;
    t.rho_pt = num(j, "rho_pt", t.rho_pt);
    t.sigma0_sq = num(j, "sigma0_sq", t.sigma0_sq);
    t.a_pt = num(j, "a_pt", t.a_pt);
    bool shorthand = j.contains("omega") || j.contains("rho_ft");
    bool direct = j.contains("rho_ft_shared") || j.contains("rho_ft_new");
    if (shorthand && direct)
        throw ConfigError("task: use either (omega, rho_ft) or (rho_ft_shared, rho_ft_new)");
    if (shorthand) {
        double rho_ft = num(j, "rho_ft", 0.1);
        double omega = num(j, "omega", 0.5);
        if (!(omega >= 0.0 && omega <= 1.0)) throw ConfigError("task: omega must be in [0,1]");
        t.rho_ft_shared = omega * rho_ft;
        t.rho_ft_new = (1.0 - omega) * rho_ft;
    } else if (direct) {
        t.rho_ft_shared = num(j, "rho_ft_shared", 0.0);
        t.rho_ft_new = num(j, "rho_ft_new", 0.0);
    } else if (protocol == Protocol::single_task) {
        t.rho_ft_shared = 0.0;
        t.rho_ft_new = 0.0;
    }
    return t;
}

inline json init_to_json(const InitParams& p) {
    return {{"c_pt", p.c_pt}, {"lambda_pt", p.lambda_pt}, {"gamma_ft", p.gamma_ft}};
}

inline json task_to_json(const TaskSpec& t) {
    return {{"rho_pt", t.rho_pt},
            {"rho_ft_shared", t.rho_ft_shared},
            {"rho_ft_new", t.rho_ft_new},
            {"sigma0_sq", t.sigma0_sq},
            {"a_pt", t.a_pt}};
}

}  // namespace cfgjson

inline ExperimentConfig config_from_json(const nlohmann::json& j);
inline nlohmann::json config_to_json(const ExperimentConfig& cfg);

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    using nlohmann::json;
    ExperimentConfig cfg;

    std::string mode = j.value("mode", "replica-curve");
    if (mode == "replica-curve") cfg.mode = RunMode::replica_curve;
    else if (mode == "empirical-curve") cfg.mode = RunMode::empirical_curve;
    else if (mode == "phase-portrait") cfg.mode = RunMode::phase_portrait;
    else if (mode == "ridge-check") cfg.mode = RunMode::ridge_check;
    else if (mode == "compare") cfg.mode = RunMode::compare;
    else throw ConfigError("unknown mode: " + mode);

    std::string protocol = j.value("protocol", "ptft");
    if (protocol == "ptft") cfg.protocol = Protocol::ptft;
    else if (protocol == "single-task") cfg.protocol = Protocol::single_task;
    else throw ConfigError("unknown protocol: " + protocol);

    if (j.contains("init")) cfg.init = cfgjson::parse_init(j.at("init"));
    if (j.contains("task")) cfg.task = cfgjson::parse_task(j.at("task"), cfg.protocol);

    if (j.contains("inits"))
        for (const auto& ji : j.at("inits")) cfg.init_list.push_back(cfgjson::parse_init(ji));
    if (j.contains("tasks"))
        for (const auto& jt : j.at("tasks")) cfg.task_list.push_back(cfgjson::parse_task(jt, cfg.protocol));

    if (j.contains("sweeps")) {
        const auto& s = j.at("sweeps");
        auto list = [&](const char* key) {
            return s.contains(key) ? s.at(key).get<std::vector<double>>() : std::vector<double>{};
        };
        cfg.sweeps.c_pt = list("c_pt");
        cfg.sweeps.lambda_tilde_pt = list("lambda_tilde_pt");
        cfg.sweeps.gamma_ft = list("gamma_ft");
        cfg.sweeps.omega = list("omega");
        cfg.sweeps.rho_ft = list("rho_ft");
        cfg.sweeps.rho_ft_new = list("rho_ft_new");
        cfg.sweeps.rho_ft_shared = list("rho_ft_shared");
        cfg.sweeps.rho_pt = list("rho_pt");
    }

    if (j.contains("alpha_grid")) {
        const auto& a = j.at("alpha_grid");
        cfg.alpha_grid.count = a.value("count", cfg.alpha_grid.count);
        cfg.alpha_grid.min = a.value("min", cfg.alpha_grid.min);
        cfg.alpha_grid.max = a.value("max", cfg.alpha_grid.max);
        cfg.alpha_grid.spacing = a.value("spacing", cfg.alpha_grid.spacing);
    }
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        cfg.solver.mc_samples = s.value("mc_samples", cfg.solver.mc_samples);
        cfg.solver.damping = s.value("damping", cfg.solver.damping);
        cfg.solver.tol = s.value("tol", cfg.solver.tol);
        cfg.solver.max_iter = s.value("max_iter", cfg.solver.max_iter);
        cfg.solver.lambda_ext = s.value("lambda_ext", cfg.solver.lambda_ext);
        cfg.solver.g_min = s.value("g_min", cfg.solver.g_min);
        cfg.solver.mse_floor = s.value("mse_floor", cfg.solver.mse_floor);
        cfg.solver.batch_count = s.value("batch_count", cfg.solver.batch_count);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
        cfg.train.loss_threshold = t.value("loss_threshold", cfg.train.loss_threshold);
        cfg.train.adaptive_steps = t.value("adaptive_steps", cfg.train.adaptive_steps);
        cfg.train.lr_growth = t.value("lr_growth", cfg.train.lr_growth);
        cfg.train.lr_max = t.value("lr_max", cfg.train.lr_max);
    }
    cfg.d = j.value("d", cfg.d);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.output_path = j.value("output_path", cfg.output_path);

    if (j.contains("phase")) {
        const auto& p = j.at("phase");
        PhaseSpec ps;
        auto axis = [](const std::string& s) {
            if (s == "c_pt") return InitAxis::c_pt;
            if (s == "lambda_pt") return InitAxis::lambda_pt;
            if (s == "gamma_ft") return InitAxis::gamma_ft;
            throw ConfigError("phase: unknown axis " + s);
        };
        ps.row_axis = axis(p.value("row_axis", std::string("c_pt")));
        ps.col_axis = axis(p.value("col_axis", std::string("gamma_ft")));
        ps.row_values = p.at("row_values").get<std::vector<double>>();
        ps.col_values = p.at("col_values").get<std::vector<double>>();
        ps.beta_pt = p.value("beta_pt", 0.0);
        ps.beta_ft = p.value("beta_ft", 1.0);
        cfg.phase = ps;
    }
    if (j.contains("ridge")) {
        const auto& r = j.at("ridge");
        RidgeCheckSpec rs;
        for (const auto& a : r.at("atoms"))
            rs.model.mu_law.push_back({a.at("pi").get<double>(), a.at("mu").get<double>(),
                                       a.value("q", 1.0)});
        rs.model.gamma_aspect = r.value("gamma_aspect", 0.5);
        rs.model.lambda_reg = r.value("lambda", 1.0);
        rs.model.sigma0_sq = r.value("sigma0_sq", 0.0);
        rs.n = r.value("n", 0);
        rs.trials = r.value("trials", 0);
        cfg.ridge = rs;
    }
    return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    using nlohmann::json;
    json j;
    j["mode"] = mode_name(cfg.mode);
    j["protocol"] = cfg.protocol == Protocol::ptft ? "ptft" : "single-task";
    j["init"] = cfgjson::init_to_json(cfg.init);
    j["task"] = cfgjson::task_to_json(cfg.task);
    if (!cfg.init_list.empty()) {
        j["inits"] = json::array();
        for (const auto& p : cfg.init_list) j["inits"].push_back(cfgjson::init_to_json(p));
    }
    if (!cfg.task_list.empty()) {
        j["tasks"] = json::array();
        for (const auto& t : cfg.task_list) j["tasks"].push_back(cfgjson::task_to_json(t));
    }
    json sweeps;
    auto put = [&](const char* key, const std::vector<double>& v) {
        if (!v.empty()) sweeps[key] = v;
    };
    put("c_pt", cfg.sweeps.c_pt);
    put("lambda_tilde_pt", cfg.sweeps.lambda_tilde_pt);
    put("gamma_ft", cfg.sweeps.gamma_ft);
    put("omega", cfg.sweeps.omega);
    put("rho_ft", cfg.sweeps.rho_ft);
    put("rho_ft_new", cfg.sweeps.rho_ft_new);
    put("rho_ft_shared", cfg.sweeps.rho_ft_shared);
    put("rho_pt", cfg.sweeps.rho_pt);
    if (!sweeps.empty()) j["sweeps"] = sweeps;
    j["alpha_grid"] = {{"count", cfg.alpha_grid.count},
                       {"min", cfg.alpha_grid.min},
                       {"max", cfg.alpha_grid.max},
                       {"spacing", cfg.alpha_grid.spacing}};
    j["solver"] = {{"mc_samples", cfg.solver.mc_samples}, {"damping", cfg.solver.damping},
                   {"tol", cfg.solver.tol},               {"max_iter", cfg.solver.max_iter},
                   {"lambda_ext", cfg.solver.lambda_ext}, {"g_min", cfg.solver.g_min},
                   {"mse_floor", cfg.solver.mse_floor},   {"batch_count", cfg.solver.batch_count}};
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"max_epochs", cfg.train.max_epochs},
                  {"loss_threshold", cfg.train.loss_threshold},
                  {"adaptive_steps", cfg.train.adaptive_steps},
                  {"lr_growth", cfg.train.lr_growth},
                  {"lr_max", cfg.train.lr_max}};
    j["d"] = cfg.d;
    j["seeds"] = cfg.seeds;
    j["output_path"] = cfg.output_path;
    if (cfg.phase) {
        auto axis = [](InitAxis a) {
            switch (a) {
                case InitAxis::c_pt: return "c_pt";
                case InitAxis::lambda_pt: return "lambda_pt";
                case InitAxis::gamma_ft: return "gamma_ft";
            }
            return "?";
        };
        j["phase"] = {{"row_axis", axis(cfg.phase->row_axis)},
                      {"col_axis", axis(cfg.phase->col_axis)},
                      {"row_values", cfg.phase->row_values},
                      {"col_values", cfg.phase->col_values},
                      {"beta_pt", cfg.phase->beta_pt},
                      {"beta_ft", cfg.phase->beta_ft}};
    }
    if (cfg.ridge) {
        nlohmann::json atoms = json::array();
        for (const auto& a : cfg.ridge->model.mu_law)
            atoms.push_back({{"pi", a.pi}, {"mu", a.mu}, {"q", a.q}});
        j["ridge"] = {{"atoms", atoms},
                      {"gamma_aspect", cfg.ridge->model.gamma_aspect},
                      {"lambda", cfg.ridge->model.lambda_reg},
                      {"sigma0_sq", cfg.ridge->model.sigma0_sq},
                      {"n", cfg.ridge->n},
                      {"trials", cfg.ridge->trials}};
    }
    return j;
}

/// FNV-1a over the canonical (sorted-key) dump of the resolved config.
/// The output destination is not part of the scientific provenance.
inline std::string config_hash(const ExperimentConfig& cfg) {
    nlohmann::json j = config_to_json(cfg);
    j.erase("output_path");
    std::string dump = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Sweep expansion and validation

namespace detail {

inline bool is_degenerate(const InitParams& p) {
    return p.c_pt * (1.0 + p.lambda_pt) == 0.0 && p.gamma_ft == 0.0;
}

inline void task_checks(const TaskSpec& t, Protocol protocol, std::vector<std::string>& errs) {
    try {
        if (protocol == Protocol::single_task) {
            if (!(t.rho_pt > 0.0 && t.rho_pt <= 1.0))
                errs.push_back("task: need 0 < rho_pt <= 1");
            if (!(t.sigma0_sq >= 0.0)) errs.push_back("task: need sigma0_sq >= 0");
        } else {
            t.validate();
        }
    } catch (const std::exception& e) {
        errs.push_back(e.what());
    }
}

}  // namespace detail

/// Expand baseline + one-dimensional sweeps (or the explicit init/task lists)
/// into concrete config points. Order is deterministic: baseline first, then
/// sweeps in declaration order.
inline std::vector<ConfigPoint> expand_points(const ExperimentConfig& cfg) {
    std::vector<ConfigPoint> pts;
    auto push = [&](InitParams init, TaskSpec task, std::string label) {
        ConfigPoint p{init, task, std::move(label), detail::is_degenerate(init)};
        pts.push_back(std::move(p));
    };

    if (!cfg.init_list.empty() || !cfg.task_list.empty()) {
        const auto& inits = cfg.init_list.empty() ? std::vector<InitParams>{cfg.init} : cfg.init_list;
        const auto& tasks = cfg.task_list.empty() ? std::vector<TaskSpec>{cfg.task} : cfg.task_list;
        for (std::size_t ti = 0; ti < tasks.size(); ++ti)
            for (std::size_t ii = 0; ii < inits.size(); ++ii)
                push(inits[ii], tasks[ti],
                     "task" + std::to_string(ti) + "_init" + std::to_string(ii));
        return pts;
    }

    push(cfg.init, cfg.task, "baseline");
    for (double v : cfg.sweeps.c_pt) {
        InitParams p = cfg.init;
        p.c_pt = v;
        push(p, cfg.task, "c_pt=" + std::to_string(v));
    }
    for (double lt : cfg.sweeps.lambda_tilde_pt) {
        InitParams p = cfg.init;
        p.lambda_pt = lt / cfg.init.c_pt;
        push(p, cfg.task, "lambda_tilde=" + std::to_string(lt));
    }
    for (double v : cfg.sweeps.gamma_ft) {
        InitParams p = cfg.init;
        p.gamma_ft = v;
        push(p, cfg.task, "gamma_ft=" + std::to_string(v));
    }
    for (double w : cfg.sweeps.omega) {
        TaskSpec t = cfg.task;
        double rho_ft = cfg.task.rho_ft();
        t.rho_ft_shared = w * rho_ft;
        t.rho_ft_new = (1.0 - w) * rho_ft;
        push(cfg.init, t, "omega=" + std::to_string(w));
    }
    for (double rf : cfg.sweeps.rho_ft) {
        TaskSpec t = cfg.task;
        double w = cfg.task.omega();
        t.rho_ft_shared = w * rf;
        t.rho_ft_new = (1.0 - w) * rf;
        push(cfg.init, t, "rho_ft=" + std::to_string(rf));
    }
    for (double v : cfg.sweeps.rho_ft_new) {
        TaskSpec t = cfg.task;
        t.rho_ft_new = v;
        push(cfg.init, t, "rho_ft_new=" + std::to_string(v));
    }
    for (double v : cfg.sweeps.rho_ft_shared) {
        TaskSpec t = cfg.task;
        t.rho_ft_shared = v;
        push(cfg.init, t, "rho_ft_shared=" + std::to_string(v));
    }
    for (double v : cfg.sweeps.rho_pt) {
        TaskSpec t = cfg.task;
        t.rho_pt = v;
        push(cfg.init, t, "rho_pt=" + std::to_string(v));
    }
    return pts;
}

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> errors;
    std::size_t config_points = 0;
    std::size_t alpha_count = 0;
    std::size_t seed_count = 0;
    std::size_t cardinality = 0;  // expected output row count
    std::string cost_note;
};

inline ValidationReport validate_config(const ExperimentConfig& cfg) {
    ValidationReport rep;
    auto err = [&](const std::string& m) {
        rep.ok = false;
        rep.errors.push_back(m);
    };

    bool curve_mode = cfg.mode == RunMode::replica_curve || cfg.mode == RunMode::empirical_curve ||
                      cfg.mode == RunMode::compare;

    if ((!cfg.init_list.empty() || !cfg.task_list.empty()) && !cfg.sweeps.empty())
        err("explicit inits/tasks lists and sweeps are mutually exclusive");

    // Sweep lists must exclude the baseline value (duplicate-run guard).
    auto check_excl = [&](const std::vector<double>& v, double baseline, const char* name) {
        for (double x : v)
            if (x == baseline) err(std::string("sweep ") + name + " contains the baseline value");
    };
    check_excl(cfg.sweeps.c_pt, cfg.init.c_pt, "c_pt");
    check_excl(cfg.sweeps.lambda_tilde_pt, cfg.init.lambda_tilde(), "lambda_tilde_pt");
    check_excl(cfg.sweeps.gamma_ft, cfg.init.gamma_ft, "gamma_ft");
    if (cfg.protocol == Protocol::ptft) {
        check_excl(cfg.sweeps.omega, cfg.task.omega(), "omega");
        check_excl(cfg.sweeps.rho_ft, cfg.task.rho_ft(), "rho_ft");
    }
    check_excl(cfg.sweeps.rho_ft_new, cfg.task.rho_ft_new, "rho_ft_new");
    check_excl(cfg.sweeps.rho_ft_shared, cfg.task.rho_ft_shared, "rho_ft_shared");
    check_excl(cfg.sweeps.rho_pt, cfg.task.rho_pt, "rho_pt");

    std::vector<ConfigPoint> pts;
    try {
        pts = expand_points(cfg);
        for (const auto& p : pts) {
            try {
                p.init.validate();
            } catch (const std::exception& e) {
                err(std::string(e.what()) + " (" + p.label + ")");
            }
            detail::task_checks(p.task, cfg.protocol, rep.errors);
        }
        rep.ok = rep.errors.empty();
    } catch (const std::exception& e) {
        err(e.what());
    }

    std::vector<double> alphas;
    if (curve_mode) {
        try {
            alphas = cfg.alpha_grid.values();
            if (alphas.empty()) err("alpha grid is empty");
            if (cfg.mode != RunMode::replica_curve)
                for (double a : alphas)
                    if (std::llround(a * cfg.d) < 1)
                        err("alpha " + std::to_string(a) + " rounds to an empty dataset at d=" +
                            std::to_string(cfg.d));
        } catch (const std::exception& e) {
            err(e.what());
        }
        if (cfg.seeds.empty()) err("seeds list is empty");
        if (cfg.d < 1) err("d >= 1 required");
    }
    if (cfg.mode == RunMode::phase_portrait) {
        if (!cfg.phase) err("phase-portrait mode requires a phase section");
        else if (cfg.phase->row_values.empty() || cfg.phase->col_values.empty())
            err("phase grid axes must be nonempty");
    }
    if (cfg.mode == RunMode::ridge_check) {
        if (!cfg.ridge) err("ridge-check mode requires a ridge section");
        else {
            try {
                cfg.ridge->model.validate();
            } catch (const std::exception& e) {
                err(e.what());
            }
        }
    }

    rep.config_points = pts.size();
    rep.alpha_count = alphas.size();
    rep.seed_count = cfg.seeds.size();
    bool replica_rows = cfg.mode == RunMode::replica_curve || cfg.mode == RunMode::compare;
    bool empirical_rows = cfg.mode == RunMode::empirical_curve || cfg.mode == RunMode::compare;
    rep.cardinality = (replica_rows ? pts.size() * alphas.size() : 0) +
                      (empirical_rows ? pts.size() * alphas.size() * cfg.seeds.size() : 0);

    if (curve_mode) {
        double prox_evals = replica_rows ? 2.0 * 150.0 * static_cast<double>(cfg.solver.mc_samples) *
                                               pts.size() * alphas.size()
                                         : 0.0;
        double epoch_flops = empirical_rows
                                 ? 4.0 * cfg.d * cfg.alpha_grid.max * cfg.d *
                                       static_cast<double>(cfg.train.max_epochs) * pts.size() *
                                       alphas.size() * cfg.seeds.size()
                                 : 0.0;
        char buf[160];
        std::snprintf(buf, sizeof buf, "~%.2g prox evals (replica), <= %.2g flops (empirical cap)",
                      prox_evals, epoch_flops);
        rep.cost_note = buf;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Presets

namespace detail {

inline ExperimentConfig preset_base() {
    ExperimentConfig cfg;
    cfg.mode = RunMode::compare;
    cfg.init = {1e-3, 0.0, 0.0};
    cfg.task = {0.1, 0.05, 0.05, 0.0, 1.0};
    cfg.alpha_grid = {11, 0.01, 0.5, "geometric"};
    cfg.d = 2000;
    cfg.seeds = {0, 1, 2, 3, 4};
    cfg.train.learning_rate = 0.5;
    cfg.train.max_epochs = 400000;
    cfg.train.loss_threshold = 1e-6;
    cfg.train.adaptive_steps = true;
    cfg.train.lr_growth = 1.02;
    cfg.train.lr_max = 8.0;
    return cfg;
}

}  // namespace detail

/// Builtin experiment presets. exp1-exp4 mirror the sweep tables of the
/// reference experiments (lambda values are unnormalized lambda_tilde and are
/// converted against the baseline c_pt); fig3/figA1 are the curve-comparison
/// grids.
inline ExperimentConfig make_preset(const std::string& name) {
    ExperimentConfig cfg = detail::preset_base();
    if (name == "exp1") {
        cfg.output_path = "out/exp1";
        cfg.sweeps.omega = {0.0, 1.0};
        cfg.sweeps.c_pt = {1e-6, 1.0};
        cfg.sweeps.lambda_tilde_pt = {-1e-3, -0.99e-3, 0.99e-3};
        cfg.sweeps.gamma_ft = {1.0, 10.0};
    } else if (name == "exp2") {
        cfg.output_path = "out/exp2";
        cfg.task = {0.1, 0.0, 0.1, 0.0, 1.0};
        cfg.sweeps.rho_ft_new = {0.9};
        cfg.sweeps.c_pt = {1e-6, 1.0};
        cfg.sweeps.lambda_tilde_pt = {-1e-3, -0.99e-3, 0.99e-3};
        cfg.sweeps.gamma_ft = {1.0, 10.0};
    } else if (name == "exp3") {
        cfg.output_path = "out/exp3";
        cfg.task = {0.1, 0.01, 0.0, 0.0, 1.0};  // baseline omega=1, rho_ft=0.01
        cfg.sweeps.omega = {0.0};
        cfg.sweeps.rho_ft = {0.04};
        cfg.sweeps.c_pt = {1e-6, 1.0};
        cfg.sweeps.lambda_tilde_pt = {-1e-3, -0.99e-3, 0.99e-3};
        cfg.sweeps.gamma_ft = {1.0, 10.0};
    } else if (name == "exp4") {
        cfg.output_path = "out/exp4";
        cfg.protocol = Protocol::single_task;
        cfg.task = {0.1, 0.0, 0.0, 0.0, 1.0};
        cfg.sweeps.rho_pt = {0.01, 0.04, 0.9};
        cfg.sweeps.c_pt = {1e-6, 1.0};
        cfg.sweeps.lambda_tilde_pt = {-1e-3, -0.99e-3, 0.99e-3};
    } else if (name == "fig3") {
        cfg.output_path = "out/fig3";
        cfg.task_list = {
            {0.1, 0.1, 0.0, 0.0, 1.0},  // full overlap
            {0.1, 0.0, 0.1, 0.0, 1.0},  // no overlap, matched sparsity
            {0.1, 0.0, 0.9, 0.0, 1.0},  // no overlap, dense
        };
    } else if (name == "figA1") {
        cfg.output_path = "out/figA1";
        cfg.mode = RunMode::replica_curve;
        // Regime representatives: I rich/independent, II lazy/dependent,
        // III lazy/independent, IV rich/dependent (the baseline).
        cfg.init_list = {
            {1e-3, -0.99, 0.0},  // I
            {1e-3, 0.99, 0.0},   // II
            {1e-3, 0.0, 10.0},   // III
            {1e-3, 0.0, 0.0},    // IV
        };
        cfg.task_list = {
            {0.1, 0.0, 0.1, 0.0, 1.0},   // no overlap
            {0.1, 0.1, 0.0, 0.0, 1.0},   // identical dimensions
            {0.1, 0.04, 0.0, 0.0, 1.0},  // subset of pretraining dimensions
        };
    } else {
        throw ConfigError("unknown preset: " + name +
                          " (expected exp1|exp2|exp3|exp4|fig3|figA1)");
    }
    return cfg;
}

}  // namespace ptft
