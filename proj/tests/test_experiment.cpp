#include <catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ptft/runner.hpp"

using namespace ptft;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// strip the trailing wall_ms column from every data line
std::string strip_wall(const std::string& csv) {
    std::stringstream in(csv), out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        auto pos = line.rfind(',');
        out << (first ? line : line.substr(0, pos)) << '\n';
        first = false;
    }
    return out.str();
}

ExperimentConfig tiny_replica_config(const std::string& out) {
    ExperimentConfig cfg;
    cfg.mode = RunMode::replica_curve;
    cfg.init = {1e-3, 0.0, 0.0};
    cfg.task = {0.1, 0.05, 0.05, 0.0, 1.0};
    cfg.sweeps.gamma_ft = {1.0};
    cfg.alpha_grid = {4, 0.1, 0.4, "geometric"};
    cfg.solver.mc_samples = 4000;
    cfg.seeds = {3};
    cfg.d = 100;
    cfg.output_path = out;
    return cfg;
}

}  // namespace

TEST_CASE("preset tables and cardinality") {
    ExperimentConfig exp1 = make_preset("exp1");
    auto pts = expand_points(exp1);
    CHECK(pts.size() == 10);  // baseline + 2 omega + 2 c + 3 lambda + 2 gamma

    ValidationReport rep = validate_config(exp1);
    CHECK(rep.ok);
    CHECK(rep.config_points == 10);
    CHECK(rep.alpha_count == 11);

    // lambda_tilde = -1e-3 at c = 1e-3 is the exact l1 limit: degenerate point
    int degenerate = 0;
    for (const auto& p : pts) degenerate += p.degenerate;
    CHECK(degenerate == 1);

    // conversion lambda = lambda_tilde / c_pt
    bool found = false;
    for (const auto& p : pts)
        if (p.init.lambda_pt == Catch::Approx(-0.99)) found = true;
    CHECK(found);

    CHECK(make_preset("exp2").sweeps.rho_ft_new == std::vector<double>{0.9});
    CHECK(make_preset("exp4").protocol == Protocol::single_task);
    CHECK(make_preset("fig3").task_list.size() == 3);
    CHECK(make_preset("figA1").init_list.size() == 4);
    CHECK(expand_points(make_preset("figA1")).size() == 12);
    CHECK_THROWS_AS(make_preset("nope"), ConfigError);
}

TEST_CASE("config json round trip and shorthand") {
    auto j = nlohmann::json::parse(R"({
        "mode": "compare",
        "init": {"c_pt": 1e-3, "lambda_tilde_pt": -0.99e-3, "gamma_ft": 0},
        "task": {"rho_pt": 0.1, "omega": 0.5, "rho_ft": 0.1},
        "alpha_grid": {"count": 3, "min": 0.1, "max": 0.4},
        "seeds": [1, 2],
        "d": 50
    })");
    ExperimentConfig cfg = config_from_json(j);
    CHECK(cfg.init.lambda_pt == Catch::Approx(-0.99));
    CHECK(cfg.task.rho_ft_shared == Catch::Approx(0.05));
    CHECK(cfg.task.rho_ft_new == Catch::Approx(0.05));

    nlohmann::json back = config_to_json(cfg);
    ExperimentConfig cfg2 = config_from_json(back);
    CHECK(config_hash(cfg) == config_hash(cfg2));
}

TEST_CASE("validation rejects bad configs with named invariants") {
    ExperimentConfig cfg = tiny_replica_config("test_tmp/bad");
    cfg.task.rho_ft_shared = 0.2;  // > rho_pt
    ValidationReport rep = validate_config(cfg);
    CHECK_FALSE(rep.ok);
    bool mentions = false;
    for (const auto& e : rep.errors)
        if (e.find("rho_ft_shared") != std::string::npos) mentions = true;
    CHECK(mentions);

    ExperimentConfig empty_grid = tiny_replica_config("test_tmp/bad2");
    empty_grid.alpha_grid.count = 0;
    CHECK_FALSE(validate_config(empty_grid).ok);

    ExperimentConfig dup = tiny_replica_config("test_tmp/bad3");
    dup.sweeps.gamma_ft = {0.0};  // baseline value in the sweep list
    CHECK_FALSE(validate_config(dup).ok);

    CHECK_THROWS_AS(run_experiment(dup), ConfigError);
}

TEST_CASE("replica run writes deterministic CSV with metadata") {
    fs::create_directories("test_tmp");
    ExperimentConfig cfg = tiny_replica_config("test_tmp/rep");
    RunSummary s = run_experiment(cfg);
    CHECK(s.rows == 2 * 4);  // 2 config points x 4 alphas

    std::string csv = slurp(s.csv_path);
    CHECK(csv.rfind("mode,config_hash,c_pt,lambda_pt,gamma_ft,rho_pt,rho_sh,rho_new,"
                    "alpha,seed,mse,mse_se_db,residual,branch,branch_mismatch_db,"
                    "converged,wall_ms",
                    0) == 0);

    auto meta = nlohmann::json::parse(slurp(s.meta_path));
    CHECK(meta["config_hash"] == s.config_hash);
    CHECK(meta["points"].size() == 2);

    // rerun reproduces everything except wall time
    RunSummary s2 = run_experiment(cfg);
    CHECK(strip_wall(slurp(s2.csv_path)) == strip_wall(csv));

    // workers do not change results
    RunOptions opts;
    opts.workers = 3;
    opts.out_override = "test_tmp/rep_w";
    RunSummary s3 = run_experiment(cfg, opts);
    std::string csv3 = slurp(s3.csv_path);
    CHECK(strip_wall(csv3) == strip_wall(csv));
}

TEST_CASE("chunked replica sweeps agree with the unchunked run") {
    fs::create_directories("test_tmp");
    ExperimentConfig cfg = tiny_replica_config("test_tmp/chunk1");
    cfg.sweeps.gamma_ft.clear();
    cfg.alpha_grid = {6, 0.08, 0.5, "geometric"};
    RunSummary s1 = run_experiment(cfg);

    RunOptions opts;
    opts.chunks = 3;
    opts.out_override = "test_tmp/chunk3";
    RunSummary s3 = run_experiment(cfg, opts);

    auto meta = nlohmann::json::parse(slurp(s3.meta_path));
    CHECK(meta["chunk_boundaries"].size() == 4);

    // parse mse and se columns per alpha from both CSVs
    auto parse = [](const std::string& path) {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        std::vector<std::array<double, 3>> rows;  // alpha, mse, se_db
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string tok;
            std::vector<std::string> cols;
            while (std::getline(ss, tok, ',')) cols.push_back(tok);
            rows.push_back({std::stod(cols[8]), std::stod(cols[10]), std::stod(cols[11])});
        }
        return rows;
    };
    auto a = parse(s1.csv_path), b = parse(s3.csv_path);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i][0] == b[i][0]);
        double se_a = a[i][2] * std::log(10.0) / 10.0 * a[i][1];
        double se_b = b[i][2] * std::log(10.0) / 10.0 * b[i][1];
        double tol = std::fmax(1e-6, 3.0 * std::sqrt(se_a * se_a + se_b * se_b));
        CHECK(std::fabs(a[i][1] - b[i][1]) <= tol);
    }
}

TEST_CASE("compare mode joins replica and empirical rows") {
    fs::create_directories("test_tmp");
    ExperimentConfig cfg;
    cfg.mode = RunMode::compare;
    cfg.init = {1e-3, 0.0, 0.0};
    cfg.task = {0.1, 0.05, 0.05, 0.0, 1.0};
    cfg.alpha_grid = {2, 0.3, 0.5, "linear"};
    cfg.solver.mc_samples = 4000;
    cfg.train.learning_rate = 0.5;
    cfg.train.adaptive_steps = true;
    cfg.train.lr_growth = 1.05;
    cfg.train.lr_max = 8.0;
    cfg.train.max_epochs = 60000;
    cfg.train.loss_threshold = 1e-8;
    cfg.d = 150;
    cfg.seeds = {0, 1, 2};
    cfg.output_path = "test_tmp/cmp";

    RunSummary s = run_experiment(cfg);
    CHECK(s.rows == 2 + 2 * 3);  // replica rows + empirical rows
    CHECK_FALSE(s.compare_path.empty());

    std::string cmp = slurp(s.compare_path);
    std::stringstream ss(cmp);
    std::string line;
    std::getline(ss, line);
    CHECK(line.rfind("config_hash,point,", 0) == 0);
    int data_rows = 0;
    while (std::getline(ss, line))
        if (!line.empty()) ++data_rows;
    CHECK(data_rows == 2);  // one joined row per (point, alpha)
}

TEST_CASE("degenerate sweep points are flagged, not fatal") {
    fs::create_directories("test_tmp");
    ExperimentConfig cfg = tiny_replica_config("test_tmp/degen");
    cfg.sweeps.gamma_ft.clear();
    cfg.sweeps.lambda_tilde_pt = {-1e-3};  // lambda = -1 with gamma = 0: k = 0
    RunSummary s = run_experiment(cfg);
    CHECK(s.rows == 8);
    CHECK(s.unconverged == 4);  // the degenerate point's rows are flagged
    std::string csv = slurp(s.csv_path);
    CHECK(csv.find("nan") != std::string::npos);
}

TEST_CASE("phase portrait and ridge check modes emit their own files") {
    fs::create_directories("test_tmp");
    ExperimentConfig phase;
    phase.mode = RunMode::phase_portrait;
    phase.init = {1e-3, 0.0, 0.0};
    PhaseSpec ps;
    ps.row_axis = InitAxis::c_pt;
    ps.col_axis = InitAxis::gamma_ft;
    ps.row_values = {1e-3, 1.0};
    ps.col_values = {0.0, 10.0};
    ps.beta_pt = 0.0;
    ps.beta_ft = 1.0;
    phase.phase = ps;
    phase.output_path = "test_tmp/phase";
    RunSummary sp = run_experiment(phase);
    CHECK(sp.rows == 4);
    CHECK(slurp(sp.csv_path).rfind("config_hash,row_value,col_value,ell_order,pd,kappa,ok", 0) == 0);

    ExperimentConfig ridge;
    ridge.mode = RunMode::ridge_check;
    RidgeCheckSpec rs;
    rs.model.mu_law = {{0.5, 1.0, 1.0}, {0.5, 10.0, 1.0}};
    rs.model.gamma_aspect = 0.5;
    rs.model.lambda_reg = 0.7;
    rs.model.sigma0_sq = 0.25;
    rs.n = 300;
    rs.trials = 3;
    ridge.ridge = rs;
    ridge.output_path = "test_tmp/ridge";
    RunSummary sr = run_experiment(ridge);
    CHECK(sr.rows == 3);
}

TEST_CASE("PTFT_DETERMINISTIC forces single-worker bit-stable output") {
    fs::create_directories("test_tmp");
    setenv("PTFT_DETERMINISTIC", "1", 1);
    ExperimentConfig cfg = tiny_replica_config("test_tmp/det1");
    RunSummary a = run_experiment(cfg);
    cfg.output_path = "test_tmp/det2";
    RunOptions opts;
    opts.workers = 4;  // overridden by the env var
    RunSummary b = run_experiment(cfg, opts);
    unsetenv("PTFT_DETERMINISTIC");
    CHECK(strip_wall(slurp(a.csv_path)) == strip_wall(slurp(b.csv_path)));
    auto meta = nlohmann::json::parse(slurp(b.meta_path));
    CHECK(meta["deterministic_env"] == true);
}
