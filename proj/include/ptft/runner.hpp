#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <thread>

#include "ptft/experiment.hpp"

// Sweep execution and machine-readable output. Workers are stateless and
// write into pre-sized result slots; a single writer emits rows in a fixed
// sort order so output files are deterministic given (config, seeds).

namespace ptft {

struct RunOptions {
    int workers = 1;
    int chunks = 1;
    std::uint64_t seed_offset = 0;
    std::string out_override;  // replaces config.output_path when nonempty
};

struct RunSummary {
    std::string csv_path;
    std::string meta_path;
    std::string compare_path;  // compare mode only
    std::size_t rows = 0;
    std::size_t unconverged = 0;
    std::string config_hash;
};

namespace detail {

inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct OutputRow {
    std::string kind;  // "replica" | "empirical"
    std::size_t point_idx = 0;
    CurveRecord rec;
    double wall_ms = 0.0;
};

inline void run_parallel(std::size_t n_units, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n_units <= 1) {
        for (std::size_t i = 0; i < n_units; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n_units) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    int n_threads = std::min<int>(workers, static_cast<int>(n_units));
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
}

inline CurveRecord flagged_record(double alpha, std::uint64_t seed) {
    CurveRecord r;
    r.alpha = alpha;
    r.mse = std::numeric_limits<double>::quiet_NaN();
    r.residual = std::numeric_limits<double>::quiet_NaN();
    r.converged = false;
    r.seed = seed;
    return r;
}

/// Contiguous chunk boundaries: chunk c covers [bounds[c], bounds[c+1]).
inline std::vector<std::size_t> chunk_bounds(std::size_t n, int chunks) {
    int k = std::max(1, std::min<int>(chunks, static_cast<int>(n)));
    std::vector<std::size_t> b(k + 1, 0);
    for (int c = 0; c < k; ++c) b[c + 1] = b[c] + n / k + (c < static_cast<int>(n % k) ? 1 : 0);
    return b;
}

inline void write_csv(const std::string& path, const ExperimentConfig& cfg,
                      const std::vector<ConfigPoint>& pts, std::vector<OutputRow>& rows,
                      const std::string& hash) {
    std::sort(rows.begin(), rows.end(), [](const OutputRow& a, const OutputRow& b) {
        if (a.point_idx != b.point_idx) return a.point_idx < b.point_idx;
        if (a.rec.alpha != b.rec.alpha) return a.rec.alpha < b.rec.alpha;
        if (a.kind != b.kind) return a.kind < b.kind;
        return a.rec.seed < b.rec.seed;
    });
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    out << "mode,config_hash,c_pt,lambda_pt,gamma_ft,rho_pt,rho_sh,rho_new,alpha,seed,"
           "mse,mse_se_db,residual,branch,branch_mismatch_db,converged,wall_ms\n";
    for (const auto& r : rows) {
        const ConfigPoint& p = pts[r.point_idx];
        out << r.kind << ',' << hash << ',' << fmt_double(p.init.c_pt) << ','
            << fmt_double(p.init.lambda_pt) << ',' << fmt_double(p.init.gamma_ft) << ','
            << fmt_double(p.task.rho_pt) << ',' << fmt_double(p.task.rho_ft_shared) << ','
            << fmt_double(p.task.rho_ft_new) << ',' << fmt_double(r.rec.alpha) << ','
            << r.rec.seed << ',' << fmt_double(r.rec.mse) << ',' << fmt_double(r.rec.mse_se_db)
            << ',' << fmt_double(r.rec.residual) << ',' << branch_name(r.rec.branch) << ','
            << fmt_double(r.rec.branch_mismatch_db) << ',' << (r.rec.converged ? 1 : 0) << ','
            << fmt_double(r.wall_ms) << '\n';
    }
    (void)cfg;
}

inline void write_compare_csv(const std::string& path, const std::vector<ConfigPoint>& pts,
                              const std::vector<OutputRow>& rows, const std::string& hash) {
    // Join replica and empirical rows on (config point, alpha).
    struct Cell {
        double replica_mse = std::numeric_limits<double>::quiet_NaN();
        double replica_se = 0.0;  // absolute scale
        std::vector<double> empirical;
    };
    std::map<std::pair<std::size_t, double>, Cell> cells;
    for (const auto& r : rows) {
        Cell& c = cells[{r.point_idx, r.rec.alpha}];
        if (r.kind == "replica") {
            c.replica_mse = r.rec.mse;
            c.replica_se = r.rec.mse_se_db * std::log(10.0) / 10.0 * r.rec.mse;
        } else {
            c.empirical.push_back(r.rec.mse);
        }
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    out << "config_hash,point,c_pt,lambda_pt,gamma_ft,rho_pt,rho_sh,rho_new,alpha,"
           "replica_mse,empirical_mean,empirical_se,combined_se,z,within_2se\n";
    for (const auto& [key, c] : cells) {
        const ConfigPoint& p = pts[key.first];
        double mean = std::numeric_limits<double>::quiet_NaN();
        double se = std::numeric_limits<double>::quiet_NaN();
        if (!c.empirical.empty()) {
            double s = 0.0;
            for (double v : c.empirical) s += v;
            mean = s / c.empirical.size();
            if (c.empirical.size() > 1) {
                double var = 0.0;
                for (double v : c.empirical) var += (v - mean) * (v - mean);
                var /= (c.empirical.size() - 1.0);
                se = std::sqrt(var / c.empirical.size());
            }
        }
        double comb = std::sqrt(se * se + c.replica_se * c.replica_se);
        double z = (mean - c.replica_mse) / comb;
        bool within = std::isfinite(z) && std::fabs(z) <= 2.0;
        out << hash << ',' << key.first << ',' << fmt_double(p.init.c_pt) << ','
            << fmt_double(p.init.lambda_pt) << ',' << fmt_double(p.init.gamma_ft) << ','
            << fmt_double(p.task.rho_pt) << ',' << fmt_double(p.task.rho_ft_shared) << ','
            << fmt_double(p.task.rho_ft_new) << ',' << fmt_double(key.second) << ','
            << fmt_double(c.replica_mse) << ',' << fmt_double(mean) << ',' << fmt_double(se) << ','
            << fmt_double(comb) << ',' << fmt_double(z) << ',' << (within ? 1 : 0) << '\n';
    }
}

}  // namespace detail

/// Execute a config end to end and write <out>.csv plus <out>.meta.json
/// (and <out>_compare.csv in compare mode, <out>_phase.csv / <out>_ridge.csv
/// for the analytic modes). Deterministic given (config, seeds, offset);
/// PTFT_DETERMINISTIC=1 forces a single worker.
inline RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& opts_in = {}) {
    ExperimentConfig cfg = config;
    RunOptions opts = opts_in;
    if (!opts.out_override.empty()) cfg.output_path = opts.out_override;

    ValidationReport rep = validate_config(cfg);
    if (!rep.ok) {
        std::string msg = "invalid config:";
        for (const auto& e : rep.errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }

    bool deterministic_env = false;
    if (const char* env = std::getenv("PTFT_DETERMINISTIC"))
        deterministic_env = std::string(env) == "1";
    if (deterministic_env) opts.workers = 1;

    std::vector<ConfigPoint> pts = expand_points(cfg);
    std::string hash = config_hash(cfg);

    namespace fs = std::filesystem;
    fs::path base(cfg.output_path);
    if (base.has_parent_path()) fs::create_directories(base.parent_path());

    RunSummary summary;
    summary.config_hash = hash;
    summary.csv_path = cfg.output_path + ".csv";
    summary.meta_path = cfg.output_path + ".meta.json";

    nlohmann::json meta;
    meta["config"] = config_to_json(cfg);
    meta["config_hash"] = hash;
    meta["seed_offset"] = opts.seed_offset;
    meta["deterministic_env"] = deterministic_env;

    std::vector<detail::OutputRow> rows;

    if (cfg.mode == RunMode::phase_portrait) {
        const PhaseSpec& ps = *cfg.phase;
        auto grid = phase_portrait(cfg.init, ps.row_axis, ps.row_values, ps.col_axis,
                                   ps.col_values, ps.beta_pt, ps.beta_ft);
        std::string path = cfg.output_path + "_phase.csv";
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open output file " + path);
        out << "config_hash,row_value,col_value,ell_order,pd,kappa,ok\n";
        for (std::size_t i = 0; i < ps.row_values.size(); ++i)
            for (std::size_t j = 0; j < ps.col_values.size(); ++j) {
                const PhaseCell& c = grid[i][j];
                out << hash << ',' << detail::fmt_double(ps.row_values[i]) << ','
                    << detail::fmt_double(ps.col_values[j]) << ','
                    << detail::fmt_double(c.ok ? c.metrics.ell_order : NAN) << ','
                    << detail::fmt_double(c.ok ? c.metrics.pd : NAN) << ','
                    << detail::fmt_double(c.ok ? c.metrics.kappa : NAN) << ',' << (c.ok ? 1 : 0)
                    << '\n';
            }
        summary.csv_path = path;
        summary.rows = ps.row_values.size() * ps.col_values.size();
        std::ofstream mt(summary.meta_path);
        mt << meta.dump(2) << '\n';
        return summary;
    }

    if (cfg.mode == RunMode::ridge_check) {
        const RidgeCheckSpec& rs = *cfg.ridge;
        RidgeFixedPoint fp = solve_t(rs.model);
        double predicted = ridge_risk(rs.model);
        std::string path = cfg.output_path + "_ridge.csv";
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open output file " + path);
        out << "config_hash,trial,n,m,predicted,empirical,t_tilde,t_tilde_prime\n";
        int m_dim = rs.n > 0 ? static_cast<int>(std::lround(rs.model.gamma_aspect * rs.n)) : 0;
        for (int trial = 0; trial < rs.trials; ++trial) {
            // Finite-size oracle: X ~ N(0,1/n), bhat = (X'X + lambda M)^{-1} X'y.
            rng::Stream sx(cfg.seeds.empty() ? 0 : cfg.seeds[0] + opts.seed_offset,
                           rng::Purpose::design, 1000 + trial);
            rng::Stream sb(cfg.seeds.empty() ? 0 : cfg.seeds[0] + opts.seed_offset,
                           rng::Purpose::teacher_slab, 1000 + trial);
            Eigen::MatrixXd x(rs.n, m_dim);
            double sd = 1.0 / std::sqrt(static_cast<double>(rs.n));
            for (int j = 0; j < m_dim; ++j)
                for (int i = 0; i < rs.n; ++i) x(i, j) = sd * sx.normal();
            Eigen::VectorXd mu(m_dim), beta(m_dim);
            for (int j = 0; j < m_dim; ++j) {
                double u = sb.u01(), acc = 0.0;
                const RidgeModel::Atom* pick = &rs.model.mu_law.back();
                for (const auto& a : rs.model.mu_law) {
                    acc += a.pi;
                    if (u < acc) {
                        pick = &a;
                        break;
                    }
                }
                mu[j] = pick->mu;
                beta[j] = std::sqrt(pick->q) * sb.normal();
            }
            Eigen::VectorXd y = x * beta;
            if (rs.model.sigma0_sq > 0.0) {
                double nsd = std::sqrt(rs.model.sigma0_sq);
                for (int i = 0; i < rs.n; ++i) y[i] += nsd * sb.normal();
            }
            Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m_dim, m_dim);
            gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
            gram += rs.model.lambda_reg * mu.asDiagonal().toDenseMatrix();
            Eigen::VectorXd bhat =
                gram.selfadjointView<Eigen::Lower>().llt().solve(x.transpose() * y);
            double emp = (bhat - beta).squaredNorm() / m_dim;
            out << hash << ',' << trial << ',' << rs.n << ',' << m_dim << ','
                << detail::fmt_double(predicted) << ',' << detail::fmt_double(emp) << ','
                << detail::fmt_double(fp.t_tilde) << ',' << detail::fmt_double(fp.t_tilde_prime)
                << '\n';
            ++summary.rows;
        }
        if (rs.trials == 0) {
            out << hash << ",-1," << rs.n << ',' << m_dim << ',' << detail::fmt_double(predicted)
                << ",nan," << detail::fmt_double(fp.t_tilde) << ','
                << detail::fmt_double(fp.t_tilde_prime) << '\n';
            summary.rows = 1;
        }
        summary.csv_path = path;
        std::ofstream mt(summary.meta_path);
        mt << meta.dump(2) << '\n';
        return summary;
    }

    // Curve modes: replica-curve, empirical-curve, compare.
    std::vector<double> alphas = cfg.alpha_grid.values();
    bool want_replica = cfg.mode != RunMode::empirical_curve;
    bool want_empirical = cfg.mode != RunMode::replica_curve;
    std::uint64_t replica_seed = cfg.seeds[0] + opts.seed_offset;

    auto bounds = detail::chunk_bounds(alphas.size(), opts.chunks);
    std::size_t n_chunks = bounds.size() - 1;
    meta["chunk_boundaries"] = bounds;

    struct ReplicaUnit {
        std::size_t point_idx, chunk;
    };
    struct EmpiricalUnit {
        std::size_t point_idx, alpha_idx;
        std::uint64_t seed;
    };
    std::vector<ReplicaUnit> runits;
    std::vector<EmpiricalUnit> eunits;
    if (want_replica)
        for (std::size_t p = 0; p < pts.size(); ++p)
            for (std::size_t c = 0; c < n_chunks; ++c) runits.push_back({p, c});
    if (want_empirical)
        for (std::size_t p = 0; p < pts.size(); ++p)
            for (std::size_t a = 0; a < alphas.size(); ++a)
                for (std::uint64_t s : cfg.seeds) eunits.push_back({p, a, s + opts.seed_offset});

    std::vector<std::vector<detail::OutputRow>> replica_rows(runits.size());
    std::vector<detail::OutputRow> empirical_rows(eunits.size());

    detail::run_parallel(runits.size(), opts.workers, [&](std::size_t u) {
        const ReplicaUnit& unit = runits[u];
        const ConfigPoint& pt = pts[unit.point_idx];
        std::vector<double> sub(alphas.begin() + bounds[unit.chunk],
                                alphas.begin() + bounds[unit.chunk + 1]);
        auto t0 = std::chrono::steady_clock::now();
        std::vector<CurveRecord> recs;
        if (pt.degenerate) {
            for (double a : sub) recs.push_back(detail::flagged_record(a, replica_seed));
        } else {
            Mixture mix = cfg.protocol == Protocol::single_task
                              ? single_task_mixture(pt.init, pt.task.rho_pt)
                              : mixture_from_experiment(pt.init, pt.task);
            recs = solve_curve(sub, mix, pt.task.sigma0_sq, cfg.solver, replica_seed,
                               bounds[unit.chunk]);
        }
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
        for (auto& r : recs)
            replica_rows[u].push_back({"replica", unit.point_idx, r, ms});
    });

    detail::run_parallel(eunits.size(), opts.workers, [&](std::size_t u) {
        const EmpiricalUnit& unit = eunits[u];
        const ConfigPoint& pt = pts[unit.point_idx];
        auto t0 = std::chrono::steady_clock::now();
        CurveRecord rec;
        if (pt.degenerate) {
            rec = detail::flagged_record(alphas[unit.alpha_idx], unit.seed);
        } else {
            try {
                rec = cfg.protocol == Protocol::single_task
                          ? run_single_task(pt.init, pt.task.rho_pt, pt.task.sigma0_sq, cfg.d,
                                            alphas[unit.alpha_idx], cfg.train, unit.seed)
                          : run_ptft(pt.init, pt.task, cfg.d, alphas[unit.alpha_idx], cfg.train,
                                     unit.seed);
            } catch (const DivergenceError&) {
                rec = detail::flagged_record(alphas[unit.alpha_idx], unit.seed);
            }
        }
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
        empirical_rows[u] = {"empirical", unit.point_idx, rec, ms};
    });

    for (auto& chunk : replica_rows)
        for (auto& r : chunk) rows.push_back(std::move(r));
    for (auto& r : empirical_rows)
        if (want_empirical) rows.push_back(std::move(r));

    for (const auto& r : rows)
        if (!r.rec.converged) ++summary.unconverged;
    summary.rows = rows.size();

    detail::write_csv(summary.csv_path, cfg, pts, rows, hash);

    if (cfg.mode == RunMode::compare) {
        summary.compare_path = cfg.output_path + "_compare.csv";
        detail::write_compare_csv(summary.compare_path, pts, rows, hash);
    }

    nlohmann::json jpts = nlohmann::json::array();
    for (std::size_t i = 0; i < pts.size(); ++i)
        jpts.push_back({{"index", i},
                        {"label", pts[i].label},
                        {"init", cfgjson::init_to_json(pts[i].init)},
                        {"task", cfgjson::task_to_json(pts[i].task)},
                        {"degenerate", pts[i].degenerate}});
    meta["points"] = jpts;
    meta["rows"] = summary.rows;
    meta["unconverged"] = summary.unconverged;
    std::ofstream mt(summary.meta_path);
    if (!mt) throw std::runtime_error("cannot open output file " + summary.meta_path);
    mt << meta.dump(2) << '\n';
    return summary;
}

}  // namespace ptft
