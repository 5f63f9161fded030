#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ptft/penalty.hpp"
#include "ptft/prox.hpp"
#include "ptft/rng.hpp"
#include "ptft/task.hpp"

// Replica-symmetric fixed point of the decoupled estimation problem, solved
// by damped Monte-Carlo iteration with forward/backward alpha-continuation.
//
// Convention note (the paper states it two ways): the susceptibility entering
// the closure theta = (lambda_ext + chi)/alpha is chi = theta * E[d_y bhat].
// The iteration therefore runs on (theta0, g) with g = theta and
//   theta0_new = delta * (sigma0^2 + p_hat),
//   g_new      = delta * (lambda_ext + g * mean_dy),   delta = 1/alpha.
// This is the identification under which the pure-quadratic mixture
// reproduces the coordinate-weighted ridge deterministic equivalent exactly.

namespace ptft {

struct MixtureComponent {
    CoeffLaw beta_ft;     // law of the fine-tuning teacher coordinate
    PenaltyAtom penalty;  // penalty.pi carries the group weight
};
using Mixture = std::vector<MixtureComponent>;

struct SolverConfig {
    int mc_samples = 80000;
    double damping = 0.25;
    double tol = 1e-6;
    int max_iter = 900;
    double lambda_ext = 1e-6;
    double g_min = 1e-14;
    double mse_floor = 1e-12;
    int batch_count = 100;  // batches for batch-means standard errors
};

struct ReplicaState {
    double p = 0.0;       // predicted coefficient MSE
    double chi = 0.0;     // susceptibility, theta * E[d_y bhat]
    double theta = 0.0;   // effective regularization, (lambda_ext + chi)/alpha
    double theta0 = 0.0;  // effective noise, (sigma0^2 + p)/alpha
    double residual = 0.0;
};

enum class Branch { forward, backward, selected };

inline const char* branch_name(Branch b) {
    switch (b) {
        case Branch::forward: return "forward";
        case Branch::backward: return "backward";
        case Branch::selected: return "selected";
    }
    return "?";
}

struct CurveRecord {
    double alpha = 0.0;
    double mse = 0.0;
    double mse_se_db = 0.0;
    double residual = 0.0;
    Branch branch = Branch::selected;
    double branch_mismatch_db = 0.0;
    bool converged = false;
    std::uint64_t seed = 0;
};

struct MomentEstimate {
    double p_hat = 0.0;
    double mean_dy = 0.0;  // E[d_y bhat]; what the g-update consumes
    double chi_hat = 0.0;  // theta0 * mean_dy (display form of Eq. fp-chi)
    double p_se = 0.0;
    double dy_se = 0.0;
    double stein = 0.0;  // E[(bhat-beta) eta]/theta0, eta ~ N(0, theta0)
    double stein_se = 0.0;
};

namespace detail {

inline void validate_mixture(const Mixture& mix) {
    if (mix.empty()) throw std::domain_error("mixture must be nonempty");
    double total = 0.0;
    for (const auto& c : mix) {
        if (!(c.penalty.pi >= 0.0)) throw std::domain_error("mixture weights must be >= 0");
        total += c.penalty.pi;
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw std::domain_error("mixture weights must sum to 1");
}

/// Frozen Monte-Carlo sample for one alpha: common random numbers across all
/// fixed-point iterations make the damped map deterministic.
struct McSample {
    struct Group {
        PenaltyAtom penalty;
        CoeffLaw law;
        std::vector<double> beta;            // teacher draws (empty for quadratic atoms)
        std::vector<double> eta;             // standard normal draws
        std::vector<std::size_t> batch_end;  // prefix ends of batch slices
    };
    std::vector<Group> groups;
};

/// Stratified inverse-CDF draws with a random shift per (group, batch) cell
/// and randomized pairing of beta with eta (Latin-hypercube style). Unbiased,
/// batch means stay i.i.d., and the per-batch variance drops sharply.
inline McSample draw_mc_sample(const Mixture& mix, const SolverConfig& cfg, std::uint64_t seed,
                               std::uint64_t alpha_index) {
    validate_mixture(mix);
    McSample sample;
    sample.groups.reserve(mix.size());

    // Deterministic per-group allocation m_j = round(pi_j * m); the largest
    // group absorbs the rounding slack so the total is exactly m.
    std::vector<long> alloc(mix.size(), 0);
    long total = 0;
    std::size_t largest = 0;
    for (std::size_t j = 0; j < mix.size(); ++j) {
        if (mix[j].penalty.pi <= 0.0) continue;
        alloc[j] = std::lround(mix[j].penalty.pi * cfg.mc_samples);
        if (alloc[j] == 0) alloc[j] = 1;
        total += alloc[j];
        if (mix[j].penalty.pi > mix[largest].penalty.pi) largest = j;
    }
    alloc[largest] = std::max<long>(1, alloc[largest] + (cfg.mc_samples - total));

    for (std::size_t j = 0; j < mix.size(); ++j) {
        if (mix[j].penalty.pi <= 0.0) continue;
        McSample::Group g;
        g.penalty = mix[j].penalty;
        g.law = mix[j].beta_ft;
        if (g.penalty.kind == PenaltyAtom::Kind::quadratic) {
            sample.groups.push_back(std::move(g));
            continue;  // moments are exact; nothing to draw
        }
        long m_j = alloc[j];
        long n_batches = std::min<long>(cfg.batch_count, m_j);
        std::uint64_t sid = alpha_index * 64 + j;
        rng::Stream sb(seed, rng::Purpose::mc_beta, sid);
        rng::Stream se(seed, rng::Purpose::mc_eta, sid);
        rng::Stream sp(seed, rng::Purpose::mc_pair, sid);

        g.beta.reserve(m_j);
        g.eta.reserve(m_j);
        for (long b = 0; b < n_batches; ++b) {
            long n = m_j / n_batches + (b < m_j % n_batches ? 1 : 0);
            double shift_b = sb.u01();
            double shift_e = se.u01();
            std::size_t off = g.eta.size();
            for (long i = 0; i < n; ++i) {
                double ub = (static_cast<double>(i) + shift_b) / static_cast<double>(n);
                switch (g.law.kind) {
                    case CoeffLaw::Kind::zero: g.beta.push_back(0.0); break;
                    case CoeffLaw::Kind::spike:
                        g.beta.push_back(sp.u01() < 0.5 ? -g.law.scale : g.law.scale);
                        break;
                    case CoeffLaw::Kind::gaussian:
                        g.beta.push_back(std::sqrt(g.law.scale) * rng::norm_inv_cdf(ub));
                        break;
                }
            }
            // Antithetic +/- pairs over stratified half-normal magnitudes: the
            // eta marginal stays exactly N(0,1) and the odd-in-eta variance
            // component cancels within every cell.
            long half = (n + 1) / 2;
            for (long i = 0; i < half; ++i) {
                double ue = (static_cast<double>(i) + shift_e) / static_cast<double>(half);
                double mag = rng::norm_inv_cdf(0.5 + 0.5 * ue);
                g.eta.push_back(mag);
                if (static_cast<long>(g.eta.size() - off) < n) g.eta.push_back(-mag);
            }
            if (n % 2 == 1 && sp.u01() < 0.5) g.eta[g.eta.size() - 1] *= -1.0;
            // Fisher-Yates within the cell: random beta/eta pairing.
            for (long i = n - 1; i > 0; --i) {
                std::size_t r = off + sp.below(static_cast<std::uint64_t>(i + 1));
                std::swap(g.eta[off + i], g.eta[r]);
            }
            g.batch_end.push_back(g.eta.size());
        }
        sample.groups.push_back(std::move(g));
    }
    return sample;
}

struct Accum {
    double mean = 0.0;
    double se = 0.0;
};

/// Mean and batch-means SE of per-sample values laid out in batch slices.
inline Accum batch_stats(const std::vector<double>& batch_means, double grand_mean) {
    Accum a;
    a.mean = grand_mean;
    std::size_t nb = batch_means.size();
    if (nb >= 2) {
        double var = 0.0;
        for (double bm : batch_means) var += (bm - grand_mean) * (bm - grand_mean);
        var /= static_cast<double>(nb - 1);
        a.se = std::sqrt(var / static_cast<double>(nb));
    }
    return a;
}

inline MomentEstimate eval_moments(const McSample& sample, double theta0, double theta) {
    MomentEstimate out;
    double sqrt_t0 = std::sqrt(std::max(theta0, 0.0));
    double p_var = 0.0, dy_var = 0.0, st_var = 0.0;

    for (const auto& g : sample.groups) {
        double pi = g.penalty.pi;
        if (g.penalty.kind == PenaltyAtom::Kind::quadratic) {
            // Linear denoiser: all three moments in closed form, zero MC noise.
            double mu = g.penalty.param;
            double shrink = 1.0 / (1.0 + 2.0 * theta * mu);
            double var_b = g.law.variance();
            double e2 = (theta0 + 4.0 * theta * theta * mu * mu * var_b) * shrink * shrink;
            out.p_hat += pi * e2;
            out.mean_dy += pi * shrink;
            out.stein += pi * shrink;
            continue;
        }
        std::size_t m = g.eta.size();
        std::vector<double> bm_e2, bm_dy, bm_st;
        bm_e2.reserve(g.batch_end.size());
        bm_dy.reserve(g.batch_end.size());
        bm_st.reserve(g.batch_end.size());
        double sum_e2 = 0.0, sum_dy = 0.0, sum_st = 0.0;
        std::size_t begin = 0;
        for (std::size_t end : g.batch_end) {
            double be2 = 0.0, bdy = 0.0, bst = 0.0;
            for (std::size_t i = begin; i < end; ++i) {
                double y = g.beta[i] + sqrt_t0 * g.eta[i];
                ProxResult pr = prox(y, g.penalty, theta);
                double e = pr.beta_hat - g.beta[i];
                be2 += e * e;
                bdy += pr.dy;
                bst += e * g.eta[i];
            }
            double n = static_cast<double>(end - begin);
            bm_e2.push_back(be2 / n);
            bm_dy.push_back(bdy / n);
            bm_st.push_back(bst / n);
            sum_e2 += be2;
            sum_dy += bdy;
            sum_st += bst;
            begin = end;
        }
        double inv_m = 1.0 / static_cast<double>(m);
        Accum ae2 = batch_stats(bm_e2, sum_e2 * inv_m);
        Accum ady = batch_stats(bm_dy, sum_dy * inv_m);
        Accum ast = batch_stats(bm_st, sum_st * inv_m);
        out.p_hat += pi * ae2.mean;
        out.mean_dy += pi * ady.mean;
        p_var += pi * pi * ae2.se * ae2.se;
        dy_var += pi * pi * ady.se * ady.se;
        if (sqrt_t0 > 0.0) {
            out.stein += pi * ast.mean / sqrt_t0;
            st_var += pi * pi * ast.se * ast.se / theta0;
        }
    }
    out.chi_hat = theta0 * out.mean_dy;
    out.p_se = std::sqrt(p_var);
    out.dy_se = std::sqrt(dy_var);
    out.stein_se = std::sqrt(st_var);
    return out;
}

inline void cold_start(const Mixture& mix, double sigma0_sq, double delta,
                       const SolverConfig& cfg, double& theta0, double& theta) {
    double prior_var = 0.0, chi_scale = 0.0;
    for (const auto& c : mix) {
        prior_var += c.penalty.pi * c.beta_ft.variance();
        chi_scale += c.penalty.pi * (c.penalty.kind == PenaltyAtom::Kind::qk
                                         ? std::sqrt(c.penalty.param)
                                         : 0.5 / c.penalty.param);
    }
    theta0 = delta * (sigma0_sq + prior_var);
    theta = std::max(delta * (cfg.lambda_ext + chi_scale), cfg.g_min);
}

}  // namespace detail

/// Monte-Carlo moment estimates at a given state. Draws a fresh sample from
/// `seed`; used directly by diagnostics and tests. The fixed-point iteration
/// itself freezes one sample per alpha (see solve_alpha).
inline MomentEstimate mc_moments(const ReplicaState& state, const Mixture& mixture,
                                 const SolverConfig& cfg, std::uint64_t seed) {
    auto sample = detail::draw_mc_sample(mixture, cfg, seed, 0);
    return detail::eval_moments(sample, state.theta0, state.theta);
}

struct AlphaSolveResult {
    ReplicaState state;
    MomentEstimate moments;  // evaluated exactly at state.(theta0, theta)
    int iterations = 0;
    bool converged = false;
    bool finite = true;
    double mse = 0.0;        // max(p, mse_floor)
    double mse_se_db = 0.0;
};

/// Damped fixed-point solve at one alpha with a frozen MC sample.
inline AlphaSolveResult solve_alpha(double alpha, const Mixture& mixture, double sigma0_sq,
                                    const SolverConfig& cfg,
                                    const std::optional<ReplicaState>& warm, std::uint64_t seed,
                                    std::uint64_t alpha_index = 0) {
    if (!(alpha > 0.0)) throw std::domain_error("solve_alpha: alpha must be positive");
    if (!(sigma0_sq >= 0.0)) throw std::domain_error("solve_alpha: sigma0_sq must be >= 0");
    double delta = 1.0 / alpha;
    auto sample = detail::draw_mc_sample(mixture, cfg, seed, alpha_index);

    double theta0, theta;
    if (warm) {
        theta0 = std::max(warm->theta0, delta * sigma0_sq);
        theta = std::max(warm->theta, cfg.g_min);
    } else {
        detail::cold_start(mixture, sigma0_sq, delta, cfg, theta0, theta);
    }

    AlphaSolveResult res;
    MomentEstimate mom;
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.max_iter; ++it) {
        mom = detail::eval_moments(sample, theta0, theta);
        double theta0_new = delta * (sigma0_sq + mom.p_hat);
        double theta_new = delta * (cfg.lambda_ext + theta * mom.mean_dy);
        if (!std::isfinite(theta0_new) || !std::isfinite(theta_new)) {
            res.finite = false;
            res.iterations = it + 1;
            break;
        }
        residual = std::fmax(std::fabs(theta0_new - theta0), std::fabs(theta_new - theta));
        res.iterations = it + 1;
        // Absolute residual per the reference protocol, plus a state-relative
        // bound so the perfect-recovery collapse (theta0 -> 0 geometrically)
        // is resolved below the MSE floor instead of stalling at tol scale.
        if (residual < cfg.tol && residual <= cfg.tol * (theta0 + theta)) {
            res.converged = true;
            break;  // keep the pre-update iterate: `mom` was evaluated there
        }
        theta0 = (1.0 - cfg.damping) * theta0 + cfg.damping * theta0_new;
        theta = (1.0 - cfg.damping) * theta + cfg.damping * theta_new;
        theta0 = std::fmax(theta0, delta * sigma0_sq);
        theta = std::fmax(theta, cfg.g_min);
        if (it + 1 == cfg.max_iter) mom = detail::eval_moments(sample, theta0, theta);
    }

    res.state.theta0 = theta0;
    res.state.theta = theta;
    res.state.p = mom.p_hat;
    res.state.chi = theta * mom.mean_dy;
    res.state.residual = residual;
    res.moments = mom;
    res.mse = std::fmax(mom.p_hat, cfg.mse_floor);
    res.mse_se_db = (10.0 / std::log(10.0)) * mom.p_se / std::fmax(mom.p_hat, cfg.mse_floor);
    return res;
}

/// Forward/backward continuation over an ascending alpha grid with per-alpha
/// branch selection (smaller predicted MSE wins). alpha_index_offset keys the
/// frozen MC samples; chunked sweeps pass the chunk's global base index so
/// chunking changes warm-start paths only, never the samples.
inline std::vector<CurveRecord> solve_curve(const std::vector<double>& alpha_grid,
                                            const Mixture& mixture, double sigma0_sq,
                                            const SolverConfig& cfg, std::uint64_t seed,
                                            std::uint64_t alpha_index_offset = 0) {
    if (alpha_grid.empty()) throw std::domain_error("solve_curve: empty alpha grid");
    for (std::size_t i = 1; i < alpha_grid.size(); ++i)
        if (!(alpha_grid[i] > alpha_grid[i - 1]))
            throw std::domain_error("solve_curve: alpha grid must be strictly ascending");

    std::size_t n = alpha_grid.size();
    std::vector<AlphaSolveResult> fwd(n), bwd(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::optional<ReplicaState> warm;
        if (i > 0) warm = fwd[i - 1].state;
        fwd[i] = solve_alpha(alpha_grid[i], mixture, sigma0_sq, cfg, warm, seed,
                             alpha_index_offset + i);
    }
    for (std::size_t ir = 0; ir < n; ++ir) {
        std::size_t i = n - 1 - ir;
        std::optional<ReplicaState> warm;
        if (ir > 0) warm = bwd[i + 1].state;
        bwd[i] = solve_alpha(alpha_grid[i], mixture, sigma0_sq, cfg, warm, seed,
                             alpha_index_offset + i);
    }

    auto db = [&](double mse) { return 10.0 * std::log10(std::fmax(mse, cfg.mse_floor)); };
    std::vector<CurveRecord> records(n);
    for (std::size_t i = 0; i < n; ++i) {
        const AlphaSolveResult* sel;
        Branch tag;
        if (fwd[i].converged && bwd[i].converged) {
            bool take_fwd = fwd[i].mse <= bwd[i].mse;
            sel = take_fwd ? &fwd[i] : &bwd[i];
            tag = take_fwd ? Branch::forward : Branch::backward;
        } else if (fwd[i].converged || bwd[i].converged) {
            bool take_fwd = fwd[i].converged;
            sel = take_fwd ? &fwd[i] : &bwd[i];
            tag = take_fwd ? Branch::forward : Branch::backward;
        } else {
            sel = &fwd[i];
            tag = Branch::forward;
        }
        CurveRecord& r = records[i];
        r.alpha = alpha_grid[i];
        r.mse = sel->mse;
        r.mse_se_db = sel->mse_se_db;
        r.residual = sel->state.residual;
        r.branch = tag;
        r.branch_mismatch_db = std::fabs(db(fwd[i].mse) - db(bwd[i].mse));
        r.converged = sel->converged && sel->finite;
        r.seed = seed;
    }
    return records;
}

/// Compose the task's group decomposition with the k-law: PT-inactive groups
/// get k_law(init, 0), PT-active groups k_law(init, a_pt/sqrt(rho_pt)).
inline Mixture mixture_from_experiment(const InitParams& init, const TaskSpec& spec) {
    Mixture mix;
    for (const auto& g : group_mixture(spec)) {
        if (g.pi <= 0.0) continue;
        double bpt = g.beta_pt.kind == CoeffLaw::Kind::zero ? 0.0 : g.beta_pt.scale;
        mix.push_back({g.beta_ft, PenaltyAtom::make_qk(k_law(init, bpt), g.pi)});
    }
    return mix;
}

/// Single-task (no pretraining) mixture: the penalty is uniform with
/// k = 4 c_pt^2 regardless of lambda_pt, for a sparse task of density rho.
inline Mixture single_task_mixture(const InitParams& init, double rho) {
    init.validate();
    if (!(rho > 0.0 && rho <= 1.0)) throw std::domain_error("single_task_mixture: rho in (0,1]");
    double k = 4.0 * init.c_pt * init.c_pt;
    Mixture mix;
    if (rho < 1.0) mix.push_back({CoeffLaw::zero(), PenaltyAtom::make_qk(k, 1.0 - rho)});
    mix.push_back({CoeffLaw::gaussian(1.0 / rho), PenaltyAtom::make_qk(k, rho)});
    return mix;
}

}  // namespace ptft
