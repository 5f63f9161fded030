#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Implicit-bias penalty family q_k, the k-law mapping initialization and
// pretrained coefficients to per-coordinate penalties, and the learning-regime
// metrics (ell-order, pretraining dependence, transfer sensitivity kappa).

namespace ptft {

/// The three initialization knobs of the pretrain/fine-tune protocol.
/// lambda_pt is the normalized relative scale in [-1,1]; the unnormalized
/// lambda_tilde = lambda_pt * c_pt is derived on demand.
struct InitParams {
    double c_pt = 1e-3;
    double lambda_pt = 0.0;
    double gamma_ft = 0.0;

    double lambda_tilde() const { return lambda_pt * c_pt; }

    void validate() const {
        if (!(c_pt > 0.0) || !std::isfinite(c_pt))
            throw std::domain_error("InitParams: c_pt must be positive");
        if (!(lambda_pt >= -1.0 && lambda_pt <= 1.0))
            throw std::domain_error("InitParams: lambda_pt must lie in [-1, 1]");
        if (!(gamma_ft >= 0.0) || !std::isfinite(gamma_ft))
            throw std::domain_error("InitParams: gamma_ft must be nonnegative");
    }
};

/// One per-group penalty: q_k with parameter k, or a quadratic mu*z^2.
/// pi is the group occurrence probability inside a mixture.
struct PenaltyAtom {
    enum class Kind { qk, quadratic };
    Kind kind = Kind::qk;
    double param = 1.0;  // k for qk, mu for quadratic
    double pi = 1.0;

    static PenaltyAtom make_qk(double k, double pi = 1.0) {
        if (!(k > 0.0) || !std::isfinite(k))
            throw std::domain_error("PenaltyAtom: k must be positive and finite");
        return {Kind::qk, k, pi};
    }
    static PenaltyAtom make_quadratic(double mu, double pi = 1.0) {
        if (!(mu > 0.0) || !std::isfinite(mu))
            throw std::domain_error("PenaltyAtom: mu must be positive and finite");
        return {Kind::quadratic, mu, pi};
    }
};

namespace detail {

inline void check_zk(double z, double k) {
    if (!std::isfinite(z)) throw std::domain_error("q_k: z must be finite");
    if (!(k > 0.0) || !std::isfinite(k)) throw std::domain_error("q_k: k must be positive");
}

/// phi(zeta) = 1 - sqrt(1+zeta^2) + zeta*asinh(zeta).
/// Series branch below 0.05 avoids the cancellation between the two
/// O(zeta^2) terms: phi = zeta^2/2 - zeta^4/24 + zeta^6/80 - 5 zeta^8/896.
inline double phi_zeta(double zeta) {
    double az = std::fabs(zeta);
    if (az < 0.05) {
        double z2 = zeta * zeta;
        return z2 * (0.5 + z2 * (-1.0 / 24.0 + z2 * (1.0 / 80.0 + z2 * (-5.0 / 896.0))));
    }
    return 1.0 - std::hypot(1.0, zeta) + zeta * std::asinh(zeta);
}

}  // namespace detail

/// q_k(z) = (sqrt(k)/4) * (1 - sqrt(1+4z^2/k) + (2z/sqrt(k)) asinh(2z/sqrt(k))).
/// Even, nonnegative, strictly convex; interpolates l1 (k->0) and l2 (k->inf).
inline double q_penalty(double z, double k) {
    detail::check_zk(z, k);
    double sk = std::sqrt(k);
    return 0.25 * sk * detail::phi_zeta(2.0 * z / sk);
}

/// q_k'(z) = (1/2) asinh(2z/sqrt(k)).
inline double q_deriv1(double z, double k) {
    detail::check_zk(z, k);
    return 0.5 * std::asinh(2.0 * z / std::sqrt(k));
}

/// q_k''(z) = 1/sqrt(k + 4z^2).
inline double q_deriv2(double z, double k) {
    detail::check_zk(z, k);
    return 1.0 / std::hypot(std::sqrt(k), 2.0 * z);
}

/// k = (2 c_pt (1+lambda_pt) (1 + sqrt(1+(beta_pt/c_pt)^2)) + gamma_ft^2)^2.
/// Degenerate k = 0 (c_pt(1+lambda_pt) = 0 and gamma_ft = 0) is rejected: it
/// is outside the q_k domain and reachable only as a limit.
inline double k_law(const InitParams& init, double beta_pt) {
    init.validate();
    if (!std::isfinite(beta_pt)) throw std::domain_error("k_law: beta_pt must be finite");
    double cl = init.c_pt * (1.0 + init.lambda_pt);
    double g2 = init.gamma_ft * init.gamma_ft;
    if (cl == 0.0 && g2 == 0.0)
        throw std::domain_error("k_law: degenerate penalty (c_pt(1+lambda_pt)=0 and gamma_ft=0)");
    double s = beta_pt / init.c_pt;
    double root = 2.0 * cl * (1.0 + std::hypot(1.0, s)) + g2;
    return root * root;
}

struct RegimeMetrics {
    double ell_order = 2.0;  // in [1,2]; 1 = sparse/l1-like, 2 = l2-like
    double pd = 0.0;         // in [-1,0]; -1 = full feature reuse
    double kappa = 0.0;      // in [0,2); dlog k / dlog |beta_pt|
};

namespace detail {

/// ell-order as a function of zeta = 2 beta_ft / sqrt(k).
inline double ell_order_of_zeta(double zeta) {
    double az = std::fabs(zeta);
    if (az == 0.0) return 2.0;
    if (az < 1e-3) {
        // zeta*asinh(zeta)/phi(zeta) = 2 - zeta^2/6 + O(zeta^4)
        return 2.0 - az * az / 6.0;
    }
    return az * std::asinh(az) / phi_zeta(az);
}

/// kappa = 4 c(1+lambda) s^2 / (sqrt(k) * sqrt(1+s^2)), s = beta_pt / c_pt.
inline double kappa_closed_form(const InitParams& init, double beta_pt) {
    double cl = init.c_pt * (1.0 + init.lambda_pt);
    double s = beta_pt / init.c_pt;
    double b = std::hypot(1.0, s);
    double root = 2.0 * cl * (1.0 + b) + init.gamma_ft * init.gamma_ft;
    if (s == 0.0 || cl == 0.0) return 0.0;
    return 4.0 * cl * s * s / (root * b);
}

}  // namespace detail

/// Closed-form learning-regime metrics at a (beta_pt, beta_ft) pair.
/// beta_ft = 0 makes the log-derivative undefined; pass beta_ft_zero_limit to
/// get the limit value ell-order = 2 instead of a domain error.
inline RegimeMetrics regime_metrics(const InitParams& init, double beta_pt, double beta_ft,
                                    bool beta_ft_zero_limit = false) {
    double k = k_law(init, beta_pt);
    if (beta_ft == 0.0 && !beta_ft_zero_limit)
        throw std::domain_error("regime_metrics: beta_ft = 0 (pass the explicit limit flag)");
    RegimeMetrics m;
    m.ell_order = detail::ell_order_of_zeta(2.0 * beta_ft / std::sqrt(k));
    m.kappa = detail::kappa_closed_form(init, beta_pt);
    m.pd = 0.5 * (1.0 - m.ell_order) * m.kappa;
    return m;
}

/// PD by central finite difference of k with respect to beta_pt, chained
/// through dlog q / dlog k evaluated from the penalty itself.
inline double pd_numeric(const InitParams& init, double beta_pt, double beta_ft, double eps) {
    if (!(eps > 0.0)) throw std::domain_error("pd_numeric: eps must be positive");
    if (beta_pt == 0.0) throw std::domain_error("pd_numeric: beta_pt must be nonzero");
    double k = k_law(init, beta_pt);
    double kp = k_law(init, beta_pt + eps);
    double km = k_law(init, beta_pt - eps);
    double dk_dbpt = (kp - km) / (2.0 * eps);
    // dlog q/dlog k = 1/2 - (1/2) * beta_ft q'(beta_ft) / q(beta_ft)
    double q = q_penalty(beta_ft, k);
    double dlq;
    if (q == 0.0) {
        dlq = -0.5;  // beta_ft = 0 limit: ell-order -> 2
    } else {
        dlq = 0.5 - 0.5 * beta_ft * q_deriv1(beta_ft, k) / q;
    }
    return dlq * (beta_pt / k) * dk_dbpt;
}

/// Which InitParams field a phase-portrait axis sweeps.
enum class InitAxis { c_pt, lambda_pt, gamma_ft };

inline InitParams with_axis(InitParams base, InitAxis axis, double value) {
    switch (axis) {
        case InitAxis::c_pt: base.c_pt = value; break;
        case InitAxis::lambda_pt: base.lambda_pt = value; break;
        case InitAxis::gamma_ft: base.gamma_ft = value; break;
    }
    return base;
}

struct PhaseCell {
    RegimeMetrics metrics;
    bool ok = false;
    std::string error;
};

/// Dense matrix of regime metrics over a 2-axis grid of initializations,
/// rows indexing the first axis. Cell-level domain errors (degenerate k) are
/// flagged, not thrown.
inline std::vector<std::vector<PhaseCell>> phase_portrait(
    const InitParams& base, InitAxis row_axis, std::span<const double> row_values,
    InitAxis col_axis, std::span<const double> col_values, double beta_pt, double beta_ft) {
    std::vector<std::vector<PhaseCell>> grid(row_values.size());
    for (std::size_t i = 0; i < row_values.size(); ++i) {
        grid[i].resize(col_values.size());
        for (std::size_t j = 0; j < col_values.size(); ++j) {
            InitParams p = with_axis(with_axis(base, row_axis, row_values[i]), col_axis, col_values[j]);
            PhaseCell& cell = grid[i][j];
            try {
                cell.metrics = regime_metrics(p, beta_pt, beta_ft, /*beta_ft_zero_limit=*/true);
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
            }
        }
    }
    return grid;
}

}  // namespace ptft
