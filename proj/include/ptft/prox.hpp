#pragma once

#include <cmath>
#include <stdexcept>

#include "ptft/penalty.hpp"

// Scalar denoiser beta_hat(y; penalty, theta) = argmin (y-b)^2/(2 theta) + q(b)
// and its input sensitivity. These two kernels drive the replica fixed point,
// so prox() is written to be called millions of times per iteration.

namespace ptft {

struct ProxResult {
    double beta_hat = 0.0;
    double dy = 1.0;            // d beta_hat / d y = 1/(1 + theta q''(beta_hat))
    double curvature_s2 = 0.0;  // s^2 = (1/theta + q''(beta_hat))^(-1) = theta * dy
    int iterations = 0;
    double residual = 0.0;      // stationarity residual |(beta-y)/theta + q'(beta)|
};

struct ProxError : std::runtime_error {
    double residual;
    explicit ProxError(double res)
        : std::runtime_error("prox: Newton+bisection budget exhausted, residual " +
                             std::to_string(res)),
          residual(res) {}
};

namespace detail {

/// Root of g(b) = (b-y)/theta + q_k'(b) on [0, y] for y >= 0. g is strictly
/// increasing with g(0) <= 0 <= g(y), so the bracket always holds. Newton
/// steps that leave the bracket or fail to shrink |g| fall back to bisection.
inline ProxResult prox_qk_nonneg(double y, double k, double theta) {
    ProxResult r;
    double sk = std::sqrt(k);
    if (y == 0.0) {
        r.beta_hat = 0.0;
        r.dy = 1.0 / (1.0 + theta / sk);
        r.curvature_s2 = theta * r.dy;
        return r;
    }

    double lo = 0.0, hi = y;
    // Jacobian-preconditioned first step; exact in the quadratic limit.
    double b = y / (1.0 + theta / std::hypot(sk, 2.0 * y));
    const double gtol = 1e-12 * std::fmax(1.0, y / theta);

    auto g_of = [&](double x) { return (x - y) / theta + 0.5 * std::asinh(2.0 * x / sk); };

    double g = g_of(b);
    double prev_abs_g = std::fabs(g);
    int newton_left = 100;
    int total_budget = 400;
    while (std::fabs(g) > gtol && total_budget-- > 0) {
        if (g > 0.0) hi = b; else lo = b;
        double next;
        if (newton_left > 0) {
            --newton_left;
            double gp = 1.0 / theta + 1.0 / std::hypot(sk, 2.0 * b);
            next = b - g / gp;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        } else {
            next = 0.5 * (lo + hi);
        }
        if (next == b) break;  // bracket exhausted at machine precision
        b = next;
        g = g_of(b);
        double ag = std::fabs(g);
        if (ag >= prev_abs_g && newton_left > 0) newton_left = 0;  // stalled: bisect from here
        prev_abs_g = ag;
    }
    r.residual = std::fabs(g);
    if (r.residual > gtol && hi - lo > 1e-9 * std::fmax(1.0, y)) throw ProxError(r.residual);

    r.beta_hat = b;
    r.iterations = 400 - total_budget;
    r.dy = 1.0 / (1.0 + theta / std::hypot(sk, 2.0 * b));
    r.curvature_s2 = theta * r.dy;
    return r;
}

}  // namespace detail

inline ProxResult prox(double y, const PenaltyAtom& penalty, double theta) {
    if (!std::isfinite(y) || !std::isfinite(theta) || theta < 0.0)
        throw std::domain_error("prox: need finite y and theta >= 0");
    if (theta == 0.0) return {y, 1.0, 0.0, 0, 0.0};

    if (penalty.kind == PenaltyAtom::Kind::quadratic) {
        double mu = penalty.param;
        if (!(mu > 0.0)) throw std::domain_error("prox: quadratic penalty needs mu > 0");
        double dy = 1.0 / (1.0 + 2.0 * theta * mu);
        return {y * dy, dy, theta * dy, 0, 0.0};
    }

    double k = penalty.param;
    if (!(k > 0.0) || !std::isfinite(k)) throw std::domain_error("prox: qk penalty needs k > 0");
    // Solve on |y| and restore the sign, so oddness is exact by construction.
    ProxResult r = detail::prox_qk_nonneg(std::fabs(y), k, theta);
    if (y < 0.0) r.beta_hat = -r.beta_hat;
    return r;
}

inline double prox_dy(double y, const PenaltyAtom& penalty, double theta) {
    return prox(y, penalty, theta).dy;
}

}  // namespace ptft
