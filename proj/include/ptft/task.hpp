#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ptft/rng.hpp"

// Spike-and-slab teacher pairs and Gaussian-design datasets for the
// teacher-student setup. Pretraining recovery is exact in the regime studied
// (alpha_pt >= 1), so downstream consumers take beta_pt directly; no
// pretraining data is ever needed for replica inputs.

namespace ptft {

struct TaskSpec {
    double rho_pt = 0.1;        // pretraining active fraction
    double rho_ft_shared = 0.05;
    double rho_ft_new = 0.05;
    double sigma0_sq = 0.0;     // label-noise variance
    double a_pt = 1.0;          // teacher signal scale, fixed to 1 in all experiments

    double rho_ft() const { return rho_ft_shared + rho_ft_new; }
    double omega() const { return rho_ft_shared / rho_ft(); }

    void validate() const {
        if (!(rho_pt > 0.0 && rho_pt <= 1.0))
            throw std::domain_error("TaskSpec: need 0 < rho_pt <= 1");
        if (!(rho_ft_shared >= 0.0 && rho_ft_shared <= rho_pt))
            throw std::domain_error("TaskSpec: need 0 <= rho_ft_shared <= rho_pt");
        if (!(rho_ft_new >= 0.0 && rho_ft_new <= 1.0 - rho_pt))
            throw std::domain_error("TaskSpec: need 0 <= rho_ft_new <= 1 - rho_pt");
        if (!(rho_ft() > 0.0))
            throw std::domain_error("TaskSpec: need rho_ft_shared + rho_ft_new > 0");
        if (!(sigma0_sq >= 0.0))
            throw std::domain_error("TaskSpec: need sigma0_sq >= 0");
        if (!(a_pt > 0.0))
            throw std::domain_error("TaskSpec: need a_pt > 0");
    }
};

struct TeacherPair {
    Eigen::VectorXd beta_pt;
    Eigen::VectorXd beta_ft;
    std::vector<std::uint8_t> active_pt;
    std::vector<std::uint8_t> active_ft;
};

struct Dataset {
    Eigen::MatrixXd x;  // n x d, entries iid N(0, 1/d)
    Eigen::VectorXd y;  // x * teacher + noise
    int n = 0;
    int d = 0;
};

/// Marginal law of one teacher coordinate within a group.
struct CoeffLaw {
    enum class Kind { zero, spike, gaussian };
    Kind kind = Kind::zero;
    double scale = 0.0;  // spike: |value|; gaussian: variance

    static CoeffLaw zero() { return {Kind::zero, 0.0}; }
    static CoeffLaw spike(double magnitude) { return {Kind::spike, magnitude}; }
    static CoeffLaw gaussian(double variance) { return {Kind::gaussian, variance}; }

    double variance() const {
        switch (kind) {
            case Kind::zero: return 0.0;
            case Kind::spike: return scale * scale;
            case Kind::gaussian: return scale;
        }
        return 0.0;
    }
};

/// One of the four (theta_pt, theta_ft) groups of the generative model.
struct GroupLaw {
    double pi = 0.0;
    CoeffLaw beta_pt;
    CoeffLaw beta_ft;
};

/// The 4-group decomposition induced by (theta_pt, theta_ft) in {0,1}^2.
/// Order: (0,0), (0,1), (1,0), (1,1); weights sum to 1.
inline std::vector<GroupLaw> group_mixture(const TaskSpec& spec) {
    spec.validate();
    double slab_var = 1.0 / spec.rho_ft();
    double spike_mag = spec.a_pt / std::sqrt(spec.rho_pt);
    return {
        {1.0 - spec.rho_pt - spec.rho_ft_new, CoeffLaw::zero(), CoeffLaw::zero()},
        {spec.rho_ft_new, CoeffLaw::zero(), CoeffLaw::gaussian(slab_var)},
        {spec.rho_pt - spec.rho_ft_shared, CoeffLaw::spike(spike_mag), CoeffLaw::zero()},
        {spec.rho_ft_shared, CoeffLaw::spike(spike_mag), CoeffLaw::gaussian(slab_var)},
    };
}

/// Draw a teacher pair: theta_pt ~ Bern(rho_pt), theta_ft conditionally
/// Bernoulli with rates rho_sh/rho_pt (active) and rho_new/(1-rho_pt)
/// (inactive); nonzero beta_ft entries are N(0, 1/rho_ft).
inline TeacherPair sample_teachers(const TaskSpec& spec, int d, std::uint64_t seed) {
    spec.validate();
    if (d < 1) throw std::domain_error("sample_teachers: d >= 1 required");

    double rate_act = spec.rho_ft_shared / spec.rho_pt;
    double rate_inact = spec.rho_pt < 1.0 ? spec.rho_ft_new / (1.0 - spec.rho_pt) : 0.0;
    if (rate_act > 1.0 + 1e-12 || rate_inact > 1.0 + 1e-12)
        throw std::logic_error("sample_teachers: conditional rate > 1");

    rng::Stream mask(seed, rng::Purpose::teacher_mask);
    rng::Stream sign(seed, rng::Purpose::teacher_sign);
    rng::Stream slab(seed, rng::Purpose::teacher_slab);

    TeacherPair t;
    t.beta_pt = Eigen::VectorXd::Zero(d);
    t.beta_ft = Eigen::VectorXd::Zero(d);
    t.active_pt.assign(d, 0);
    t.active_ft.assign(d, 0);

    double spike = spec.a_pt / std::sqrt(spec.rho_pt);
    double slab_sd = std::sqrt(1.0 / spec.rho_ft());
    for (int i = 0; i < d; ++i) {
        bool on_pt = mask.u01() < spec.rho_pt;
        bool on_ft = mask.u01() < (on_pt ? rate_act : rate_inact);
        if (on_pt) {
            t.active_pt[i] = 1;
            t.beta_pt[i] = (sign.u01() < 0.5 ? -spike : spike);
        }
        if (on_ft) {
            t.active_ft[i] = 1;
            t.beta_ft[i] = slab_sd * slab.normal();
        }
    }
    return t;
}

/// Gaussian design with entry variance 1/d and labels y = X beta + noise.
inline Dataset sample_dataset(const Eigen::VectorXd& teacher, int n, double sigma0_sq,
                              std::uint64_t seed) {
    if (n < 1) throw std::domain_error("sample_dataset: n >= 1 required");
    if (sigma0_sq < 0.0) throw std::domain_error("sample_dataset: sigma0_sq >= 0 required");
    int d = static_cast<int>(teacher.size());

    Dataset ds;
    ds.n = n;
    ds.d = d;
    ds.x.resize(n, d);
    rng::Stream design(seed, rng::Purpose::design);
    double sd = 1.0 / std::sqrt(static_cast<double>(d));
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < n; ++i) ds.x(i, j) = sd * design.normal();

    ds.y = ds.x * teacher;
    if (sigma0_sq > 0.0) {
        rng::Stream noise(seed, rng::Purpose::label_noise);
        double nsd = std::sqrt(sigma0_sq);
        for (int i = 0; i < n; ++i) ds.y[i] += nsd * noise.normal();
    }
    return ds;
}

}  // namespace ptft
