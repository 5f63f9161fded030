#include <catch_amalgamated.hpp>
#include <cmath>

#include "ptft/task.hpp"

using namespace ptft;

TEST_CASE("task spec invariants") {
    TaskSpec ok{0.1, 0.05, 0.05, 0.0, 1.0};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.rho_ft() == Catch::Approx(0.1));
    CHECK(ok.omega() == Catch::Approx(0.5));

    TaskSpec bad_sh{0.1, 0.2, 0.0, 0.0, 1.0};  // rho_sh > rho_pt
    CHECK_THROWS_AS(bad_sh.validate(), std::domain_error);
    TaskSpec bad_new{0.1, 0.0, 0.95, 0.0, 1.0};  // rho_new > 1 - rho_pt
    CHECK_THROWS_AS(bad_new.validate(), std::domain_error);
    TaskSpec bad_ft{0.1, 0.0, 0.0, 0.0, 1.0};  // rho_ft = 0
    CHECK_THROWS_AS(bad_ft.validate(), std::domain_error);
}

TEST_CASE("mask containment in the pure overlap/no-overlap cases") {
    TaskSpec overlap{0.1, 0.1, 0.0, 0.0, 1.0};
    TaskSpec disjoint{0.1, 0.0, 0.1, 0.0, 1.0};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        TeacherPair a = sample_teachers(overlap, 500, seed);
        for (int i = 0; i < 500; ++i)
            if (a.active_ft[i]) CHECK(a.active_pt[i]);  // active_ft subset of active_pt
        TeacherPair b = sample_teachers(disjoint, 500, seed);
        for (int i = 0; i < 500; ++i)
            CHECK_FALSE(bool(b.active_ft[i] && b.active_pt[i]));  // disjoint supports
    }
}

TEST_CASE("teacher second moments and conditional rates") {
    TaskSpec spec{0.1, 0.04, 0.06, 0.0, 1.0};
    const int d = 100, n_seeds = 10000;
    double sum_pt2 = 0.0, sum_ft2 = 0.0;
    long n_pt_active = 0, n_ft_given_on = 0, n_ft_given_off = 0, n_off = 0;
    for (int s = 0; s < n_seeds; ++s) {
        TeacherPair t = sample_teachers(spec, d, 777 + s);
        sum_pt2 += t.beta_pt.squaredNorm();
        sum_ft2 += t.beta_ft.squaredNorm();
        for (int i = 0; i < d; ++i) {
            if (t.active_pt[i]) {
                ++n_pt_active;
                n_ft_given_on += t.active_ft[i];
            } else {
                ++n_off;
                n_ft_given_off += t.active_ft[i];
            }
            if (t.beta_pt[i] != 0.0) CHECK(t.active_pt[i]);
            if (t.beta_ft[i] != 0.0) CHECK(t.active_ft[i]);
        }
    }
    double n_coords = static_cast<double>(d) * n_seeds;

    // E[beta_pt_d^2] = 1: var of beta_pt^2 is 1/rho - 1 = 9.
    double m_pt = sum_pt2 / n_coords;
    CHECK(m_pt == Catch::Approx(1.0).margin(5.0 * std::sqrt(9.0 / n_coords)));
    // E[beta_ft_d^2] = 1: var of beta_ft^2 = rho*3/rho^2 - 1 = 3/rho - 1 = 29.
    double m_ft = sum_ft2 / n_coords;
    CHECK(m_ft == Catch::Approx(1.0).margin(5.0 * std::sqrt(29.0 / n_coords)));

    // conditional activation rates within binomial bounds
    double rate_on = static_cast<double>(n_ft_given_on) / n_pt_active;
    double expect_on = spec.rho_ft_shared / spec.rho_pt;
    CHECK(rate_on == Catch::Approx(expect_on)
                         .margin(5.0 * std::sqrt(expect_on * (1 - expect_on) / n_pt_active)));
    double rate_off = static_cast<double>(n_ft_given_off) / n_off;
    double expect_off = spec.rho_ft_new / (1.0 - spec.rho_pt);
    CHECK(rate_off == Catch::Approx(expect_off)
                          .margin(5.0 * std::sqrt(expect_off * (1 - expect_off) / n_off)));
}

TEST_CASE("group mixture weights") {
    TaskSpec s1{0.1, 0.1, 0.0, 0.0, 1.0};
    auto g1 = group_mixture(s1);
    REQUIRE(g1.size() == 4);
    CHECK(g1[0].pi == Catch::Approx(0.9));
    CHECK(g1[1].pi == Catch::Approx(0.0).margin(1e-15));
    CHECK(g1[2].pi == Catch::Approx(0.0).margin(1e-15));
    CHECK(g1[3].pi == Catch::Approx(0.1));

    TaskSpec s2{0.1, 0.0, 0.1, 0.0, 1.0};
    auto g2 = group_mixture(s2);
    CHECK(g2[0].pi == Catch::Approx(0.8));
    CHECK(g2[1].pi == Catch::Approx(0.1));
    CHECK(g2[2].pi == Catch::Approx(0.1));
    CHECK(g2[3].pi == Catch::Approx(0.0).margin(1e-15));

    rng::Stream s(13, rng::Purpose::generic);
    for (int i = 0; i < 1000; ++i) {
        TaskSpec t;
        t.rho_pt = 0.05 + 0.9 * s.u01();
        t.rho_ft_shared = t.rho_pt * s.u01();
        t.rho_ft_new = (1.0 - t.rho_pt) * s.u01();
        if (t.rho_ft() <= 0.0) continue;
        double total = 0.0;
        for (const auto& g : group_mixture(t)) total += g.pi;
        CHECK(total == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("group weights match empirical mask frequencies at large d") {
    TaskSpec spec{0.1, 0.04, 0.2, 0.0, 1.0};
    const int d = 100000;
    TeacherPair t = sample_teachers(spec, d, 4242);
    long counts[4] = {0, 0, 0, 0};
    for (int i = 0; i < d; ++i) counts[2 * t.active_pt[i] + t.active_ft[i]]++;
    auto groups = group_mixture(spec);
    // group order: (0,0), (0,1), (1,0), (1,1)
    double freq[4] = {static_cast<double>(counts[0]) / d, static_cast<double>(counts[1]) / d,
                      static_cast<double>(counts[2]) / d, static_cast<double>(counts[3]) / d};
    double expect[4] = {groups[0].pi, groups[1].pi, groups[2].pi, groups[3].pi};
    for (int g = 0; g < 4; ++g) {
        double se = std::sqrt(expect[g] * (1.0 - expect[g]) / d);
        CHECK(freq[g] == Catch::Approx(expect[g]).margin(5.0 * se + 1e-12));
    }
    // sign symmetry: coordinate means vanish
    CHECK(std::fabs(t.beta_pt.mean()) < 5.0 * std::sqrt(1.0 / d));
    CHECK(std::fabs(t.beta_ft.mean()) < 5.0 * std::sqrt(1.0 / d));
}

TEST_CASE("datasets: determinism, moments, exact zero labels") {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(40);
    Dataset dz = sample_dataset(zero, 25, 0.0, 9);
    CHECK(dz.y.norm() == 0.0);

    Eigen::VectorXd teacher = Eigen::VectorXd::Ones(50);
    Dataset a = sample_dataset(teacher, 30, 0.1, 123);
    Dataset b = sample_dataset(teacher, 30, 0.1, 123);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    Dataset c = sample_dataset(teacher, 30, 0.1, 124);
    CHECK(a.x != c.x);

    // E[||X col||^2] = n/d averaged over 1000 columns, within 5 SE
    const int n = 200, d = 1000;
    Dataset big = sample_dataset(Eigen::VectorXd::Zero(d), n, 0.0, 77);
    double mean_col = 0.0;
    for (int j = 0; j < d; ++j) mean_col += big.x.col(j).squaredNorm();
    mean_col /= d;
    double expect = static_cast<double>(n) / d;
    double se = expect * std::sqrt(2.0 / n) / std::sqrt(static_cast<double>(d));
    CHECK(mean_col == Catch::Approx(expect).margin(5.0 * se));
}
