#include "pbr/errors.h"
#include "pbr/models.h"
#include "pbr/problem_io.h"
#include "pbr/solvers.h"

#include <gtest/gtest.h>

#include <random>

using namespace pbr;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ReturnsSample gaussian_sample(Eigen::Index p, Eigen::Index n, std::uint64_t seed) {
    return sample(GaussianModel{synthetic_mu().head(p), synthetic_sigma().topLeftCorner(p, p)}, n, seed);
}

double mid_target(const ReturnsSample& s) {
    const VectorXd wmv = min_variance_portfolio(s.covariance());
    return 0.5 * (wmv.dot(s.mean()) + s.mean().maxCoeff());
}

// Variance cap a fraction t of the way from the Markowitz minimum to the
// unpenalized solution's value, with U2 = r2 times the unpenalized p2.
Caps anchored_caps(const ReturnsSample& s, double beta, double R, const PortfolioSolution& emp, double t, double r2) {
    const VectorXd wm = solve_markowitz(s.mean(), s.covariance(), R);
    const double n = static_cast<double>(s.observations());
    const double vmin = wm.dot(s.covariance() * wm) / n;
    const PenaltyValue pv = penalty_values(s, emp.w, emp.alpha, beta);
    return Caps{vmin + t * (pv.p1 - vmin), r2 * pv.p2};
}

double lp_objective(const ReturnsSample& s, const VectorXd& w, double beta) {
    return ru_cvar(s.losses(w), beta).value;
}

// Minimum over w1 in [-3, 3] (step 1e-3, w2 = 1 - w1) of f(w).
template <class F>
double grid_min(F f) {
    double best = std::numeric_limits<double>::infinity();
    for (int k = -3000; k <= 3000; ++k) {
        VectorXd w(2);
        w << k * 1e-3, 1.0 - k * 1e-3;
        best = std::min(best, f(w));
    }
    return best;
}

}  // namespace

TEST(Markowitz, SymmetricExample) {
    VectorXd mu(2);
    mu << 0.1, 0.2;
    const VectorXd w = solve_markowitz(mu, MatrixXd::Identity(2, 2), 0.15);
    EXPECT_NEAR(w(0), 0.5, 1e-15);
    EXPECT_NEAR(w(1), 0.5, 1e-15);
}

TEST(Markowitz, DenseKktOracle) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index p = 3 + rep % 5;
        MatrixXd B(p, p);
        for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = nd(rng);
        const MatrixXd sigma = B * B.transpose() + 0.1 * MatrixXd::Identity(p, p);
        VectorXd mu(p);
        for (Eigen::Index j = 0; j < p; ++j) mu(j) = nd(rng);
        const double R = nd(rng);
        // [2 Sigma, A; A', 0] [w; -l] = [0; b]
        MatrixXd K = MatrixXd::Zero(p + 2, p + 2);
        K.topLeftCorner(p, p) = 2 * sigma;
        K.block(0, p, p, 1) = mu;
        K.block(0, p + 1, p, 1) = VectorXd::Ones(p);
        K.block(p, 0, 1, p) = mu.transpose();
        K.block(p + 1, 0, 1, p) = VectorXd::Ones(p).transpose();
        VectorXd rhs = VectorXd::Zero(p + 2);
        rhs(p) = R;
        rhs(p + 1) = 1.0;
        const VectorXd oracle = K.fullPivLu().solve(rhs).head(p);
        const VectorXd w = solve_markowitz(mu, sigma, R);
        EXPECT_LE((w - oracle).norm(), 1e-10 * (1 + oracle.norm()));
        EXPECT_NEAR(w.dot(mu), R, 1e-12 * (1 + std::abs(R)));
        EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    }
    VectorXd mu(3);
    mu << 1, 2, 3;
    const VectorXd w = solve_markowitz(mu, MatrixXd::Identity(3, 3), 2.0);
    EXPECT_NEAR((w - Eigen::Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3)).norm(), 0.0, 1e-14);
}

TEST(Markowitz, DegenerateMean) {
    const MatrixXd sigma = synthetic_sigma().topLeftCorner(3, 3);
    const VectorXd ones = VectorXd::Ones(3);
    EXPECT_THROW(solve_markowitz(ones, sigma, 2.0), InfeasibleError);
    EXPECT_LE((solve_markowitz(ones, sigma, 1.0) - min_variance_portfolio(sigma)).norm(), 1e-14);
}

TEST(CvarEmp, TwoAssetExampleSingletonFeasibleSet) {
    MatrixXd X(2, 4);
    X << 1, 0, 1, -1, 0, 1, 1, 0;
    X *= 0.01;
    const ReturnsSample s(X);
    const double R = 0.5 * (s.mean()(0) + s.mean()(1));
    const auto sol = solve_cvar_emp(s, 0.6, R);
    ASSERT_EQ(sol.status, SolveStatus::Optimal) << sol.message;
    const double oracle = grid_min([&](const VectorXd& w) {
        return std::abs(w.dot(s.mean()) - R) < 1e-9 ? lp_objective(s, w, 0.6) : std::numeric_limits<double>::infinity();
    });
    EXPECT_NEAR(sol.objective, oracle, 1e-3);
    EXPECT_TRUE(verify_tightness(s, sol).tight);
}

TEST(CvarDualized, TwoAssetGridOracle) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto s = gaussian_sample(2, 60, seed);
        for (double l0 : {0.0, 1.0}) {
            const auto sol = solve_cvar_dualized(s, 0.9, l0);
            ASSERT_EQ(sol.status, SolveStatus::Optimal) << sol.message;
            const double oracle =
                grid_min([&](const VectorXd& w) { return lp_objective(s, w, 0.9) - l0 * w.dot(s.mean()); });
            EXPECT_LE(sol.objective, oracle + 1e-12);
            EXPECT_NEAR(sol.objective, oracle, 1e-3);
        }
    }
}

TEST(CvarEmp, SingleAsset) {
    MatrixXd X(1, 30);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < 30; ++i) X(0, i) = nd(rng);
    const ReturnsSample s(X);
    const auto sol = solve_cvar_emp(s, 0.9, s.mean()(0));
    ASSERT_EQ(sol.status, SolveStatus::Optimal) << sol.message;
    EXPECT_NEAR(sol.w(0), 1.0, 1e-10);
    EXPECT_NEAR(sol.objective, ru_cvar(-X.row(0).transpose(), 0.9).value, 1e-9);
}

TEST(CvarEmp, ScenarioDuplicationInvariance) {
    const auto s = gaussian_sample(4, 80, 5);
    MatrixXd X2(4, 160);
    X2 << s.data(), s.data();
    const ReturnsSample s2(X2);
    const double R = mid_target(s);
    const auto a = solve_cvar_emp(s, 0.95, R);
    const auto b = solve_cvar_emp(s2, 0.95, R);
    ASSERT_EQ(a.status, SolveStatus::Optimal);
    ASSERT_EQ(b.status, SolveStatus::Optimal);
    EXPECT_NEAR(a.objective, b.objective, 1e-9 * (1 + std::abs(a.objective)));
    EXPECT_LE((a.w - b.w).norm(), 1e-5);
}

TEST(CvarEmp, CertificatesAndDuals) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto s = gaussian_sample(5, 100, seed);
        const double R = mid_target(s);
        const auto sol = solve_cvar_emp(s, 0.95, R);
        ASSERT_EQ(sol.status, SolveStatus::Optimal) << sol.message;
        EXPECT_TRUE(sol.tight);
        EXPECT_NEAR(sol.w.sum(), 1.0, 1e-8);
        EXPECT_NEAR(sol.w.dot(s.mean()), R, 1e-8 * (1 + std::abs(R)));
        EXPECT_NEAR(sol.objective, lp_objective(s, sol.w, 0.95), 1e-8 * (1 + std::abs(sol.objective)));
        EXPECT_NEAR(sol.duals.eta2.sum(), 1.0, 1e-7);
        EXPECT_NEAR(sol.duals.eta1.sum(), 0.95 / (1 - 0.95), 1e-6);
        EXPECT_LE(sol.duality_gap, 1e-8 * (1 + std::abs(sol.objective)));
    }
}

TEST(CvarDualized, ZeroLambdaIsMinimumCvar) {
    const auto s = gaussian_sample(5, 120, 8);
    const auto d = solve_cvar_dualized(s, 0.95, 0.0);
    ASSERT_EQ(d.status, SolveStatus::Optimal);
    for (double t : {0.0, 0.5, 1.0}) {
        const double R = mid_target(s) * (1 - t) + t * s.mean().minCoeff();
        const auto e = solve_cvar_emp(s, 0.95, R);
        if (e.status == SolveStatus::Optimal) EXPECT_LE(d.objective, e.objective + 1e-9);
    }
}

TEST(CvarDualized, TranslationShiftsObjective) {
    const auto s = gaussian_sample(4, 100, 9);
    const double c = 0.002, l0 = 1.5;
    const MatrixXd shifted = s.data().array() + c;
    const auto a = solve_cvar_dualized(s, 0.95, l0);
    const auto b = solve_cvar_dualized(ReturnsSample(shifted), 0.95, l0);
    ASSERT_EQ(a.status, SolveStatus::Optimal);
    ASSERT_EQ(b.status, SolveStatus::Optimal);
    EXPECT_NEAR(b.objective, a.objective - (1 + l0) * c, 1e-9);
    EXPECT_LE((a.w - b.w).norm(), 1e-5);
}

TEST(CvarDualized, LargeLambdaHitsBoxGuard) {
    const auto s = gaussian_sample(3, 100, 10);
    const auto sol = solve_cvar_dualized(s, 0.95, 1e3);
    ASSERT_EQ(sol.status, SolveStatus::Optimal) << sol.message;
    EXPECT_TRUE(sol.box_guard);
    EXPECT_NEAR(sol.w.cwiseAbs().maxCoeff(), SolverOptions{}.box_bound, 1e-6);
    Eigen::Index best;
    s.mean().maxCoeff(&best);
    EXPECT_GT(sol.w(best), 0.0);
    // Box-constrained max of w'mu_hat over w'1 = 1 as the oracle for the dominant term.
    const VectorXd& mu = s.mean();
    double lp_max = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            if (a == b) continue;
            const int c = 3 - a - b;
            for (double sa : {-10.0, 10.0}) {
                for (double sb : {-10.0, 10.0}) {
                    const double wc = 1.0 - sa - sb;
                    if (std::abs(wc) <= 10.0) lp_max = std::max(lp_max, sa * mu(a) + sb * mu(b) + wc * mu(c));
                }
            }
        }
    }
    EXPECT_NEAR(sol.w.dot(mu), lp_max, 1e-3 * std::abs(lp_max));
}

TEST(Tightness, InflatedComponentIsDetected) {
    const auto s = gaussian_sample(3, 50, 2);
    auto sol = solve_cvar_emp(s, 0.9, mid_target(s));
    ASSERT_TRUE(verify_tightness(s, sol).tight);
    sol.z(7) += 0.25;
    const auto rep = verify_tightness(s, sol);
    EXPECT_FALSE(rep.tight);
    EXPECT_NEAR(rep.max_violation, 0.25, 1e-7);
}

TEST(CvarPen, InfiniteCapsEqualEmpirical) {
    const auto s = gaussian_sample(5, 100, 4);
    const double R = mid_target(s);
    const auto e = solve_cvar_emp(s, 0.95, R);
    const auto p = solve_cvar_pen(s, 0.95, R, Caps{});
    EXPECT_NEAR(p.alpha, e.alpha, 1e-6);
    EXPECT_LE((p.w - e.w).norm(), 1e-6);
}

TEST(CvarPen, SlackCapsMatchEmpirical) {
    const auto s = gaussian_sample(5, 100, 4);
    const double R = mid_target(s);
    const auto e = solve_cvar_emp(s, 0.95, R);
    const Caps caps = resolve_caps(s, 0.95, e, Ratios{1.5, 1.5});
    const auto p = solve_cvar_pen(s, 0.95, R, caps);
    ASSERT_EQ(p.status, SolveStatus::Optimal) << p.message;
    EXPECT_NEAR(p.objective, e.objective, 1e-7);
}

TEST(CvarPen, RandomInstancesAreTightWithSmallGap) {
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto s = gaussian_sample(5, 100, 100 + seed);
        const double R = mid_target(s);
        const auto e = solve_cvar_emp(s, 0.95, R);
        ASSERT_EQ(e.status, SolveStatus::Optimal);
        const Caps caps = anchored_caps(s, 0.95, R, e, 0.5, 0.8);
        const auto p = solve_cvar_pen(s, 0.95, R, caps);
        if (p.status == SolveStatus::Infeasible) continue;
        ASSERT_TRUE(p.status == SolveStatus::Optimal || p.status == SolveStatus::FallbackOptimal) << p.message;
        ++checked;
        EXPECT_TRUE(p.tight);
        EXPECT_LE(verify_tightness(s, p).max_violation, 1e-6);
        EXPECT_LE(p.duality_gap, 1e-8 * (1 + std::abs(p.objective)));
        const auto pv = penalty_values(s, p.w, p.alpha, 0.95);
        EXPECT_LE(pv.p1, caps.u1 + 1e-10);
        EXPECT_LE(pv.p2, caps.u2 + 1e-10);
        EXPECT_GE(p.objective, e.objective - 1e-9);
        // Weak duality through the closed-form dual function.
        const double g = relaxation_dual_value(s, 0.95, R, caps, p);
        EXPECT_LE(g, p.objective + 1e-9 * (1 + std::abs(p.objective)));
        EXPECT_NEAR(g, p.objective, 1e-6 * (1 + std::abs(p.objective)));
    }
    EXPECT_GE(checked, 20);
}

TEST(CvarPen, ObjectiveNonincreasingInCaps) {
    const auto s = gaussian_sample(5, 100, 77);
    const double R = mid_target(s);
    const auto e = solve_cvar_emp(s, 0.95, R);
    double prev = std::numeric_limits<double>::infinity();
    for (double t : {0.2, 0.5, 0.8, 1.0}) {
        const auto p = solve_cvar_pen(s, 0.95, R, anchored_caps(s, 0.95, R, e, t, 1.0));
        ASSERT_EQ(p.status, SolveStatus::Optimal) << p.message;
        EXPECT_LE(p.objective, prev + 1e-9);
        prev = p.objective;
    }
    prev = std::numeric_limits<double>::infinity();
    for (double r : {0.6, 0.8, 1.0}) {
        const auto p = solve_cvar_pen(s, 0.95, R, resolve_caps(s, 0.95, e, Ratios{1.0, r}));
        ASSERT_TRUE(p.status == SolveStatus::Optimal || p.status == SolveStatus::FallbackOptimal) << p.message;
        EXPECT_LE(p.objective, prev + 1e-9);
        prev = p.objective;
    }
}

TEST(CvarPen, ShrinkingVarianceCapApproachesMarkowitz) {
    const auto s = gaussian_sample(5, 100, 21);
    const double R = mid_target(s);
    const VectorXd wm = solve_markowitz(s.mean(), s.covariance(), R);
    const double vmin = wm.dot(s.covariance() * wm) / 100.0;
    const auto e = solve_cvar_emp(s, 0.95, R);
    const double vemp = penalty_values(s, e.w, e.alpha, 0.95).p1;
    ASSERT_GT(vemp, vmin);
    double prev = std::numeric_limits<double>::infinity();
    for (double t : {0.9, 0.5, 0.2, 0.05, 0.001}) {
        const auto p = solve_cvar_pen(s, 0.95, R, Caps{vmin + t * (vemp - vmin), kInf});
        ASSERT_EQ(p.status, SolveStatus::Optimal) << p.message;
        const double d = (p.w - wm).norm();
        EXPECT_LE(d, prev + 1e-9);
        prev = d;
    }
    EXPECT_LE(prev, 0.05);
}

TEST(CvarPen, VarianceCapBelowMinimumIsInfeasible) {
    const auto s = gaussian_sample(4, 80, 6);
    const double R = mid_target(s);
    const VectorXd wm = solve_markowitz(s.mean(), s.covariance(), R);
    const double vmin = wm.dot(s.covariance() * wm) / 80.0;
    const auto p = solve_cvar_pen(s, 0.95, R, Caps{0.5 * vmin, kInf});
    EXPECT_EQ(p.status, SolveStatus::Infeasible);
}

TEST(CvarPen, ForcedFallbackKeepsCertificate) {
    SolverOptions opts;
    opts.force_fallback = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto s = gaussian_sample(5, 100, 300 + seed);
        const double R = mid_target(s);
        const auto e = solve_cvar_emp(s, 0.95, R);
        const Caps caps = anchored_caps(s, 0.95, R, e, 0.5, 0.9);
        const auto a = solve_cvar_pen(s, 0.95, R, caps);
        const auto b = solve_cvar_pen(s, 0.95, R, caps, opts);
        ASSERT_EQ(b.status, SolveStatus::FallbackOptimal) << b.message;
        EXPECT_TRUE(b.tight);
        EXPECT_LE(verify_tightness(s, b).max_violation, 1e-6);
        // The perturbation shifts the objective by at most delta * max z.
        EXPECT_NEAR(b.objective, a.objective, 1e-4 * (1 + b.z.maxCoeff()) + 1e-8);
    }
}

TEST(ProblemIo, RoundTrip) {
    const auto s = gaussian_sample(3, 7, 1);
    ProblemInstance p{s.data(), 0.95, 0.0007, Caps{1e-6, kInf}};
    const ProblemInstance q = load_problem(dump_problem(p));
    EXPECT_EQ(q.returns, p.returns);
    EXPECT_EQ(q.beta, p.beta);
    ASSERT_TRUE(q.R && q.caps);
    EXPECT_EQ(*q.R, *p.R);
    EXPECT_EQ(q.caps->u1, 1e-6);
    EXPECT_TRUE(std::isinf(q.caps->u2));
    EXPECT_THROW(load_problem("{\"beta\": 0.9}"), InputError);
}
