#include "pbr/errors.h"
#include "pbr/models.h"
#include "pbr/normal.h"

#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include <random>

using namespace pbr;

namespace {

GaussianModel gauss(Eigen::Index p) {
    return GaussianModel{synthetic_mu().head(p), synthetic_sigma().topLeftCorner(p, p)};
}

JumpMixtureModel jump(Eigen::Index p, double q = 0.05) {
    const VectorXd mu = synthetic_mu().head(p);
    const MatrixXd sigma = synthetic_sigma().topLeftCorner(p, p);
    return JumpMixtureModel{mu, sigma, q, 1.0, default_jump_offset(mu, sigma)};
}

// Semi-analytic CVaR of the loss -w'X under the jump mixture.
double mixture_cvar(const JumpMixtureModel& m, const VectorXd& w, double beta) {
    const double mean = -w.dot(m.mu);
    const double sd = std::sqrt(w.dot(m.sigma * w));
    const double s = w.sum();
    const double shift = -w.dot(m.f);  // jump loss is shift + s * E, E ~ Exp(lambda)
    const double lam = m.lambda_exp / s;
    const double q = m.q_jump;
    auto tail = [&](double a) {
        const double jt = a <= shift ? 1.0 : std::exp(-lam * (a - shift));
        return (1 - q) * normal_sf((a - mean) / sd) + q * jt;
    };
    double lo = -50.0, hi = 50.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (tail(mid) > 1 - beta ? lo : hi) = mid;
    }
    const double a = 0.5 * (lo + hi);
    const double d = (a - mean) / sd;
    const double normal_part = sd * normal_pdf(d) - (a - mean) * normal_sf(d);
    const double jump_part = a >= shift ? std::exp(-lam * (a - shift)) / lam : shift + 1.0 / lam - a;
    return a + ((1 - q) * normal_part + q * jump_part) / (1 - beta);
}

}  // namespace

TEST(Sample, SeedDeterminism) {
    for (const MarketModel& m : {MarketModel{gauss(4)}, MarketModel{EllipticalModel{gauss(4).mu, gauss(4).sigma}},
                                 MarketModel{jump(4)}}) {
        const auto a = sample(m, 50, 42);
        const auto b = sample(m, 50, 42);
        const auto c = sample(m, 50, 43);
        EXPECT_EQ(a.data(), b.data());
        EXPECT_NE(a.data(), c.data());
    }
}

TEST(Sample, GaussianLawOfLargeNumbers) {
    const Eigen::Index p = 3;
    const GaussianModel m{VectorXd::Zero(p), MatrixXd::Identity(p, p)};
    const auto s = sample(m, 100000, 9);
    for (Eigen::Index j = 0; j < p; ++j) EXPECT_LE(std::abs(s.mean()(j)), 4.0 * p / std::sqrt(1e5));
    EXPECT_NEAR(s.covariance()(0, 0), 1.0, 0.02);
}

TEST(Sample, DegenerateSwitchAndMixingReduceToGaussian) {
    const auto g = gauss(5);
    const auto a = sample(g, 200, 11);
    const auto b = sample(jump(5, 0.0), 200, 11);
    const auto c = sample(EllipticalModel{g.mu, g.sigma, PointMassMixing{1.0}}, 200, 11);
    EXPECT_EQ(a.data(), b.data());
    EXPECT_EQ(a.data(), c.data());
}

TEST(Sample, JumpFrequencyMatchesSwitchProbability) {
    const auto m = jump(4);
    const Eigen::Index n = 40000;
    const auto s = sample(m, n, 2024);
    int jumps = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const VectorXd y = s.data().col(i) - m.f;
        if ((y.array() - y(0)).abs().maxCoeff() < 1e-12) ++jumps;
    }
    const double se = std::sqrt(0.05 * 0.95 / static_cast<double>(n));
    EXPECT_NEAR(jumps / static_cast<double>(n), 0.05, 4 * se);
}

TEST(Sample, EllipticalScaleMatchesMixingMoments) {
    // Var(lambda Z) = E[lambda^2] = k(k+1) theta^2 for Gamma(k, theta).
    const EllipticalModel m{VectorXd::Zero(1), MatrixXd::Identity(1, 1), GammaMixing{3.0, 0.5}};
    const auto s = sample(m, 200000, 3);
    EXPECT_NEAR(s.covariance()(0, 0), 3.0, 0.05);
}

TEST(Validate, RejectsBadParameters) {
    MatrixXd bad(2, 2);
    bad << 1, 2, 2, 1;
    EXPECT_THROW(sample(GaussianModel{VectorXd::Zero(2), bad}, 10, 1), ModelError);
    auto j = jump(3);
    j.q_jump = 1.0;
    EXPECT_THROW(validate(MarketModel{j}), ModelError);
    j = jump(3);
    j.lambda_exp = 0.0;
    EXPECT_THROW(validate(MarketModel{j}), ModelError);
    EXPECT_THROW(sample(gauss(3), 1, 1), InputError);
}

TEST(PopulationCvar, GaussianTailMeanOracle) {
    // Unit-variance, zero-mean portfolio: CVaR is the standard normal tail mean.
    const GaussianModel m{VectorXd::Zero(1), MatrixXd::Identity(1, 1)};
    const double beta = 0.95;
    const double z = normal_quantile(beta);
    boost::math::quadrature::tanh_sinh<double> integrator;
    const double tail = integrator.integrate([](double x) { return x * normal_pdf(x); }, z, 40.0);
    const auto pp = population_cvar(m, VectorXd::Ones(1), beta);
    EXPECT_NEAR(pp.cvar, tail / (1 - beta), 1e-9);
    EXPECT_NEAR(pp.cvar, 2.0627, 1e-4);
    EXPECT_NEAR(pp.g_const, gaussian_g_constant(beta), 1e-15);
}

TEST(PopulationCvar, PointMassMixingEqualsGaussian) {
    const auto g = gauss(5);
    const VectorXd w = VectorXd::Constant(5, 0.2);
    const auto a = population_cvar(g, w, 0.95);
    const auto b = population_cvar(EllipticalModel{g.mu, g.sigma, PointMassMixing{1.0}}, w, 0.95);
    EXPECT_NEAR(a.cvar, b.cvar, 1e-8);
}

TEST(PopulationCvar, CashTranslation) {
    const double c = 0.003;
    VectorXd w(4);
    w << 0.4, 0.3, 0.2, 0.1;
    auto g = gauss(4);
    auto gs = g;
    gs.mu.array() += c;
    EXPECT_NEAR(population_cvar(gs, w, 0.95).cvar, population_cvar(g, w, 0.95).cvar - c, 1e-14);
    EllipticalModel e{g.mu, g.sigma};
    EllipticalModel es{gs.mu, gs.sigma};
    EXPECT_NEAR(population_cvar(es, w, 0.95).cvar, population_cvar(e, w, 0.95).cvar - c, 1e-12);
}

TEST(PopulationCvar, RejectsUnnormalizedWeights) {
    EXPECT_THROW(population_cvar(gauss(3), VectorXd::Ones(3), 0.95), InputError);
}

TEST(EllipticalG, MatchesMonteCarlo) {
    const double beta = 0.95;
    const double G = elliptical_g_constant(GammaMixing{3.0, 0.5}, beta);
    const std::size_t N = 2000000;
    std::mt19937_64 rng(17);
    boost::random::gamma_distribution<double> gam(3.0, 0.5);
    boost::random::normal_distribution<double> nd;
    std::vector<double> s(N);
    for (auto& v : s) v = gam(rng) * nd(rng);
    std::sort(s.begin(), s.end());
    const std::size_t k = static_cast<std::size_t>(std::ceil(N * beta));
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = k; i < N; ++i) {
        sum += s[i];
        sum2 += s[i] * s[i];
    }
    const double m = static_cast<double>(N - k);
    const double mc = sum / m;
    const double se = std::sqrt((sum2 / m - mc * mc) / m);
    EXPECT_NEAR(G, mc, 4 * se);
    EXPECT_NEAR(elliptical_g_constant(PointMassMixing{1.0}, beta), gaussian_g_constant(beta), 1e-14);
}

TEST(PopulationCvar, JumpMatchesSemiAnalyticMixture) {
    const auto m = jump(5);
    const PopulationEvaluator eval(m, 0.95);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 10; ++rep) {
        VectorXd w(5);
        for (Eigen::Index j = 0; j < 5; ++j) w(j) = 0.2 + 0.3 * nd(rng);
        w.array() += (1.0 - w.sum()) / 5.0;
        if (w.sum() <= 0.2) continue;
        const double exact = mixture_cvar(m, w, 0.95);
        const auto pp = eval.evaluate(w);
        EXPECT_NEAR(pp.cvar, exact, 0.01 * std::abs(exact) + 1e-3) << "rep " << rep;
        EXPECT_NEAR(pp.ret, w.dot(model_expected_return(m)), 1e-14);
    }
}

TEST(PopulationFrontier, SymmetricTwoAssetExample) {
    VectorXd mu(2);
    mu << 0.1, 0.2;
    const auto pts = population_frontier(GaussianModel{mu, MatrixXd::Identity(2, 2)}, 0.95, {0.15});
    EXPECT_NEAR(pts[0].w0(0), 0.5, 1e-14);
    EXPECT_NEAR(pts[0].w0(1), 0.5, 1e-14);
}

TEST(PopulationFrontier, EllipticalSharesGaussianWeightsAndGaussianIsConvex) {
    const auto g = gauss(6);
    std::vector<double> grid;
    for (int i = 0; i < 12; ++i) grid.push_back(0.0006 + 0.00005 * i);
    const auto a = population_frontier(g, 0.95, grid);
    const auto b = population_frontier(EllipticalModel{g.mu, g.sigma}, 0.95, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_LE((a[i].w0 - b[i].w0).norm(), 1e-12);
        EXPECT_NEAR(a[i].w0.dot(g.mu), grid[i], 1e-14);
    }
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        EXPECT_GE(a[i - 1].cvar + a[i + 1].cvar - 2 * a[i].cvar, -1e-14);
    }
}

TEST(PopulationFrontier, JumpPointBeatsFeasiblePerturbations) {
    const VectorXd mu = synthetic_mu().head(6);
    const MatrixXd sigma = synthetic_sigma().topLeftCorner(6, 6);
    const JumpMixtureModel m{mu, sigma, 0.05, 1.0, default_jump_offset(mu, sigma)};
    const VectorXd mean = model_expected_return(m);
    const PopulationEvaluator eval(m, 0.95);
    // Null space of [1'; mean'].
    MatrixXd C(2, 6);
    C.row(0).setOnes();
    C.row(1) = mean.transpose();
    const MatrixXd N = Eigen::FullPivLU<MatrixXd>(C).kernel();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    const double lo = mean.minCoeff(), hi = mean.maxCoeff();
    for (double t : {0.2, 0.5, 0.8}) {
        const double R = lo + t * (hi - lo);
        const auto pt = population_frontier(m, 0.95, {R}).front();
        EXPECT_NEAR(pt.w0.sum(), 1.0, 1e-12);
        EXPECT_NEAR(pt.w0.dot(mean), R, 1e-14);
        EXPECT_EQ(pt.cvar, eval.evaluate(pt.w0).cvar);
        for (int k = 0; k < 200; ++k) {
            VectorXd y(N.cols());
            for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = nd(rng);
            const double step = std::pow(10.0, -4.0 + 3.0 * (k % 4) / 3.0);
            const VectorXd w = pt.w0 + step * N * y / y.norm();
            EXPECT_GE(eval.evaluate(w).cvar, pt.cvar - 1e-12 * std::abs(pt.cvar)) << R << " " << step;
        }
    }
}

TEST(Splitmix, KnownValues) {
    EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
    EXPECT_NE(splitmix64(1), splitmix64(2));
}
