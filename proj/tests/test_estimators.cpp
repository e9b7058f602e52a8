#include "pbr/errors.h"
#include "pbr/estimators.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace pbr;

namespace {

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

VectorXd normals(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
    return v;
}

// RU objective evaluated directly at a given alpha.
double ru_objective(const VectorXd& L, double beta, double a) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < L.size(); ++i) s += std::max(L(i) - a, 0.0);
    return a + s / (static_cast<double>(L.size()) * (1.0 - beta));
}

double type1_objective(const VectorXd& L, double beta, double eps, double a) {
    const Eigen::Index K = order_index(L.size(), beta);
    const double m = static_cast<double>(L.size() - K + 1);
    double s = 0.0;
    for (Eigen::Index i = 0; i < L.size(); ++i) s += std::max(L(i) - a, 0.0);
    return (1.0 - eps) * a + s / m;
}

}  // namespace

TEST(OrderIndex, SnapsDecimalProducts) {
    EXPECT_EQ(order_index(100, 0.95), 95);
    EXPECT_EQ(order_index(5, 0.6), 3);
    EXPECT_EQ(order_index(2, 0.5), 1);
    EXPECT_EQ(order_index(7, 0.95), 7);
    EXPECT_EQ(order_index(1000, 0.95), 950);
}

TEST(RuCvar, FiveLossExample) {
    const auto e = ru_cvar(vec({1, 2, 3, 4, 5}), 0.6);
    EXPECT_NEAR(e.value, 4.5, 1e-14);
    EXPECT_DOUBLE_EQ(e.alpha_interval.lo, 3.0);
    EXPECT_DOUBLE_EQ(e.alpha_interval.hi, 4.0);
}

TEST(RuCvar, ConstantLosses) {
    const auto e = ru_cvar(VectorXd::Constant(40, -0.7), 0.95);
    EXPECT_NEAR(e.value, -0.7, 1e-14);
}

TEST(RuCvar, TwoPointFlatObjective) {
    const auto e = ru_cvar(vec({0, 10}), 0.5);
    EXPECT_NEAR(e.value, 10.0, 1e-14);
    EXPECT_DOUBLE_EQ(e.alpha_interval.lo, 0.0);
    EXPECT_DOUBLE_EQ(e.alpha_interval.hi, 10.0);
}

TEST(RuCvar, MatchesNodeEnumeration) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const VectorXd L = normals(37 + static_cast<Eigen::Index>(seed), seed);
        for (double beta : {0.5, 0.8, 0.95}) {
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < L.size(); ++i) best = std::min(best, ru_objective(L, beta, L(i)));
            const auto e = ru_cvar(L, beta);
            EXPECT_NEAR(e.value, best, 1e-12 * (1.0 + std::abs(best)));
            EXPECT_NEAR(ru_objective(L, beta, e.alpha), e.value, 1e-12 * (1.0 + std::abs(best)));
        }
    }
}

TEST(Type2Cvar, Examples) {
    const auto e = type2_cvar(vec({1, 2, 3, 4, 5}), 0.6);
    EXPECT_NEAR(e.value, 4.0, 1e-14);
    EXPECT_DOUBLE_EQ(e.alpha, 3.0);
    EXPECT_NEAR(type2_cvar(vec({0, 10}), 0.5).value, 5.0, 1e-14);
    EXPECT_NEAR(type2_cvar(VectorXd::Constant(20, 2.5), 0.95).value, 2.5, 1e-14);
}

TEST(Type1Cvar, Examples) {
    const auto e = type1_cvar(vec({1, 2, 3, 4, 5}), 0.6, 0.1);
    EXPECT_NEAR(e.value, 3.7, 1e-14);
    EXPECT_DOUBLE_EQ(e.alpha, 3.0);
    const double c = 1.3;
    EXPECT_NEAR(type1_cvar(VectorXd::Constant(20, c), 0.95, 0.01).value, c * 0.99, 1e-14);
}

TEST(Type1Cvar, EpsilonDomain) {
    const VectorXd L = vec({1, 2, 3, 4, 5});
    EXPECT_THROW(type1_cvar(L, 0.6, 0.0), DomainError);
    EXPECT_THROW(type1_cvar(L, 0.6, 1.0 / 3.0), DomainError);
    EXPECT_NO_THROW(type1_cvar(L, 0.6, 0.33));
}

TEST(Type1Cvar, OffsetFromTypeTwo) {
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        const VectorXd L = normals(20 + static_cast<Eigen::Index>(seed % 60), seed);
        const double beta = 0.5 + 0.45 * static_cast<double>(seed % 10) / 10.0;
        const Eigen::Index K = order_index(L.size(), beta);
        const double eps = 0.9 / static_cast<double>(L.size() - K + 1);
        const double lhs = type1_cvar(L, beta, eps).value + eps * empirical_var(L, beta);
        EXPECT_NEAR(lhs, type2_cvar(L, beta).value, 1e-13);
    }
}

TEST(Type1Cvar, UniqueMinimizerAtOrderStatistic) {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const VectorXd L = normals(50, seed + 1000);
        const double beta = 0.9;
        const double eps = 0.5 / static_cast<double>(L.size() - order_index(L.size(), beta) + 1);
        const double var = empirical_var(L, beta);
        const double at_var = type1_objective(L, beta, eps, var);
        for (Eigen::Index i = 0; i < L.size(); ++i) {
            if (L(i) == var) continue;
            EXPECT_GT(type1_objective(L, beta, eps, L(i)), at_var);
        }
        EXPECT_DOUBLE_EQ(type1_cvar(L, beta, eps).alpha, var);
    }
}

// The gap is (tail mean - VaR)/m + eps * VaR with m = n - ceil(n beta) + 1,
// about 25/n for standard-normal losses at beta = 0.95 with the default eps.
TEST(Type1Cvar, RootNConsistencyGap) {
    double prev = std::numeric_limits<double>::infinity();
    for (Eigen::Index n : {500, 5000}) {
        const VectorXd L = normals(n, 77 + static_cast<std::uint64_t>(n));
        const double gap = std::abs(ru_cvar(L, 0.95).value - type1_cvar(L, 0.95).value);
        const double m = static_cast<double>(n - order_index(n, 0.95) + 1);
        const double var = empirical_var(L, 0.95);
        // n * beta is an integer here, so RU is the mean of the m - 1 losses above VaR.
        const double top = type2_cvar(L, 0.95).value * m - var;
        const double predicted = top / (m - 1.0) - (top + var) / m + 0.5 * var / m;
        EXPECT_NEAR(gap, std::abs(predicted), 1e-12);
        EXPECT_LE(gap * static_cast<double>(n), 30.0);
        const double root_n_gap = gap * std::sqrt(static_cast<double>(n));
        EXPECT_LT(root_n_gap, prev);
        prev = root_n_gap;
    }
}

TEST(EmpiricalVar, OrderStatistic) {
    EXPECT_DOUBLE_EQ(empirical_var(vec({1, 2, 3, 4, 5}), 0.6), 3.0);
    EXPECT_DOUBLE_EQ(empirical_var(vec({5, 1, 4, 2, 3}), 0.6), 3.0);
    EXPECT_DOUBLE_EQ(empirical_var(vec({5, 1, 9, 2, 3}), 0.99), 9.0);
}

TEST(PenaltyValues, ScalarP1) {
    // Two-point data with sample variance exactly 4.
    MatrixXd X(1, 100);
    for (Eigen::Index i = 0; i < 100; ++i) X(0, i) = (i % 2 == 0) ? 1.0 : -1.0;
    X *= std::sqrt(4.0 * 99.0 / 100.0);
    const ReturnsSample s(X);
    ASSERT_NEAR(s.covariance()(0, 0), 4.0, 1e-12);
    EXPECT_NEAR(penalty_values(s, VectorXd::Ones(1), 0.0, 0.95).p1, 0.04, 1e-14);
}

TEST(PenaltyValues, ConstantZ) {
    const MatrixXd X = MatrixXd::Constant(3, 25, 0.01);
    const ReturnsSample s(X);
    const auto pv = penalty_values(s, VectorXd::Constant(3, 1.0 / 3.0), -0.5, 0.95);
    EXPECT_EQ(pv.p2, 0.0);
}

TEST(PenaltyValues, TwoPassVarianceOracle) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> d;
    for (int rep = 0; rep < 50; ++rep) {
        MatrixXd X(4, 60);
        for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = 0.01 * d(rng);
        const ReturnsSample s(X);
        VectorXd w(4);
        for (Eigen::Index j = 0; j < 4; ++j) w(j) = d(rng);
        w /= w.sum();
        const double alpha = 0.01 * d(rng);
        const double beta = 0.9;
        std::vector<double> z(60);
        double mean = 0.0;
        for (Eigen::Index i = 0; i < 60; ++i) {
            z[static_cast<std::size_t>(i)] = std::max(0.0, -w.dot(X.col(i)) - alpha);
            mean += z[static_cast<std::size_t>(i)];
        }
        mean /= 60.0;
        double ss = 0.0;
        for (double v : z) ss += (v - mean) * (v - mean);
        const double expected = ss / 59.0 / (60.0 * (1 - beta) * (1 - beta));
        const auto pv = penalty_values(s, w, alpha, beta);
        EXPECT_NEAR(pv.p2, expected, 1e-12 * std::max(1.0, expected));
        EXPECT_NEAR(centered_quadratic(Eigen::Map<VectorXd>(z.data(), 60)), ss / 59.0, 1e-15);
    }
}

TEST(ReturnsSample, Validation) {
    EXPECT_THROW(ReturnsSample(MatrixXd::Zero(2, 1)), InputError);
    MatrixXd bad = MatrixXd::Zero(2, 3);
    bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(ReturnsSample{bad}, InputError);
    EXPECT_THROW(ru_cvar(VectorXd::Ones(3), 1.0), DomainError);
}
