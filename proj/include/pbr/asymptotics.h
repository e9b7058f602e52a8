#pragma once

#include <Eigen/Dense>

#include <ostream>
#include <vector>

namespace pbr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Population solution of the dualized problem, theta0 = (alpha0, w0).
struct ThetaZero {
    double alpha = 0.0;
    VectorXd w;
};

/// Asymptotic covariance of the M-estimator theta = (alpha, v) and of the
/// induced weights w = w1 + Lv.
struct AsymptoticCov {
    MatrixXd a_mat;
    MatrixXd b_mat;
    MatrixXd sigma_theta;
    MatrixXd sigma_w;
    double lambda0 = 0.0;
    double lambda1 = 0.0;
    ThetaZero theta0;
    double condition = 0.0;
};

/// Gaussian key statistics for Z1 = -alpha - w'X with alpha the beta-VaR of
/// -w'X, and the directions d_j, d_l.
struct KeyStats {
    double p0 = 0.0;          ///< density of Z1 at zero
    double e_max = 0.0;       ///< E[max(Z1, 0)]
    double e_ljx_ind = 0.0;   ///< E[d_j'X 1(Z1 >= 0)]
    double e_ljx_cond = 0.0;  ///< E[d_j'X | Z1 = 0]
    double e_quad_ind = 0.0;  ///< E[d_j'X d_l'X 1(Z1 >= 0)]
    double e_quad_cond = 0.0; ///< E[d_j'X d_l'X | Z1 = 0]
    double g_val = 0.0;       ///< g for Z2 = d_j'X
    double h_val = 0.0;       ///< h for Z2 = d_j'X
    double mu1 = 0.0;
    double sigma1 = 0.0;
    double sigma12 = 0.0;     ///< Cov(Z1, d_j'X)
};

/// E[Z2^2 1(Z1 >= 0)] for jointly Gaussian (Z1, Z2) with P(Z1 >= 0) = 1 - beta.
double g_function(double mu2, double sigma1, double sigma2, double sigma12, double beta);

/// E[Z2^2 | Z1 = 0] under the same assumptions.
double h_function(double mu2, double sigma1, double sigma2, double sigma12, double beta);

KeyStats key_stats(const VectorXd& mu, const MatrixXd& sigma, const VectorXd& w, double beta, const VectorXd& dir_j,
                   const VectorXd& dir_l);

/// Index form: j, l in 2..p select the weight-map directions e_j - e_1.
KeyStats key_stats(const VectorXd& mu, const MatrixXd& sigma, const VectorXd& w, double beta, Eigen::Index j,
                   Eigen::Index l);

/// Minimizes -(1 + lambda0) w'mu + G sqrt(w'Sigma w) + lambda1 w'Sigma w over
/// w'1 = 1 with the Gaussian constant G; alpha0 is the Gaussian VaR of -w0'X.
ThetaZero population_dualized_solution(const VectorXd& mu, const MatrixXd& sigma, double beta, double lambda0,
                                       double lambda1 = 0.0);

AsymptoticCov matrix_a0_b0(const VectorXd& mu, const MatrixXd& sigma, double beta, double lambda0,
                           const ThetaZero& theta0);

AsymptoticCov matrix_a1_b1(const VectorXd& mu, const MatrixXd& sigma, double beta, double lambda0, double lambda1,
                           const ThetaZero& theta0);

/// Moments entering B1 for directions d_j, d_l (e.g. columns of the weight Jacobian).
struct CrossMoments {
    double b0j_b1l = 0.0;
    double b1j_b1l = 0.0;
    double b01_b1l = 0.0;
};

CrossMoments b1_cross_moments(const VectorXd& mu, const MatrixXd& sigma, double beta, double lambda0,
                              const ThetaZero& theta0, const VectorXd& dir_j, const VectorXd& dir_l);

struct FrontierStd {
    double std_mean = 0.0;
    double std_cvar = 0.0;
};

/// Delta-method standard deviations of the true mean and true CVaR of the
/// estimated portfolio with n observations; g_const is the elliptical G.
FrontierStd frontier_std(const AsymptoticCov& cov, const VectorXd& mu, const MatrixXd& sigma, double g_const, double n);

/// C(beta) with Var[max(Z1, 0)] = C(beta) sigma1^2.
double cvar_var_redundancy_constant(double beta);

enum class ChanceDirection { ToCap, ToThreshold };

/// ToCap: U1 = (t / q)^2; ToThreshold: t = q sqrt(U1); q = Phi^-1(1 - eps/2).
double chance_mapping(double value, double epsilon, ChanceDirection direction);

struct TheoryRow {
    double n = 0.0;
    double lambda0 = 0.0;
    double lambda1 = 0.0;
    double std_mean = 0.0;
    double std_cvar = 0.0;
};

void write_theory_csv(std::ostream& os, const std::vector<TheoryRow>& rows);

}  // namespace pbr
