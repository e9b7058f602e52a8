#pragma once

#include <Eigen/Dense>

#include <optional>

namespace pbr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Immutable matrix of return observations (p assets by n observations)
/// together with its sample mean and sample covariance.
class ReturnsSample {
public:
    explicit ReturnsSample(MatrixXd data);

    const MatrixXd& data() const { return data_; }
    const VectorXd& mean() const { return mean_; }
    /// Sample covariance with divisor n - 1.
    const MatrixXd& covariance() const { return cov_; }

    Eigen::Index assets() const { return data_.rows(); }
    Eigen::Index observations() const { return data_.cols(); }

    /// Portfolio losses -w'X_i for every observation.
    VectorXd losses(const VectorXd& w) const;

private:
    MatrixXd data_;
    VectorXd mean_;
    MatrixXd cov_;
};

enum class CvarKind { RU, Type1, Type2 };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct CvarEstimate {
    double value = 0.0;
    double alpha = 0.0;
    Interval alpha_interval;
    CvarKind kind = CvarKind::RU;
};

struct PenaltyValue {
    double p1 = 0.0;
    double p2 = 0.0;
    double gamma0_sq_hat = 0.0;
};

/// ceil(n * beta), with n * beta snapped to an integer when it is one up to
/// rounding of the decimal beta (e.g. 100 * 0.95).
Eigen::Index order_index(Eigen::Index n, double beta);

/// min over alpha of alpha + (n(1-beta))^-1 sum (L_i - alpha)^+.
CvarEstimate ru_cvar(const VectorXd& losses, double beta);

/// Average of the losses at or above the ceil(n beta)-th order statistic.
CvarEstimate type2_cvar(const VectorXd& losses, double beta);

/// Type 1 estimator with perturbation eps in (0, 1/(n - ceil(n beta) + 1)).
/// Defaults to half the upper bound.
CvarEstimate type1_cvar(const VectorXd& losses, double beta, std::optional<double> eps = std::nullopt);

/// The ceil(n beta)-th order statistic of the losses.
double empirical_var(const VectorXd& losses, double beta);

/// Sample variances of the mean and CVaR estimators at (w, alpha).
PenaltyValue penalty_values(const ReturnsSample& sample, const VectorXd& w, double alpha, double beta);

/// z' Omega z with Omega = (I - 11'/n)/(n-1), i.e. the sample variance of z.
double centered_quadratic(const VectorXd& z);

}  // namespace pbr
