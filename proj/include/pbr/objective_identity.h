#pragma once

#include "pbr/estimators.h"

namespace pbr {

/// theta = (alpha, v) with weights w = w1 + L v, w1 = (1 - v'1, 0, ..., 0),
/// L = [0; I]. The weights always sum to one.
struct ThetaPoint {
    double alpha = 0.0;
    VectorXd v;

    VectorXd weights() const;
};

/// dw/dv = [-1'; I], the p x (p-1) Jacobian of the weight map.
MatrixXd weight_jacobian(Eigen::Index p);

/// Sample-average form of the dualized penalized objective:
///   mean_i m(X_i) + lambda1 w'Sigma_hat w + lambda2 * (sample variance of z),
/// m(x) = alpha + z(x)/(1-beta) - lambda0 w'x, z(x) = max(0, -w'x - alpha).
double eval_mn(const ReturnsSample& sample, const ThetaPoint& theta, double beta, double lambda0, double lambda1,
               double lambda2);

/// The same objective as an average over ordered pairs i != j of the kernel
///   (m(x_i) + m(x_j))/2 + lambda1/2 (w'(x_i - x_j))^2 + lambda2/2 (z(x_i) - z(x_j))^2.
double eval_mn_u(const ReturnsSample& sample, const ThetaPoint& theta, double beta, double lambda0, double lambda1,
                 double lambda2);

}  // namespace pbr
