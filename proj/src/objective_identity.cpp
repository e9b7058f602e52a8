#include "pbr/objective_identity.h"

#include "pbr/errors.h"

#include <cmath>

namespace pbr {

VectorXd ThetaPoint::weights() const {
    VectorXd w(v.size() + 1);
    w(0) = 1.0 - v.sum();
    w.tail(v.size()) = v;
    return w;
}

MatrixXd weight_jacobian(Eigen::Index p) {
    if (p < 2) {
        throw InputError("weight_jacobian: need p >= 2");
    }
    MatrixXd D = MatrixXd::Zero(p, p - 1);
    D.row(0).setConstant(-1.0);
    D.bottomRows(p - 1).setIdentity();
    return D;
}

namespace {

struct Pieces {
    VectorXd wx;  // w'X_i
    VectorXd z;
    VectorXd m;
};

Pieces pieces(const ReturnsSample& sample, const ThetaPoint& theta, double beta, double lambda0, const char* fn) {
    if (theta.v.size() + 1 != sample.assets()) {
        throw InputError(std::string(fn) + ": theta dimension does not match the sample");
    }
    if (!(beta > 0.0 && beta < 1.0) || !std::isfinite(theta.alpha) || !theta.v.allFinite()) {
        throw InputError(std::string(fn) + ": invalid theta or beta");
    }
    const VectorXd w = theta.weights();
    Pieces p;
    p.wx = sample.data().transpose() * w;
    p.z = (-p.wx.array() - theta.alpha).max(0.0);
    p.m = (theta.alpha + p.z.array() / (1.0 - beta) - lambda0 * p.wx.array()).matrix();
    return p;
}

}  // namespace

double eval_mn(const ReturnsSample& sample, const ThetaPoint& theta, double beta, double lambda0, double lambda1,
               double lambda2) {
    const Pieces p = pieces(sample, theta, beta, lambda0, "eval_mn");
    const VectorXd w = theta.weights();
    const double n = static_cast<double>(sample.observations());
    const VectorXd zc = p.z.array() - p.z.mean();
    return p.m.mean() + lambda1 * w.dot(sample.covariance() * w) + lambda2 / (n - 1.0) * zc.squaredNorm();
}

double eval_mn_u(const ReturnsSample& sample, const ThetaPoint& theta, double beta, double lambda0, double lambda1,
                 double lambda2) {
    const Pieces p = pieces(sample, theta, beta, lambda0, "eval_mn_u");
    const Eigen::Index n = sample.observations();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dw = p.wx(i) - p.wx(j);
            const double dz = p.z(i) - p.z(j);
            total += 0.5 * (p.m(i) + p.m(j)) + 0.5 * lambda1 * dw * dw + 0.5 * lambda2 * dz * dz;
        }
    }
    const double nn = static_cast<double>(n);
    return total / (nn * (nn - 1.0));
}

}  // namespace pbr
