#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace pbr::ipm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// 0.5 theta'P theta + q'theta + r <= 0, P symmetric positive semidefinite.
struct ThetaQuadratic {
    MatrixXd P;
    VectorXd q;
    double r = 0.0;
};

/// kappa z'Omega z + q'theta + r <= 0 with Omega = (I - 11'/n)/(n-1).
struct ZVariance {
    double kappa = 1.0;
    VectorXd q;
    double r = 0.0;
};

/// Convex program over (theta, z):
///
///   min  c_theta'theta + c_z'z
///   s.t. A theta = b,  G theta - z <= 0,  z >= 0,  F theta <= h,
///        theta quadratics, optional z-variance constraint.
///
/// theta is small (a handful of variables); z has one entry per scenario.
struct Program {
    VectorXd c_theta;
    VectorXd c_z;
    MatrixXd A;
    VectorXd b;
    MatrixXd G;
    MatrixXd F;
    VectorXd h;
    std::vector<ThetaQuadratic> quadratics;
    std::optional<ZVariance> zvar;
    VectorXd theta0;
};

struct Options {
    double tol = 1e-10;
    int max_iter = 200;
    double divergence_bound = 1e10;
    double step_fraction = 0.995;
};

enum class Outcome { Converged, MaxIterations, Diverged, NumericalError };

struct Result {
    Outcome outcome = Outcome::NumericalError;
    VectorXd theta;
    VectorXd z;
    VectorXd nu;       ///< multipliers of A theta - b
    VectorXd y_scen;   ///< multipliers of G theta - z <= 0
    VectorXd y_zpos;   ///< multipliers of -z <= 0
    VectorXd y_lin;    ///< multipliers of F theta <= h
    VectorXd y_quad;   ///< multipliers of the theta quadratics
    double y_zvar = 0.0;
    double objective = 0.0;
    double complementarity = 0.0;  ///< sum of slack times multiplier
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
    std::string message;
};

Result solve(const Program& prog, const Options& opts = {});

}  // namespace pbr::ipm
