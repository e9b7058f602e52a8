#pragma once

#include "pbr/estimators.h"
#include "pbr/penalty.h"

#include <optional>
#include <string>

namespace pbr {

enum class SolveStatus { Optimal, FallbackOptimal, Infeasible, NumericFailure };

const char* to_string(SolveStatus s);

/// Multipliers in the sign convention of the Lagrangian
///   obj + eta2'(-X'w - alpha 1 - z) - eta1'z + nu1 (R - w'mu) + nu2 (1 - w'1)
///       + lambda1 (w'Sigma w / n - U1) + lambda2 (z'Omega z / (n (1-beta)^2) - U2).
struct Duals {
    double nu1 = 0.0;
    double nu2 = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    VectorXd eta1;
    VectorXd eta2;
};

struct PortfolioSolution {
    double alpha = 0.0;
    VectorXd w;
    VectorXd z;
    double objective = 0.0;
    Duals duals;
    SolveStatus status = SolveStatus::NumericFailure;
    bool tight = false;
    double max_violation = 0.0;
    double kkt_residual = 0.0;
    double duality_gap = 0.0;
    int iterations = 0;
    /// True when the box |w_j| <= W_max had to be added to bound the LP.
    bool box_guard = false;
    std::string message;
};

struct SolverOptions {
    double tol = 1e-10;
    int max_iter = 200;
    double box_bound = 10.0;
    double fallback_delta = 1e-4;
    double degenerate_tol = 1e-8;
    /// Run the degenerate-dual fallback even when it is not detected.
    bool force_fallback = false;
};

/// Empirical CVaR LP with return target w'mu_hat = R and budget w'1 = 1.
PortfolioSolution solve_cvar_emp(const ReturnsSample& sample, double beta, double R, const SolverOptions& opts = {});

/// Same LP on raw scenarios, with the return constraint taken against an
/// arbitrary mean vector (e.g. a known population mean).
PortfolioSolution solve_cvar_scenarios(const MatrixXd& scenarios, const VectorXd& mean, double beta, double R,
                                       const SolverOptions& opts = {});

/// min CVaR_hat(-w'X) - lambda0 w'mu_hat over w'1 = 1.
PortfolioSolution solve_cvar_dualized(const ReturnsSample& sample, double beta, double lambda0,
                                      const SolverOptions& opts = {});

/// min CVaR_hat - lambda0 w'mu_hat + lambda1 w'Sigma_hat w + lambda2 z'Omega z over w'1 = 1.
/// With lambda2 > 0 the relaxation is not guaranteed tight; check `tight`.
PortfolioSolution solve_cvar_dualized(const ReturnsSample& sample, double beta, const Dualized& weights,
                                      const SolverOptions& opts = {});

/// Minimum-variance portfolio with w'mu = R and w'1 = 1.
VectorXd solve_markowitz(const VectorXd& mu, const MatrixXd& sigma, double R);

/// Global minimum-variance portfolio Sigma^-1 1 / (1'Sigma^-1 1).
VectorXd min_variance_portfolio(const MatrixXd& sigma);

/// Penalized CVaR problem: the empirical LP plus w'Sigma w/n <= U1 and
/// z'Omega z/(n(1-beta)^2) <= U2, solved through its convex relaxation.
PortfolioSolution solve_cvar_pen(const ReturnsSample& sample, double beta, double R, const Caps& caps,
                                 const SolverOptions& opts = {});

/// Caps from ratios, using penalty values at the unpenalized solution.
Caps resolve_caps(const ReturnsSample& sample, double beta, const PortfolioSolution& emp, const Ratios& ratios);

struct TightnessReport {
    bool tight = false;
    double max_violation = 0.0;
};

/// Compares z with max(0, -w'X_i - alpha).
TightnessReport verify_tightness(const ReturnsSample& sample, const PortfolioSolution& solution, double tol = 1e-6);

/// Dual function of the relaxed penalized problem at the returned multipliers.
/// Requires lambda1 > 0 and lambda2 > 0.
double relaxation_dual_value(const ReturnsSample& sample, double beta, double R, const Caps& caps,
                             const PortfolioSolution& solution);

}  // namespace pbr
