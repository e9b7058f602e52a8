#include "pbr/solvers.h"

#include "pbr/errors.h"
#include "pbr/ipm.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pbr {

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal:
            return "optimal";
        case SolveStatus::FallbackOptimal:
            return "fallback_optimal";
        case SolveStatus::Infeasible:
            return "infeasible";
        case SolveStatus::NumericFailure:
            return "numeric_failure";
    }
    return "unknown";
}

namespace {

constexpr double kPhaseOneThreshold = 1e-7;

void require_beta(double beta, const char* fn) {
    if (!(beta >= 0.5 && beta < 1.0)) {
        throw DomainError(std::string(fn) + ": beta must lie in [0.5, 1)");
    }
}

// One instance of the CVaR family on scenarios X (p x n).
struct Instance {
    const MatrixXd* X = nullptr;
    VectorXd mean;
    double beta = 0.95;
    std::optional<double> R;
    double lambda0 = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double u1 = std::numeric_limits<double>::infinity();
    double u2 = std::numeric_limits<double>::infinity();
    bool box = false;
    bool fallback = false;
    double delta = 1e-4;
    bool phase_one = false;
};

struct Layout {
    Eigen::Index p = 0;
    Eigen::Index t1 = -1, t2 = -1, tf = -1, s = -1;
    Eigen::Index size = 0;
    bool has_return_row = false;
};

struct Built {
    ipm::Program prog;
    Layout layout;
    double k = 1.0;
    bool cap1 = false;
    bool cap2 = false;
};

double data_scale(const MatrixXd& X) {
    double k = 0.0;
    for (Eigen::Index j = 0; j < X.rows(); ++j) {
        const double m = X.row(j).mean();
        const double v = (X.row(j).array() - m).square().sum() / static_cast<double>(std::max<Eigen::Index>(X.cols() - 1, 1));
        k = std::max(k, std::sqrt(v));
    }
    if (!(k > 0.0)) {
        k = X.cwiseAbs().maxCoeff();
    }
    return k > 0.0 ? k : 1.0;
}

MatrixXd covariance_of(const MatrixXd& X) {
    const VectorXd m = X.rowwise().mean();
    const MatrixXd c = X.colwise() - m;
    return c * c.transpose() / static_cast<double>(X.cols() - 1);
}

// Returns false when the return row is inconsistent with the budget row.
bool return_row_needed(const VectorXd& mean_s, double R_s, bool& consistent) {
    const double spread = mean_s.maxCoeff() - mean_s.minCoeff();
    const double level = std::max(1.0, mean_s.cwiseAbs().maxCoeff());
    if (spread > 1e-12 * level) {
        consistent = true;
        return true;
    }
    consistent = std::abs(R_s - mean_s(0)) <= 1e-9 * std::max(1.0, std::abs(R_s));
    return false;
}

Built build(const Instance& in, const MatrixXd& Xs, const MatrixXd& sigma_s, double k, bool& inconsistent) {
    const Eigen::Index p = Xs.rows();
    const Eigen::Index n = Xs.cols();
    const double nn = static_cast<double>(n);
    Built B;
    B.k = k;
    Layout& L = B.layout;
    L.p = p;
    Eigen::Index next = 1 + p;
    if (in.lambda1 > 0.0) L.t1 = next++;
    if (in.lambda2 > 0.0) L.t2 = next++;
    if (in.fallback) L.tf = next++;
    if (in.phase_one) L.s = next++;
    L.size = next;
    B.cap1 = std::isfinite(in.u1);
    B.cap2 = std::isfinite(in.u2);

    const VectorXd mean_s = in.mean / k;
    inconsistent = false;
    if (in.R) {
        bool consistent = true;
        L.has_return_row = return_row_needed(mean_s, *in.R / k, consistent);
        inconsistent = !consistent;
    }

    ipm::Program& P = B.prog;
    const double cz = in.phase_one ? 0.0 : 1.0 / (nn * (1.0 - in.beta));
    P.c_z = VectorXd::Constant(n, cz);
    P.c_theta = VectorXd::Zero(L.size);
    if (in.phase_one) {
        P.c_theta(L.s) = 1.0;
    } else {
        P.c_theta(0) = 1.0;
        P.c_theta.segment(1, p) = -in.lambda0 * mean_s;
        if (L.t1 >= 0) P.c_theta(L.t1) = in.lambda1 * k;
        if (L.t2 >= 0) P.c_theta(L.t2) = in.lambda2 * k;
        if (L.tf >= 0) P.c_theta(L.tf) = nn * cz - in.delta;
    }

    const Eigen::Index m = L.has_return_row ? 2 : 1;
    P.A = MatrixXd::Zero(m, L.size);
    P.b = VectorXd::Zero(m);
    P.A.block(0, 1, 1, p).setOnes();
    P.b(0) = 1.0;
    if (L.has_return_row) {
        P.A.block(1, 1, 1, p) = mean_s.transpose();
        P.b(1) = *in.R / k;
    }

    P.G = MatrixXd::Zero(n, L.size);
    P.G.col(0).setConstant(-1.0);
    P.G.middleCols(1, p) = -Xs.transpose();
    if (L.tf >= 0) P.G.col(L.tf).setConstant(-1.0);

    Eigen::Index rows = (in.box ? 2 * p : 0) + (L.tf >= 0 ? 1 : 0);
    P.F = MatrixXd::Zero(rows, L.size);
    P.h = VectorXd::Zero(rows);
    Eigen::Index r = 0;
    if (in.box) {
        for (Eigen::Index j = 0; j < p; ++j) {
            P.F(r, 1 + j) = 1.0;
            P.h(r++) = 0.0;
            P.F(r, 1 + j) = -1.0;
            P.h(r++) = 0.0;
        }
    }
    if (L.tf >= 0) {
        P.F(r, L.tf) = -1.0;
        P.h(r++) = 0.0;
    }

    if (B.cap1) {
        ipm::ThetaQuadratic q;
        q.P = MatrixXd::Zero(L.size, L.size);
        q.P.block(1, 1, p, p) = 2.0 * sigma_s / (nn * (in.u1 / (k * k)));
        q.q = VectorXd::Zero(L.size);
        if (L.s >= 0) q.q(L.s) = -1.0;
        q.r = -1.0;
        P.quadratics.push_back(std::move(q));
    }
    if (L.t1 >= 0) {
        ipm::ThetaQuadratic q;
        q.P = MatrixXd::Zero(L.size, L.size);
        q.P.block(1, 1, p, p) = 2.0 * sigma_s;
        q.q = VectorXd::Zero(L.size);
        q.q(L.t1) = -1.0;
        q.r = 0.0;
        P.quadratics.push_back(std::move(q));
    }
    if (B.cap2) {
        ipm::ZVariance v;
        v.kappa = 1.0 / (nn * (1.0 - in.beta) * (1.0 - in.beta) * (in.u2 / (k * k)));
        v.q = VectorXd::Zero(L.size);
        if (L.s >= 0) v.q(L.s) = -1.0;
        v.r = -1.0;
        P.zvar = v;
    } else if (L.t2 >= 0) {
        ipm::ZVariance v;
        v.kappa = 1.0;
        v.q = VectorXd::Zero(L.size);
        v.q(L.t2) = -1.0;
        v.r = 0.0;
        P.zvar = v;
    }
    return B;
}

void set_box(Built& B, double bound) {
    for (Eigen::Index r = 0; r < B.prog.F.rows(); ++r) {
        if (B.layout.tf < 0 || B.prog.F(r, B.layout.tf) == 0.0) {
            B.prog.h(r) = bound;
        }
    }
}

VectorXd initial_theta(const Built& B, const MatrixXd& Xs, const MatrixXd& sigma_s, double beta) {
    const Layout& L = B.layout;
    const ipm::Program& P = B.prog;
    VectorXd theta = VectorXd::Zero(L.size);
    const MatrixXd Aw = P.A.middleCols(1, L.p);
    const VectorXd w0 = Aw.completeOrthogonalDecomposition().solve(P.b);
    theta.segment(1, L.p) = w0;
    const VectorXd losses = -(Xs.transpose() * w0);
    theta(0) = empirical_var(losses, std::max(beta, 0.5));
    if (L.t1 >= 0) theta(L.t1) = w0.dot(sigma_s * w0) + 1.0;
    if (L.t2 >= 0) theta(L.t2) = 1.0 + (losses.array() - theta(0)).max(0.0).square().sum();
    if (L.s >= 0) {
        double worst = 0.0;
        for (const auto& q : P.quadratics) {
            worst = std::max(worst, 0.5 * theta.dot(q.P * theta) + q.q.dot(theta) + q.r);
        }
        if (P.zvar) {
            const VectorXd z0 = (P.G * theta).cwiseMax(0.0).array() + 1.0;
            const VectorXd c = z0.array() - z0.mean();
            worst = std::max(worst, P.zvar->kappa * c.squaredNorm() / static_cast<double>(z0.size() - 1) + P.zvar->r);
        }
        theta(L.s) = worst + 1.0;
    }
    return theta;
}

struct RawSolve {
    ipm::Result res;
    Built built;
    bool inconsistent = false;
};

RawSolve raw_solve(const Instance& in, const SolverOptions& opts, double box_bound) {
    const MatrixXd& X = *in.X;
    const double k = data_scale(X);
    const MatrixXd Xs = X / k;
    const MatrixXd sigma_s = covariance_of(Xs);
    RawSolve out;
    out.built = build(in, Xs, sigma_s, k, out.inconsistent);
    if (out.inconsistent) {
        return out;
    }
    if (in.box) {
        set_box(out.built, box_bound);
    }
    out.built.prog.theta0 = initial_theta(out.built, Xs, sigma_s, in.beta);
    ipm::Options io;
    io.tol = opts.tol;
    io.max_iter = opts.max_iter;
    out.res = ipm::solve(out.built.prog, io);
    return out;
}

PortfolioSolution unpack(const Instance& in, const RawSolve& raw) {
    const Built& B = raw.built;
    const Layout& L = B.layout;
    const ipm::Result& r = raw.res;
    const double k = B.k;
    const MatrixXd& X = *in.X;
    const double n = static_cast<double>(X.cols());

    PortfolioSolution s;
    s.alpha = k * r.theta(0);
    s.w = r.theta.segment(1, L.p);
    VectorXd z = r.z;
    if (L.tf >= 0) z.array() += r.theta(L.tf);
    s.z = k * z;
    s.iterations = r.iterations;
    s.kkt_residual = std::max(r.primal_residual, r.dual_residual);
    s.message = r.message;

    Duals& d = s.duals;
    d.nu2 = -k * r.nu(0);
    d.nu1 = L.has_return_row ? -r.nu(1) : 0.0;
    d.eta2 = r.y_scen;
    d.eta1 = r.y_zpos;
    std::size_t qi = 0;
    if (B.cap1) d.lambda1 = k * r.y_quad(static_cast<Eigen::Index>(qi++)) / in.u1;
    if (B.cap2) d.lambda2 = k * r.y_zvar / in.u2;
    if (L.t1 >= 0) d.lambda1 = in.lambda1;
    if (L.t2 >= 0) d.lambda2 = in.lambda2;

    const VectorXd losses = -(X.transpose() * s.w);
    const VectorXd zt = (losses.array() - s.alpha).max(0.0);
    double obj = s.alpha + zt.sum() / (n * (1.0 - in.beta)) - in.lambda0 * s.w.dot(in.mean);
    if (in.lambda1 > 0.0) obj += in.lambda1 * s.w.dot(covariance_of(X) * s.w);
    if (in.lambda2 > 0.0) obj += in.lambda2 * centered_quadratic(s.z);
    s.objective = obj;
    s.duality_gap = k * r.complementarity;
    return s;
}

TightnessReport tightness_of(const MatrixXd& X, const VectorXd& w, double alpha, const VectorXd& z, double tol) {
    const VectorXd losses = -(X.transpose() * w);
    const VectorXd zt = (losses.array() - alpha).max(0.0);
    TightnessReport t;
    t.max_violation = (z - zt).cwiseAbs().maxCoeff();
    t.tight = t.max_violation <= tol;
    return t;
}

double markowitz_min_variance(const VectorXd& mu, const MatrixXd& sigma, std::optional<double> R) {
    const VectorXd w = R ? solve_markowitz(mu, sigma, *R) : min_variance_portfolio(sigma);
    return w.dot(sigma * w);
}

// Classifies a failed penalized solve by minimizing the largest normalized
// constraint violation.
SolveStatus classify_failure(const Instance& in, const SolverOptions& opts) {
    Instance ph = in;
    ph.phase_one = true;
    ph.fallback = false;
    ph.lambda0 = 0.0;
    const RawSolve raw = raw_solve(ph, opts, opts.box_bound);
    if (raw.res.outcome == ipm::Outcome::Converged && raw.res.theta(raw.built.layout.s) > kPhaseOneThreshold) {
        return SolveStatus::Infeasible;
    }
    return SolveStatus::NumericFailure;
}

PortfolioSolution failure(SolveStatus status, const std::string& msg) {
    PortfolioSolution s;
    s.status = status;
    s.message = msg;
    return s;
}

PortfolioSolution solve_lp(const Instance& base, const SolverOptions& opts, bool box_is_final) {
    RawSolve raw = raw_solve(base, opts, opts.box_bound);
    if (raw.inconsistent) {
        return failure(SolveStatus::Infeasible, "target return is not attainable: mean vector is proportional to 1");
    }
    bool boxed = false;
    if (raw.res.outcome == ipm::Outcome::Diverged || raw.res.outcome == ipm::Outcome::MaxIterations ||
        raw.res.outcome == ipm::Outcome::NumericalError) {
        Instance b = base;
        b.box = true;
        raw = raw_solve(b, opts, opts.box_bound);
        boxed = true;
    }
    if (raw.res.outcome != ipm::Outcome::Converged) {
        PortfolioSolution s = failure(SolveStatus::NumericFailure, raw.res.message);
        s.box_guard = boxed;
        return s;
    }
    PortfolioSolution s = unpack(base, raw);
    s.box_guard = boxed;
    s.status = SolveStatus::Optimal;
    if (boxed) {
        const bool active = s.w.cwiseAbs().maxCoeff() >= opts.box_bound * (1.0 - 1e-6);
        if (active && !box_is_final) {
            s.status = SolveStatus::NumericFailure;
            s.message = "problem is unbounded; box |w_j| <= " + std::to_string(opts.box_bound) + " is active";
        }
    }
    // The LP optimum always admits the tight z.
    const VectorXd losses = -(base.X->transpose() * s.w);
    s.z = (losses.array() - s.alpha).max(0.0);
    const TightnessReport t = tightness_of(*base.X, s.w, s.alpha, s.z, 1e-6);
    s.tight = t.tight;
    s.max_violation = t.max_violation;
    return s;
}

}  // namespace

PortfolioSolution solve_cvar_scenarios(const MatrixXd& scenarios, const VectorXd& mean, double beta, double R,
                                       const SolverOptions& opts) {
    require_beta(beta, "solve_cvar_scenarios");
    if (scenarios.cols() < 2 || mean.size() != scenarios.rows() || !std::isfinite(R) || !scenarios.allFinite()) {
        throw InputError("solve_cvar_scenarios: inconsistent inputs");
    }
    Instance in;
    in.X = &scenarios;
    in.mean = mean;
    in.beta = beta;
    in.R = R;
    return solve_lp(in, opts, false);
}

PortfolioSolution solve_cvar_emp(const ReturnsSample& sample, double beta, double R, const SolverOptions& opts) {
    return solve_cvar_scenarios(sample.data(), sample.mean(), beta, R, opts);
}

PortfolioSolution solve_cvar_dualized(const ReturnsSample& sample, double beta, double lambda0,
                                      const SolverOptions& opts) {
    return solve_cvar_dualized(sample, beta, Dualized{lambda0, 0.0, 0.0}, opts);
}

PortfolioSolution solve_cvar_dualized(const ReturnsSample& sample, double beta, const Dualized& weights,
                                      const SolverOptions& opts) {
    require_beta(beta, "solve_cvar_dualized");
    if (!(weights.lambda0 >= 0.0 && weights.lambda1 >= 0.0 && weights.lambda2 >= 0.0)) {
        throw DomainError("solve_cvar_dualized: weights must be nonnegative");
    }
    Instance in;
    in.X = &sample.data();
    in.mean = sample.mean();
    in.beta = beta;
    in.lambda0 = weights.lambda0;
    in.lambda1 = weights.lambda1;
    in.lambda2 = weights.lambda2;
    if (weights.lambda2 == 0.0) {
        return solve_lp(in, opts, true);
    }
    RawSolve raw = raw_solve(in, opts, opts.box_bound);
    if (raw.res.outcome != ipm::Outcome::Converged) {
        in.box = true;
        raw = raw_solve(in, opts, opts.box_bound);
        if (raw.res.outcome != ipm::Outcome::Converged) {
            return failure(SolveStatus::NumericFailure, raw.res.message);
        }
    }
    PortfolioSolution s = unpack(in, raw);
    s.box_guard = in.box;
    s.status = SolveStatus::Optimal;
    const TightnessReport t = tightness_of(sample.data(), s.w, s.alpha, s.z, 1e-6);
    s.tight = t.tight;
    s.max_violation = t.max_violation;
    return s;
}

VectorXd min_variance_portfolio(const MatrixXd& sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
        throw InputError("min_variance_portfolio: sigma must be square");
    }
    Eigen::LDLT<MatrixXd> ldlt(sigma);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) {
        throw ModelError("min_variance_portfolio: sigma is not positive definite");
    }
    const VectorXd x = ldlt.solve(VectorXd::Ones(sigma.rows()));
    return x / x.sum();
}

VectorXd solve_markowitz(const VectorXd& mu, const MatrixXd& sigma, double R) {
    const Eigen::Index p = mu.size();
    if (sigma.rows() != p || sigma.cols() != p || p == 0 || !mu.allFinite() || !std::isfinite(R)) {
        throw InputError("solve_markowitz: inconsistent inputs");
    }
    Eigen::LDLT<MatrixXd> ldlt(sigma);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) {
        throw ModelError("solve_markowitz: sigma is not positive definite");
    }
    bool consistent = true;
    if (!return_row_needed(mu, R, consistent)) {
        if (!consistent) {
            throw InfeasibleError("solve_markowitz: mean vector is proportional to 1 and R differs from it");
        }
        return min_variance_portfolio(sigma);
    }
    MatrixXd A(p, 2);
    A.col(0) = mu;
    A.col(1).setOnes();
    const MatrixXd SA = ldlt.solve(A);
    const Eigen::Matrix2d M = A.transpose() * SA;
    const Eigen::Vector2d b(R, 1.0);
    const Eigen::Vector2d y = M.fullPivLu().solve(b);
    VectorXd w = SA * y;
    // One refinement step against the two equalities.
    const Eigen::Vector2d res = b - A.transpose() * w;
    w += SA * M.fullPivLu().solve(res);
    return w;
}

Caps resolve_caps(const ReturnsSample& sample, double beta, const PortfolioSolution& emp, const Ratios& ratios) {
    if (!(ratios.r1 > 0.0 && ratios.r2 > 0.0)) {
        throw DomainError("resolve_caps: ratios must be positive");
    }
    const PenaltyValue pv = penalty_values(sample, emp.w, emp.alpha, beta);
    return Caps{ratios.r1 * pv.p1, ratios.r2 * pv.p2};
}

TightnessReport verify_tightness(const ReturnsSample& sample, const PortfolioSolution& solution, double tol) {
    if (solution.w.size() != sample.assets() || solution.z.size() != sample.observations()) {
        TightnessReport t;
        t.max_violation = std::numeric_limits<double>::infinity();
        return t;
    }
    return tightness_of(sample.data(), solution.w, solution.alpha, solution.z, tol);
}

namespace {

// Quadratic coefficients A1, A2 of the dual: the terms are -A1/lambda1 and -A2/lambda2.
struct DualQuadratics {
    double a1 = 0.0, a2 = 0.0;
};

DualQuadratics dual_quadratics(const ReturnsSample& sample, double beta, const Duals& d) {
    const MatrixXd& X = sample.data();
    const double n = static_cast<double>(sample.observations());
    const double cz = 1.0 / (n * (1.0 - beta));
    const double kp = 1.0 / (n * (1.0 - beta) * (1.0 - beta));
    const VectorXd rw = X * d.eta2 + d.nu1 * sample.mean() + d.nu2 * VectorXd::Ones(sample.assets());
    const VectorXd rz = (VectorXd::Constant(X.cols(), cz) - d.eta1 - d.eta2);
    const VectorXd rz_c = rz.array() - rz.mean();
    Eigen::LDLT<MatrixXd> ldlt(sample.covariance());
    DualQuadratics q;
    q.a1 = n / 4.0 * rw.dot(ldlt.solve(rw));
    q.a2 = (n - 1.0) * rz_c.squaredNorm() / (4.0 * kp);
    return q;
}

// Each cap multiplier enters the dual as -A/lambda - lambda*U, maximized at sqrt(A/U).
void polish_cap_multipliers(const ReturnsSample& sample, double beta, const Caps& caps, PortfolioSolution& s) {
    Duals& d = s.duals;
    if (!(d.lambda1 > 0.0 && d.lambda2 > 0.0 && caps.u1 > 0.0 && caps.u2 > 0.0)) return;
    if (!std::isfinite(caps.u1) || !std::isfinite(caps.u2)) return;
    const DualQuadratics q = dual_quadratics(sample, beta, d);
    if (q.a1 > 0.0) d.lambda1 = std::sqrt(q.a1 / caps.u1);
    if (q.a2 > 0.0) d.lambda2 = std::sqrt(q.a2 / caps.u2);
}

}  // namespace

PortfolioSolution solve_cvar_pen(const ReturnsSample& sample, double beta, double R, const Caps& caps,
                                 const SolverOptions& opts) {
    require_beta(beta, "solve_cvar_pen");
    if (!(caps.u1 >= 0.0) || !(caps.u2 >= 0.0)) {
        throw DomainError("solve_cvar_pen: caps must be nonnegative");
    }
    Instance in;
    in.X = &sample.data();
    in.mean = sample.mean();
    in.beta = beta;
    in.R = R;
    in.u1 = caps.u1;
    in.u2 = caps.u2;

    if (!std::isfinite(caps.u1) && !std::isfinite(caps.u2)) {
        return solve_cvar_emp(sample, beta, R, opts);
    }
    const double n = static_cast<double>(sample.observations());
    if (std::isfinite(caps.u1)) {
        Eigen::LDLT<MatrixXd> ldlt(sample.covariance());
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13) {
            throw ModelError("solve_cvar_pen: sample covariance is singular");
        }
        double vmin = 0.0;
        try {
            vmin = markowitz_min_variance(sample.mean(), sample.covariance(), R) / n;
        } catch (const InfeasibleError& e) {
            return failure(SolveStatus::Infeasible, e.what());
        }
        if (vmin > caps.u1 * (1.0 + 1e-9)) {
            return failure(SolveStatus::Infeasible, "U1 is below the minimum attainable w'Sigma w / n");
        }
    }

    RawSolve raw = raw_solve(in, opts, opts.box_bound);
    if (raw.inconsistent) {
        return failure(SolveStatus::Infeasible, "target return is not attainable: mean vector is proportional to 1");
    }
    if (raw.res.outcome != ipm::Outcome::Converged) {
        const SolveStatus st = classify_failure(in, opts);
        return failure(st, st == SolveStatus::Infeasible ? "caps admit no feasible portfolio" : raw.res.message);
    }
    PortfolioSolution s = unpack(in, raw);
    s.status = SolveStatus::Optimal;
    TightnessReport t = verify_tightness(sample, s, 1e-6);

    const double degenerate = (s.duals.eta2.array() - 1.0 / n).abs().maxCoeff();
    if (opts.force_fallback || degenerate <= opts.degenerate_tol || !t.tight) {
        Instance fb = in;
        fb.fallback = true;
        fb.delta = opts.fallback_delta;
        RawSolve raw_fb = raw_solve(fb, opts, opts.box_bound);
        if (raw_fb.res.outcome == ipm::Outcome::Converged) {
            PortfolioSolution f = unpack(fb, raw_fb);
            const TightnessReport tf = verify_tightness(sample, f, 1e-6);
            if (tf.tight) {
                polish_cap_multipliers(sample, beta, caps, f);
                f.status = SolveStatus::FallbackOptimal;
                f.tight = true;
                f.max_violation = tf.max_violation;
                return f;
            }
        }
        if (!t.tight) {
            s.status = SolveStatus::NumericFailure;
            s.message = "relaxation is not tight and the fallback did not recover a tight solution";
        }
    }
    polish_cap_multipliers(sample, beta, caps, s);
    s.tight = t.tight;
    s.max_violation = t.max_violation;
    return s;
}

double relaxation_dual_value(const ReturnsSample& sample, double beta, double R, const Caps& caps,
                             const PortfolioSolution& sol) {
    const auto& d = sol.duals;
    if (!(d.lambda1 > 0.0 && d.lambda2 > 0.0)) {
        throw DomainError("relaxation_dual_value: both cap multipliers must be positive");
    }
    const double n = static_cast<double>(sample.observations());
    const double cz = 1.0 / (n * (1.0 - beta));
    const DualQuadratics q = dual_quadratics(sample, beta, d);
    const VectorXd rz = (VectorXd::Constant(sample.observations(), cz) - d.eta1 - d.eta2);
    // Linear stationarity residuals in alpha and along 1 for z, evaluated at the primal point.
    const double r_alpha = 1.0 - d.eta2.sum();
    const double r_one = rz.mean() * sol.z.sum();
    return -q.a1 / d.lambda1 - q.a2 / d.lambda2 + d.nu1 * R + d.nu2 - d.lambda1 * caps.u1 - d.lambda2 * caps.u2 +
           r_alpha * sol.alpha + r_one;
}

}  // namespace pbr
