#include "pbr/ipm.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pbr::ipm {

namespace {

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Largest step in (0, 1] keeping v + t dv >= 0.
double max_step(const VectorXd& v, const VectorXd& dv) {
    double t = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv(i) < 0.0) {
            t = std::min(t, -v(i) / dv(i));
        }
    }
    return t;
}

struct State {
    VectorXd theta, z, nu;
    VectorXd s_a, y_a;  // scenario rows
    VectorXd y_b;       // z >= 0
    VectorXd s_c, y_c;  // linear theta rows
    VectorXd s_q, y_q;  // theta quadratics
    double s_v = 0.0, y_v = 0.0;
};

struct Direction {
    VectorXd theta, z, nu;
    VectorXd s_a, y_a, y_b, s_c, y_c, s_q, y_q;
    double s_v = 0.0, y_v = 0.0;
    double error = 0.0;  // relative residual of the reduced solve
};

struct Residuals {
    VectorXd r_theta, r_z, r_eq, r_a, r_c, r_q;
    double r_v = 0.0;
};

class Solver {
public:
    Solver(const Program& prog, const Options& opts) : P_(prog), O_(opts) {
        nt_ = P_.c_theta.size();
        n_ = P_.c_z.size();
        m_ = P_.A.rows();
        nc_ = P_.F.rows();
        nq_ = static_cast<Eigen::Index>(P_.quadratics.size());
        hv_ = P_.zvar.has_value();
        count_ = n_ + n_ + nc_ + nq_ + (hv_ ? 1 : 0);
    }

    Result run();

private:
    VectorXd omega_times(const VectorXd& z) const {
        const double nm1 = static_cast<double>(n_ - 1);
        return (z.array() - z.mean()).matrix() / nm1;
    }

    double zvar_value(const State& x) const {
        const auto& v = *P_.zvar;
        return v.kappa * x.z.dot(omega_times(x.z)) + v.q.dot(x.theta) + v.r;
    }

    VectorXd quad_grad(Eigen::Index k, const VectorXd& theta) const {
        const auto& Q = P_.quadratics[static_cast<std::size_t>(k)];
        return Q.P * theta + Q.q;
    }

    double quad_value(Eigen::Index k, const VectorXd& theta) const {
        const auto& Q = P_.quadratics[static_cast<std::size_t>(k)];
        return 0.5 * theta.dot(Q.P * theta) + Q.q.dot(theta) + Q.r;
    }

    void initialize(State& x) const;
    Residuals residuals(const State& x) const;
    double complementarity(const State& x) const;
    bool factor(const State& x);
    void solve_reduced(const VectorXd& rt, const VectorXd& rz, const VectorXd& re, VectorXd& dt, VectorXd& dz,
                       VectorXd& dn) const;
    void apply_reduced(const VectorXd& dt, const VectorXd& dz, const VectorXd& dn, VectorXd& ot, VectorXd& oz,
                       VectorXd& oe) const;
    Direction direction(const State& x, const Residuals& r, const VectorXd& rc_a, const VectorXd& rc_b,
                        const VectorXd& rc_c, const VectorXd& rc_q, double rc_v) const;
    double step_length(const State& x, const Direction& d) const;

    const Program& P_;
    const Options& O_;
    Eigen::Index nt_ = 0, n_ = 0, m_ = 0, nc_ = 0, nq_ = 0;
    bool hv_ = false;
    Eigen::Index count_ = 0;

    // Factorization data for the current iterate.
    VectorXd d_a_, d_b_, e_, u_;
    double d_v_ = 0.0, a_ = 0.0;
    MatrixXd h_rest_;
    MatrixXd B_;
    MatrixXd einv_v_;
    Eigen::Matrix2d minv_c_ = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d c_ = Eigen::Matrix2d::Zero();
    Eigen::FullPivLU<MatrixXd> lu_;
    VectorXd k_scale_;
};

void Solver::initialize(State& x) const {
    if (P_.theta0.size() == nt_) {
        x.theta = P_.theta0;
    } else if (m_ > 0) {
        x.theta = P_.A.completeOrthogonalDecomposition().solve(P_.b);
    } else {
        x.theta = VectorXd::Zero(nt_);
    }
    const VectorXd gt = P_.G * x.theta;
    x.z = gt.cwiseMax(0.0).array() + 1.0;
    x.s_a = x.z - gt;
    x.nu = VectorXd::Zero(m_);
    const double floor = 1.0 / static_cast<double>(std::max<Eigen::Index>(n_, 1));
    x.y_a = (0.5 * P_.c_z.cwiseAbs()).array() + floor;
    x.y_b = x.y_a;
    x.s_c = nc_ > 0 ? VectorXd((P_.h - P_.F * x.theta).cwiseMax(1.0)) : VectorXd();
    x.y_c = VectorXd::Ones(nc_);
    x.s_q.resize(nq_);
    for (Eigen::Index k = 0; k < nq_; ++k) {
        x.s_q(k) = std::max(-quad_value(k, x.theta), 1.0);
    }
    x.y_q = VectorXd::Ones(nq_);
    if (hv_) {
        x.s_v = std::max(-zvar_value(x), 1.0);
        x.y_v = 1.0;
    }
}

Residuals Solver::residuals(const State& x) const {
    Residuals r;
    r.r_theta = P_.c_theta + P_.G.transpose() * x.y_a;
    if (m_ > 0) r.r_theta += P_.A.transpose() * x.nu;
    if (nc_ > 0) r.r_theta += P_.F.transpose() * x.y_c;
    for (Eigen::Index k = 0; k < nq_; ++k) {
        r.r_theta += x.y_q(k) * quad_grad(k, x.theta);
    }
    r.r_z = P_.c_z - x.y_a - x.y_b;
    if (hv_) {
        const auto& v = *P_.zvar;
        r.r_theta += x.y_v * v.q;
        r.r_z += x.y_v * 2.0 * v.kappa * omega_times(x.z);
        r.r_v = zvar_value(x) + x.s_v;
    }
    r.r_eq = m_ > 0 ? VectorXd(P_.A * x.theta - P_.b) : VectorXd();
    r.r_a = P_.G * x.theta - x.z + x.s_a;
    r.r_c = nc_ > 0 ? VectorXd(P_.F * x.theta - P_.h + x.s_c) : VectorXd();
    r.r_q.resize(nq_);
    for (Eigen::Index k = 0; k < nq_; ++k) {
        r.r_q(k) = quad_value(k, x.theta) + x.s_q(k);
    }
    return r;
}

double Solver::complementarity(const State& x) const {
    double c = x.s_a.dot(x.y_a) + x.z.dot(x.y_b);
    if (nc_ > 0) c += x.s_c.dot(x.y_c);
    if (nq_ > 0) c += x.s_q.dot(x.y_q);
    if (hv_) c += x.s_v * x.y_v;
    return c;
}

bool Solver::factor(const State& x) {
    d_a_ = x.y_a.cwiseQuotient(x.s_a);
    d_b_ = x.y_b.cwiseQuotient(x.z);
    a_ = 0.0;
    d_v_ = 0.0;
    VectorXd qv = VectorXd::Zero(nt_);
    if (hv_) {
        const auto& v = *P_.zvar;
        a_ = 2.0 * v.kappa * x.y_v / static_cast<double>(n_ - 1);
        d_v_ = x.y_v / x.s_v;
        u_ = 2.0 * v.kappa * omega_times(x.z);
        qv = v.q;
    }
    e_ = (d_a_ + d_b_).array() + a_;

    h_rest_ = MatrixXd::Zero(nt_, nt_);
    for (Eigen::Index k = 0; k < nq_; ++k) {
        const VectorXd g = quad_grad(k, x.theta);
        h_rest_ += x.y_q(k) * P_.quadratics[static_cast<std::size_t>(k)].P;
        h_rest_ += (x.y_q(k) / x.s_q(k)) * g * g.transpose();
    }
    if (nc_ > 0) {
        const VectorXd dc = x.y_c.cwiseQuotient(x.s_c);
        h_rest_ += P_.F.transpose() * dc.asDiagonal() * P_.F;
    }

    // G'D_aG - G'D_a E^-1 D_a G, with the weight written without cancellation.
    const VectorXd omega = (d_a_.array() * (d_b_.array() + a_) / e_.array()).matrix();
    MatrixXd S = h_rest_ + P_.G.transpose() * omega.asDiagonal() * P_.G;

    B_ = -(d_a_.asDiagonal() * P_.G);
    if (hv_) {
        B_ += d_v_ * u_ * qv.transpose();
        const VectorXd ue = u_.cwiseQuotient(e_);
        const VectorXd gu = P_.G.transpose() * d_a_.cwiseProduct(ue);
        S += d_v_ * (1.0 - d_v_ * u_.dot(ue)) * qv * qv.transpose();
        S += d_v_ * (gu * qv.transpose() + qv * gu.transpose());

        MatrixXd V(n_, 2);
        V.col(0).setOnes();
        V.col(1) = u_;
        einv_v_ = e_.cwiseInverse().asDiagonal() * V;
        c_ << -a_ / static_cast<double>(n_), 0.0, 0.0, d_v_;
        const Eigen::Matrix2d M = Eigen::Matrix2d::Identity() + c_ * (V.transpose() * einv_v_);
        const double det = M.determinant();
        if (!std::isfinite(det) || det == 0.0) {
            return false;
        }
        minv_c_ = M.inverse() * c_;
        const MatrixXd bev = B_.transpose() * einv_v_;
        S += bev * minv_c_ * bev.transpose();
    }
    S = 0.5 * (S + S.transpose()).eval();

    MatrixXd K = MatrixXd::Zero(nt_ + m_, nt_ + m_);
    K.topLeftCorner(nt_, nt_) = S;
    if (m_ > 0) {
        K.topRightCorner(nt_, m_) = P_.A.transpose();
        K.bottomLeftCorner(m_, nt_) = P_.A;
    }
    if (!S.allFinite()) {
        return false;
    }
    // Symmetric Ruiz equilibration.
    k_scale_ = VectorXd::Ones(K.rows());
    for (int pass = 0; pass < 10; ++pass) {
        VectorXd r(K.rows());
        for (Eigen::Index i = 0; i < K.rows(); ++i) {
            const double m = K.row(i).cwiseAbs().maxCoeff();
            r(i) = m > 0.0 ? 1.0 / std::sqrt(m) : 1.0;
        }
        K = r.asDiagonal() * K * r.asDiagonal();
        k_scale_.array() *= r.array();
        if ((r.array() - 1.0).abs().maxCoeff() < 1e-2) break;
    }
    // Pivots span many orders of magnitude near the solution; only exact zeros count as rank loss.
    lu_.setThreshold(1e-300);
    lu_.compute(K);
    if (!lu_.isInvertible()) {
        // Regularize the theta block only; iterative refinement uses the exact operator.
        K.topLeftCorner(nt_, nt_).diagonal().array() += 1e-14;
        lu_.compute(K);
    }
    return lu_.isInvertible();
}

void Solver::solve_reduced(const VectorXd& rt, const VectorXd& rz, const VectorXd& re, VectorXd& dt, VectorXd& dz,
                           VectorXd& dn) const {
    auto zz_solve = [&](const VectorXd& r) {
        VectorXd out = r.cwiseQuotient(e_);
        if (hv_) {
            out -= einv_v_ * (minv_c_ * (einv_v_.transpose() * r));
        }
        return out;
    };
    const VectorXd zr = zz_solve(rz);
    VectorXd rhs(nt_ + m_);
    rhs.head(nt_) = rt - B_.transpose() * zr;
    if (m_ > 0) rhs.tail(m_) = re;
    const VectorXd sol = k_scale_.cwiseProduct(lu_.solve(k_scale_.cwiseProduct(rhs)));
    dt = sol.head(nt_);
    dn = sol.tail(m_);
    dz = zz_solve(rz - B_ * dt);
}

void Solver::apply_reduced(const VectorXd& dt, const VectorXd& dz, const VectorXd& dn, VectorXd& ot, VectorXd& oz,
                           VectorXd& oe) const {
    const VectorXd gdt = P_.G * dt;
    ot = h_rest_ * dt + P_.G.transpose() * d_a_.cwiseProduct(gdt) + B_.transpose() * dz;
    oz = B_ * dt + e_.cwiseProduct(dz);
    if (hv_) {
        const auto& qv = P_.zvar->q;
        ot += d_v_ * qv * qv.dot(dt);
        // V C V' dz
        oz += c_(0, 0) * VectorXd::Constant(n_, dz.sum()) + c_(1, 1) * u_ * u_.dot(dz);
    }
    if (m_ > 0) {
        ot += P_.A.transpose() * dn;
        oe = P_.A * dt;
    } else {
        oe = VectorXd();
    }
}

Direction Solver::direction(const State& x, const Residuals& r, const VectorXd& rc_a, const VectorXd& rc_b,
                            const VectorXd& rc_c, const VectorXd& rc_q, double rc_v) const {
    const VectorXd t_a = (x.y_a.cwiseProduct(r.r_a) - rc_a).cwiseQuotient(x.s_a);
    VectorXd rt = -r.r_theta - P_.G.transpose() * t_a;
    VectorXd rz = -r.r_z + t_a - rc_b.cwiseQuotient(x.z);
    VectorXd t_c;
    if (nc_ > 0) {
        t_c = (x.y_c.cwiseProduct(r.r_c) - rc_c).cwiseQuotient(x.s_c);
        rt -= P_.F.transpose() * t_c;
    }
    std::vector<VectorXd> grads(static_cast<std::size_t>(nq_));
    for (Eigen::Index k = 0; k < nq_; ++k) {
        grads[static_cast<std::size_t>(k)] = quad_grad(k, x.theta);
        const double t_k = (x.y_q(k) * r.r_q(k) - rc_q(k)) / x.s_q(k);
        rt -= t_k * grads[static_cast<std::size_t>(k)];
    }
    if (hv_) {
        const double t_v = (x.y_v * r.r_v - rc_v) / x.s_v;
        rt -= t_v * P_.zvar->q;
        rz -= t_v * u_;
    }
    const VectorXd re = m_ > 0 ? VectorXd(-r.r_eq) : VectorXd();

    Direction d;
    solve_reduced(rt, rz, re, d.theta, d.z, d.nu);
    for (int pass = 0; pass < 2; ++pass) {
        VectorXd ot, oz, oe;
        apply_reduced(d.theta, d.z, d.nu, ot, oz, oe);
        VectorXd ct, cz, cn;
        solve_reduced(rt - ot, rz - oz, re - oe, ct, cz, cn);
        d.theta += ct;
        d.z += cz;
        d.nu += cn;
    }
    {
        VectorXd ot, oz, oe;
        apply_reduced(d.theta, d.z, d.nu, ot, oz, oe);
        const double scale = 1.0 + std::max({inf_norm(rt), inf_norm(rz), inf_norm(re)});
        d.error = std::max({inf_norm(rt - ot), inf_norm(rz - oz), inf_norm(re - oe)}) / scale;
    }

    d.s_a = -r.r_a - (P_.G * d.theta - d.z);
    d.y_a = (-rc_a - x.y_a.cwiseProduct(d.s_a)).cwiseQuotient(x.s_a);
    d.y_b = (-rc_b - x.y_b.cwiseProduct(d.z)).cwiseQuotient(x.z);
    if (nc_ > 0) {
        d.s_c = -r.r_c - P_.F * d.theta;
        d.y_c = (-rc_c - x.y_c.cwiseProduct(d.s_c)).cwiseQuotient(x.s_c);
    }
    d.s_q.resize(nq_);
    d.y_q.resize(nq_);
    for (Eigen::Index k = 0; k < nq_; ++k) {
        d.s_q(k) = -r.r_q(k) - grads[static_cast<std::size_t>(k)].dot(d.theta);
        d.y_q(k) = (-rc_q(k) - x.y_q(k) * d.s_q(k)) / x.s_q(k);
    }
    if (hv_) {
        d.s_v = -r.r_v - P_.zvar->q.dot(d.theta) - u_.dot(d.z);
        d.y_v = (-rc_v - x.y_v * d.s_v) / x.s_v;
    }
    return d;
}

double Solver::step_length(const State& x, const Direction& d) const {
    double t = std::min({max_step(x.s_a, d.s_a), max_step(x.y_a, d.y_a), max_step(x.z, d.z), max_step(x.y_b, d.y_b)});
    if (nc_ > 0) t = std::min({t, max_step(x.s_c, d.s_c), max_step(x.y_c, d.y_c)});
    if (nq_ > 0) t = std::min({t, max_step(x.s_q, d.s_q), max_step(x.y_q, d.y_q)});
    if (hv_) {
        if (d.s_v < 0.0) t = std::min(t, -x.s_v / d.s_v);
        if (d.y_v < 0.0) t = std::min(t, -x.y_v / d.y_v);
    }
    return t;
}

void advance(State& x, const Direction& d, double t) {
    x.theta += t * d.theta;
    x.z += t * d.z;
    x.nu += t * d.nu;
    x.s_a += t * d.s_a;
    x.y_a += t * d.y_a;
    x.y_b += t * d.y_b;
    if (x.s_c.size() > 0) {
        x.s_c += t * d.s_c;
        x.y_c += t * d.y_c;
    }
    if (x.s_q.size() > 0) {
        x.s_q += t * d.s_q;
        x.y_q += t * d.y_q;
    }
    x.s_v += t * d.s_v;
    x.y_v += t * d.y_v;
}

Result Solver::run() {
    Result res;
    State x;
    initialize(x);

    const double c_scale = 1.0 + std::max(inf_norm(P_.c_theta), inf_norm(P_.c_z));
    const double b_scale = 1.0 + std::max(inf_norm(P_.b), inf_norm(P_.h));
    const auto M = static_cast<double>(count_);

    auto finish = [&](Outcome o, const std::string& msg, int it) {
        const Residuals r = residuals(x);
        res.outcome = o;
        res.message = msg;
        res.iterations = it;
        res.theta = x.theta;
        res.z = x.z;
        res.nu = x.nu;
        res.y_scen = x.y_a;
        res.y_zpos = x.y_b;
        res.y_lin = x.y_c;
        res.y_quad = x.y_q;
        res.y_zvar = x.y_v;
        res.objective = P_.c_theta.dot(x.theta) + P_.c_z.dot(x.z);
        res.complementarity = complementarity(x);
        res.primal_residual = std::max({inf_norm(r.r_eq), inf_norm(r.r_a), inf_norm(r.r_c), inf_norm(r.r_q), std::abs(r.r_v)});
        res.dual_residual = std::max(inf_norm(r.r_theta), inf_norm(r.r_z));
        return res;
    };

    // Best iterate by scaled KKT merit; late steps on the variance cap can undo progress.
    State best;
    double best_merit = std::numeric_limits<double>::infinity();
    int best_it = 0;
    auto fallback = [&](Outcome o, const std::string& msg, int it) {
        if (best_merit <= 1e3 * O_.tol) {
            x = best;
            return finish(Outcome::Converged, "converged at best iterate", best_it);
        }
        return finish(o, msg, it);
    };

    double prev_pres = std::numeric_limits<double>::infinity();
    double prev_dres = std::numeric_limits<double>::infinity();
    int stalled = 0;
    for (int it = 0; it < O_.max_iter; ++it) {
        const Residuals r = residuals(x);
        const double pres = std::max({inf_norm(r.r_eq), inf_norm(r.r_a), inf_norm(r.r_c), inf_norm(r.r_q), std::abs(r.r_v)});
        const double dres = std::max(inf_norm(r.r_theta), inf_norm(r.r_z));
        const double comp = complementarity(x);
        const double obj = P_.c_theta.dot(x.theta) + P_.c_z.dot(x.z);
        if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(comp)) {
            return fallback(Outcome::NumericalError, "non-finite iterate", it);
        }
        const double merit = std::max({pres / b_scale, dres / c_scale, comp / (1.0 + std::abs(obj))});
        if (merit < best_merit) {
            best = x;
            best_merit = merit;
            best_it = it;
        } else if (it - best_it >= 15 && best_merit <= 1e2 * O_.tol) {
            return fallback(Outcome::MaxIterations, "no progress", it);
        }
        const bool gap_ok = comp <= O_.tol * (1.0 + std::abs(obj));
        if (pres <= O_.tol * b_scale && dres <= O_.tol * c_scale && gap_ok) {
            return finish(Outcome::Converged, "converged", it);
        }
        // Rounding floor: residuals stop improving once the gap has closed.
        stalled = (pres > 0.5 * prev_pres && dres > 0.5 * prev_dres) ? stalled + 1 : 0;
        prev_pres = pres;
        prev_dres = dres;
        if (gap_ok && stalled >= 3 && pres <= 1e2 * O_.tol * b_scale && dres <= 1e2 * O_.tol * c_scale) {
            return finish(Outcome::Converged, "converged at residual floor", it);
        }
        if (inf_norm(x.theta) > O_.divergence_bound || inf_norm(x.z) > O_.divergence_bound) {
            return finish(Outcome::Diverged, "iterates diverged", it);
        }
        if (!factor(x)) {
            return fallback(Outcome::NumericalError, "singular Newton system", it);
        }
        const double mu = comp / M;

        // Predictor.
        const VectorXd ca = x.s_a.cwiseProduct(x.y_a);
        const VectorXd cb = x.z.cwiseProduct(x.y_b);
        const VectorXd cc = nc_ > 0 ? VectorXd(x.s_c.cwiseProduct(x.y_c)) : VectorXd();
        const VectorXd cq = nq_ > 0 ? VectorXd(x.s_q.cwiseProduct(x.y_q)) : VectorXd();
        const double cv = x.s_v * x.y_v;
        const Direction aff = direction(x, r, ca, cb, cc, cq, cv);
        const double ta = step_length(x, aff);

        State trial = x;
        advance(trial, aff, ta);
        const double mu_aff = complementarity(trial) / M;
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
        // Keeps the barrier away from zero once the gap has closed.
        const double target = std::max(sigma * mu, 1e-2 * O_.tol * (1.0 + std::abs(obj)) / M);

        // Corrector.
        const VectorXd ca2 = (ca + aff.s_a.cwiseProduct(aff.y_a)).array() - target;
        const VectorXd cb2 = (cb + aff.z.cwiseProduct(aff.y_b)).array() - target;
        const VectorXd cc2 = nc_ > 0 ? VectorXd((cc + aff.s_c.cwiseProduct(aff.y_c)).array() - target) : VectorXd();
        const VectorXd cq2 = nq_ > 0 ? VectorXd((cq + aff.s_q.cwiseProduct(aff.y_q)).array() - target) : VectorXd();
        const double cv2 = cv + aff.s_v * aff.y_v - target;
        Direction d = direction(x, r, ca2, cb2, cc2, cq2, cv2);
        const double frac = std::max(O_.step_fraction, 1.0 - std::min(1e-2, 1e2 * mu));
        double t = std::min(1.0, frac * step_length(x, d));
        if (t < 0.5 * ta) {
            // The second-order correction can misfire near the solution; try plain centering.
            const VectorXd ca3 = ca.array() - target;
            const VectorXd cb3 = cb.array() - target;
            const VectorXd cc3 = nc_ > 0 ? VectorXd(cc.array() - target) : VectorXd();
            const VectorXd cq3 = nq_ > 0 ? VectorXd(cq.array() - target) : VectorXd();
            Direction dc = direction(x, r, ca3, cb3, cc3, cq3, cv - target);
            const double tc = std::min(1.0, frac * step_length(x, dc));
            if (tc > t && dc.error <= d.error + 1e-8) {
                d = std::move(dc);
                t = tc;
            }
        }
        if (d.error > 1e-6 && best_merit <= 1e3 * O_.tol) {
            return fallback(Outcome::NumericalError, "inaccurate search direction", it);
        }
        if (!(t > 0.0) || !d.theta.allFinite() || !d.z.allFinite()) {
            return fallback(Outcome::NumericalError, "invalid search direction", it);
        }
        advance(x, d, t);
    }
    return fallback(Outcome::MaxIterations, "iteration limit reached", O_.max_iter);
}

}  // namespace

Result solve(const Program& prog, const Options& opts) {
    const Eigen::Index nt = prog.c_theta.size();
    const Eigen::Index n = prog.c_z.size();
    if (nt == 0 || n < 2 || prog.G.rows() != n || prog.G.cols() != nt || prog.A.cols() != nt ||
        prog.A.rows() != prog.b.size() || prog.F.rows() != prog.h.size() || (prog.F.rows() > 0 && prog.F.cols() != nt)) {
        Result r;
        r.outcome = Outcome::NumericalError;
        r.message = "ipm::solve: inconsistent program dimensions";
        return r;
    }
    for (const auto& q : prog.quadratics) {
        if (q.P.rows() != nt || q.P.cols() != nt || q.q.size() != nt) {
            Result r;
            r.message = "ipm::solve: quadratic constraint dimension mismatch";
            return r;
        }
    }
    if (prog.zvar && prog.zvar->q.size() != nt) {
        Result r;
        r.message = "ipm::solve: z-variance constraint dimension mismatch";
        return r;
    }
    Solver s(prog, opts);
    return s.run();
}

}  // namespace pbr::ipm
