#include "pbr/asymptotics.h"

#include "pbr/errors.h"
#include "pbr/models.h"
#include "pbr/normal.h"
#include "pbr/objective_identity.h"
#include "pbr/solvers.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace pbr {

namespace {

std::string fmt_sci(double x) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(3) << x;
    return os.str();
}

void require_beta(double beta, const char* fn) {
    if (!(beta > 0.5 && beta < 1.0)) {
        throw DomainError(std::string(fn) + ": beta must lie in (0.5, 1)");
    }
}

void require_pd(const MatrixXd& sigma, Eigen::Index p, const char* fn) {
    if (sigma.rows() != p || sigma.cols() != p) {
        throw InputError(std::string(fn) + ": sigma dimension mismatch");
    }
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw ModelError(std::string(fn) + ": sigma is not positive definite");
    }
}

// Integral of phi(u) f(u) over u >= z.
template <class F>
double upper_tail_integral(F f, double z) {
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double u) { return normal_pdf(u) * f(u); }, z, z + 40.0, 20, 1e-13, &err);
    if (!std::isfinite(v) || err > 1e-10 * std::max(1.0, std::abs(v))) {
        throw NumericError("upper_tail_integral: quadrature did not converge (error estimate " + std::to_string(err) + ")");
    }
    return v;
}

}  // namespace

double g_function(double mu2, double sigma1, double sigma2, double sigma12, double beta) {
    const double z = normal_quantile(beta);
    const double p0 = normal_pdf(z) / sigma1;
    return (1.0 - beta) * (mu2 * mu2 + sigma2 * sigma2) + p0 * sigma12 * (z * sigma12 / sigma1 + 2.0 * mu2);
}

double h_function(double mu2, double sigma1, double sigma2, double sigma12, double beta) {
    const double z = normal_quantile(beta);
    const double m = mu2 + sigma12 / sigma1 * z;
    return m * m + sigma2 * sigma2 - sigma12 * sigma12 / (sigma1 * sigma1);
}

KeyStats key_stats(const VectorXd& mu, const MatrixXd& sigma, const VectorXd& w, double beta, const VectorXd& dir_j,
                   const VectorXd& dir_l) {
    require_beta(beta, "key_stats");
    const Eigen::Index p = mu.size();
    require_pd(sigma, p, "key_stats");
    if (w.size() != p || dir_j.size() != p || dir_l.size() != p) {
        throw InputError("key_stats: vector dimension mismatch");
    }
    const double z = normal_quantile(beta);
    const VectorXd sw = sigma * w;
    KeyStats k;
    k.sigma1 = std::sqrt(w.dot(sw));
    if (!(k.sigma1 > 0.0)) {
        throw DegenerateError("key_stats: w'Sigma w is zero");
    }
    k.mu1 = -k.sigma1 * z;
    k.p0 = normal_pdf(z) / k.sigma1;
    k.e_max = k.sigma1 * normal_pdf(z) - k.sigma1 * (1.0 - beta) * z;

    const double cj = dir_j.dot(sw);
    k.sigma12 = -cj;
    k.e_ljx_cond = dir_j.dot(mu) - z * cj / k.sigma1;
    k.e_ljx_ind = (1.0 - beta) * k.e_ljx_cond - cj / (k.sigma1 * k.sigma1) * k.e_max;

    auto g_of = [&](const VectorXd& d) {
        return g_function(d.dot(mu), k.sigma1, std::sqrt(d.dot(sigma * d)), -d.dot(sw), beta);
    };
    auto h_of = [&](const VectorXd& d) {
        return h_function(d.dot(mu), k.sigma1, std::sqrt(d.dot(sigma * d)), -d.dot(sw), beta);
    };
    const VectorXd plus = dir_j + dir_l;
    const VectorXd minus = dir_j - dir_l;
    k.e_quad_ind = 0.25 * (g_of(plus) - g_of(minus));
    k.e_quad_cond = 0.25 * (h_of(plus) - h_of(minus));
    k.g_val = g_of(dir_j);
    k.h_val = h_of(dir_j);
    return k;
}

KeyStats key_stats(const VectorXd& mu, const MatrixXd& sigma, const VectorXd& w, double beta, Eigen::Index j,
                   Eigen::Index l) {
    const Eigen::Index p = mu.size();
    if (j < 2 || j > p || l < 2 || l > p) {
        throw InputError("key_stats: direction indices must lie in 2..p");
    }
    const MatrixXd D = weight_jacobian(p);
    return key_stats(mu, sigma, w, beta, VectorXd(D.col(j - 2)), VectorXd(D.col(l - 2)));
}

ThetaZero population_dualized_solution(const VectorXd& mu, const MatrixXd& sigma, double beta, double lambda0,
                                       double lambda1) {
    require_beta(beta, "population_dualized_solution");
    const Eigen::Index p = mu.size();
    require_pd(sigma, p, "population_dualized_solution");
    if (!(lambda0 >= 0.0 && lambda1 >= 0.0)) {
        throw DomainError("population_dualized_solution: weights must be nonnegative");
    }
    const double G = gaussian_g_constant(beta);
    const double k = 1.0 + lambda0;
    ThetaZero out;
    if (p == 1) {
        out.w = VectorXd::Ones(1);
    } else {
        const MatrixXd D = weight_jacobian(p);
        VectorXd e1 = VectorXd::Zero(p);
        e1(0) = 1.0;
        auto objective = [&](const VectorXd& w) {
            const double q = w.dot(sigma * w);
            return -k * mu.dot(w) + G * std::sqrt(q) + lambda1 * q;
        };
        VectorXd w = min_variance_portfolio(sigma);
        VectorXd v = w.tail(p - 1);
        const double scale = k * mu.cwiseAbs().maxCoeff() + G * sigma.diagonal().cwiseSqrt().maxCoeff();
        double gnorm = std::numeric_limits<double>::infinity();
        auto gradient = [&](const VectorXd& vv) {
            const VectorXd ww = e1 + D * vv;
            const VectorXd sw = sigma * ww;
            const double s = std::sqrt(ww.dot(sw));
            return VectorXd(D.transpose() * (-k * mu + (G / s) * sw + 2.0 * lambda1 * sw));
        };
        for (int it = 0; it < 200; ++it) {
            w = e1 + D * v;
            const VectorXd sw = sigma * w;
            const double s = std::sqrt(w.dot(sw));
            const VectorXd gv = gradient(v);
            gnorm = gv.cwiseAbs().maxCoeff();
            if (gnorm <= 1e-14 * scale) {
                break;
            }
            const MatrixXd hw = (G / s) * (sigma - sw * sw.transpose() / (s * s)) + 2.0 * lambda1 * sigma;
            const MatrixXd hv = D.transpose() * hw * D;
            const VectorXd dv = -hv.ldlt().solve(gv);
            double t = 1.0;
            const double f0 = objective(w);
            const double slope = gv.dot(dv);
            while (objective(e1 + D * (v + t * dv)) > f0 + 1e-4 * t * slope && t > 1e-12) {
                t *= 0.5;
            }
            if (t <= 1e-12) {
                // Objective differences are below round-off; fall back to the gradient.
                if (gradient(v + dv).cwiseAbs().maxCoeff() < 0.5 * gnorm) {
                    v += dv;
                    continue;
                }
                break;
            }
            v += t * dv;
            if (v.cwiseAbs().maxCoeff() > 1e8) {
                throw NumericError("population_dualized_solution: objective is unbounded below for lambda0 = " +
                                   std::to_string(lambda0));
            }
        }
        if (!(gnorm <= 1e-10 * scale)) {
            throw NumericError("population_dualized_solution: first-order conditions not met (gradient " +
                               fmt_sci(gnorm) + ")");
        }
        out.w = e1 + D * v;
    }
    const double s0 = std::sqrt(out.w.dot(sigma * out.w));
    out.alpha = -out.w.dot(mu) + s0 * normal_quantile(beta);
    return out;
}

CrossMoments b1_cross_moments(const VectorXd& mu, const MatrixXd& sigma, double beta, double lambda0,
                              const ThetaZero& theta0, const VectorXd& dj, const VectorXd& dl) {
    require_beta(beta, "b1_cross_moments");
    const VectorXd& w = theta0.w;
    const VectorXd sw = sigma * w;
    const double s1sq = w.dot(sw);
    const double s1 = std::sqrt(s1sq);
    const double z = normal_quantile(beta);
    // Given t = -w'(X - mu) ~ N(0, s1^2): E[d'(X - mu) | t] = c t, conditional covariance S.
    const double cj = -dj.dot(sw) / s1sq;
    const double cl = -dl.dot(sw) / s1sq;
    const double Sjl = dj.dot(sigma * dl) - dj.dot(sw) * dl.dot(sw) / s1sq;
    const double mj = dj.dot(mu);

    // 1(Z1 >= 0) is 1(t >= s1 z); integrate over u = t / s1.
    const double ind_jl = upper_tail_integral(
        [&](double u) {
            const double t = s1 * u;
            return -t * (mj * cl * t + cj * cl * t * t + Sjl);
        },
        z);
    const double ind_l = upper_tail_integral(
        [&](double u) {
            const double t = s1 * u;
            return -t * cl * t;
        },
        z);

    CrossMoments m;
    m.b0j_b1l = -2.0 / (1.0 - beta) * ind_jl - 2.0 * lambda0 * mj * dl.dot(sw);
    m.b1j_b1l = 4.0 * (dj.dot(sigma * dl) * s1sq + 2.0 * dj.dot(sw) * dl.dot(sw));
    m.b01_b1l = 2.0 * dl.dot(sw) - 2.0 / (1.0 - beta) * ind_l;
    return m;
}

namespace {

AsymptoticCov assemble(const VectorXd& mu, const MatrixXd& sigma, double beta, double lambda0, double lambda1,
                       const ThetaZero& theta0, const char* fn) {
    require_beta(beta, fn);
    const Eigen::Index p = mu.size();
    require_pd(sigma, p, fn);
    if (p < 2 || theta0.w.size() != p) {
        throw InputError(std::string(fn) + ": need p >= 2 and a p-dimensional theta0");
    }
    if (!(lambda0 >= 0.0 && lambda1 >= 0.0)) {
        throw DomainError(std::string(fn) + ": weights must be nonnegative");
    }
    const MatrixXd D = weight_jacobian(p);
    const VectorXd& w = theta0.w;
    const double ib = 1.0 / (1.0 - beta);

    AsymptoticCov out;
    out.lambda0 = lambda0;
    out.lambda1 = lambda1;
    out.theta0 = theta0;
    out.a_mat = MatrixXd::Zero(p, p);
    out.b_mat = MatrixXd::Zero(p, p);

    const KeyStats k0 = key_stats(mu, sigma, w, beta, VectorXd(D.col(0)), VectorXd(D.col(0)));
    out.a_mat(0, 0) = k0.p0 * ib;
    out.b_mat(0, 0) = beta * ib;
    for (Eigen::Index j = 0; j < p - 1; ++j) {
        const VectorXd dj = D.col(j);
        for (Eigen::Index l = j; l < p - 1; ++l) {
            const VectorXd dl = D.col(l);
            const KeyStats ks = key_stats(mu, sigma, w, beta, dj, dl);
            if (l == j) {
                out.a_mat(0, 1 + j) = ks.p0 * ib * ks.e_ljx_cond;
                out.b_mat(0, 1 + j) = (beta * ib * ib + lambda0 * ib) * ks.e_ljx_ind - lambda0 * dj.dot(mu);
            }
            double a = ks.p0 * ib * ks.e_quad_cond;
            double b = lambda0 * lambda0 * (dj.dot(sigma * dl) + dj.dot(mu) * dl.dot(mu)) +
                       ib * (ib + 2.0 * lambda0) * ks.e_quad_ind;
            if (lambda1 > 0.0) {
                a += 2.0 * lambda1 * dj.dot(sigma * dl);
                const CrossMoments jl = b1_cross_moments(mu, sigma, beta, lambda0, theta0, dj, dl);
                const CrossMoments lj = b1_cross_moments(mu, sigma, beta, lambda0, theta0, dl, dj);
                b += lambda1 * (jl.b0j_b1l + lj.b0j_b1l + lambda1 * jl.b1j_b1l);
                if (l == j) {
                    out.b_mat(0, 1 + j) += lambda1 * jl.b01_b1l;
                }
            }
            out.a_mat(1 + j, 1 + l) = a;
            out.a_mat(1 + l, 1 + j) = a;
            out.b_mat(1 + j, 1 + l) = b;
            out.b_mat(1 + l, 1 + j) = b;
        }
        out.a_mat(1 + j, 0) = out.a_mat(0, 1 + j);
        out.b_mat(1 + j, 0) = out.b_mat(0, 1 + j);
    }

    Eigen::JacobiSVD<MatrixXd> svd(out.a_mat);
    const auto& sv = svd.singularValues();
    out.condition = sv(0) / sv(sv.size() - 1);
    if (!(out.condition <= 1e12)) {
        throw NumericError(std::string(fn) + ": A is ill-conditioned (condition " + std::to_string(out.condition) + ")");
    }
    Eigen::LDLT<MatrixXd> ldlt(out.a_mat);
    const MatrixXd ainv_b = ldlt.solve(out.b_mat);
    out.sigma_theta = ldlt.solve(ainv_b.transpose());
    out.sigma_theta = 0.5 * (out.sigma_theta + out.sigma_theta.transpose()).eval();
    MatrixXd J = MatrixXd::Zero(p, p);
    J.rightCols(p - 1) = D;
    out.sigma_w = J * out.sigma_theta * J.transpose();
    out.sigma_w = 0.5 * (out.sigma_w + out.sigma_w.transpose()).eval();
    return out;
}

}  // namespace

AsymptoticCov matrix_a0_b0(const VectorXd& mu, const MatrixXd& sigma, double beta, double lambda0,
                           const ThetaZero& theta0) {
    return assemble(mu, sigma, beta, lambda0, 0.0, theta0, "matrix_a0_b0");
}

AsymptoticCov matrix_a1_b1(const VectorXd& mu, const MatrixXd& sigma, double beta, double lambda0, double lambda1,
                           const ThetaZero& theta0) {
    return assemble(mu, sigma, beta, lambda0, lambda1, theta0, "matrix_a1_b1");
}

FrontierStd frontier_std(const AsymptoticCov& cov, const VectorXd& mu, const MatrixXd& sigma, double g_const, double n) {
    if (!(n > 0.0)) {
        throw DomainError("frontier_std: n must be positive");
    }
    const VectorXd& w0 = cov.theta0.w;
    const double s0 = std::sqrt(w0.dot(sigma * w0));
    if (!(s0 > 0.0)) {
        throw DegenerateError("frontier_std: w0'Sigma w0 is zero");
    }
    const VectorXd grad = -mu + g_const * (sigma * w0) / s0;
    FrontierStd out;
    out.std_mean = std::sqrt(std::max(0.0, mu.dot(cov.sigma_w * mu)) / n);
    out.std_cvar = std::sqrt(std::max(0.0, grad.dot(cov.sigma_w * grad)) / n);
    return out;
}

double cvar_var_redundancy_constant(double beta) {
    require_beta(beta, "cvar_var_redundancy_constant");
    const double z = normal_quantile(beta);
    const double phi = normal_pdf(z);
    const double m1 = phi - (1.0 - beta) * z;
    const double m2 = (1.0 - beta) * (1.0 + z * z) - z * phi;
    return m2 - m1 * m1;
}

double chance_mapping(double value, double epsilon, ChanceDirection direction) {
    if (!(value > 0.0) || !(epsilon > 0.0 && epsilon < 1.0)) {
        throw DomainError("chance_mapping: need value > 0 and epsilon in (0, 1)");
    }
    const double q = normal_quantile(1.0 - 0.5 * epsilon);
    if (direction == ChanceDirection::ToCap) {
        const double r = value / q;
        return r * r;
    }
    return q * std::sqrt(value);
}

void write_theory_csv(std::ostream& os, const std::vector<TheoryRow>& rows) {
    const auto old = os.precision(17);
    os << "n,lambda0,lambda1,std_mean,std_cvar\n";
    for (const auto& r : rows) {
        os << r.n << ',' << r.lambda0 << ',' << r.lambda1 << ',' << r.std_mean << ',' << r.std_cvar << '\n';
    }
    os.precision(old);
}

}  // namespace pbr
