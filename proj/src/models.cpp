#include "pbr/models.h"

#include "pbr/errors.h"
#include "pbr/normal.h"
#include "pbr/solvers.h"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

namespace pbr {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kGammaTailMass = 1e-12;
constexpr double kQuadTol = 1e-13;

Eigen::LLT<MatrixXd> cholesky(const MatrixXd& sigma, const char* fn) {
    if (sigma.rows() != sigma.cols()) {
        throw ModelError(std::string(fn) + ": sigma is not square");
    }
    if (!sigma.allFinite() || !sigma.isApprox(sigma.transpose(), 1e-12)) {
        throw ModelError(std::string(fn) + ": sigma is not symmetric");
    }
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw ModelError(std::string(fn) + ": sigma is not positive definite");
    }
    return llt;
}

double integrate(const std::function<double(double)>& f, double a, double b, const char* what) {
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, kQuadTol, &err);
    if (!std::isfinite(v) || err > 1e-9 * std::max(1.0, std::abs(v))) {
        throw NumericError(std::string("elliptical_g_constant: quadrature for ") + what + " did not converge (error estimate " +
                           std::to_string(err) + ")");
    }
    return v;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string model_tag(const MarketModel& model) {
    return std::visit(overloaded{[](const GaussianModel&) { return std::string("gaussian"); },
                                 [](const EllipticalModel&) { return std::string("elliptical"); },
                                 [](const JumpMixtureModel&) { return std::string("jump_mixture"); }},
                      model);
}

const VectorXd& model_mu(const MarketModel& model) {
    return std::visit([](const auto& m) -> const VectorXd& { return m.mu; }, model);
}

const MatrixXd& model_sigma(const MarketModel& model) {
    return std::visit([](const auto& m) -> const MatrixXd& { return m.sigma; }, model);
}

Eigen::Index model_dimension(const MarketModel& model) { return model_mu(model).size(); }

VectorXd model_expected_return(const MarketModel& model) {
    if (const auto* j = std::get_if<JumpMixtureModel>(&model)) {
        const VectorXd jump = j->f.array() - 1.0 / j->lambda_exp;
        return (1.0 - j->q_jump) * j->mu + j->q_jump * jump;
    }
    return model_mu(model);
}

void validate(const MarketModel& model) {
    const VectorXd& mu = model_mu(model);
    const MatrixXd& sigma = model_sigma(model);
    if (mu.size() == 0 || !mu.allFinite()) {
        throw ModelError("validate: mu must be a non-empty finite vector");
    }
    if (sigma.rows() != mu.size()) {
        throw ModelError("validate: sigma dimension does not match mu");
    }
    cholesky(sigma, "validate");
    if (const auto* e = std::get_if<EllipticalModel>(&model)) {
        std::visit(overloaded{[](const GammaMixing& g) {
                                  if (!(g.shape > 0.0 && g.scale > 0.0)) {
                                      throw ModelError("validate: gamma mixing needs positive shape and scale");
                                  }
                              },
                              [](const PointMassMixing& m) {
                                  if (!(m.value > 0.0) || !std::isfinite(m.value)) {
                                      throw ModelError("validate: point-mass mixing value must be positive");
                                  }
                              }},
                   e->mixing);
    }
    if (const auto* j = std::get_if<JumpMixtureModel>(&model)) {
        if (!(j->q_jump >= 0.0 && j->q_jump < 1.0)) {
            throw ModelError("validate: q_jump must lie in [0, 1)");
        }
        if (!(j->lambda_exp > 0.0) || !std::isfinite(j->lambda_exp)) {
            throw ModelError("validate: lambda_exp must be positive");
        }
        if (j->f.size() != mu.size() || !j->f.allFinite()) {
            throw ModelError("validate: f must be a finite p-vector");
        }
    }
}

VectorXd synthetic_mu() {
    VectorXd mu(10);
    mu << 0.00093, 0.00046, 0.00067, 0.00117, 0.00099, 0.00060, 0.00082, 0.00050, 0.00062, 0.00074;
    return mu;
}

MatrixXd synthetic_sigma() {
    VectorXd vol(10);
    vol << 0.0121, 0.0234, 0.0223, 0.0132, 0.0101, 0.0163, 0.0208, 0.0123, 0.0202, 0.0214;
    MatrixXd corr = MatrixXd::Constant(10, 10, 0.4);
    corr.diagonal().setOnes();
    return vol.asDiagonal() * corr * vol.asDiagonal();
}

VectorXd default_jump_offset(const VectorXd& mu, const MatrixXd& sigma) {
    return mu - sigma.diagonal().cwiseSqrt();
}

ReturnsSample sample(const MarketModel& model, Eigen::Index n, std::uint64_t seed) {
    if (n < 2) {
        throw InputError("sample: need n >= 2");
    }
    validate(model);
    const VectorXd& mu = model_mu(model);
    const Eigen::Index p = mu.size();
    const MatrixXd chol = cholesky(model_sigma(model), "sample").matrixL();

    std::mt19937_64 main_stream(seed);
    std::mt19937_64 aux_stream(splitmix64(seed));
    boost::random::normal_distribution<double> normal;
    boost::random::uniform_01<double> uniform;

    MatrixXd z(p, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < p; ++k) {
            z(k, i) = normal(main_stream);
        }
    }
    MatrixXd x = chol * z;

    std::visit(overloaded{[&](const GaussianModel&) { x.colwise() += mu; },
                          [&](const EllipticalModel& m) {
                              std::visit(overloaded{[&](const GammaMixing& g) {
                                                        boost::random::gamma_distribution<double> gamma(g.shape, g.scale);
                                                        for (Eigen::Index i = 0; i < n; ++i) {
                                                            x.col(i) *= gamma(aux_stream);
                                                        }
                                                    },
                                                    [&](const PointMassMixing& pm) { x *= pm.value; }},
                                         m.mixing);
                              x.colwise() += mu;
                          },
                          [&](const JumpMixtureModel& m) {
                              boost::random::exponential_distribution<double> expo(m.lambda_exp);
                              x.colwise() += mu;
                              for (Eigen::Index i = 0; i < n; ++i) {
                                  if (uniform(aux_stream) < m.q_jump) {
                                      const double y = -expo(aux_stream);
                                      x.col(i) = m.f.array() + y;
                                  }
                              }
                          }},
               model);
    return ReturnsSample(std::move(x));
}

double gaussian_g_constant(double beta) {
    return normal_pdf(normal_quantile(beta)) / (1.0 - beta);
}

double elliptical_g_constant(const MixingLaw& mixing, double beta) {
    if (!(beta > 0.0 && beta < 1.0)) {
        throw DomainError("elliptical_g_constant: beta must lie in (0, 1)");
    }
    if (const auto* pm = std::get_if<PointMassMixing>(&mixing)) {
        return pm->value * gaussian_g_constant(beta);
    }
    const auto& g = std::get<GammaMixing>(mixing);
    const boost::math::gamma_distribution<double> law(g.shape, g.scale);
    const double lmax = boost::math::quantile(law, 1.0 - kGammaTailMass);
    const double tail_target = 1.0 - beta;

    auto tail_prob = [&](double x) {
        return integrate([&](double l) { return l <= 0.0 ? 0.0 : boost::math::pdf(law, l) * normal_sf(x / l); }, 0.0, lmax,
                         "P(S >= x)");
    };

    double lo = 0.0;
    double hi = std::max(1.0, normal_quantile(beta) * boost::math::mean(law));
    int guard = 0;
    while (tail_prob(hi) > tail_target) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 60) {
            throw NumericError("elliptical_g_constant: could not bracket the quantile");
        }
    }
    while (hi - lo > 1e-12 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (tail_prob(mid) > tail_target ? lo : hi) = mid;
    }
    const double q = 0.5 * (lo + hi);
    const double tail_mean =
        integrate([&](double l) { return l <= 0.0 ? 0.0 : boost::math::pdf(law, l) * l * normal_pdf(q / l); }, 0.0, lmax,
                  "E[S 1(S >= q)]");
    return tail_mean / tail_target;
}

// Scalar reduction of the jump model: the loss of w is a + s Z on the
// Gaussian branch and E + c on the jump branch (E ~ Exp(lambda), c = -w'f).
struct PopulationEvaluator::JumpScenarios {
    std::vector<double> z;
    std::vector<double> e;
    std::vector<double> z_suffix;
    std::vector<double> e_suffix;
    std::size_t total = 0;
};

namespace {

std::vector<double> suffix_of(const std::vector<double>& v) {
    std::vector<double> s(v.size() + 1, 0.0);
    for (std::size_t k = v.size(); k-- > 0;) {
        s[k] = s[k + 1] + v[k];
    }
    return s;
}

}  // namespace

PopulationEvaluator::PopulationEvaluator(MarketModel model, double beta, std::size_t mc_draws)
    : model_(std::move(model)), beta_(beta) {
    if (!(beta > 0.0 && beta < 1.0)) {
        throw DomainError("PopulationEvaluator: beta must lie in (0, 1)");
    }
    validate(model_);
    mean_ = model_expected_return(model_);
    if (const auto* e = std::get_if<EllipticalModel>(&model_)) {
        g_ = elliptical_g_constant(e->mixing, beta);
    } else {
        g_ = gaussian_g_constant(beta);
    }
    if (const auto* j = std::get_if<JumpMixtureModel>(&model_)) {
        if (mc_draws < 2) {
            throw InputError("PopulationEvaluator: need at least two Monte-Carlo draws");
        }
        jump_ = std::make_unique<JumpScenarios>();
        std::mt19937_64 rng(0x5eed0f1a7e5ULL);
        boost::random::normal_distribution<double> normal;
        boost::random::exponential_distribution<double> expo(j->lambda_exp);
        boost::random::uniform_01<double> uniform;
        jump_->z.reserve(mc_draws);
        for (std::size_t k = 0; k < mc_draws; ++k) {
            if (uniform(rng) < j->q_jump) {
                jump_->e.push_back(expo(rng));
            } else {
                jump_->z.push_back(normal(rng));
            }
        }
        std::sort(jump_->z.begin(), jump_->z.end());
        std::sort(jump_->e.begin(), jump_->e.end());
        jump_->z_suffix = suffix_of(jump_->z);
        jump_->e_suffix = suffix_of(jump_->e);
        jump_->total = mc_draws;
    }
}

PopulationEvaluator::~PopulationEvaluator() = default;
PopulationEvaluator::PopulationEvaluator(PopulationEvaluator&&) noexcept = default;
PopulationEvaluator& PopulationEvaluator::operator=(PopulationEvaluator&&) noexcept = default;

PopulationPoint PopulationEvaluator::evaluate(const VectorXd& w) const {
    const VectorXd& mu = model_mu(model_);
    if (w.size() != mu.size() || !w.allFinite()) {
        throw InputError("population_cvar: w must be a finite p-vector");
    }
    if (std::abs(w.sum() - 1.0) > 1e-10) {
        throw InputError("population_cvar: weights must sum to one");
    }
    const double sd = std::sqrt(std::max(0.0, w.dot(model_sigma(model_) * w)));
    PopulationPoint out;
    out.ret = w.dot(mean_);
    out.g_const = g_;
    if (!jump_) {
        out.cvar = -w.dot(mu) + g_ * sd;
        return out;
    }

    const auto& J = *jump_;
    const double a = -w.dot(mu);
    const double c = -w.dot(std::get<JumpMixtureModel>(model_).f);
    const auto na = static_cast<std::ptrdiff_t>(J.z.size());
    const auto nb = static_cast<std::ptrdiff_t>(J.e.size());
    auto A = [&](std::ptrdiff_t i) { return a + sd * J.z[i]; };
    auto B = [&](std::ptrdiff_t i) { return c + J.e[i]; };

    // K-th smallest of the merged sorted branches.
    const auto K = static_cast<std::ptrdiff_t>(order_index(static_cast<Eigen::Index>(J.total), beta_));
    std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, K - nb);
    std::ptrdiff_t hi = std::min<std::ptrdiff_t>(K, na);
    std::ptrdiff_t i = lo;
    while (lo <= hi) {
        i = (lo + hi) / 2;
        const std::ptrdiff_t j = K - i;
        if (i > 0 && j < nb && A(i - 1) > B(j)) {
            hi = i - 1;
        } else if (j > 0 && i < na && B(j - 1) > A(i)) {
            lo = i + 1;
        } else {
            break;
        }
    }
    const std::ptrdiff_t j = K - i;
    const double ninf = -std::numeric_limits<double>::infinity();
    const double alpha = std::max(i > 0 ? A(i - 1) : ninf, j > 0 ? B(j - 1) : ninf);

    // Exceedances above alpha in each branch.
    const auto za = sd > 0.0 ? static_cast<std::ptrdiff_t>(
                                   std::upper_bound(J.z.begin(), J.z.end(), (alpha - a) / sd) - J.z.begin())
                             : (a > alpha ? 0 : na);
    const auto zb = static_cast<std::ptrdiff_t>(std::upper_bound(J.e.begin(), J.e.end(), alpha - c) - J.e.begin());
    double excess = 0.0;
    excess += static_cast<double>(na - za) * (a - alpha) + sd * J.z_suffix[za];
    excess += static_cast<double>(nb - zb) * (c - alpha) + J.e_suffix[zb];
    out.cvar = alpha + std::max(0.0, excess) / (static_cast<double>(J.total) * (1.0 - beta_));
    return out;
}

PopulationPoint population_cvar(const MarketModel& model, const VectorXd& w, double beta) {
    return PopulationEvaluator(model, beta).evaluate(w);
}

namespace {

// Jump model: the CVaR of w depends on a = -w'mu, s = sqrt(w'Sigma w) and
// c = -w'f only, and the return target fixes c given a. For fixed a the
// smallest s comes from a three-constraint variance QP, so the frontier point
// is a one-dimensional convex search over a.
std::optional<FrontierPoint> jump_frontier_point(const JumpMixtureModel& m, const PopulationEvaluator& eval, double R) {
    const Eigen::Index p = m.mu.size();
    if (p < 3 || !(m.q_jump > 0.0)) return std::nullopt;
    MatrixXd A(3, p);
    A.row(0).setOnes();
    A.row(1) = m.mu.transpose();
    A.row(2) = m.f.transpose();
    const Eigen::LLT<MatrixXd> llt(m.sigma);
    const MatrixXd SiAt = llt.solve(A.transpose());
    const Eigen::FullPivLU<MatrixXd> lu(A * SiAt);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) return std::nullopt;

    // w(a) = w0 + a w1 with 1'w = 1, mu'w = -a and the target on the mean.
    const double q = m.q_jump;
    Eigen::Vector3d b0(1.0, 0.0, (R + q / m.lambda_exp) / q);
    Eigen::Vector3d b1(0.0, -1.0, (1.0 - q) / q);
    const VectorXd w0 = SiAt * lu.solve(b0);
    const VectorXd w1 = SiAt * lu.solve(b1);
    auto weights = [&](double a) -> VectorXd { return w0 + a * w1; };
    auto f = [&](double a) { return eval.evaluate(weights(a)).cvar; };

    const VectorXd wmk = solve_markowitz(model_expected_return(m), m.sigma, R);
    double mid = -m.mu.dot(wmk);
    double h = 0.1 * std::max(std::abs(mid), std::sqrt(wmk.dot(m.sigma * wmk)));
    double fm = f(mid);
    double lo = mid - h, hi = mid + h;
    double flo = f(lo), fhi = f(hi);
    for (int k = 0; k < 200 && (flo < fm || fhi < fm); ++k) {
        if (flo < fm) {
            hi = mid;
            fhi = fm;
            mid = lo;
            fm = flo;
            h *= 2.0;
            lo = mid - h;
            flo = f(lo);
        } else {
            lo = mid;
            flo = fm;
            mid = hi;
            fm = fhi;
            h *= 2.0;
            hi = mid + h;
            fhi = f(hi);
        }
    }
    if (flo < fm || fhi < fm) return std::nullopt;

    const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    for (int k = 0; k < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(mid)); ++k) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = f(x2);
        }
    }
    const double a = f1 <= f2 ? x1 : x2;
    const VectorXd w = weights(a);
    return FrontierPoint{R, w, eval.evaluate(w).cvar};
}

}  // namespace

std::vector<FrontierPoint> population_frontier(const MarketModel& model, double beta, const std::vector<double>& r_grid) {
    PopulationEvaluator eval(model, beta);
    std::vector<FrontierPoint> out;
    out.reserve(r_grid.size());
    if (const auto* jm = std::get_if<JumpMixtureModel>(&model)) {
        bool reduced = true;
        for (double R : r_grid) {
            const auto pt = jump_frontier_point(*jm, eval, R);
            if (!pt) {
                reduced = false;
                break;
            }
            out.push_back(*pt);
        }
        if (reduced) return out;
        out.clear();
        const ReturnsSample proxy = sample(model, 200000, 0x9a7e7a11ULL);
        const VectorXd mean = model_expected_return(model);
        for (double R : r_grid) {
            const PortfolioSolution sol = solve_cvar_scenarios(proxy.data(), mean, beta, R);
            if (sol.status == SolveStatus::Infeasible) {
                throw InfeasibleError("population_frontier: target return " + std::to_string(R) + " is not attainable");
            }
            if (sol.status == SolveStatus::NumericFailure) {
                throw NumericError("population_frontier: proxy LP failed at R = " + std::to_string(R) + ": " + sol.message);
            }
            out.push_back({R, sol.w, eval.evaluate(sol.w).cvar});
        }
        return out;
    }
    for (double R : r_grid) {
        const VectorXd w = solve_markowitz(model_mu(model), model_sigma(model), R);
        out.push_back({R, w, eval.evaluate(w).cvar});
    }
    return out;
}

}  // namespace pbr
