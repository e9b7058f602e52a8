#include "pbr/estimators.h"

#include "pbr/errors.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace pbr {

namespace {

void require_finite(const VectorXd& losses, const char* fn) {
    if (losses.size() == 0) {
        throw InputError(std::string(fn) + ": empty loss vector");
    }
    if (!losses.allFinite()) {
        throw InputError(std::string(fn) + ": non-finite loss");
    }
}

void require_beta(double beta, const char* fn) {
    if (!(beta >= 0.5 && beta < 1.0)) {
        throw DomainError(std::string(fn) + ": beta must lie in [0.5, 1), got " + std::to_string(beta));
    }
}

std::vector<double> sorted_copy(const VectorXd& losses) {
    std::vector<double> s(losses.data(), losses.data() + losses.size());
    std::stable_sort(s.begin(), s.end());
    return s;
}

// suffix[k] = sum of s[k..n-1]
std::vector<double> suffix_sums(const std::vector<double>& s) {
    std::vector<double> suffix(s.size() + 1, 0.0);
    for (std::size_t k = s.size(); k-- > 0;) {
        suffix[k] = suffix[k + 1] + s[k];
    }
    return suffix;
}

bool integral_product(Eigen::Index n, double beta) {
    const double x = static_cast<double>(n) * beta;
    return std::abs(x - std::round(x)) <= 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, x);
}

}  // namespace

ReturnsSample::ReturnsSample(MatrixXd data) : data_(std::move(data)) {
    if (data_.rows() < 1 || data_.cols() < 2) {
        throw InputError("ReturnsSample: need p >= 1 assets and n >= 2 observations");
    }
    if (!data_.allFinite()) {
        throw InputError("ReturnsSample: non-finite return");
    }
    const double n = static_cast<double>(data_.cols());
    mean_ = data_.rowwise().mean();
    for (Eigen::Index j = 0; j < data_.rows(); ++j) {
        if (data_.row(j).minCoeff() == data_.row(j).maxCoeff()) {
            mean_(j) = data_(j, 0);
        }
    }
    const MatrixXd centered = data_.colwise() - mean_;
    cov_ = centered * centered.transpose() / (n - 1.0);
    cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
}

VectorXd ReturnsSample::losses(const VectorXd& w) const {
    if (w.size() != assets()) {
        throw InputError("ReturnsSample::losses: weight dimension mismatch");
    }
    return -(data_.transpose() * w);
}

Eigen::Index order_index(Eigen::Index n, double beta) {
    const double x = static_cast<double>(n) * beta;
    if (integral_product(n, beta)) {
        return static_cast<Eigen::Index>(std::llround(x));
    }
    return static_cast<Eigen::Index>(std::ceil(x));
}

CvarEstimate ru_cvar(const VectorXd& losses, double beta) {
    require_finite(losses, "ru_cvar");
    require_beta(beta, "ru_cvar");
    const auto s = sorted_copy(losses);
    const auto suffix = suffix_sums(s);
    const auto n = static_cast<Eigen::Index>(s.size());
    const double scale = 1.0 / (static_cast<double>(n) * (1.0 - beta));

    // Objective at node s[k]: only s[k+1..] can exceed it, ties contribute zero.
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double a = s[k];
        const double tail = suffix[k + 1] - static_cast<double>(n - k - 1) * a;
        best = std::min(best, a + scale * tail);
    }

    const Eigen::Index K = order_index(n, beta);
    CvarEstimate out;
    out.kind = CvarKind::RU;
    out.value = best;
    out.alpha = s[K - 1];
    out.alpha_interval.lo = s[K - 1];
    out.alpha_interval.hi = (integral_product(n, beta) && K < n) ? s[K] : s[K - 1];
    return out;
}

CvarEstimate type2_cvar(const VectorXd& losses, double beta) {
    require_finite(losses, "type2_cvar");
    require_beta(beta, "type2_cvar");
    const auto s = sorted_copy(losses);
    const auto n = static_cast<Eigen::Index>(s.size());
    const Eigen::Index K = order_index(n, beta);
    double top = 0.0;
    for (Eigen::Index i = K - 1; i < n; ++i) {
        top += s[i];
    }
    CvarEstimate out;
    out.kind = CvarKind::Type2;
    out.value = top / static_cast<double>(n - K + 1);
    out.alpha = s[K - 1];
    out.alpha_interval = {out.alpha, out.alpha};
    return out;
}

CvarEstimate type1_cvar(const VectorXd& losses, double beta, std::optional<double> eps) {
    require_finite(losses, "type1_cvar");
    require_beta(beta, "type1_cvar");
    const auto s = sorted_copy(losses);
    const auto suffix = suffix_sums(s);
    const auto n = static_cast<Eigen::Index>(s.size());
    const Eigen::Index K = order_index(n, beta);
    const double m = static_cast<double>(n - K + 1);
    const double e = eps.value_or(0.5 / m);
    if (!(e > 0.0 && e < 1.0 / m)) {
        throw DomainError("type1_cvar: eps must lie in (0, " + std::to_string(1.0 / m) + "), got " + std::to_string(e));
    }

    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double a = s[k];
        const double tail = suffix[k + 1] - static_cast<double>(n - k - 1) * a;
        const double g = (1.0 - e) * a + tail / m;
        if (g < best) {
            best = g;
            arg = k;
        }
    }

    CvarEstimate out;
    out.kind = CvarKind::Type1;
    out.value = best;
    out.alpha = s[arg];
    out.alpha_interval = {out.alpha, out.alpha};
    return out;
}

double empirical_var(const VectorXd& losses, double beta) {
    require_finite(losses, "empirical_var");
    require_beta(beta, "empirical_var");
    const Eigen::Index K = order_index(losses.size(), beta);
    std::vector<double> s(losses.data(), losses.data() + losses.size());
    std::nth_element(s.begin(), s.begin() + (K - 1), s.end());
    return s[K - 1];
}

double centered_quadratic(const VectorXd& z) {
    const double n = static_cast<double>(z.size());
    if (z.size() < 2 || z.minCoeff() == z.maxCoeff()) {
        return 0.0;
    }
    const VectorXd c = z.array() - z.mean();
    return c.squaredNorm() / (n - 1.0);
}

PenaltyValue penalty_values(const ReturnsSample& sample, const VectorXd& w, double alpha, double beta) {
    if (w.size() != sample.assets() || !w.allFinite() || !std::isfinite(alpha)) {
        throw InputError("penalty_values: w must be a finite p-vector and alpha finite");
    }
    require_beta(beta, "penalty_values");
    const double n = static_cast<double>(sample.observations());
    const VectorXd L = sample.losses(w);
    const VectorXd z = (L.array() - alpha).max(0.0);

    PenaltyValue out;
    out.p1 = std::max(0.0, w.dot(sample.covariance() * w) / n);
    out.p2 = centered_quadratic(z) / (n * (1.0 - beta) * (1.0 - beta));
    const VectorXd tail = ((L.array() - alpha) * (L.array() >= alpha).cast<double>()).matrix();
    out.gamma0_sq_hat = centered_quadratic(tail);
    return out;
}

}  // namespace pbr
