#pragma once

#include "pbr/estimators.h"

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace pbr {

/// Gamma(shape, scale) mixing law; mean is shape * scale.
struct GammaMixing {
    double shape = 3.0;
    double scale = 0.5;
};

/// Degenerate mixing at a fixed value.
struct PointMassMixing {
    double value = 1.0;
};

using MixingLaw = std::variant<GammaMixing, PointMassMixing>;

struct GaussianModel {
    VectorXd mu;
    MatrixXd sigma;
};

/// X = mu + lambda * N(0, sigma) with lambda drawn from the mixing law.
struct EllipticalModel {
    VectorXd mu;
    MatrixXd sigma;
    MixingLaw mixing = GammaMixing{};
};

/// With probability q_jump, X = Y 1 + f where -Y ~ Exp(lambda_exp);
/// otherwise X ~ N(mu, sigma).
struct JumpMixtureModel {
    VectorXd mu;
    MatrixXd sigma;
    double q_jump = 0.05;
    double lambda_exp = 1.0;
    VectorXd f;
};

using MarketModel = std::variant<GaussianModel, EllipticalModel, JumpMixtureModel>;

std::string model_tag(const MarketModel& model);
Eigen::Index model_dimension(const MarketModel& model);
const VectorXd& model_mu(const MarketModel& model);
const MatrixXd& model_sigma(const MarketModel& model);

/// Mean of X under the model.
VectorXd model_expected_return(const MarketModel& model);

/// Throws ModelError unless the model parameters are valid.
void validate(const MarketModel& model);

/// Synthetic 10-asset daily parameters used in place of calibrated market data.
VectorXd synthetic_mu();
MatrixXd synthetic_sigma();

/// f_i = mu_i - sqrt(sigma_ii).
VectorXd default_jump_offset(const VectorXd& mu, const MatrixXd& sigma);

/// n iid observations. Normal draws use one stream in a fixed order; mixing,
/// switch and exponential draws use a second stream derived from the seed.
ReturnsSample sample(const MarketModel& model, Eigen::Index n, std::uint64_t seed);

struct PopulationPoint {
    double ret = 0.0;
    double cvar = 0.0;
    double g_const = 0.0;
};

/// Scale constant G with CVaR_beta(lambda Z) = G for the mixing law.
double elliptical_g_constant(const MixingLaw& mixing, double beta);

double gaussian_g_constant(double beta);

/// Evaluates true return and CVaR for many portfolios under one model.
/// The jump model uses a fixed internal Monte-Carlo scenario set.
class PopulationEvaluator {
public:
    PopulationEvaluator(MarketModel model, double beta, std::size_t mc_draws = 1000000);
    ~PopulationEvaluator();
    PopulationEvaluator(PopulationEvaluator&&) noexcept;
    PopulationEvaluator& operator=(PopulationEvaluator&&) noexcept;

    PopulationPoint evaluate(const VectorXd& w) const;
    const MarketModel& model() const { return model_; }
    double beta() const { return beta_; }

private:
    struct JumpScenarios;
    MarketModel model_;
    double beta_;
    double g_ = 0.0;
    VectorXd mean_;
    std::unique_ptr<JumpScenarios> jump_;
};

PopulationPoint population_cvar(const MarketModel& model, const VectorXd& w, double beta);

struct FrontierPoint {
    double R = 0.0;
    VectorXd w0;
    double cvar = 0.0;
};

std::vector<FrontierPoint> population_frontier(const MarketModel& model, double beta, const std::vector<double>& r_grid);

/// 64-bit mixing step used to derive independent seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace pbr
