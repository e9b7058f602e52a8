#pragma once

#include "pbr/config.h"
#include "pbr/solvers.h"

#include <cstdint>
#include <string>
#include <vector>

namespace pbr {

/// Seed of trial t: splitmix64(splitmix64(master) ^ (t + 1)).
std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial);

struct TrialRecord {
    int trial = 0;
    std::string method;
    double R = 0.0;  ///< target return, or lambda0 for dualized methods
    double realized_ret = 0.0;
    double realized_cvar = 0.0;
    SolveStatus status = SolveStatus::NumericFailure;
};

struct SummaryRow {
    std::string method;
    double R = 0.0;
    double mean_ret = 0.0;
    double std_ret = 0.0;
    double mean_cvar = 0.0;
    double std_cvar = 0.0;
    double population_ret = 0.0;
    double population_cvar = 0.0;
    int trial_count = 0;
    int infeasible = 0;
    int numeric_failures = 0;
    bool valid = true;
};

struct FrontierSummary {
    std::vector<SummaryRow> rows;
};

struct ExperimentResult {
    FrontierSummary summary;
    std::vector<TrialRecord> trials;
    std::vector<double> r_grid;
};

/// 15 targets from the mean of the minimum-variance portfolio to the 90th
/// percentile of the asset means.
std::vector<double> default_r_grid(const MarketModel& model);

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Aggregates a raw trial table. Population columns are left at zero.
FrontierSummary summarize(const std::vector<TrialRecord>& trials, const std::vector<std::string>& methods,
                          const std::vector<double>& targets);

/// Writes trials.csv, summary.csv, theory.csv, meta.json and plot_spec.json.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result);

struct TheorySimRow {
    Eigen::Index n = 0;
    double sim_std_mean = 0.0;
    double sim_std_cvar = 0.0;
    double theory_std_mean = 0.0;
    double theory_std_cvar = 0.0;
    int trial_count = 0;
};

/// Simulated versus asymptotic error bars of the dualized solution on a Gaussian model.
std::vector<TheorySimRow> theory_vs_sim(const ExperimentConfig& config, double lambda0, double lambda1);

struct CvScore {
    Ratios ratios;
    double score = 0.0;
    bool feasible = false;
};

struct CvResult {
    Ratios selected;
    std::vector<CvScore> scores;
};

/// k-fold selection of (r1, r2) by out-of-fold empirical CVaR; ties go to the
/// larger ratios.
CvResult select_penalty_ratios(const ReturnsSample& sample, double beta, double R, const std::vector<Ratios>& grid,
                               int folds);

}  // namespace pbr
