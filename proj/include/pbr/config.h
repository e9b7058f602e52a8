#pragma once

#include "pbr/models.h"
#include "pbr/penalty.h"

#include <cstdint>
#include <string>
#include <vector>

namespace pbr {

enum class MethodKind { Emp, Pen, Markowitz, Dualized };

struct MethodSpec {
    MethodKind kind = MethodKind::Emp;
    /// Used by Pen (Caps or Ratios) and Dualized (lambda1, lambda2; lambda0 comes from the grid).
    PenaltySpec penalty = Caps{};
    std::string label;
};

struct TheorySettings {
    std::vector<Eigen::Index> n_grid{250, 500, 1000, 2000};
    double lambda0 = 1.0;
    double lambda1 = 0.0;
    std::vector<double> lambda1_grid{0.0, 0.5, 1.0, 2.0, 5.0, 10.0};
    std::vector<double> lambda0_grid{0.5, 1.0, 2.0};
};

struct CvSettings {
    double R = 0.0;
    bool has_R = false;
    std::vector<Ratios> grid{{1.0, 1.0}};
    int folds = 5;
};

struct ExperimentConfig {
    MarketModel model;
    double beta = 0.95;
    Eigen::Index n = 250;
    int trials = 100;
    /// Target returns; empty means the default grid.
    std::vector<double> r_grid;
    /// Targets for Dualized methods.
    std::vector<double> lambda0_grid;
    std::vector<MethodSpec> methods;
    std::uint64_t master_seed = 1;
    std::string output_dir = "out";
    int threads = 1;
    TheorySettings theory;
    CvSettings cv;
    /// True when the model parameters are the built-in synthetic stand-ins.
    bool synthetic_parameters = false;
};

/// Parses the JSON configuration; throws InputError with the offending key.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Throws InputError unless trials >= 1, methods are non-empty and every
/// method has a non-empty target grid.
void validate(const ExperimentConfig& config);

std::string method_label(const MethodSpec& m);

/// Echo of the configuration as JSON text.
std::string config_to_json(const ExperimentConfig& config);

}  // namespace pbr
