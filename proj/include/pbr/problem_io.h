#pragma once

#include "pbr/estimators.h"
#include "pbr/penalty.h"

#include <optional>
#include <string>

namespace pbr {

/// A solver instance that can be written to and read back from JSON.
///
/// Schema:
///   { "returns": [[...n values...], ...p rows...],
///     "beta": 0.95,
///     "R": 0.001,                      (optional)
///     "caps": {"u1": ..., "u2": ...}   (optional; null means unbounded) }
struct ProblemInstance {
    MatrixXd returns;
    double beta = 0.95;
    std::optional<double> R;
    std::optional<Caps> caps;
};

std::string dump_problem(const ProblemInstance& problem);
ProblemInstance load_problem(const std::string& json_text);

void save_problem(const std::string& path, const ProblemInstance& problem);
ProblemInstance read_problem(const std::string& path);

}  // namespace pbr
