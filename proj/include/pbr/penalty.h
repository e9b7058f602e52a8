#pragma once

#include <limits>
#include <variant>

namespace pbr {

/// Hard caps on the two sample-variance penalties.
struct Caps {
    double u1 = std::numeric_limits<double>::infinity();
    double u2 = std::numeric_limits<double>::infinity();
};

/// Caps expressed as fractions of the penalty values at the unpenalized solution.
struct Ratios {
    double r1 = 1.0;
    double r2 = 1.0;
};

/// Weights of the dualized objective.
struct Dualized {
    double lambda0 = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
};

using PenaltySpec = std::variant<Caps, Ratios, Dualized>;

}  // namespace pbr
