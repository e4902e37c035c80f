#pragma once

#include <vector>

#include "flowlab/field.hpp"
#include "flowlab/linalg.hpp"
#include "flowlab/rng.hpp"

namespace flowlab {

enum class OdeMethod { rk4, euler };

/// Fixed-step integration of the flow ODE from t = 0 to t = 1.
struct IntegratorConfig {
  int steps = 256;
  OdeMethod method = OdeMethod::rk4;
};

/// Returns the state at t = 1 starting from x0 at t = 0.
VecD integrate(const VelocityField& field, std::span<const double> x0,
               const IntegratorConfig& cfg);

/// All intermediate states including both endpoints: steps + 1 entries.
std::vector<std::pair<double, VecD>> trajectory(const VelocityField& field,
                                                std::span<const double> x0,
                                                const IntegratorConfig& cfg);

/// Draws m latent points z ~ N(0, I_d) and pushes each to t = 1.
MatD push_samples(const VelocityField& field, Rng& rng, int m, const IntegratorConfig& cfg);

}  // namespace flowlab
