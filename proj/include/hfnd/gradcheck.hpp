#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hfnd::gradcheck {

struct CheckRow {
  std::string name;
  double err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline constexpr double kLayerTol = 1e-6;
inline constexpr double kModelTol = 1e-4;

// Finite-difference verification of the analytic backward passes.
// Scopes: "layers" checks each primitive op against central differences at
// kLayerTol; "encoder", "classifier", and "agent" check full-model parameter
// gradients (both pooling modes, inference dropout) at kModelTol.
// corrupt=true perturbs the largest analytic gradient component by +10%
// before comparing, so a healthy harness must then report failures.
std::vector<CheckRow> run_scope(const std::string& scope, std::uint64_t seed, bool corrupt);

bool all_pass(const std::vector<CheckRow>& rows);

}  // namespace hfnd::gradcheck
