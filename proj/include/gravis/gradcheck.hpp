#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gravis {

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Central-finite-difference audit of every analytic gradient path: loss
// w.r.t. similarities and embeddings (grouping loss, both attention modes),
// the baseline losses, and the full pipeline through the encoder in 32- and
// 64-bit. Relative errors are L2-norm based.
std::vector<GradCheckReport> run_gradient_suite(std::uint64_t seed,
                                                std::size_t instances = 100);

}  // namespace gravis
