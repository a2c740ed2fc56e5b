#pragma once

// Test-only reference implementations, written independently of the library
// code paths they check: a direct transliteration of the grouping loss and
// plain central-difference helpers. Keep these free of gravis internals
// beyond the public types they need to accept.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "gravis/vgl.hpp"

namespace oracle {

inline double plain_sigmoid(double x, double tau) {
  return 1.0 / (1.0 + std::exp(-x / tau));
}

// Anchor loss evaluated exactly as written: mean over positives of
// 1/(gamma * sum_neg sigmoid(c_qj - c_qi) + 1), gamma from the positive set.
inline double anchor_loss(std::size_t q, const gravis::SimilarityMatrix& sims,
                          const std::vector<gravis::GroupId>& groups,
                          double tau, bool attention,
                          double singleton_gamma = 1.0) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (k == q) continue;
    (groups[k] == groups[q] ? pos : neg).push_back(k);
  }
  double acc = 0.0;
  for (std::size_t i : pos) {
    double s = 0.0;
    for (std::size_t j : neg) s += plain_sigmoid(sims(q, j) - sims(q, i), tau);
    double gamma = 1.0;
    if (attention) {
      if (pos.size() > 1) {
        double t = 0.0;
        for (std::size_t j : pos)
          if (j != i) t += plain_sigmoid(sims(q, j) - sims(q, i), tau);
        gamma = 1.0 / t;
      } else {
        gamma = singleton_gamma;
      }
    }
    acc += 1.0 / (gamma * s + 1.0);
  }
  return 1.0 - acc / static_cast<double>(pos.size());
}

// Central difference d f / d x.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Relative error between two gradient vectors, measured in L2 norm. This is
// robust to individual near-zero entries whose pointwise ratios are dominated
// by finite-difference roundoff.
inline double rel_error_l2(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nb));
  if (denom == 0.0) return std::sqrt(diff);
  return std::sqrt(diff) / denom;
}

// Random batch of unit-free gaussian embeddings arranged as `groups_count`
// groups of `views_per_group` views each.
inline gravis::EmbeddingBatch random_batch(std::size_t groups_count,
                                           std::size_t views_per_group,
                                           std::size_t dim,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  gravis::EmbeddingBatch batch;
  for (std::size_t g = 0; g < groups_count; ++g) {
    for (std::size_t v = 0; v < views_per_group; ++v) {
      std::vector<double> vec(dim);
      for (double& x : vec) x = gauss(rng);
      batch.vectors.push_back(std::move(vec));
      batch.groups.push_back(static_cast<gravis::GroupId>(g));
    }
  }
  return batch;
}

}  // namespace oracle
