#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gravis/vgl.hpp"

namespace gravis {

enum class TripletDistance { euclidean, one_minus_cosine };

struct TripletConfig {
  double margin = 0.5;
  TripletDistance distance = TripletDistance::one_minus_cosine;
};

struct NceConfig {
  double temperature = 0.2;
};

// max(0, m + d(q,ps) - d(q,ns)). Subgradient 0 at the hinge point.
double triplet_loss(std::span<const double> q, std::span<const double> ps,
                    std::span<const double> ns, const TripletConfig& cfg);

struct TripletGrads {
  std::vector<double> q;
  std::vector<double> ps;
  std::vector<double> ns;
};

TripletGrads triplet_grad(std::span<const double> q, std::span<const double> ps,
                          std::span<const double> ns, const TripletConfig& cfg);

// Softmax-contrastive loss with a single designated positive per anchor: the
// first same-group view by ascending index. Stabilized by max subtraction.
double nce_loss(std::size_t q, const SimilarityMatrix& sims,
                const std::vector<GroupId>& groups, const NceConfig& cfg);

// d(nce_loss of q)/d c_{q,k}; zero outside the positive/negative candidates.
std::vector<double> nce_grad_sims(std::size_t q, const SimilarityMatrix& sims,
                                  const std::vector<GroupId>& groups,
                                  const NceConfig& cfg);

// Batch wrappers used by the training loop: one loss term per anchor, with
// d(total)/d v_k. For the triplet loss each anchor contrasts its designated
// positive (first same-group index) against the first other-group index.
LossOutput nce_batch_with_gradients(const EmbeddingBatch& batch,
                                    const NceConfig& cfg);
LossOutput triplet_batch_with_gradients(const EmbeddingBatch& batch,
                                        const TripletConfig& cfg);

}  // namespace gravis
