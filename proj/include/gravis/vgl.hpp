#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace gravis {

// Identifies the source image (or patient) a view was augmented from.
// Views with equal group ids form each other's positive sets.
using GroupId = std::uint32_t;

inline constexpr double kZeroNormEps = 1e-12;

// A batch of feature vectors tagged with their source groups. All loss
// arithmetic runs in 64-bit regardless of how embeddings were produced.
struct EmbeddingBatch {
  std::vector<std::vector<double>> vectors;
  std::vector<GroupId> groups;

  std::size_t size() const { return vectors.size(); }
  std::size_t dim() const { return vectors.empty() ? 0 : vectors[0].size(); }

  // Throws ShapeMismatch on ragged dims or group/vector length mismatch,
  // ZeroNormVector (with the offending index) on a near-zero vector.
  void validate() const;
};

// Dense symmetric matrix of pairwise cosine similarities, unit diagonal.
struct SimilarityMatrix {
  std::size_t n = 0;
  std::vector<double> a;  // row-major, n*n

  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t size)
      : n(size), a(size * size, 0.0) {}

  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
  double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }

  // Symmetry, unit diagonal (1e-9) and [-1,1] range checks for tests.
  void validate() const;
};

struct VglConfig {
  double tau = 0.2;
  bool attention_enabled = true;
  // Value of the attention weight when an anchor has a single positive and
  // the weight's defining sum is empty.
  double singleton_gamma = 1.0;
};

struct LossOutput {
  double total = 0.0;
  std::vector<double> per_anchor;
  // grad_sims[q][k] = d(per-anchor loss of q)/d c_{q,k}; diagonal entries 0.
  std::optional<std::vector<std::vector<double>>> grad_sims;
  // grad_embeddings[k] = d(total)/d v_k.
  std::optional<std::vector<std::vector<double>>> grad_embeddings;
};

// --- scalar building blocks ---

// u.v / (|u||v|), clamped into [-1,1]. Throws ZeroNormVector below 1e-12.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// 1/(1+exp(-x/tau)) evaluated through the exp(-|x|/tau) branch so it never
// overflows. Throws InvalidTemperature unless tau > 0.
double tempered_sigmoid(double x, double tau);

// d/dx of tempered_sigmoid.
double tempered_sigmoid_deriv(double x, double tau);

// --- batch-level operations ---

SimilarityMatrix similarity_matrix(const EmbeddingBatch& batch);

// Attention weight for positive pair (q, i): 1 / sum over the other
// positives j of sigmoid(c_{q,j} - c_{q,i}). Falls back to
// cfg.singleton_gamma when i is q's only positive. Throws NotAPositivePair
// when i is not in q's positive set.
double hardness_attention(std::size_t q, std::size_t i,
                          const SimilarityMatrix& sims,
                          const std::vector<GroupId>& groups,
                          const VglConfig& cfg);

// Per-anchor grouping loss, in [0, 1). Throws EmptyPositiveSet when q's
// group has no other member.
double vgl_anchor(std::size_t q, const SimilarityMatrix& sims,
                  const std::vector<GroupId>& groups, const VglConfig& cfg);

// d(anchor loss of q)/d c_{q,k} for every k != q (entry q is zero). Exact
// closed form, including the dependence of the attention weights on the
// similarities when attention is enabled.
std::vector<double> vgl_grad_sims(std::size_t q, const SimilarityMatrix& sims,
                                  const std::vector<GroupId>& groups,
                                  const VglConfig& cfg);

// Sum of per-anchor losses over every view of the batch.
LossOutput vgl_batch(const EmbeddingBatch& batch, const VglConfig& cfg);

// d(total)/d v_k via the cosine-similarity Jacobian. Each returned gradient
// is orthogonal to its own embedding.
std::vector<std::vector<double>> vgl_grad_embeddings(const EmbeddingBatch& batch,
                                                     const VglConfig& cfg);

// One-pass loss + both gradient families; what the training loop consumes.
LossOutput vgl_batch_with_gradients(const EmbeddingBatch& batch,
                                    const VglConfig& cfg);

// Pushes per-anchor similarity-row gradients through the cosine Jacobian.
// row_grads[q][k] must hold d(loss)/d c_{q,k}. Shared by the grouping and
// contrastive losses.
std::vector<std::vector<double>> chain_sim_grads_to_embeddings(
    const EmbeddingBatch& batch, const SimilarityMatrix& sims,
    const std::vector<std::vector<double>>& row_grads);

}  // namespace gravis
