#include "gravis/vgl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gravis/errors.hpp"

namespace gravis {

namespace {

struct AnchorSets {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
};

AnchorSets anchor_sets(std::size_t q, const std::vector<GroupId>& groups) {
  AnchorSets s;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (k == q) continue;
    if (groups[k] == groups[q])
      s.pos.push_back(k);
    else
      s.neg.push_back(k);
  }
  return s;
}

// Per-positive quantities of the anchor loss: the negative-set sigmoid sum S,
// the attention weight gamma and the denominator D = gamma*S + 1.
struct AnchorTerms {
  std::vector<double> S;
  std::vector<double> gamma;
  std::vector<double> D;
};

AnchorTerms anchor_terms(std::size_t q, const SimilarityMatrix& sims,
                         const AnchorSets& sets, const VglConfig& cfg) {
  AnchorTerms t;
  const std::size_t np = sets.pos.size();
  t.S.resize(np);
  t.gamma.resize(np);
  t.D.resize(np);
  for (std::size_t ii = 0; ii < np; ++ii) {
    const double ci = sims(q, sets.pos[ii]);
    double S = 0.0;
    for (std::size_t j : sets.neg) S += tempered_sigmoid(sims(q, j) - ci, cfg.tau);
    double gamma = 1.0;
    if (cfg.attention_enabled) {
      if (np > 1) {
        double T = 0.0;
        for (std::size_t jj = 0; jj < np; ++jj) {
          if (jj == ii) continue;
          T += tempered_sigmoid(sims(q, sets.pos[jj]) - ci, cfg.tau);
        }
        gamma = 1.0 / T;
      } else {
        gamma = cfg.singleton_gamma;
      }
    }
    t.S[ii] = S;
    t.gamma[ii] = gamma;
    t.D[ii] = gamma * S + 1.0;
  }
  return t;
}

void check_all_groups_paired(const std::vector<GroupId>& groups) {
  for (std::size_t q = 0; q < groups.size(); ++q) {
    bool paired = false;
    for (std::size_t k = 0; k < groups.size(); ++k) {
      if (k != q && groups[k] == groups[q]) {
        paired = true;
        break;
      }
    }
    if (!paired)
      throw EmptyPositiveSet("view " + std::to_string(q) +
                             " has no other member in its group");
  }
}

}  // namespace

void EmbeddingBatch::validate() const {
  if (groups.size() != vectors.size())
    throw ShapeMismatch("groups length " + std::to_string(groups.size()) +
                        " != vectors length " + std::to_string(vectors.size()));
  const std::size_t d = dim();
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    if (vectors[k].size() != d)
      throw ShapeMismatch("vector " + std::to_string(k) + " has dimension " +
                          std::to_string(vectors[k].size()) + ", expected " +
                          std::to_string(d));
    double sq = 0.0;
    for (double x : vectors[k]) sq += x * x;
    if (std::sqrt(sq) <= kZeroNormEps)
      throw ZeroNormVector("vector " + std::to_string(k) +
                           " has near-zero norm");
  }
}

void SimilarityMatrix::validate() const {
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs((*this)(i, i) - 1.0) > 1e-9)
      throw ShapeMismatch("diagonal entry " + std::to_string(i) +
                          " is not 1 within 1e-9");
    for (std::size_t j = 0; j < n; ++j) {
      const double c = (*this)(i, j);
      if (c < -1.0 || c > 1.0)
        throw OutOfRange("similarity (" + std::to_string(i) + "," +
                         std::to_string(j) + ") outside [-1,1]");
      if ((*this)(i, j) != (*this)(j, i))
        throw ShapeMismatch("matrix not symmetric at (" + std::to_string(i) +
                            "," + std::to_string(j) + ")");
    }
  }
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw ShapeMismatch("cosine of vectors with dims " +
                        std::to_string(u.size()) + " and " +
                        std::to_string(v.size()));
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::size_t t = 0; t < u.size(); ++t) {
    uu += u[t] * u[t];
    vv += v[t] * v[t];
    uv += u[t] * v[t];
  }
  const double nu = std::sqrt(uu);
  const double nv = std::sqrt(vv);
  if (nu <= kZeroNormEps) throw ZeroNormVector("first argument has near-zero norm");
  if (nv <= kZeroNormEps) throw ZeroNormVector("second argument has near-zero norm");
  return std::clamp(uv / (nu * nv), -1.0, 1.0);
}

double tempered_sigmoid(double x, double tau) {
  if (!(tau > 0.0))
    throw InvalidTemperature("tau must be > 0, got " + std::to_string(tau));
  const double z = x / tau;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double tempered_sigmoid_deriv(double x, double tau) {
  const double s = tempered_sigmoid(x, tau);
  return s * (1.0 - s) / tau;
}

SimilarityMatrix similarity_matrix(const EmbeddingBatch& batch) {
  batch.validate();
  const std::size_t n = batch.size();
  SimilarityMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = cosine_similarity(batch.vectors[i], batch.vectors[j]);
      m.at(i, j) = c;
      m.at(j, i) = c;
    }
  }
  return m;
}

double hardness_attention(std::size_t q, std::size_t i,
                          const SimilarityMatrix& sims,
                          const std::vector<GroupId>& groups,
                          const VglConfig& cfg) {
  if (q >= groups.size() || i >= groups.size())
    throw OutOfRange("view index outside batch");
  if (i == q || groups[i] != groups[q])
    throw NotAPositivePair("view " + std::to_string(i) +
                           " is not in the positive set of view " +
                           std::to_string(q));
  const double ci = sims(q, i);
  double T = 0.0;
  bool any = false;
  for (std::size_t j = 0; j < groups.size(); ++j) {
    if (j == q || j == i || groups[j] != groups[q]) continue;
    T += tempered_sigmoid(sims(q, j) - ci, cfg.tau);
    any = true;
  }
  return any ? 1.0 / T : cfg.singleton_gamma;
}

double vgl_anchor(std::size_t q, const SimilarityMatrix& sims,
                  const std::vector<GroupId>& groups, const VglConfig& cfg) {
  if (q >= groups.size()) throw OutOfRange("anchor index outside batch");
  const AnchorSets sets = anchor_sets(q, groups);
  if (sets.pos.empty())
    throw EmptyPositiveSet("view " + std::to_string(q) +
                           " has no other member in its group");
  const AnchorTerms t = anchor_terms(q, sims, sets, cfg);
  double acc = 0.0;
  for (double d : t.D) acc += 1.0 / d;
  return 1.0 - acc / static_cast<double>(sets.pos.size());
}

std::vector<double> vgl_grad_sims(std::size_t q, const SimilarityMatrix& sims,
                                  const std::vector<GroupId>& groups,
                                  const VglConfig& cfg) {
  if (q >= groups.size()) throw OutOfRange("anchor index outside batch");
  const AnchorSets sets = anchor_sets(q, groups);
  if (sets.pos.empty())
    throw EmptyPositiveSet("view " + std::to_string(q) +
                           " has no other member in its group");
  const AnchorTerms t = anchor_terms(q, sims, sets, cfg);
  const std::size_t np = sets.pos.size();
  const double inv_np = 1.0 / static_cast<double>(np);
  std::vector<double> g(groups.size(), 0.0);

  // dL/dx = (1/|Sps|) * sum_i dD_i/dx / D_i^2 with D_i = gamma_i S_i + 1.
  for (std::size_t m : sets.neg) {
    double acc = 0.0;
    for (std::size_t ii = 0; ii < np; ++ii) {
      const double ci = sims(q, sets.pos[ii]);
      acc += t.gamma[ii] * tempered_sigmoid_deriv(sims(q, m) - ci, cfg.tau) /
             (t.D[ii] * t.D[ii]);
    }
    g[m] = acc * inv_np;
  }

  const bool gamma_varies = cfg.attention_enabled && np > 1;
  for (std::size_t pp = 0; pp < np; ++pp) {
    const std::size_t p = sets.pos[pp];
    const double cp = sims(q, p);
    double dS = 0.0;
    for (std::size_t j : sets.neg)
      dS -= tempered_sigmoid_deriv(sims(q, j) - cp, cfg.tau);
    double dD = t.gamma[pp] * dS;
    if (gamma_varies) {
      // Raising c_{q,p} raises pair p's own weight and lowers the others'.
      double dsig_pos = 0.0;
      for (std::size_t jj = 0; jj < np; ++jj) {
        if (jj == pp) continue;
        dsig_pos +=
            tempered_sigmoid_deriv(sims(q, sets.pos[jj]) - cp, cfg.tau);
      }
      dD += t.S[pp] * t.gamma[pp] * t.gamma[pp] * dsig_pos;
    }
    double acc = dD / (t.D[pp] * t.D[pp]);
    if (gamma_varies) {
      for (std::size_t ii = 0; ii < np; ++ii) {
        if (ii == pp) continue;
        const double ci = sims(q, sets.pos[ii]);
        const double dgamma = -t.gamma[ii] * t.gamma[ii] *
                              tempered_sigmoid_deriv(cp - ci, cfg.tau);
        acc += t.S[ii] * dgamma / (t.D[ii] * t.D[ii]);
      }
    }
    g[p] = acc * inv_np;
  }
  return g;
}

LossOutput vgl_batch(const EmbeddingBatch& batch, const VglConfig& cfg) {
  batch.validate();
  check_all_groups_paired(batch.groups);
  const SimilarityMatrix sims = similarity_matrix(batch);
  LossOutput out;
  out.per_anchor.reserve(batch.size());
  for (std::size_t q = 0; q < batch.size(); ++q) {
    const double l = vgl_anchor(q, sims, batch.groups, cfg);
    out.per_anchor.push_back(l);
    out.total += l;
  }
  return out;
}

std::vector<std::vector<double>> chain_sim_grads_to_embeddings(
    const EmbeddingBatch& batch, const SimilarityMatrix& sims,
    const std::vector<std::vector<double>>& row_grads) {
  const std::size_t n = batch.size();
  const std::size_t d = batch.dim();
  std::vector<double> norms(n);
  for (std::size_t k = 0; k < n; ++k) {
    double sq = 0.0;
    for (double x : batch.vectors[k]) sq += x * x;
    norms[k] = std::sqrt(sq);
  }
  std::vector<std::vector<double>> grads(n, std::vector<double>(d, 0.0));
  for (std::size_t q = 0; q < n; ++q) {
    const std::vector<double>& g = row_grads[q];
    const std::vector<double>& vq = batch.vectors[q];
    for (std::size_t k = 0; k < n; ++k) {
      if (k == q) continue;
      const double gk = g[k];
      if (gk == 0.0) continue;
      const std::vector<double>& vk = batch.vectors[k];
      const double c = sims(q, k);
      const double cross = 1.0 / (norms[q] * norms[k]);
      const double self_k = c / (norms[k] * norms[k]);
      const double self_q = c / (norms[q] * norms[q]);
      for (std::size_t t = 0; t < d; ++t) {
        grads[k][t] += gk * (vq[t] * cross - vk[t] * self_k);
        grads[q][t] += gk * (vk[t] * cross - vq[t] * self_q);
      }
    }
  }
  return grads;
}

std::vector<std::vector<double>> vgl_grad_embeddings(const EmbeddingBatch& batch,
                                                     const VglConfig& cfg) {
  return *vgl_batch_with_gradients(batch, cfg).grad_embeddings;
}

LossOutput vgl_batch_with_gradients(const EmbeddingBatch& batch,
                                    const VglConfig& cfg) {
  batch.validate();
  check_all_groups_paired(batch.groups);
  const SimilarityMatrix sims = similarity_matrix(batch);
  LossOutput out;
  out.per_anchor.reserve(batch.size());
  std::vector<std::vector<double>> rows;
  rows.reserve(batch.size());
  for (std::size_t q = 0; q < batch.size(); ++q) {
    const double l = vgl_anchor(q, sims, batch.groups, cfg);
    out.per_anchor.push_back(l);
    out.total += l;
    rows.push_back(vgl_grad_sims(q, sims, batch.groups, cfg));
  }
  out.grad_embeddings = chain_sim_grads_to_embeddings(batch, sims, rows);
  out.grad_sims = std::move(rows);
  return out;
}

}  // namespace gravis
