#include "gravis/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gravis/errors.hpp"

namespace gravis {

namespace {

double euclidean(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeMismatch("triplet vectors disagree in dim");
  double sq = 0.0;
  for (std::size_t t = 0; t < u.size(); ++t) {
    const double d = u[t] - v[t];
    sq += d * d;
  }
  return std::sqrt(sq);
}

double distance(std::span<const double> u, std::span<const double> v,
                TripletDistance kind) {
  if (kind == TripletDistance::euclidean) return euclidean(u, v);
  return 1.0 - cosine_similarity(u, v);
}

// d cosine(u,v) / du, accumulated into out with weight w.
void add_cosine_grad_u(std::span<const double> u, std::span<const double> v,
                       double w, std::vector<double>& out) {
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::size_t t = 0; t < u.size(); ++t) {
    uu += u[t] * u[t];
    vv += v[t] * v[t];
    uv += u[t] * v[t];
  }
  const double nu = std::sqrt(uu);
  const double nv = std::sqrt(vv);
  const double c = uv / (nu * nv);
  for (std::size_t t = 0; t < u.size(); ++t)
    out[t] += w * (v[t] / (nu * nv) - c * u[t] / (nu * nu));
}

std::size_t first_positive(std::size_t q, const std::vector<GroupId>& groups) {
  for (std::size_t k = 0; k < groups.size(); ++k)
    if (k != q && groups[k] == groups[q]) return k;
  throw EmptyPositiveSet("view " + std::to_string(q) +
                         " has no other member in its group");
}

std::size_t first_negative(std::size_t q, const std::vector<GroupId>& groups) {
  for (std::size_t k = 0; k < groups.size(); ++k)
    if (groups[k] != groups[q]) return k;
  throw EmptyNegativeSet("view " + std::to_string(q) +
                         " has no view outside its group");
}

}  // namespace

double triplet_loss(std::span<const double> q, std::span<const double> ps,
                    std::span<const double> ns, const TripletConfig& cfg) {
  const double raw =
      cfg.margin + distance(q, ps, cfg.distance) - distance(q, ns, cfg.distance);
  return std::max(0.0, raw);
}

TripletGrads triplet_grad(std::span<const double> q, std::span<const double> ps,
                          std::span<const double> ns,
                          const TripletConfig& cfg) {
  TripletGrads g;
  g.q.assign(q.size(), 0.0);
  g.ps.assign(ps.size(), 0.0);
  g.ns.assign(ns.size(), 0.0);
  const double d_ps = distance(q, ps, cfg.distance);
  const double d_ns = distance(q, ns, cfg.distance);
  if (cfg.margin + d_ps - d_ns <= 0.0) return g;  // hinge inactive

  if (cfg.distance == TripletDistance::euclidean) {
    // d|q-x|/dq = (q-x)/|q-x|; zero subgradient at coincident points.
    if (d_ps > 0.0) {
      for (std::size_t t = 0; t < q.size(); ++t) {
        const double u = (q[t] - ps[t]) / d_ps;
        g.q[t] += u;
        g.ps[t] -= u;
      }
    }
    if (d_ns > 0.0) {
      for (std::size_t t = 0; t < q.size(); ++t) {
        const double u = (q[t] - ns[t]) / d_ns;
        g.q[t] -= u;
        g.ns[t] += u;
      }
    }
  } else {
    // d(1-cos)/dx = -dcos/dx
    add_cosine_grad_u(q, ps, -1.0, g.q);
    add_cosine_grad_u(ps, q, -1.0, g.ps);
    add_cosine_grad_u(q, ns, 1.0, g.q);
    add_cosine_grad_u(ns, q, 1.0, g.ns);
  }
  return g;
}

double nce_loss(std::size_t q, const SimilarityMatrix& sims,
                const std::vector<GroupId>& groups, const NceConfig& cfg) {
  if (!(cfg.temperature > 0.0))
    throw InvalidTemperature("nce temperature must be > 0");
  const std::size_t p = first_positive(q, groups);
  double max_logit = sims(q, p) / cfg.temperature;
  bool has_negative = false;
  for (std::size_t j = 0; j < groups.size(); ++j) {
    if (groups[j] == groups[q]) continue;
    has_negative = true;
    max_logit = std::max(max_logit, sims(q, j) / cfg.temperature);
  }
  if (!has_negative)
    throw EmptyNegativeSet("view " + std::to_string(q) +
                           " has no view outside its group");
  const double lp = sims(q, p) / cfg.temperature;
  double z = std::exp(lp - max_logit);
  for (std::size_t j = 0; j < groups.size(); ++j) {
    if (groups[j] == groups[q]) continue;
    z += std::exp(sims(q, j) / cfg.temperature - max_logit);
  }
  return -(lp - max_logit) + std::log(z);
}

std::vector<double> nce_grad_sims(std::size_t q, const SimilarityMatrix& sims,
                                  const std::vector<GroupId>& groups,
                                  const NceConfig& cfg) {
  if (!(cfg.temperature > 0.0))
    throw InvalidTemperature("nce temperature must be > 0");
  const std::size_t p = first_positive(q, groups);
  std::vector<std::size_t> cand{p};
  for (std::size_t j = 0; j < groups.size(); ++j)
    if (groups[j] != groups[q]) cand.push_back(j);
  if (cand.size() < 2)
    throw EmptyNegativeSet("view " + std::to_string(q) +
                           " has no view outside its group");
  double max_logit = sims(q, cand[0]) / cfg.temperature;
  for (std::size_t k : cand)
    max_logit = std::max(max_logit, sims(q, k) / cfg.temperature);
  double z = 0.0;
  std::vector<double> e(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) {
    e[i] = std::exp(sims(q, cand[i]) / cfg.temperature - max_logit);
    z += e[i];
  }
  std::vector<double> g(groups.size(), 0.0);
  for (std::size_t i = 0; i < cand.size(); ++i) {
    const double soft = e[i] / z;
    g[cand[i]] = (soft - (cand[i] == p ? 1.0 : 0.0)) / cfg.temperature;
  }
  return g;
}

LossOutput nce_batch_with_gradients(const EmbeddingBatch& batch,
                                    const NceConfig& cfg) {
  batch.validate();
  const SimilarityMatrix sims = similarity_matrix(batch);
  LossOutput out;
  std::vector<std::vector<double>> rows;
  rows.reserve(batch.size());
  for (std::size_t q = 0; q < batch.size(); ++q) {
    out.per_anchor.push_back(nce_loss(q, sims, batch.groups, cfg));
    out.total += out.per_anchor.back();
    rows.push_back(nce_grad_sims(q, sims, batch.groups, cfg));
  }
  out.grad_embeddings = chain_sim_grads_to_embeddings(batch, sims, rows);
  out.grad_sims = std::move(rows);
  return out;
}

LossOutput triplet_batch_with_gradients(const EmbeddingBatch& batch,
                                        const TripletConfig& cfg) {
  batch.validate();
  LossOutput out;
  std::vector<std::vector<double>> grads(
      batch.size(), std::vector<double>(batch.dim(), 0.0));
  for (std::size_t q = 0; q < batch.size(); ++q) {
    const std::size_t p = first_positive(q, batch.groups);
    const std::size_t m = first_negative(q, batch.groups);
    out.per_anchor.push_back(
        triplet_loss(batch.vectors[q], batch.vectors[p], batch.vectors[m], cfg));
    out.total += out.per_anchor.back();
    TripletGrads g =
        triplet_grad(batch.vectors[q], batch.vectors[p], batch.vectors[m], cfg);
    for (std::size_t t = 0; t < batch.dim(); ++t) {
      grads[q][t] += g.q[t];
      grads[p][t] += g.ps[t];
      grads[m][t] += g.ns[t];
    }
  }
  out.grad_embeddings = std::move(grads);
  return out;
}

}  // namespace gravis
