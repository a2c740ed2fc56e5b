#include "gravis/evalrep.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "gravis/errors.hpp"

namespace gravis {

RetrievalReport knn_view_retrieval(const EmbeddingBatch& batch, std::size_t k) {
  batch.validate();
  const std::size_t n = batch.size();
  if (k < 1 || k > n - 1)
    throw KTooLarge("k = " + std::to_string(k) + " with " + std::to_string(n) +
                    " views");
  std::map<GroupId, std::size_t> group_sizes;
  for (GroupId g : batch.groups) ++group_sizes[g];
  for (const auto& [g, sz] : group_sizes)
    if (sz < 2)
      throw EmptyPositiveSet("group " + std::to_string(g) +
                             " has a single view");

  const SimilarityMatrix sims = similarity_matrix(batch);
  RetrievalReport rep;
  rep.k = k;
  rep.num_queries = n;
  double precision = 0.0;
  double chance = 0.0;
  std::vector<std::size_t> order(n);
  for (std::size_t q = 0; q < n; ++q) {
    order.resize(0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != q) order.push_back(j);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       if (sims(q, a) != sims(q, b)) return sims(q, a) > sims(q, b);
                       return a < b;
                     });
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k; ++r)
      if (batch.groups[order[r]] == batch.groups[q]) ++hits;
    precision += static_cast<double>(hits) / static_cast<double>(k);
    chance += static_cast<double>(group_sizes[batch.groups[q]] - 1) /
              static_cast<double>(n - 1);
  }
  rep.precision_at_k = precision / static_cast<double>(n);
  rep.chance_level = chance / static_cast<double>(n);
  return rep;
}

double linear_probe(const LabeledEmbeddings& train, const LabeledEmbeddings& test,
                    int steps, double lr) {
  if (train.vectors.size() != train.labels.size() ||
      test.vectors.size() != test.labels.size())
    throw ShapeMismatch("labels do not match embeddings");
  if (train.vectors.empty() || test.vectors.empty())
    throw ShapeMismatch("empty probe split");

  const std::set<int> train_set(train.labels.begin(), train.labels.end());
  const std::set<int> test_set(test.labels.begin(), test.labels.end());
  if (train_set != test_set)
    throw LabelMismatch("train and test label sets differ");

  // Map labels to contiguous class ids in sorted order.
  std::map<int, int> to_class;
  int next = 0;
  for (int l : train_set) to_class[l] = next++;
  const int classes = next;
  const std::size_t dim = train.vectors[0].size();
  for (const auto& v : train.vectors)
    if (v.size() != dim) throw ShapeMismatch("ragged train embeddings");
  for (const auto& v : test.vectors)
    if (v.size() != dim) throw ShapeMismatch("ragged test embeddings");

  std::vector<double> w(static_cast<std::size_t>(classes) * dim, 0.0);
  std::vector<double> b(classes, 0.0);
  const std::size_t m = train.vectors.size();

  std::vector<double> logits(classes);
  std::vector<double> probs(classes);
  std::vector<double> gw(w.size());
  std::vector<double> gb(classes);
  for (int step = 0; step < steps; ++step) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const std::vector<double>& x = train.vectors[i];
      for (int c = 0; c < classes; ++c) {
        double acc = b[c];
        const double* row = w.data() + static_cast<std::size_t>(c) * dim;
        for (std::size_t t = 0; t < dim; ++t) acc += row[t] * x[t];
        logits[c] = acc;
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (int c = 0; c < classes; ++c) {
        probs[c] = std::exp(logits[c] - mx);
        z += probs[c];
      }
      const int y = to_class.at(train.labels[i]);
      for (int c = 0; c < classes; ++c) {
        const double g = (probs[c] / z - (c == y ? 1.0 : 0.0)) / static_cast<double>(m);
        gb[c] += g;
        double* row = gw.data() + static_cast<std::size_t>(c) * dim;
        for (std::size_t t = 0; t < dim; ++t) row[t] += g * x[t];
      }
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
    for (int c = 0; c < classes; ++c) b[c] -= lr * gb[c];
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.vectors.size(); ++i) {
    const std::vector<double>& x = test.vectors[i];
    int best = 0;
    double best_logit = -1e300;
    for (int c = 0; c < classes; ++c) {
      double acc = b[c];
      const double* row = w.data() + static_cast<std::size_t>(c) * dim;
      for (std::size_t t = 0; t < dim; ++t) acc += row[t] * x[t];
      if (acc > best_logit) {  // ties keep the lowest class index
        best_logit = acc;
        best = c;
      }
    }
    if (best == to_class.at(test.labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.vectors.size());
}

}  // namespace gravis
