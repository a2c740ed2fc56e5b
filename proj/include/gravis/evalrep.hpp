#pragma once

#include <cstddef>
#include <vector>

#include "gravis/vgl.hpp"

namespace gravis {

struct RetrievalReport {
  std::size_t k = 1;
  double precision_at_k = 0.0;
  double chance_level = 0.0;
  std::size_t num_queries = 0;
};

// Every view queries its k cosine-nearest neighbours (self excluded, ties
// broken by lower index); precision@k is the mean fraction retrieved from
// the query's own group. chance_level is the expectation under random
// embeddings, mean over queries of (group_size - 1) / (total - 1).
RetrievalReport knn_view_retrieval(const EmbeddingBatch& batch, std::size_t k);

struct LabeledEmbeddings {
  std::vector<std::vector<double>> vectors;
  std::vector<int> labels;
};

// Single linear layer with softmax cross-entropy, trained full-batch on the
// frozen train embeddings; returns test accuracy. Weights start at zero and
// argmax ties resolve to the lowest class index. Throws LabelMismatch when
// the train/test label sets differ.
double linear_probe(const LabeledEmbeddings& train, const LabeledEmbeddings& test,
                    int steps, double lr);

}  // namespace gravis
