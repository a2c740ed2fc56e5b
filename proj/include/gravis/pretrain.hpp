#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gravis/augment.hpp"
#include "gravis/checkpoint.hpp"
#include "gravis/encoder.hpp"

namespace gravis {

enum class LossKind { vgl, triplet, nce };

struct PretrainConfig {
  std::string manifest_path;
  std::size_t batch_size = 32;
  std::size_t n_aug = 20;
  double tau = 0.2;
  bool attention_enabled = true;
  LossKind loss = LossKind::vgl;
  int epochs = 240;
  double base_lr = 1e-3;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  AugmentationSpec augmentation;
  std::string checkpoint_out;  // empty: do not write
  std::string metrics_out;     // empty: do not write
  // The seconds column of the metrics CSV is 0 unless timing is requested,
  // keeping default outputs byte-reproducible for equal (config, seed).
  bool record_timing = false;

  void validate() const;
};

// Small-data preset used by the verification harness; full-scale values
// stay the construction defaults above.
PretrainConfig desk_preset();

// Strict parser for the JSON config document: unknown keys are rejected with
// ConfigError, missing keys keep their defaults.
PretrainConfig parse_pretrain_config_json(const std::string& text);
PretrainConfig load_pretrain_config(const std::string& path);

struct MetricsRow {
  int epoch = 0;
  double loss = 0.0;  // mean summed batch loss over the epoch's steps
  double lr = 0.0;
  double seconds = 0.0;
};

struct RunMetrics {
  std::vector<MetricsRow> rows;
};

void write_metrics_csv(const RunMetrics& metrics, const std::string& path);

struct PretrainResult {
  EncoderParams<float> params;
  OptimizerState<float> state;
  RunMetrics metrics;
};

// One full run: per epoch, pass over the sources in a seeded random order,
// chunked into batches of batch_size (final partial chunk dropped); each
// step augments, shuffles, runs forward/loss/backward and one SGD step at
// the epoch's cosine-annealed learning rate. Deterministic from (config,
// seed). Writes the checkpoint at the end and flushes metrics every epoch.
PretrainResult pretrain_run(const PretrainConfig& cfg);

// Deterministic embeddings of unaugmented sources (plain resize), used by
// the evaluation paths.
std::vector<std::vector<double>> embed_sources(const EncoderParams<float>& params,
                                               const std::vector<Image>& sources);

}  // namespace gravis
