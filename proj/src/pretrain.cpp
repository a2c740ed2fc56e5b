#include "gravis/pretrain.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gravis/baselines.hpp"
#include "gravis/errors.hpp"
#include "gravis/rng.hpp"
#include "gravis/synth.hpp"
#include "gravis/vgl.hpp"
#include "json.hpp"

namespace gravis {

namespace {

// Seed-stream tags; every consumer of randomness hangs off (seed, tag, ...).
constexpr std::uint64_t kTagInit = 0x496E6974;     // parameter init
constexpr std::uint64_t kTagOrder = 0x4F726472;    // epoch source order
constexpr std::uint64_t kTagAugment = 0x41756774;  // per-batch augmentation
constexpr std::uint64_t kTagShuffle = 0x53686C66;  // anti-shortcut shuffle

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(hash_seed(seed, kTagOrder, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(i)]);
  return order;
}

void check_group_integrity(const EnlargedBatch& batch, std::size_t n_aug) {
  const std::size_t expected = (n_aug == 0) ? 1 : n_aug - 1;
  std::vector<std::size_t> counts;
  for (GroupId g : batch.groups) {
    if (counts.size() <= g) counts.resize(g + 1, 0);
    ++counts[g];
  }
  for (std::size_t q = 0; q < batch.groups.size(); ++q)
    if (counts[batch.groups[q]] - 1 != expected)
      throw ShapeMismatch("anchor " + std::to_string(q) + " sees " +
                          std::to_string(counts[batch.groups[q]] - 1) +
                          " positives, expected " + std::to_string(expected));
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

void PretrainConfig::validate() const {
  if (batch_size < 1) throw OutOfRange("batch_size must be >= 1");
  if (n_aug == 1)
    throw InvalidN("N = 1 leaves anchors without positive pairs; use 0 or >= 2");
  if (!(tau > 0.0)) throw InvalidTemperature("tau must be > 0");
  if (epochs < 0) throw OutOfRange("epochs must be >= 0");
  if (!(base_lr > 0.0)) throw OutOfRange("base_lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw OutOfRange("momentum outside [0,1)");
  augmentation.validate();
}

PretrainConfig desk_preset() {
  PretrainConfig cfg;
  cfg.batch_size = 8;
  cfg.n_aug = 6;
  cfg.tau = 0.2;
  cfg.epochs = 50;
  cfg.base_lr = 0.003;
  return cfg;
}

namespace {

void reject_unknown_keys(const nlohmann::json& j,
                         const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const std::string& k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

PretrainConfig parse_pretrain_config_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be an object");
  reject_unknown_keys(
      j,
      {"manifest", "batch_size", "n_aug", "tau", "attention_enabled", "loss",
       "epochs", "base_lr", "momentum", "seed", "augmentation",
       "checkpoint_out", "metrics_out", "record_timing", "preset"},
      "config");

  PretrainConfig cfg;
  try {
    if (j.contains("preset")) {
      const std::string p = j["preset"].get<std::string>();
      if (p == "desk")
        cfg = desk_preset();
      else if (p != "full")
        throw ConfigError("preset must be 'desk' or 'full', got '" + p + "'");
    }
    if (j.contains("manifest")) cfg.manifest_path = j["manifest"].get<std::string>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("n_aug")) cfg.n_aug = j["n_aug"].get<std::size_t>();
    if (j.contains("tau")) cfg.tau = j["tau"].get<double>();
    if (j.contains("attention_enabled"))
      cfg.attention_enabled = j["attention_enabled"].get<bool>();
    if (j.contains("loss")) {
      const std::string l = j["loss"].get<std::string>();
      if (l == "vgl")
        cfg.loss = LossKind::vgl;
      else if (l == "triplet")
        cfg.loss = LossKind::triplet;
      else if (l == "nce")
        cfg.loss = LossKind::nce;
      else
        throw ConfigError("loss must be vgl, triplet or nce, got '" + l + "'");
    }
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
    if (j.contains("base_lr")) cfg.base_lr = j["base_lr"].get<double>();
    if (j.contains("momentum")) cfg.momentum = j["momentum"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("checkpoint_out"))
      cfg.checkpoint_out = j["checkpoint_out"].get<std::string>();
    if (j.contains("metrics_out")) cfg.metrics_out = j["metrics_out"].get<std::string>();
    if (j.contains("record_timing")) cfg.record_timing = j["record_timing"].get<bool>();
    if (j.contains("augmentation")) {
      const nlohmann::json& a = j["augmentation"];
      if (!a.is_object()) throw ConfigError("augmentation must be an object");
      reject_unknown_keys(a,
                          {"crop_scale", "flip_probability", "rotation_max_degrees",
                           "color_jitter_strength", "blur_probability", "blur_sigma",
                           "output_size"},
                          "augmentation");
      AugmentationSpec& s = cfg.augmentation;
      if (a.contains("crop_scale")) {
        s.crop_scale_lo = a["crop_scale"].at(0).get<double>();
        s.crop_scale_hi = a["crop_scale"].at(1).get<double>();
      }
      if (a.contains("flip_probability"))
        s.flip_probability = a["flip_probability"].get<double>();
      if (a.contains("rotation_max_degrees"))
        s.rotation_max_degrees = a["rotation_max_degrees"].get<double>();
      if (a.contains("color_jitter_strength"))
        s.color_jitter_strength = a["color_jitter_strength"].get<double>();
      if (a.contains("blur_probability"))
        s.blur_probability = a["blur_probability"].get<double>();
      if (a.contains("blur_sigma")) {
        s.blur_sigma_lo = a["blur_sigma"].at(0).get<double>();
        s.blur_sigma_hi = a["blur_sigma"].at(1).get<double>();
      }
      if (a.contains("output_size")) s.output_size = a["output_size"].get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config value: ") + e.what());
  }
  return cfg;
}

PretrainConfig load_pretrain_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_pretrain_config_json(buf.str());
}

void write_metrics_csv(const RunMetrics& metrics, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open " + path + " for writing");
  out << "epoch,loss,lr,seconds\n";
  for (const MetricsRow& r : metrics.rows)
    out << r.epoch << "," << format_double(r.loss) << "," << format_double(r.lr)
        << "," << format_double(r.seconds) << "\n";
  if (!out) throw IoFailure("short write to " + path);
}

PretrainResult pretrain_run(const PretrainConfig& cfg) {
  cfg.validate();
  const DatasetManifest manifest = load_manifest(cfg.manifest_path);
  const std::vector<Image> images = load_manifest_images(manifest, cfg.manifest_path);
  if (images.size() < cfg.batch_size)
    throw DatasetTooSmall("manifest resolves to " + std::to_string(images.size()) +
                          " sources, batch needs " + std::to_string(cfg.batch_size));

  EncoderConfig enc_cfg;
  enc_cfg.input_size = cfg.augmentation.output_size;
  PretrainResult res{
      init_encoder_params<float>(enc_cfg, hash_seed(cfg.seed, kTagInit)),
      {},
      {}};
  res.state = init_optimizer_state(res.params, cfg.momentum, cfg.base_lr,
                                   std::max(1, cfg.epochs));

  std::ofstream metrics_file;
  if (!cfg.metrics_out.empty()) {
    metrics_file.open(cfg.metrics_out);
    if (!metrics_file)
      throw IoFailure("cannot open " + cfg.metrics_out + " for writing");
    metrics_file << "epoch,loss,lr,seconds\n" << std::flush;
  }

  const std::size_t steps_per_epoch = images.size() / cfg.batch_size;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cosine_lr(epoch, res.state);
    const std::vector<std::size_t> order =
        epoch_order(images.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      std::vector<Image> chunk;
      chunk.reserve(cfg.batch_size);
      for (std::size_t b = 0; b < cfg.batch_size; ++b)
        chunk.push_back(images[order[step * cfg.batch_size + b]]);

      const std::uint64_t batch_seed =
          hash_seed(cfg.seed, kTagAugment, static_cast<std::uint64_t>(epoch), step);
      EnlargedBatch enlarged =
          build_enlarged_batch(chunk, cfg.n_aug, cfg.augmentation, batch_seed);
      Rng shuffle_rng(
          hash_seed(cfg.seed, kTagShuffle, static_cast<std::uint64_t>(epoch), step));
      enlarged = shuffle_batch(enlarged, shuffle_rng);
      check_group_integrity(enlarged, cfg.n_aug);

      ForwardResult<float> fwd = forward(res.params, enlarged.views);
      EmbeddingBatch eb;
      eb.vectors = std::move(fwd.embeddings);
      eb.groups = enlarged.groups;

      LossOutput out;
      switch (cfg.loss) {
        case LossKind::vgl: {
          VglConfig vcfg;
          vcfg.tau = cfg.tau;
          vcfg.attention_enabled = cfg.attention_enabled;
          out = vgl_batch_with_gradients(eb, vcfg);
          break;
        }
        case LossKind::nce: {
          NceConfig ncfg;
          ncfg.temperature = cfg.tau;
          out = nce_batch_with_gradients(eb, ncfg);
          break;
        }
        case LossKind::triplet:
          out = triplet_batch_with_gradients(eb, TripletConfig{});
          break;
      }
      if (!std::isfinite(out.total))
        throw NonFiniteLoss("loss is not finite at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step));
      loss_sum += out.total;

      const ParamGrads<float> grads =
          backward(res.params, fwd.cache, *out.grad_embeddings);
      sgd_momentum_step(res.params, grads, res.state, lr);
    }

    MetricsRow row;
    row.epoch = epoch;
    row.loss = steps_per_epoch ? loss_sum / static_cast<double>(steps_per_epoch) : 0.0;
    row.lr = lr;
    if (cfg.record_timing) {
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
    }
    res.metrics.rows.push_back(row);
    if (metrics_file.is_open()) {
      metrics_file << row.epoch << "," << format_double(row.loss) << ","
                   << format_double(row.lr) << "," << format_double(row.seconds)
                   << "\n"
                   << std::flush;
    }
  }

  if (!cfg.checkpoint_out.empty())
    save_checkpoint(encoder_state_to_tensors(res.params, res.state),
                    cfg.checkpoint_out);
  return res;
}

std::vector<std::vector<double>> embed_sources(const EncoderParams<float>& params,
                                               const std::vector<Image>& sources) {
  std::vector<Image> views;
  views.reserve(sources.size());
  const int s = params.config.input_size;
  for (const Image& img : sources)
    views.push_back((img.width == s && img.height == s) ? img
                                                        : resize_bilinear(img, s, s));
  return forward(params, views).embeddings;
}

}  // namespace gravis
