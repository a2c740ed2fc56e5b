// Acceptance harness: one self-contained check per numbered criterion, each
// printing a PASS/FAIL line with the measured values. Exits nonzero if any
// criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "gravis/analysis.hpp"
#include "gravis/augment.hpp"
#include "gravis/baselines.hpp"
#include "gravis/checkpoint.hpp"
#include "gravis/encoder.hpp"
#include "gravis/errors.hpp"
#include "gravis/evalrep.hpp"
#include "gravis/pretrain.hpp"
#include "gravis/rng.hpp"
#include "gravis/synth.hpp"
#include "gravis/vgl.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace gravis;

namespace {

int g_failures = 0;

void report(int index, const char* name, bool pass, const std::string& detail) {
  std::printf("[%d/8] %s  %-28s %s\n", index, pass ? "PASS" : "FAIL", name,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

SimilarityMatrix anchor_row_matrix(const std::vector<double>& row) {
  SimilarityMatrix m(row.size() + 1);
  for (std::size_t i = 0; i < m.n; ++i) m.at(i, i) = 1.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    m.at(0, j + 1) = row[j];
    m.at(j + 1, 0) = row[j];
  }
  return m;
}

// ---------------------------------------------------------------- criterion 1

void criterion_worked_value() {
  // Independent brute-force evaluation first.
  const SimilarityMatrix m = anchor_row_matrix({0.9, 0.5, 0.1});
  const std::vector<GroupId> groups{0, 0, 0, 1};
  const double oracle_value = oracle::anchor_loss(0, m, groups, 0.2, true);
  const double impl = vgl_anchor(0, m, groups, VglConfig{});
  const bool pass = std::abs(oracle_value - 0.12515) <= 1e-4 &&
                    std::abs(impl - 0.12515) <= 1e-4 &&
                    std::abs(impl - oracle_value) <= 1e-12;
  report(1, "worked-value", pass,
         fmt("vgl_anchor=%.8f brute-force=%.8f target 0.12515 +/- 1e-4",
             impl, oracle_value));
}

// ---------------------------------------------------------------- criterion 2

double sims_grad_suite(std::size_t instances) {
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t t = 0; t < instances; ++t) {
    EmbeddingBatch b = oracle::random_batch(4, 3, 8, 31000 + t);
    VglConfig cfg;
    cfg.attention_enabled = (t % 2) == 0;
    const SimilarityMatrix m = similarity_matrix(b);
    const std::size_t q = t % b.size();
    const std::vector<double> an = vgl_grad_sims(q, m, b.groups, cfg);
    std::vector<double> fd(b.size(), 0.0);
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (k == q) continue;
      SimilarityMatrix mm = m;
      mm.at(q, k) = m(q, k) + h;
      const double lp = vgl_anchor(q, mm, b.groups, cfg);
      mm.at(q, k) = m(q, k) - h;
      const double lm = vgl_anchor(q, mm, b.groups, cfg);
      fd[k] = (lp - lm) / (2.0 * h);
    }
    worst = std::max(worst, oracle::rel_error_l2(an, fd));
  }
  return worst;
}

double embedding_grad_suite(std::size_t instances) {
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t t = 0; t < instances; ++t) {
    EmbeddingBatch b = oracle::random_batch(4, 3, 8, 47000 + t);
    VglConfig cfg;
    cfg.attention_enabled = (t % 2) == 0;
    const auto grads = vgl_grad_embeddings(b, cfg);
    std::vector<double> an, fd;
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t d = 0; d < b.dim(); ++d) {
        an.push_back(grads[k][d]);
        EmbeddingBatch bb = b;
        bb.vectors[k][d] += h;
        const double lp = vgl_batch(bb, cfg).total;
        bb.vectors[k][d] = b.vectors[k][d] - h;
        const double lm = vgl_batch(bb, cfg).total;
        fd.push_back((lp - lm) / (2.0 * h));
      }
    worst = std::max(worst, oracle::rel_error_l2(an, fd));
  }
  return worst;
}

double encoder_end_to_end_32bit() {
  EncoderConfig cfg;
  cfg.input_size = 8;
  cfg.stage_channels = {6, 10};
  cfg.hidden_dim = 16;
  cfg.embed_dim = 12;
  Rng rng(hash_seed(2024, 0xACC));
  const EncoderParams<float> params = init_encoder_params<float>(cfg, rng.next_u64());

  std::vector<Image> views;
  std::vector<GroupId> groups;
  for (int g = 0; g < 3; ++g)
    for (int v = 0; v < 2; ++v) {
      Image img(8, 8);
      for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next_below(256));
      views.push_back(img);
      groups.push_back(static_cast<GroupId>(g));
    }

  ForwardResult<float> fwd = forward(params, views);
  EmbeddingBatch eb;
  eb.vectors = std::move(fwd.embeddings);
  eb.groups = groups;
  const auto grad_emb = vgl_grad_embeddings(eb, VglConfig{});
  const ParamGrads<float> grads = backward(params, fwd.cache, grad_emb);

  // 64-bit oracle of the same function; see the gradient audit notes.
  EncoderParams<double> oracle_params;
  oracle_params.config = cfg;
  for (const Tensor<float>& t : params.tensors) {
    Tensor<double> d(t.dims);
    for (std::size_t i = 0; i < t.data.size(); ++i) d.data[i] = t.data[i];
    oracle_params.tensors.push_back(std::move(d));
  }
  auto loss_of = [&](const EncoderParams<double>& p) {
    ForwardResult<double> f = forward(p, views);
    EmbeddingBatch e2;
    e2.vectors = std::move(f.embeddings);
    e2.groups = groups;
    return vgl_batch(e2, VglConfig{}).total;
  };

  double gmax = 0.0;
  for (const auto& t : grads)
    for (float v : t.data) gmax = std::max(gmax, std::abs(static_cast<double>(v)));

  const double h = 1e-6;
  double worst = 0.0;
  int done = 0, guard = 0;
  while (done < 10 && guard < 20000) {
    ++guard;
    const std::size_t ti = rng.next_below(params.tensors.size());
    const std::size_t ei = rng.next_below(params.tensors[ti].numel());
    const double g = grads[ti].data[ei];
    if (std::abs(g) < 0.05 * gmax) continue;
    const double w0 = oracle_params.tensors[ti].data[ei];
    oracle_params.tensors[ti].data[ei] = w0 + h;
    const double lp = loss_of(oracle_params);
    oracle_params.tensors[ti].data[ei] = w0 - h;
    const double lm = loss_of(oracle_params);
    oracle_params.tensors[ti].data[ei] = w0;
    const double fd = (lp - lm) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g) / std::max(std::abs(fd), std::abs(g)));
    ++done;
  }
  return worst;
}

void criterion_gradient_suite() {
  const double sims_err = sims_grad_suite(100);
  const double emb_err = embedding_grad_suite(100);
  const double enc_err = encoder_end_to_end_32bit();
  const bool pass = sims_err < 1e-6 && emb_err < 1e-5 && enc_err < 1e-3;
  report(2, "gradient-suite", pass,
         fmt("100 instances: dL/dc rel %.2e (<1e-6), dL/dv rel %.2e (<1e-5), "
             "encoder 32-bit rel %.2e (<1e-3)",
             sims_err, emb_err, enc_err));
}

// ---------------------------------------------------------------- criterion 3

void criterion_invariants() {
  bool pass = true;
  std::string detail;

  // Range per anchor.
  for (int t = 0; t < 20 && pass; ++t) {
    EmbeddingBatch b = oracle::random_batch(4, 3, 8, 61000 + t);
    const LossOutput out = vgl_batch(b, VglConfig{});
    for (double l : out.per_anchor)
      if (!(l >= 0.0 && l < 1.0)) {
        pass = false;
        detail = fmt("range violated: %.6f", l);
      }
  }

  // Permutation invariance <= 1e-10.
  double perm_worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    EmbeddingBatch b = oracle::random_batch(4, 3, 8, 62000 + t);
    const double t0 = vgl_batch(b, VglConfig{}).total;
    std::vector<std::size_t> perm(b.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(t);
    std::shuffle(perm.begin(), perm.end(), rng);
    EmbeddingBatch p;
    for (std::size_t k : perm) {
      p.vectors.push_back(b.vectors[k]);
      p.groups.push_back(b.groups[k]);
    }
    perm_worst = std::max(perm_worst, std::abs(vgl_batch(p, VglConfig{}).total - t0));
  }
  if (perm_worst > 1e-10) {
    pass = false;
    detail = fmt("permutation drift %.2e", perm_worst);
  }

  // Per-vector positive-scale invariance <= 1e-6.
  double scale_worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    EmbeddingBatch b = oracle::random_batch(4, 3, 8, 63000 + t);
    const double t0 = vgl_batch(b, VglConfig{}).total;
    std::mt19937_64 rng(100 + t);
    std::uniform_real_distribution<double> us(0.05, 20.0);
    for (auto& v : b.vectors) {
      const double s = us(rng);
      for (double& x : v) x *= s;
    }
    scale_worst = std::max(scale_worst, std::abs(vgl_batch(b, VglConfig{}).total - t0));
  }
  if (scale_worst > 1e-6) {
    pass = false;
    detail = fmt("scale drift %.2e", scale_worst);
  }

  // Strict monotonicity in each negative similarity.
  for (int t = 0; t < 20 && pass; ++t) {
    std::mt19937_64 rng(200 + t);
    std::uniform_real_distribution<double> us(-0.8, 0.8);
    SimilarityMatrix m = anchor_row_matrix({us(rng), us(rng), us(rng), us(rng)});
    const std::vector<GroupId> groups{0, 0, 0, 1, 2};
    const double base = vgl_anchor(0, m, groups, VglConfig{});
    for (std::size_t k : {std::size_t{3}, std::size_t{4}}) {
      SimilarityMatrix mm = m;
      mm.at(0, k) = std::min(1.0, m(0, k) + 1e-3);
      if (!(vgl_anchor(0, mm, groups, VglConfig{}) > base)) {
        pass = false;
        detail = "negative-similarity monotonicity violated";
      }
    }
  }

  // Gradient orthogonality <= 1e-8.
  double ortho_worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    EmbeddingBatch b = oracle::random_batch(4, 3, 16, 64000 + t);
    const auto grads = vgl_grad_embeddings(b, VglConfig{});
    for (std::size_t k = 0; k < b.size(); ++k) {
      double dot = 0.0;
      for (std::size_t d = 0; d < b.dim(); ++d) dot += grads[k][d] * b.vectors[k][d];
      ortho_worst = std::max(ortho_worst, std::abs(dot));
    }
  }
  if (ortho_worst > 1e-8) {
    pass = false;
    detail = fmt("orthogonality drift %.2e", ortho_worst);
  }

  // Equal-similarity closed form, exact to 1e-12.
  double closed_worst = 0.0;
  for (auto [P, M] : {std::pair<int, int>{2, 2}, {3, 5}, {19, 304}}) {
    const std::size_t n = static_cast<std::size_t>(1 + P + M);
    SimilarityMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m.at(i, j) = (i == j) ? 1.0 : 0.5;
    std::vector<GroupId> g(n);
    for (std::size_t k = 0; k <= static_cast<std::size_t>(P); ++k) g[k] = 0;
    for (std::size_t k = P + 1; k < n; ++k) g[k] = static_cast<GroupId>(k);
    const double expect = static_cast<double>(M) / (M + P - 1);
    closed_worst =
        std::max(closed_worst, std::abs(vgl_anchor(0, m, g, VglConfig{}) - expect));
  }
  if (closed_worst > 1e-12) {
    pass = false;
    detail = fmt("closed-form drift %.2e", closed_worst);
  }

  if (pass)
    detail = fmt("perm %.1e, scale %.1e, ortho %.1e, closed-form %.1e",
                 perm_worst, scale_worst, ortho_worst, closed_worst);
  report(3, "invariant-suite", pass, detail);
}

// ---------------------------------------------------------------- criterion 4

void criterion_attention_gradient_gap() {
  const std::vector<double> grid = default_c_grid();
  const auto on = gradient_gap_curve(0.2, true, grid, 0.9);
  const auto off = gradient_gap_curve(0.2, false, grid, 0.9);

  bool positive = true, nondecreasing = true;
  for (std::size_t i = 0; i < on.size(); ++i) {
    if (!(on[i].value > 0.0)) positive = false;
    if (i && on[i].value < on[i - 1].value) nondecreasing = false;
  }
  const double tv_on = total_variation(on);
  const double tv_off = total_variation(off);
  const bool tv_smaller_off = tv_off < tv_on;

  const auto loss_on = loss_gap_curve(0.2, true, grid, 0.9);
  const auto loss_off = loss_gap_curve(0.2, false, grid, 0.9);

  const bool pass = positive && nondecreasing && tv_smaller_off;
  report(4, "attention-gradient-gap", pass,
         fmt("positive=%s nondecreasing=%s grad-TV on %.4f vs off %.4f "
             "(off smaller=%s); loss-TV on %.4f vs off %.4f; curve min %.4f at "
             "gap %.3f",
             positive ? "yes" : "NO", nondecreasing ? "yes" : "NO", tv_on,
             tv_off, tv_smaller_off ? "yes" : "NO", total_variation(loss_on),
             total_variation(loss_off),
             std::min_element(on.begin(), on.end(),
                              [](auto& a, auto& b) { return a.value < b.value; })
                 ->value,
             std::min_element(on.begin(), on.end(),
                              [](auto& a, auto& b) { return a.value < b.value; })
                 ->gap));
}

// ---------------------------------------------------------------- criterion 5

void criterion_small_tau_decay() {
  const std::vector<double> grid = default_c_grid();
  const auto small_tau = gradient_gap_curve(0.01, true, grid, 0.9);
  const auto ref_tau = gradient_gap_curve(0.2, true, grid, 0.9);

  std::size_t argmax_small = 0, argmax_ref = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (small_tau[i].value > small_tau[argmax_small].value) argmax_small = i;
    if (ref_tau[i].value > ref_tau[argmax_ref].value) argmax_ref = i;
  }
  const bool decays = small_tau.back().value < small_tau[argmax_small].value;
  const bool interior_small = argmax_small + 1 < grid.size();
  const bool no_interior_ref = argmax_ref == grid.size() - 1;
  const bool pass = decays && interior_small && no_interior_ref;
  report(5, "small-tau-gradient-decay", pass,
         fmt("tau=0.01 peak %.3f at gap %.3f, edge value %.2e (below peak=%s); "
             "tau=0.2 argmax at gap %.3f (boundary=%s)",
             small_tau[argmax_small].value, small_tau[argmax_small].gap,
             small_tau.back().value, decays ? "yes" : "NO",
             ref_tau[argmax_ref].gap, no_interior_ref ? "yes" : "NO"));
}

// ---------------------------------------------------------------- criterion 6

struct DeskArtifacts {
  fs::path dir;
  PretrainResult result;
  PretrainConfig cfg;
};

DeskArtifacts run_desk_training() {
  DeskArtifacts art;
  art.dir = fs::path("/tmp") / "gravis_acceptance";
  fs::remove_all(art.dir);
  fs::create_directories(art.dir);

  SynthConfig synth;
  synth.num_sources = 200;
  synth.num_classes = 3;
  synth.image_size = 32;
  synth.seed = 1;
  generate_synthetic_dataset(synth, (art.dir / "train").string());

  art.cfg = desk_preset();
  art.cfg.manifest_path = (art.dir / "train" / "manifest.json").string();
  art.cfg.seed = 1;
  art.cfg.checkpoint_out = (art.dir / "desk.grvs").string();
  art.cfg.metrics_out = (art.dir / "desk_metrics.csv").string();
  art.result = pretrain_run(art.cfg);
  return art;
}

double heldout_precision(const EncoderParams<float>& params, const fs::path& dir) {
  SynthConfig synth;
  synth.num_sources = 16;
  synth.num_classes = 3;
  synth.image_size = 32;
  synth.seed = 11;
  const DatasetManifest manifest =
      generate_synthetic_dataset(synth, (dir / "held").string());
  const std::vector<Image> sources =
      load_manifest_images(manifest, (dir / "held" / "manifest.json").string());
  AugmentationSpec spec;
  const EnlargedBatch batch =
      build_enlarged_batch(sources, 4, spec, hash_seed(3, 0xE7A1));
  ForwardResult<float> fwd = forward(params, batch.views);
  EmbeddingBatch eb;
  eb.vectors = std::move(fwd.embeddings);
  eb.groups = batch.groups;
  return knn_view_retrieval(eb, 1).precision_at_k;
}

void criterion_desk_training(const DeskArtifacts& art) {
  const double first = art.result.metrics.rows.front().loss;
  const double final = art.result.metrics.rows.back().loss;
  const bool loss_halved = final < 0.5 * first;

  const double trained = heldout_precision(art.result.params, art.dir);
  EncoderConfig enc_cfg;
  enc_cfg.input_size = art.cfg.augmentation.output_size;
  const EncoderParams<float> random_params = init_encoder_params<float>(enc_cfg, 999);
  const double untrained = heldout_precision(random_params, art.dir);

  // 16 held-out sources x 4 views, uniform groups.
  const double chance = 3.0 / 63.0;
  const bool beats_chance = trained >= 3.0 * chance;
  const bool beats_random = trained - untrained >= 0.15;
  const bool pass = loss_halved && beats_chance && beats_random;
  report(6, "desk-scale-training", pass,
         fmt("loss %.2f -> %.2f (ratio %.3f, need <0.5); precision@1 %.3f vs "
             "chance %.3f (x%.1f, need >=3) vs random-init %.3f (delta %.3f, "
             "need >=0.15)",
             first, final, final / first, trained, chance, trained / chance,
             untrained, trained - untrained));
}

// ---------------------------------------------------------------- criterion 7

void criterion_ablation_harness() {
  const fs::path dir = fs::path("/tmp") / "gravis_acceptance" / "ablation";
  fs::create_directories(dir);
  SynthConfig synth;
  synth.num_sources = 20;
  synth.num_classes = 3;
  synth.image_size = 32;
  synth.seed = 2;
  generate_synthetic_dataset(synth, (dir / "data").string());
  const std::string manifest = (dir / "data" / "manifest.json").string();

  struct RunSpec {
    std::string name;
    std::size_t batch;
    std::size_t n_aug;
    double tau;
    bool attention;
  };
  std::vector<RunSpec> runs;
  for (std::size_t n : {std::size_t{0}, std::size_t{2}, std::size_t{10}, std::size_t{20}})
    runs.push_back({"n" + std::to_string(n), 4, n, 0.2, true});
  for (std::size_t b : {std::size_t{4}, std::size_t{8}, std::size_t{16}})
    runs.push_back({"b" + std::to_string(b), b, 6, 0.2, true});
  for (double tau : {0.01, 0.1, 0.2, 0.5, 1.0})
    runs.push_back({"tau" + std::to_string(tau).substr(0, 4), 4, 4, tau, true});
  runs.push_back({"att-on", 4, 4, 0.2, true});
  runs.push_back({"att-off", 4, 4, 0.2, false});

  bool pass = true;
  std::string detail;
  int completed = 0;
  for (const RunSpec& r : runs) {
    PretrainConfig cfg;
    cfg.manifest_path = manifest;
    cfg.batch_size = r.batch;
    cfg.n_aug = r.n_aug;
    cfg.tau = r.tau;
    cfg.attention_enabled = r.attention;
    cfg.epochs = 2;
    cfg.base_lr = 0.003;
    cfg.seed = 7;
    cfg.checkpoint_out = (dir / (r.name + ".grvs")).string();
    cfg.metrics_out = (dir / (r.name + ".csv")).string();
    try {
      const PretrainResult res = pretrain_run(cfg);
      const EncoderSnapshot snap =
          encoder_state_from_tensors(load_checkpoint(cfg.checkpoint_out));
      if (res.metrics.rows.size() != 2 || snap.params.tensors.empty() ||
          !fs::exists(cfg.metrics_out)) {
        pass = false;
        detail = "run " + r.name + " did not emit metrics + checkpoint";
        break;
      }
      ++completed;
    } catch (const Error& e) {
      pass = false;
      detail = "run " + r.name + " failed: " + e.what();
      break;
    }
  }

  bool n1_rejected = false;
  try {
    PretrainConfig cfg;
    cfg.manifest_path = manifest;
    cfg.batch_size = 4;
    cfg.n_aug = 1;
    cfg.epochs = 1;
    pretrain_run(cfg);
  } catch (const InvalidN&) {
    n1_rejected = true;
  } catch (...) {
  }
  pass = pass && n1_rejected;
  if (detail.empty())
    detail = fmt("%d/14 runs emitted metrics+checkpoint; N=1 rejected=%s",
                 completed, n1_rejected ? "yes" : "NO");
  report(7, "ablation-harness", pass, detail);
}

// ---------------------------------------------------------------- criterion 8

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

void criterion_determinism() {
  const fs::path dir = fs::path("/tmp") / "gravis_acceptance" / "determinism";
  fs::create_directories(dir);
  SynthConfig synth;
  synth.num_sources = 12;
  synth.num_classes = 3;
  synth.image_size = 32;
  synth.seed = 3;
  generate_synthetic_dataset(synth, (dir / "data").string());

  PretrainConfig cfg;
  cfg.manifest_path = (dir / "data" / "manifest.json").string();
  cfg.batch_size = 4;
  cfg.n_aug = 3;
  cfg.epochs = 2;
  cfg.base_lr = 0.003;
  cfg.seed = 5;
  cfg.checkpoint_out = (dir / "ck.grvs").string();
  cfg.metrics_out = (dir / "metrics.csv").string();

  pretrain_run(cfg);
  const std::vector<char> ck1 = slurp(cfg.checkpoint_out);
  const std::vector<char> m1 = slurp(cfg.metrics_out);
  pretrain_run(cfg);
  const bool pass = slurp(cfg.checkpoint_out) == ck1 && slurp(cfg.metrics_out) == m1;
  report(8, "determinism", pass,
         fmt("checkpoint %zu bytes and metrics %zu bytes byte-identical across "
             "two runs: %s",
             ck1.size(), m1.size(), pass ? "yes" : "NO"));
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_worked_value();
  criterion_gradient_suite();
  criterion_invariants();
  criterion_attention_gradient_gap();
  criterion_small_tau_decay();
  const DeskArtifacts art = run_desk_training();
  criterion_desk_training(art);
  criterion_ablation_harness();
  criterion_determinism();
  std::printf("%d of 8 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
