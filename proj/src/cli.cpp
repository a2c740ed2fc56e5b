#include "gravis/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gravis/analysis.hpp"
#include "gravis/errors.hpp"
#include "gravis/evalrep.hpp"
#include "gravis/gradcheck.hpp"
#include "gravis/pretrain.hpp"
#include "gravis/rng.hpp"
#include "gravis/synth.hpp"
#include "json.hpp"

namespace gravis {

namespace {

struct CliOptions {
  // global
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_path;

  // synth
  std::size_t num_sources = 200;
  int num_classes = 3;
  int image_size = 32;

  // pretrain overrides
  std::optional<double> tau;
  std::optional<std::size_t> n_aug;
  std::optional<std::size_t> batch;
  std::optional<int> epochs;
  bool no_attention = false;
  std::string preset;
  std::string manifest_path;
  std::string metrics_path;
  std::string loss_name;
  std::optional<double> lr;
  bool timing = false;

  // analyze
  double base = 0.9;
  double c_step = 0.005;
  int c_count = 30;
  std::string taus_csv = "0.01,0.1,0.2,0.5,1.0";
  double ref_positive = 0.9;
  double sim_min = -1.0;
  double sim_max = 1.0;
  int sim_count = 201;

  // eval
  std::string checkpoint_path;
  std::size_t k = 1;
  std::size_t n_views = 4;
  int probe_steps = 300;
  double probe_lr = 1.0;
  double train_fraction = 0.5;
};

std::vector<double> make_c_grid(double step, int count) {
  std::vector<double> grid;
  for (int i = 1; i <= count; ++i) grid.push_back(step * i);
  return grid;
}

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  return values;
}

void emit_json(const nlohmann::json& j, const std::string& out_path) {
  std::cout << j.dump(2) << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw IoFailure("cannot open " + out_path + " for writing");
    out << j.dump(2) << "\n";
  }
}

int run_synth(const CliOptions& opt) {
  if (opt.out_path.empty()) throw ConfigError("synth requires --out DIR");
  SynthConfig cfg;
  cfg.num_sources = opt.num_sources;
  cfg.num_classes = opt.num_classes;
  cfg.image_size = opt.image_size;
  cfg.seed = opt.seed.value_or(0);
  const DatasetManifest manifest = generate_synthetic_dataset(cfg, opt.out_path);
  std::cout << "wrote " << manifest.entries.size() << " images and manifest.json to "
            << opt.out_path << "\n";
  return 0;
}

int run_pretrain(const CliOptions& opt) {
  PretrainConfig cfg;
  if (!opt.config_path.empty()) cfg = load_pretrain_config(opt.config_path);
  if (!opt.preset.empty()) {
    PretrainConfig bundle = (opt.preset == "desk") ? desk_preset() : PretrainConfig{};
    if (opt.preset != "desk" && opt.preset != "full")
      throw ConfigError("preset must be 'desk' or 'full'");
    bundle.manifest_path = cfg.manifest_path;
    bundle.checkpoint_out = cfg.checkpoint_out;
    bundle.metrics_out = cfg.metrics_out;
    bundle.seed = cfg.seed;
    bundle.record_timing = cfg.record_timing;
    cfg = bundle;
  }
  if (!opt.manifest_path.empty()) cfg.manifest_path = opt.manifest_path;
  if (opt.seed) cfg.seed = *opt.seed;
  if (!opt.out_path.empty()) cfg.checkpoint_out = opt.out_path;
  if (!opt.metrics_path.empty()) cfg.metrics_out = opt.metrics_path;
  if (opt.tau) cfg.tau = *opt.tau;
  if (opt.n_aug) cfg.n_aug = *opt.n_aug;
  if (opt.batch) cfg.batch_size = *opt.batch;
  if (opt.epochs) cfg.epochs = *opt.epochs;
  if (opt.lr) cfg.base_lr = *opt.lr;
  if (opt.no_attention) cfg.attention_enabled = false;
  if (opt.timing) cfg.record_timing = true;
  if (!opt.loss_name.empty()) {
    if (opt.loss_name == "vgl")
      cfg.loss = LossKind::vgl;
    else if (opt.loss_name == "triplet")
      cfg.loss = LossKind::triplet;
    else if (opt.loss_name == "nce")
      cfg.loss = LossKind::nce;
    else
      throw ConfigError("loss must be vgl, triplet or nce");
  }
  if (cfg.manifest_path.empty())
    throw ConfigError("pretrain needs a dataset manifest (--manifest or config)");

  const PretrainResult res = pretrain_run(cfg);
  if (!res.metrics.rows.empty()) {
    const MetricsRow& first = res.metrics.rows.front();
    const MetricsRow& last = res.metrics.rows.back();
    std::printf("epochs %d..%d  loss %.6f -> %.6f\n", first.epoch, last.epoch,
                first.loss, last.loss);
  }
  if (!cfg.checkpoint_out.empty())
    std::cout << "checkpoint written to " << cfg.checkpoint_out << "\n";
  return 0;
}

int run_analyze(const std::string& which, const CliOptions& opt) {
  if (opt.out_path.empty()) throw ConfigError("analyze requires --out PATH");
  const std::vector<double> grid = make_c_grid(opt.c_step, opt.c_count);
  const double tau = opt.tau.value_or(0.2);
  const bool attention = !opt.no_attention;
  if (which == "grad-gap") {
    write_curve_csv(gradient_gap_curve(tau, attention, grid, opt.base),
                    "gap,grad_diff", opt.out_path);
  } else if (which == "loss-gap") {
    write_curve_csv(loss_gap_curve(tau, attention, grid, opt.base), "gap,loss",
                    opt.out_path);
  } else if (which == "sigmoid-margin") {
    std::vector<double> sim_grid;
    const int n = std::max(2, opt.sim_count);
    for (int i = 0; i < n; ++i)
      sim_grid.push_back(opt.sim_min +
                         (opt.sim_max - opt.sim_min) * i / static_cast<double>(n - 1));
    write_curve_csv(sigmoid_margin_curve(tau, sim_grid, opt.ref_positive),
                    "sim,contribution", opt.out_path);
  } else {  // tau-sweep
    write_tau_sweep_csv(
        tau_sweep(parse_csv_doubles(opt.taus_csv), attention, grid, opt.base),
        opt.out_path);
  }
  std::cout << "wrote " << opt.out_path << "\n";
  return 0;
}

EncoderParams<float> load_encoder(const std::string& path) {
  if (path.empty()) throw ConfigError("eval requires --checkpoint PATH");
  return encoder_state_from_tensors(load_checkpoint(path)).params;
}

int run_eval_retrieval(const CliOptions& opt) {
  const EncoderParams<float> params = load_encoder(opt.checkpoint_path);
  const DatasetManifest manifest = load_manifest(opt.manifest_path);
  const std::vector<Image> sources = load_manifest_images(manifest, opt.manifest_path);

  AugmentationSpec spec;
  spec.output_size = params.config.input_size;
  const EnlargedBatch batch = build_enlarged_batch(
      sources, opt.n_views, spec, hash_seed(opt.seed.value_or(0), 0xE7A1));
  ForwardResult<float> fwd = forward(params, batch.views);
  EmbeddingBatch eb;
  eb.vectors = std::move(fwd.embeddings);
  eb.groups = batch.groups;
  const RetrievalReport rep = knn_view_retrieval(eb, opt.k);
  nlohmann::json j{{"k", rep.k},
                   {"precision_at_k", rep.precision_at_k},
                   {"chance_level", rep.chance_level},
                   {"num_queries", rep.num_queries}};
  emit_json(j, opt.out_path);
  return 0;
}

int run_eval_probe(const CliOptions& opt) {
  const EncoderParams<float> params = load_encoder(opt.checkpoint_path);
  const DatasetManifest manifest = load_manifest(opt.manifest_path);
  const std::vector<Image> sources = load_manifest_images(manifest, opt.manifest_path);

  const auto embeddings = embed_sources(params, sources);
  std::vector<std::size_t> order(sources.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(hash_seed(opt.seed.value_or(0), 0x9806E));
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(i)]);
  const std::size_t n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(opt.train_fraction * order.size()));

  LabeledEmbeddings train, test;
  for (std::size_t i = 0; i < order.size(); ++i) {
    LabeledEmbeddings& dst = (i < n_train) ? train : test;
    dst.vectors.push_back(embeddings[order[i]]);
    dst.labels.push_back(manifest.entries[order[i]].class_id);
  }
  const double accuracy = linear_probe(train, test, opt.probe_steps, opt.probe_lr);
  nlohmann::json j{{"accuracy", accuracy},
                   {"num_train", train.vectors.size()},
                   {"num_test", test.vectors.size()},
                   {"num_classes", manifest.num_classes},
                   {"steps", opt.probe_steps}};
  emit_json(j, opt.out_path);
  return 0;
}

int run_gradcheck(const CliOptions& opt) {
  const auto reports = run_gradient_suite(opt.seed.value_or(7));
  bool all_pass = true;
  for (const GradCheckReport& r : reports) {
    std::printf("%-26s max rel err %.3e  (tol %.0e)  %s\n", r.name.c_str(),
                r.max_rel_err, r.tolerance, r.pass ? "PASS" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Self-supervised view-grouping toolkit"};
  app.fallthrough();
  CliOptions opt;

  app.add_option("--config", opt.config_path, "JSON config file");
  app.add_option("--seed", opt.seed, "Master random seed");
  app.add_option("--out", opt.out_path, "Output path");

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--num-sources", opt.num_sources);
  synth->add_option("--num-classes", opt.num_classes);
  synth->add_option("--image-size", opt.image_size);

  CLI::App* pretrain = app.add_subcommand("pretrain", "Run the pretraining loop");
  pretrain->add_option("--manifest", opt.manifest_path, "Dataset manifest JSON");
  pretrain->add_option("--metrics", opt.metrics_path, "Metrics CSV path");
  pretrain->add_option("--preset", opt.preset, "'desk' or 'full' bundle");
  pretrain->add_option("--tau", opt.tau);
  pretrain->add_option("--n-aug", opt.n_aug);
  pretrain->add_option("--batch", opt.batch);
  pretrain->add_option("--epochs", opt.epochs);
  pretrain->add_option("--lr", opt.lr);
  pretrain->add_option("--loss", opt.loss_name, "vgl | triplet | nce");
  pretrain->add_flag("--no-attention", opt.no_attention);
  pretrain->add_flag("--timing", opt.timing, "Record wall-clock in metrics");

  CLI::App* analyze = app.add_subcommand("analyze", "Loss-geometry studies");
  analyze->require_subcommand(1);
  std::vector<CLI::App*> analyze_subs;
  for (const char* name : {"grad-gap", "loss-gap", "sigmoid-margin", "tau-sweep"}) {
    CLI::App* sub = analyze->add_subcommand(name);
    sub->fallthrough();
    analyze_subs.push_back(sub);
  }
  analyze->add_option("--tau", opt.tau);
  analyze->add_option("--base", opt.base, "Top similarity of the ordered example");
  analyze->add_option("--c-step", opt.c_step);
  analyze->add_option("--c-count", opt.c_count);
  analyze->add_option("--taus", opt.taus_csv, "Comma-separated sweep values");
  analyze->add_option("--ref", opt.ref_positive, "Reference positive similarity");
  analyze->add_option("--sim-min", opt.sim_min);
  analyze->add_option("--sim-max", opt.sim_max);
  analyze->add_option("--sim-count", opt.sim_count);
  analyze->add_flag("--no-attention", opt.no_attention);

  CLI::App* eval = app.add_subcommand("eval", "Representation quality reports");
  eval->require_subcommand(1);
  CLI::App* retrieval = eval->add_subcommand("retrieval", "View-grouping precision@k");
  retrieval->fallthrough();
  CLI::App* probe = eval->add_subcommand("probe", "Linear probe on class labels");
  probe->fallthrough();
  eval->add_option("--checkpoint", opt.checkpoint_path);
  eval->add_option("--manifest", opt.manifest_path);
  eval->add_option("--k", opt.k);
  eval->add_option("--n-views", opt.n_views, "Augmented views per source");
  eval->add_option("--steps", opt.probe_steps);
  eval->add_option("--lr", opt.probe_lr);
  eval->add_option("--train-fraction", opt.train_fraction);

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference audit of all gradients");

  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << "run with --help for usage\n";
    return 2;
  }

  try {
    if (*synth) return run_synth(opt);
    if (*pretrain) return run_pretrain(opt);
    if (*analyze) {
      for (std::size_t i = 0; i < analyze_subs.size(); ++i)
        if (*analyze_subs[i])
          return run_analyze(analyze_subs[i]->get_name(), opt);
    }
    if (*eval) {
      if (*retrieval) return run_eval_retrieval(opt);
      if (*probe) return run_eval_probe(opt);
    }
    if (*gradcheck) return run_gradcheck(opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace gravis
