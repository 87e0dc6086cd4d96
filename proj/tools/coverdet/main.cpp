#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "coverdet/checkpoint.hpp"
#include "coverdet/config.hpp"
#include "coverdet/dataset.hpp"
#include "coverdet/error.hpp"
#include "coverdet/binary_io.hpp"
#include "coverdet/eval.hpp"
#include "coverdet/features.hpp"
#include "coverdet/oracle/gradcheck.hpp"
#include "coverdet/oracle/spectral.hpp"
#include "coverdet/parallel.hpp"
#include "coverdet/random.hpp"
#include "coverdet/synth.hpp"
#include "coverdet/train.hpp"
#include "log.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace coverdet::cli {
namespace {

struct Options {
  std::string config_path;
  std::optional<int> sample_rate;

  // synth
  std::size_t cliques = 32;
  std::size_t versions = 4;
  std::uint64_t synth_seed = 7;
  double duration = 30.0;
  std::string out;

  // extract
  std::string in;
  std::optional<int> hop;
  std::size_t frames = kDefaultInputFrames;

  // train / evaluate / embed / nearest
  std::string manifest;
  std::string features;
  std::string model;
  std::string index;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> holdout;
  bool split_by_clique = false;
  std::string val_manifest;
  std::size_t batch_size = 16;
  std::string query;
  std::size_t k = 5;
  std::size_t instances = 20;
};

PipelineConfig pipeline_config(const Options& opt) {
  PipelineConfig config;
  if (!opt.config_path.empty()) apply_overrides(load_key_values(opt.config_path), config);
  if (opt.seed) {
    config.seed = *opt.seed;
    config.train.seed = *opt.seed;
  }
  if (opt.holdout) config.holdout = *opt.holdout;
  if (opt.split_by_clique) config.split_by_clique = true;
  if (opt.hop) config.hop_samples = *opt.hop;
  if (opt.sample_rate) config.sample_rate_hz = *opt.sample_rate;
  return config;
}

json arch_json(const ArchitectureConfig& arch) {
  return {{"conv_layers", format_conv_layers(arch.conv_layers)},
          {"fc_widths", arch.fc_widths},
          {"input_bins", arch.input_bins},
          {"input_frames", arch.input_frames},
          {"embedding_dim", arch.embedding_dim()}};
}

int run_synth(const Options& opt) {
  SynthConfig config;
  config.n_cliques = opt.cliques;
  config.versions_per_clique = opt.versions;
  config.seed = opt.synth_seed;
  config.duration_seconds = opt.duration;
  if (opt.sample_rate) config.sample_rate_hz = *opt.sample_rate;
  const auto cliques = synthesize_corpus(config, opt.out);
  log_event("synth", {{"event", "done"},
                      {"cliques", cliques.n_cliques()},
                      {"tracks", cliques.n_tracks()},
                      {"positive_pairs", cliques.n_positive_pairs()},
                      {"manifest", (fs::path(opt.out) / "manifest.txt").string()}});
  return 0;
}

int run_extract(const Options& opt) {
  const auto config = pipeline_config(opt);
  ExtractOptions extract;
  extract.hop_samples = config.hop_samples;
  extract.sample_rate_hz = config.sample_rate_hz;
  extract.frames = opt.frames;
  const auto ids = extract_directory(opt.in, opt.out, extract);
  log_event("extract", {{"event", "done"},
                        {"files", ids.size()},
                        {"hop_samples", extract.hop_samples},
                        {"frames", extract.frames},
                        {"workers", worker_count()}});
  return 0;
}

int run_train(const Options& opt) {
  auto config = pipeline_config(opt);
  const auto cliques = parse_manifest(opt.manifest);
  const auto features = FeatureStore::load(opt.features, cliques);
  const auto data =
      prepare_training_set(cliques, config.holdout, config.split_by_clique, config.seed);
  auto model = SiameseModel::create(config.arch, derive_seed(config.seed, "init"));

  log_event("train", {{"event", "start"},
                      {"tracks", cliques.n_tracks()},
                      {"train_positives", data.train_positives.size()},
                      {"validation_pairs", data.validation.size()},
                      {"split_by_clique", config.split_by_clique},
                      {"seed", config.seed},
                      {"architecture", arch_json(config.arch)}});

  if (!opt.val_manifest.empty()) {
    if (!config.split_by_clique) {
      fail(ErrorCode::kInvalidParam, "--val-manifest needs a clique-level split");
    }
    // A clique is held out when none of its tracks is in the training cliques.
    std::vector<std::size_t> held_out;
    const auto all = data.all.cliques();
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (!data.train_cliques.clique_of(all[i].tracks.front().id)) held_out.push_back(i);
    }
    save_manifest(opt.val_manifest, data.all.subset(held_out));
  }

  TrainCallbacks callbacks;
  callbacks.on_step = [](const StepEvent& e) {
    log_event("train", {{"event", "step"}, {"epoch", e.epoch}, {"step", e.step}, {"loss", e.loss}});
  };
  callbacks.on_epoch = [](const EpochMetrics& m) {
    json line{{"event", "epoch"},
              {"epoch", m.epoch},
              {"steps", m.steps},
              {"train_loss", m.train_loss},
              {"val_loss", m.val_loss},
              {"val_prec_at_1", m.val_prec_at_1 ? json(*m.val_prec_at_1) : json(nullptr)},
              {"epoch_s", m.seconds}};
    log_event("train", line);
  };
  const auto result = train(model, data, features, config.train, callbacks);

  save_checkpoint(opt.out, model);
  save_adam_state(opt.out + ".adam", result.optimizer);
  log_event("train", {{"event", "done"}, {"checkpoint", opt.out}, {"optimizer_steps", result.optimizer.step}});
  return 0;
}

SiameseModel load_model(const Options& opt, const PipelineConfig& config) {
  return load_checkpoint(opt.model, config.arch.input_frames, config.arch.input_bins);
}

EmbeddingIndex index_from_model(const Options& opt, const PipelineConfig& config,
                                const CliqueSet& cliques) {
  const auto model = load_model(opt, config);
  const auto features = FeatureStore::load(opt.features, cliques);
  const auto ids = track_ids(cliques);
  return build_index(model, features, ids);
}

int run_evaluate(const Options& opt) {
  const auto config = pipeline_config(opt);
  const auto cliques = parse_manifest(opt.manifest);
  const auto index = index_from_model(opt, config, cliques);
  const auto pairs = positive_pairs(cliques);
  const auto report =
      prec_at_1(index, pairs, opt.batch_size, derive_seed(config.seed, "evaluate"), &cliques);

  const json out{{"prec_at_1", report.prec_at_1},
                 {"n_batches", report.n_batches},
                 {"batch_size", report.batch_size},
                 {"per_batch_scores", report.per_batch_scores},
                 {"dropped_pairs", report.dropped_pairs},
                 {"random_baseline", 1.0 / static_cast<double>(report.batch_size - 1)},
                 {"seed", config.seed},
                 {"tracks", index.size()}};
  const auto text = out.dump(2) + "\n";
  write_file_atomic(opt.out, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  log_event("evaluate", {{"event", "done"},
                         {"prec_at_1", report.prec_at_1},
                         {"n_batches", report.n_batches},
                         {"report", opt.out}});
  return 0;
}

int run_embed(const Options& opt) {
  const auto config = pipeline_config(opt);
  const auto cliques = parse_manifest(opt.manifest);
  const auto index = index_from_model(opt, config, cliques);
  index.save(opt.out);
  log_event("embed", {{"event", "done"}, {"tracks", index.size()}, {"dim", index.dim()}, {"index", opt.out}});
  return 0;
}

int run_nearest(const Options& opt) {
  const auto config = pipeline_config(opt);
  EmbeddingIndex index;
  if (!opt.index.empty()) {
    index = EmbeddingIndex::load(opt.index);
  } else {
    if (opt.model.empty() || opt.manifest.empty() || opt.features.empty()) {
      throw CLI::ValidationError("nearest needs --index, or --model with --manifest and --features");
    }
    index = index_from_model(opt, config, parse_manifest(opt.manifest));
  }
  for (const auto& [id, distance] : index.nearest(opt.query, opt.k)) {
    std::cout << id << '\t' << std::fixed << std::setprecision(6) << distance << '\n';
  }
  return 0;
}

int run_selftest(const Options& opt) {
  bool grad_ok = true;
  for (const auto& r : oracle::run_gradcheck_suite(opt.instances)) {
    log_event("selftest", {{"suite", "gradcheck"},
                           {"check", r.name},
                           {"checked", r.checked},
                           {"skipped", r.skipped},
                           {"max_rel_error", r.max_rel_error},
                           {"passed", r.passed}});
    grad_ok = grad_ok && r.passed;
  }
  bool cqt_ok = true;
  for (const auto& r : oracle::run_cqt_oracle_suite()) {
    log_event("selftest", {{"suite", "cqt-oracle"}, {"check", r.name}, {"detail", r.detail}, {"passed", r.passed}});
    cqt_ok = cqt_ok && r.passed;
  }
  std::cout << "gradcheck: " << (grad_ok ? "PASS" : "FAIL")
            << ", cqt-oracle: " << (cqt_ok ? "PASS" : "FAIL") << std::endl;
  return grad_ok && cqt_ok ? 0 : 1;
}

}  // namespace
}  // namespace coverdet::cli

int main(int argc, char** argv) {
  using namespace coverdet::cli;
  Options opt;

  CLI::App app{"Cover-song detection with a Siamese convnet"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  auto* synth = app.add_subcommand("synth", "Render a synthetic cover-song corpus");
  synth->add_option("--cliques", opt.cliques, "Number of cliques")->check(CLI::Range(2, 100000));
  synth->add_option("--versions", opt.versions, "Versions per clique")->check(CLI::Range(2, 1000));
  synth->add_option("--seed", opt.synth_seed, "Corpus seed");
  synth->add_option("--duration", opt.duration, "Seconds per track");
  synth->add_option("--sample-rate", opt.sample_rate, "Output sample rate");
  synth->add_option("--out", opt.out, "Output directory")->required();

  auto* extract = app.add_subcommand("extract", "Compute CQT feature files for a WAV directory");
  extract->add_option("--in", opt.in, "Directory of .wav files")->required()->check(CLI::ExistingDirectory);
  extract->add_option("--out", opt.out, "Feature directory")->required();
  extract->add_option("--hop", opt.hop, "Hop in samples (default 5120)");
  extract->add_option("--frames", opt.frames, "Frames kept per track, 0 keeps all");
  extract->add_option("--sample-rate", opt.sample_rate, "Canonical sample rate");
  extract->add_option("--config", opt.config_path, "key=value config file");

  auto* train = app.add_subcommand("train", "Train the Siamese model");
  train->add_option("--manifest", opt.manifest, "Clique manifest")->required();
  train->add_option("--features", opt.features, "Feature directory")->required();
  train->add_option("--config", opt.config_path, "key=value config file");
  train->add_option("--out", opt.out, "Checkpoint path")->required();
  train->add_option("--seed", opt.seed, "Master seed");
  train->add_option("--holdout", opt.holdout, "Validation pairs held out");
  train->add_flag("--split-by-clique", opt.split_by_clique, "Hold out whole cliques");
  train->add_option("--val-manifest", opt.val_manifest, "Write the held-out cliques here");

  auto add_model_inputs = [&](CLI::App* sub, bool required) {
    auto* m = sub->add_option("--model", opt.model, "Checkpoint");
    auto* man = sub->add_option("--manifest", opt.manifest, "Clique manifest");
    auto* f = sub->add_option("--features", opt.features, "Feature directory");
    sub->add_option("--config", opt.config_path, "key=value config file (input_frames, input_bins)");
    if (required) {
      m->required();
      man->required();
      f->required();
    }
  };

  auto* evaluate = app.add_subcommand("evaluate", "Mean Prec@1 over batches of cover pairs");
  add_model_inputs(evaluate, true);
  evaluate->add_option("--seed", opt.seed, "Batching seed");
  evaluate->add_option("--batch-size", opt.batch_size, "Tracks per batch")->check(CLI::Range(4, 100000));
  evaluate->add_option("--out", opt.out, "report.json path")->required();

  auto* embed = app.add_subcommand("embed", "Write an embedding index");
  add_model_inputs(embed, true);
  embed->add_option("--out", opt.out, "Index path")->required();

  auto* nearest = app.add_subcommand("nearest", "Print the k nearest tracks to a query");
  add_model_inputs(nearest, false);
  nearest->add_option("--index", opt.index, "Embedding index from `embed`");
  nearest->add_option("--query", opt.query, "Query track id")->required();
  nearest->add_option("--k", opt.k, "Number of neighbours");

  auto* selftest = app.add_subcommand("selftest", "Run the gradient and CQT oracle suites");
  selftest->add_option("--instances", opt.instances, "Random instances per gradient check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "synth") return run_synth(opt);
    if (name == "extract") return run_extract(opt);
    if (name == "train") return run_train(opt);
    if (name == "evaluate") return run_evaluate(opt);
    if (name == "embed") return run_embed(opt);
    if (name == "nearest") return run_nearest(opt);
    return run_selftest(opt);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const coverdet::Error& e) {
    log_error(std::string(coverdet::error_code_name(e.code())), e.detail());
    return 1;
  } catch (const std::exception& e) {
    log_error("Internal", e.what());
    return 1;
  }
}
