#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coverdet/dataset.hpp"
#include "coverdet/eval.hpp"
#include "coverdet/features.hpp"
#include "coverdet/optim.hpp"
#include "coverdet/siamese.hpp"

namespace coverdet {

struct TrainConfig {
  std::size_t batch_size = 16;  // pairs per optimizer step, half covers
  std::size_t epochs = 5;
  double dropout_rate = 0.5;
  double l2_lambda = 0.005;
  double lr = 1e-3;
  std::uint64_t seed = 42;
  std::size_t eval_batch_size = 16;  // tracks per Prec@1 batch
  std::size_t workers = 0;

  void validate() const;
  AdamConfig adam() const;
};

/// Pairs and clique views for one training run.
struct TrainingSet {
  CliqueSet all;
  CliqueSet train_cliques;  // source of the per-epoch negatives
  std::vector<PairSample> train_positives;
  std::vector<PairSample> validation;  // covers and non-covers
  std::set<std::pair<std::string, std::string>> excluded;  // never drawn as training negatives

  std::vector<PairSample> validation_positives() const;
  std::vector<std::string> validation_tracks() const;
};

/// Builds the split. Pair level: every cover pair plus as many sampled
/// non-covers, with `n_holdout` pairs held out (label-stratified). Clique
/// level: whole cliques held out until their cover pairs and matching
/// non-covers reach `n_holdout`.
TrainingSet prepare_training_set(const CliqueSet& cliques, std::size_t n_holdout,
                                 bool split_by_clique, std::uint64_t seed);

struct EpochMetrics {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> val_prec_at_1;  // empty when no full eval batch exists
  double seconds = 0.0;
};

struct StepEvent {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainCallbacks {
  std::function<void(const StepEvent&)> on_step;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  AdamState optimizer;
};

/// Mean-BCE loss of one batch under training-mode dropout, followed by one
/// ADAM update. Pairs are processed independently (possibly in parallel) and
/// their gradients summed in batch order. `step_seed` fixes crops and dropout.
double train_step(SiameseModel& model, AdamState& optimizer, std::span<const PairSample> batch,
                  const FeatureStore& features, const TrainConfig& config,
                  std::uint64_t step_seed);

/// Mean BCE over `pairs` in inference mode, on fixed crops.
double evaluate_loss(const SiameseModel& model, std::span<const PairSample> pairs,
                     const FeatureStore& features, std::size_t workers = 0);

/// One epoch's balanced, interleaved pair list: shuffled covers alternating
/// with freshly sampled non-covers.
std::vector<PairSample> epoch_pairs(const TrainingSet& data, std::uint64_t epoch_seed);

/// Fixed number of epochs of mini-batch ADAM. Throws EmptyDataset when
/// there is nothing to train on; NumericalFault aborts with the epoch and
/// step where it happened.
TrainResult train(SiameseModel& model, const TrainingSet& data, const FeatureStore& features,
                  const TrainConfig& config, const TrainCallbacks& callbacks = {});

}  // namespace coverdet
