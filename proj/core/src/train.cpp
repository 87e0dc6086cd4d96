#include "coverdet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "coverdet/error.hpp"
#include "coverdet/parallel.hpp"
#include "coverdet/random.hpp"

namespace coverdet {

void TrainConfig::validate() const {
  if (batch_size < 2 || batch_size % 2 != 0) {
    fail(ErrorCode::kInvalidParam, "batch_size must be even and >= 2");
  }
  if (epochs == 0) fail(ErrorCode::kInvalidParam, "epochs must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    fail(ErrorCode::kInvalidParam, "dropout_rate must be in [0, 1)");
  }
  if (!(l2_lambda >= 0.0) || !(lr >= 0.0)) {
    fail(ErrorCode::kInvalidParam, "lr and l2_lambda must be non-negative");
  }
  if (eval_batch_size < 2 || eval_batch_size % 2 != 0) {
    fail(ErrorCode::kInvalidParam, "eval_batch_size must be even and >= 2");
  }
}

AdamConfig TrainConfig::adam() const {
  AdamConfig adam;
  adam.lr = lr;
  adam.l2_lambda = l2_lambda;
  return adam;
}

std::vector<PairSample> TrainingSet::validation_positives() const {
  std::vector<PairSample> out;
  for (const auto& p : validation) {
    if (p.label == 1) out.push_back(p);
  }
  return out;
}

std::vector<std::string> TrainingSet::validation_tracks() const {
  std::set<std::string> ids;
  for (const auto& p : validation) {
    ids.insert(p.track_a);
    ids.insert(p.track_b);
  }
  return {ids.begin(), ids.end()};
}

TrainingSet prepare_training_set(const CliqueSet& cliques, std::size_t n_holdout,
                                 bool split_by_clique, std::uint64_t seed) {
  TrainingSet data;
  data.all = cliques;
  if (split_by_clique) {
    auto split = coverdet::split_by_clique(cliques, n_holdout, derive_seed(seed, "split"));
    data.train_cliques = std::move(split.train);
    data.train_positives = positive_pairs(data.train_cliques);
    if (split.validation.n_cliques() > 0) {
      data.validation = positive_pairs(split.validation);
      const auto negatives = sample_negatives(split.validation, data.validation.size(),
                                              derive_seed(seed, "validation-negatives"));
      data.validation.insert(data.validation.end(), negatives.begin(), negatives.end());
    }
    return data;
  }

  data.train_cliques = cliques;
  auto pairs = positive_pairs(cliques);
  const auto negatives =
      sample_negatives(cliques, pairs.size(), derive_seed(seed, "validation-negatives"));
  pairs.insert(pairs.end(), negatives.begin(), negatives.end());
  auto split = split_validation(pairs, n_holdout, derive_seed(seed, "split"));
  for (auto& p : split.train) {
    if (p.label == 1) data.train_positives.push_back(std::move(p));
  }
  data.validation = std::move(split.validation);
  for (const auto& p : data.validation) {
    if (p.label == 0) data.excluded.emplace(std::min(p.track_a, p.track_b), std::max(p.track_a, p.track_b));
  }
  return data;
}

std::vector<PairSample> epoch_pairs(const TrainingSet& data, std::uint64_t epoch_seed) {
  auto positives = data.train_positives;
  auto negatives = sample_negatives(data.train_cliques, positives.size(),
                                    derive_seed(epoch_seed, "negatives"), &data.excluded);
  Rng rng(derive_seed(epoch_seed, "shuffle"));
  std::shuffle(positives.begin(), positives.end(), rng);
  std::shuffle(negatives.begin(), negatives.end(), rng);
  std::vector<PairSample> out;
  out.reserve(positives.size() * 2);
  for (std::size_t i = 0; i < positives.size(); ++i) {
    out.push_back(std::move(positives[i]));
    out.push_back(std::move(negatives[i]));
  }
  return out;
}

double train_step(SiameseModel& model, AdamState& optimizer, std::span<const PairSample> batch,
                  const FeatureStore& features, const TrainConfig& config,
                  std::uint64_t step_seed) {
  if (batch.empty()) fail(ErrorCode::kEmptyDataset, "empty training batch");
  const std::size_t frames = model.config().input_frames;
  const auto n_params = model.parameters().size();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  std::vector<std::vector<std::vector<float>>> pair_grads(batch.size());
  std::vector<double> losses(batch.size());
  parallel_for(
      batch.size(),
      [&](std::size_t i) {
        const std::uint64_t pair_seed = derive_seed(step_seed, static_cast<std::uint64_t>(i));
        const auto& pair = batch[i];
        const auto a = crop_or_pad(features.at(pair.track_a), frames, derive_seed(pair_seed, 0));
        const auto b = crop_or_pad(features.at(pair.track_b), frames, derive_seed(pair_seed, 1));
        const CqtSpectrogram* both[] = {&a, &b};

        SiameseModel replica = model.clone();
        Rng rng(derive_seed(pair_seed, 2));
        const auto emb = replica.embed(stack_inputs<float>(both),
                                       {true, config.dropout_rate, &rng, true});
        auto loss = bce_with_logits(
            compare_logit(replica.alpha(), select_row(emb, 0), select_row(emb, 1)), pair.label);
        loss.backward(static_cast<float>(inv_batch));
        losses[i] = loss.item();

        auto& grads = pair_grads[i];
        grads.reserve(n_params);
        for (const auto& p : replica.parameters()) {
          if (p.tensor.has_grad()) {
            grads.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
          } else {
            grads.emplace_back(p.tensor.size(), 0.0f);
          }
        }
      },
      config.workers);

  // Fixed-order reduction keeps the update independent of scheduling.
  std::vector<std::vector<float>> total(n_params);
  for (std::size_t k = 0; k < n_params; ++k) {
    std::vector<double> acc(model.parameters()[k].tensor.size(), 0.0);
    for (const auto& grads : pair_grads) {
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += grads[k][j];
    }
    total[k].assign(acc.begin(), acc.end());
  }
  adam_step(model.parameters(), total, optimizer);

  double mean_loss = 0.0;
  for (double l : losses) mean_loss += l;
  return mean_loss * inv_batch;
}

double evaluate_loss(const SiameseModel& model, std::span<const PairSample> pairs,
                     const FeatureStore& features, std::size_t workers) {
  if (pairs.empty()) return 0.0;
  std::set<std::string> ids;
  for (const auto& p : pairs) {
    ids.insert(p.track_a);
    ids.insert(p.track_b);
  }
  const std::vector<std::string> tracks(ids.begin(), ids.end());
  std::vector<Tensor> embeddings(tracks.size());
  const std::size_t frames = model.config().input_frames;
  parallel_for(
      tracks.size(),
      [&](std::size_t i) {
        const auto view = fixed_view(features.at(tracks[i]), frames);
        embeddings[i] = model.embed(spectrogram_input<float>(view)).detach();
      },
      workers);
  auto lookup = [&](const std::string& id) {
    const auto it = std::lower_bound(tracks.begin(), tracks.end(), id);
    return reshape(embeddings[static_cast<std::size_t>(it - tracks.begin())],
                   Shape{model.config().embedding_dim()});
  };
  const Tensor alpha = model.alpha().detach();
  double total = 0.0;
  for (const auto& p : pairs) {
    total += bce_with_logits(compare_logit(alpha, lookup(p.track_a), lookup(p.track_b)), p.label).item();
  }
  return total / static_cast<double>(pairs.size());
}

TrainResult train(SiameseModel& model, const TrainingSet& data, const FeatureStore& features,
                  const TrainConfig& config, const TrainCallbacks& callbacks) {
  config.validate();
  if (data.train_positives.empty()) {
    fail(ErrorCode::kEmptyDataset, "no training cover pairs");
  }
  TrainResult result;
  result.optimizer = make_adam_state(model.parameters(), config.adam());
  const std::uint64_t train_seed = derive_seed(config.seed, "train");
  const auto val_positives = data.validation_positives();
  const auto val_tracks = data.validation_tracks();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const std::uint64_t epoch_seed = derive_seed(train_seed, static_cast<std::uint64_t>(epoch));
    const auto pairs = epoch_pairs(data, epoch_seed);

    EpochMetrics metrics;
    metrics.epoch = epoch + 1;
    double loss_sum = 0.0;
    for (std::size_t first = 0; first < pairs.size(); first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, pairs.size() - first);
      const auto batch = std::span(pairs).subspan(first, count);
      double loss = 0.0;
      try {
        loss = train_step(model, result.optimizer, batch, features, config,
                          derive_seed(epoch_seed, static_cast<std::uint64_t>(metrics.steps)));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNumericalFault) throw;
        fail(ErrorCode::kNumericalFault, "epoch " + std::to_string(epoch + 1) + " step " +
                                             std::to_string(metrics.steps + 1) + ": " + e.detail());
      }
      loss_sum += loss * static_cast<double>(count);
      ++metrics.steps;
      if (callbacks.on_step) callbacks.on_step({epoch + 1, metrics.steps, loss});
    }
    metrics.train_loss = loss_sum / static_cast<double>(pairs.size());

    if (!data.validation.empty()) {
      metrics.val_loss = evaluate_loss(model, data.validation, features, config.workers);
      try {
        const auto index = build_index(model, features, val_tracks, config.workers);
        metrics.val_prec_at_1 = prec_at_1(index, val_positives, config.eval_batch_size,
                                          derive_seed(config.seed, "evaluate"), &data.all)
                                    .prec_at_1;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kBatchUnderfull) throw;
      }
    }
    metrics.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (callbacks.on_epoch) callbacks.on_epoch(metrics);
    result.epochs.push_back(metrics);
  }
  return result;
}

}  // namespace coverdet
