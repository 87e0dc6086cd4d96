#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coverdet/dataset.hpp"

namespace coverdet {

/// 1 - u.v / (|u| |v|), in [0, 2]. Throws ZeroVector for a zero-norm input
/// and ShapeMismatch for unequal lengths.
double cosine_distance(std::span<const float> u, std::span<const float> v);
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// Track id -> embedding. All vectors share one dimension, are finite and
/// have nonzero norm.
class EmbeddingIndex {
 public:
  explicit EmbeddingIndex(std::size_t dim = 0) : dim_(dim) {}

  /// Throws DimMismatch, NumericalFault (non-finite) or ZeroVector.
  void insert(const std::string& track_id, std::vector<float> vector);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& track_id) const { return entries_.contains(track_id); }
  /// Throws MissingEmbedding.
  const std::vector<float>& at(const std::string& track_id) const;
  const std::map<std::string, std::vector<float>>& entries() const { return entries_; }

  /// The k nearest other entries by cosine distance (ties by track id).
  std::vector<std::pair<std::string, double>> nearest(const std::string& track_id,
                                                      std::size_t k) const;

  std::vector<std::uint8_t> encode() const;
  static EmbeddingIndex decode(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static EmbeddingIndex load(const std::filesystem::path& path);

 private:
  std::size_t dim_;
  std::map<std::string, std::vector<float>> entries_;
};

struct EvalReport {
  double prec_at_1 = 0.0;
  std::size_t n_batches = 0;
  std::size_t batch_size = 16;
  std::vector<double> per_batch_scores;
  std::size_t dropped_pairs = 0;  // pairs left over after the last full batch
};

/// Groups cover pairs into evaluation batches of batch_size/2 pairs. Pairs
/// are shuffled by `seed`, then each batch is filled greedily, skipping pairs
/// that would repeat a track already in the batch or, when `cliques` is
/// given, a clique already in the batch. Skipped pairs wait for later
/// batches; whatever cannot complete a batch is dropped.
std::vector<std::vector<PairSample>> make_eval_batches(std::span<const PairSample> pairs,
                                                       std::size_t batch_size,
                                                       std::uint64_t seed,
                                                       const CliqueSet* cliques = nullptr,
                                                       std::size_t* dropped = nullptr);

/// Mean precision-at-one over batches: each of the batch's tracks queries the
/// other batch_size-1 by cosine distance and scores 1 when its nearest
/// neighbour is its cover partner. Equal distances resolve to the smaller
/// track id. Throws MissingEmbedding, or BatchUnderfull when not even one
/// full batch can be formed.
EvalReport prec_at_1(const EmbeddingIndex& index, std::span<const PairSample> pairs,
                     std::size_t batch_size, std::uint64_t seed,
                     const CliqueSet* cliques = nullptr);

/// Score of one batch (mean over its queries).
double batch_prec_at_1(const EmbeddingIndex& index, std::span<const PairSample> batch);

}  // namespace coverdet
