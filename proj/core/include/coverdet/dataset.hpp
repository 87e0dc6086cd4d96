#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace coverdet {

struct Track {
  std::string id;
  std::string path;  // relative to the manifest's directory; may be empty

  bool operator==(const Track&) const = default;
};

struct Clique {
  std::string id;
  std::vector<Track> tracks;

  bool operator==(const Clique&) const = default;
};

/// Version groups: every pair of tracks inside a clique is a cover pair.
/// Cliques have at least two members, and each track belongs to one clique.
class CliqueSet {
 public:
  CliqueSet() = default;
  /// Drops cliques with fewer than two tracks (counted in
  /// dropped_singletons()); throws DuplicateTrack if a track id repeats.
  explicit CliqueSet(std::vector<Clique> cliques);

  std::span<const Clique> cliques() const { return cliques_; }
  std::size_t n_cliques() const { return cliques_.size(); }
  std::size_t n_tracks() const { return clique_of_.size(); }
  std::size_t n_positive_pairs() const;
  std::size_t dropped_singletons() const { return dropped_singletons_; }

  /// Index into cliques() of the clique holding `track_id`.
  std::optional<std::size_t> clique_of(std::string_view track_id) const;
  const Track* find_track(std::string_view track_id) const;

  /// Cliques at the given indices, in that order.
  CliqueSet subset(std::span<const std::size_t> clique_indices) const;

  bool operator==(const CliqueSet& other) const { return cliques_ == other.cliques_; }

 private:
  std::vector<Clique> cliques_;
  std::unordered_map<std::string, std::size_t> clique_of_;
  std::size_t dropped_singletons_ = 0;
};

/// Manifest grammar, one record per line:
///   '#...' or '%...'        comment / header
///   '-<clique_id>'          opens a clique
///   '<track_id>[,<path>]'   member of the open clique
/// Blank lines are ignored.
CliqueSet parse_manifest_text(std::string_view text, std::string_view origin = "manifest");
CliqueSet parse_manifest(const std::filesystem::path& path);
std::string serialize_manifest(const CliqueSet& cliques);
void save_manifest(const std::filesystem::path& path, const CliqueSet& cliques);

struct PairSample {
  std::string track_a;
  std::string track_b;
  int label = 0;  // 1 = cover pair (same clique), 0 = non-cover

  bool operator==(const PairSample&) const = default;
  auto operator<=>(const PairSample&) const = default;
};

/// All within-clique pairs, label 1. Cliques in id order, tracks within a
/// pair ordered so track_a < track_b, pairs sorted.
std::vector<PairSample> positive_pairs(const CliqueSet& cliques);

/// `count` distinct cross-clique pairs (unordered; track_a < track_b), drawn
/// uniformly by rejection, label 0. Pairs in `exclude` are never returned.
/// Throws InsufficientDiversity when fewer than `count` such pairs exist.
std::vector<PairSample> sample_negatives(
    const CliqueSet& cliques, std::size_t count, std::uint64_t seed,
    const std::set<std::pair<std::string, std::string>>* exclude = nullptr);

struct PairSplit {
  std::vector<PairSample> train;
  std::vector<PairSample> validation;
};

/// Pair-level holdout, stratified by label: the holdout keeps the input's
/// label proportions (to within one pair). Order inside each part follows the
/// input order.
PairSplit split_validation(std::span<const PairSample> pairs, std::size_t n_holdout,
                           std::uint64_t seed);

struct CliqueSplit {
  CliqueSet train;
  CliqueSet validation;
};

/// Clique-level holdout: whole cliques move to validation (in seeded random
/// order) until their positive pairs, doubled for the matching negatives,
/// reach `n_holdout_pairs`. No track is shared between the two parts.
CliqueSplit split_by_clique(const CliqueSet& cliques, std::size_t n_holdout_pairs,
                            std::uint64_t seed);

}  // namespace coverdet
