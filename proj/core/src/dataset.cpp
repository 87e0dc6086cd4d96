#include "coverdet/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "coverdet/binary_io.hpp"
#include "coverdet/error.hpp"
#include "coverdet/random.hpp"

namespace coverdet {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

CliqueSet::CliqueSet(std::vector<Clique> cliques) {
  for (auto& clique : cliques) {
    if (clique.tracks.size() < 2) {
      ++dropped_singletons_;
      continue;
    }
    const std::size_t index = cliques_.size();
    for (const auto& track : clique.tracks) {
      if (!clique_of_.emplace(track.id, index).second) {
        fail(ErrorCode::kDuplicateTrack, "track '" + track.id + "' appears more than once");
      }
    }
    cliques_.push_back(std::move(clique));
  }
}

std::size_t CliqueSet::n_positive_pairs() const {
  std::size_t total = 0;
  for (const auto& c : cliques_) total += c.tracks.size() * (c.tracks.size() - 1) / 2;
  return total;
}

std::optional<std::size_t> CliqueSet::clique_of(std::string_view track_id) const {
  const auto it = clique_of_.find(std::string(track_id));
  if (it == clique_of_.end()) return std::nullopt;
  return it->second;
}

const Track* CliqueSet::find_track(std::string_view track_id) const {
  const auto idx = clique_of(track_id);
  if (!idx) return nullptr;
  for (const auto& t : cliques_[*idx].tracks) {
    if (t.id == track_id) return &t;
  }
  return nullptr;
}

CliqueSet CliqueSet::subset(std::span<const std::size_t> clique_indices) const {
  std::vector<Clique> picked;
  picked.reserve(clique_indices.size());
  for (std::size_t i : clique_indices) picked.push_back(cliques_.at(i));
  return CliqueSet(std::move(picked));
}

CliqueSet parse_manifest_text(std::string_view text, std::string_view origin) {
  std::vector<Clique> cliques;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const auto line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#' || line.front() == '%') continue;
    if (line.front() == '-') {
      cliques.push_back({std::string(trim(line.substr(1))), {}});
      continue;
    }
    if (cliques.empty()) {
      fail(ErrorCode::kNoOpenClique, std::string(origin) + ":" + std::to_string(line_no) +
                                         ": track record before the first clique header");
    }
    Track track;
    const auto comma = line.find(',');
    track.id = std::string(trim(line.substr(0, comma)));
    if (comma != std::string_view::npos) track.path = std::string(trim(line.substr(comma + 1)));
    cliques.back().tracks.push_back(std::move(track));
  }
  const bool any_track = std::any_of(cliques.begin(), cliques.end(),
                                     [](const Clique& c) { return !c.tracks.empty(); });
  if (!any_track) {
    fail(ErrorCode::kEmptyManifest, std::string(origin) + ": no track records");
  }
  CliqueSet set(std::move(cliques));
  if (set.n_cliques() == 0) {
    fail(ErrorCode::kEmptyManifest, std::string(origin) + ": every clique is a singleton");
  }
  return set;
}

CliqueSet parse_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_manifest_text(
      std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
      path.string());
}

std::string serialize_manifest(const CliqueSet& cliques) {
  std::ostringstream out;
  out << "% coverdet manifest: -<clique_id> opens a clique; <track_id>,<path> lists a member\n";
  for (const auto& clique : cliques.cliques()) {
    out << '-' << clique.id << '\n';
    for (const auto& t : clique.tracks) {
      out << t.id;
      if (!t.path.empty()) out << ',' << t.path;
      out << '\n';
    }
  }
  return out.str();
}

void save_manifest(const std::filesystem::path& path, const CliqueSet& cliques) {
  const auto text = serialize_manifest(cliques);
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

std::vector<PairSample> positive_pairs(const CliqueSet& cliques) {
  std::vector<std::size_t> order(cliques.n_cliques());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cliques.cliques()[a].id < cliques.cliques()[b].id;
  });
  std::vector<PairSample> pairs;
  pairs.reserve(cliques.n_positive_pairs());
  for (std::size_t ci : order) {
    std::vector<std::string> ids;
    for (const auto& t : cliques.cliques()[ci].tracks) ids.push_back(t.id);
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) pairs.push_back({ids[i], ids[j], 1});
    }
  }
  return pairs;
}

std::vector<PairSample> sample_negatives(
    const CliqueSet& cliques, std::size_t count, std::uint64_t seed,
    const std::set<std::pair<std::string, std::string>>* exclude) {
  if (cliques.n_cliques() < 2) {
    fail(ErrorCode::kInsufficientDiversity, "negative sampling needs at least two cliques");
  }
  std::vector<std::pair<const std::string*, std::size_t>> tracks;
  for (std::size_t ci = 0; ci < cliques.n_cliques(); ++ci) {
    for (const auto& t : cliques.cliques()[ci].tracks) tracks.emplace_back(&t.id, ci);
  }
  std::sort(tracks.begin(), tracks.end(),
            [](const auto& a, const auto& b) { return *a.first < *b.first; });

  // Number of cross-clique pairs available, minus excluded ones that are
  // actually cross-clique.
  std::size_t within = 0;
  for (const auto& c : cliques.cliques()) within += c.tracks.size() * (c.tracks.size() - 1) / 2;
  const std::size_t n = tracks.size();
  std::size_t available = n * (n - 1) / 2 - within;
  if (exclude) {
    for (const auto& [a, b] : *exclude) {
      const auto ca = cliques.clique_of(a);
      const auto cb = cliques.clique_of(b);
      if (ca && cb && *ca != *cb) --available;
    }
  }
  if (count > available) {
    fail(ErrorCode::kInsufficientDiversity,
         "requested " + std::to_string(count) + " negative pairs but only " +
             std::to_string(available) + " distinct cross-clique pairs exist");
  }

  std::vector<PairSample> out;
  out.reserve(count);
  // Dense draws (more than half the space) enumerate and shuffle instead of
  // rejection sampling, which would stall near exhaustion.
  Rng rng(seed);
  if (count * 2 > available) {
    std::vector<PairSample> all;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (tracks[i].second == tracks[j].second) continue;
        if (exclude && exclude->contains({*tracks[i].first, *tracks[j].first})) continue;
        all.push_back({*tracks[i].first, *tracks[j].first, 0});
      }
    }
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(count);
    return all;
  }

  std::set<std::pair<std::size_t, std::size_t>> drawn;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  while (out.size() < count) {
    std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    if (i == j || tracks[i].second == tracks[j].second) continue;
    if (i > j) std::swap(i, j);
    if (exclude && exclude->contains({*tracks[i].first, *tracks[j].first})) continue;
    if (!drawn.emplace(i, j).second) continue;
    out.push_back({*tracks[i].first, *tracks[j].first, 0});
  }
  return out;
}

PairSplit split_validation(std::span<const PairSample> pairs, std::size_t n_holdout,
                           std::uint64_t seed) {
  PairSplit split;
  if (n_holdout == 0) {
    split.train.assign(pairs.begin(), pairs.end());
    return split;
  }
  if (pairs.size() <= n_holdout) {
    fail(ErrorCode::kInvalidParam, "cannot hold out " + std::to_string(n_holdout) + " of " +
                                       std::to_string(pairs.size()) + " pairs");
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < pairs.size(); ++i) (pairs[i].label == 1 ? pos : neg).push_back(i);

  // Positives get ceil of their proportional share.
  const std::size_t n_pos = std::min(
      pos.size(), (n_holdout * pos.size() + pairs.size() - 1) / pairs.size());
  const std::size_t n_neg = std::min(neg.size(), n_holdout - n_pos);

  Rng rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::vector<bool> held(pairs.size(), false);
  for (std::size_t i = 0; i < n_pos; ++i) held[pos[i]] = true;
  for (std::size_t i = 0; i < n_neg; ++i) held[neg[i]] = true;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    (held[i] ? split.validation : split.train).push_back(pairs[i]);
  }
  return split;
}

CliqueSplit split_by_clique(const CliqueSet& cliques, std::size_t n_holdout_pairs,
                            std::uint64_t seed) {
  std::vector<std::size_t> order(cliques.n_cliques());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> val, train;
  std::size_t held_pairs = 0;
  for (std::size_t ci : order) {
    if (held_pairs < n_holdout_pairs) {
      const std::size_t m = cliques.cliques()[ci].tracks.size();
      held_pairs += m * (m - 1);  // positives plus as many negatives
      val.push_back(ci);
    } else {
      train.push_back(ci);
    }
  }
  if (n_holdout_pairs > 0 && (train.size() < 2 || val.size() < 2)) {
    fail(ErrorCode::kInvalidParam,
         "clique split needs at least two cliques on each side (holdout of " +
             std::to_string(n_holdout_pairs) + " pairs)");
  }
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {cliques.subset(train), cliques.subset(val)};
}

}  // namespace coverdet
