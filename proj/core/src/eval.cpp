#include "coverdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <set>

#include "coverdet/binary_io.hpp"
#include "coverdet/error.hpp"
#include "coverdet/random.hpp"

namespace coverdet {
namespace {

constexpr char kIndexMagic[4] = {'E', 'I', 'D', 'X'};
constexpr std::uint32_t kIndexVersion = 1;

template <typename T>
double cosine_distance_impl(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    fail(ErrorCode::kShapeMismatch, "cosine_distance on vectors of length " +
                                        std::to_string(u.size()) + " and " +
                                        std::to_string(v.size()));
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * v[i];
    uu += static_cast<double>(u[i]) * u[i];
    vv += static_cast<double>(v[i]) * v[i];
  }
  if (uu == 0.0 || vv == 0.0) fail(ErrorCode::kZeroVector, "cosine distance of a zero vector");
  const double cos = dot / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(1.0 - cos, 0.0, 2.0);
}

}  // namespace

double cosine_distance(std::span<const float> u, std::span<const float> v) {
  return cosine_distance_impl(u, v);
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  return cosine_distance_impl(u, v);
}

void EmbeddingIndex::insert(const std::string& track_id, std::vector<float> vector) {
  if (entries_.empty() && dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_) {
    fail(ErrorCode::kDimMismatch, track_id + ": embedding of length " +
                                      std::to_string(vector.size()) + ", index dim " +
                                      std::to_string(dim_));
  }
  double norm = 0.0;
  for (float x : vector) {
    if (!std::isfinite(x)) fail(ErrorCode::kNumericalFault, track_id + ": non-finite embedding");
    norm += static_cast<double>(x) * x;
  }
  if (norm == 0.0) fail(ErrorCode::kZeroVector, track_id + ": zero embedding");
  entries_[track_id] = std::move(vector);
}

const std::vector<float>& EmbeddingIndex::at(const std::string& track_id) const {
  const auto it = entries_.find(track_id);
  if (it == entries_.end()) fail(ErrorCode::kMissingEmbedding, "no embedding for " + track_id);
  return it->second;
}

std::vector<std::pair<std::string, double>> EmbeddingIndex::nearest(const std::string& track_id,
                                                                   std::size_t k) const {
  const auto& query = at(track_id);
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [id, vec] : entries_) {
    if (id == track_id) continue;
    out.emplace_back(id, cosine_distance(query, vec));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<std::uint8_t> EmbeddingIndex::encode() const {
  ByteWriter w;
  w.put_bytes(std::string_view(kIndexMagic, 4));
  w.put_u32(kIndexVersion);
  w.put_u32(static_cast<std::uint32_t>(dim_));
  w.put_u32(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [id, vec] : entries_) {
    w.put_u32(static_cast<std::uint32_t>(id.size()));
    w.put_bytes(id);
    w.put_f32_array(vec);
  }
  seal_with_crc(w);
  return std::move(w.bytes());
}

EmbeddingIndex EmbeddingIndex::decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kIndexMagic, 4) != 0) {
    fail(ErrorCode::kFormatVersionMismatch, "embedding index: bad magic (expected EIDX)");
  }
  ByteReader r(verify_crc(bytes, "embedding index"));
  r.get_bytes(4);
  if (const auto version = r.get_u32(); version != kIndexVersion) {
    fail(ErrorCode::kFormatVersionMismatch,
         "embedding index version " + std::to_string(version));
  }
  EmbeddingIndex index(r.get_u32());
  const std::uint32_t count = r.get_u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string id = r.get_bytes(r.get_u32());
    std::vector<float> vec(index.dim_);
    r.get_f32_array(vec);
    index.insert(id, std::move(vec));
  }
  return index;
}

void EmbeddingIndex::save(const std::filesystem::path& path) const {
  write_file_atomic(path, encode());
}

EmbeddingIndex EmbeddingIndex::load(const std::filesystem::path& path) {
  return decode(read_file(path));
}

std::vector<std::vector<PairSample>> make_eval_batches(std::span<const PairSample> pairs,
                                                       std::size_t batch_size,
                                                       std::uint64_t seed,
                                                       const CliqueSet* cliques,
                                                       std::size_t* dropped) {
  if (batch_size < 2 || batch_size % 2 != 0) {
    fail(ErrorCode::kInvalidParam, "evaluation batch size must be even and >= 2");
  }
  const std::size_t per_batch = batch_size / 2;
  std::vector<PairSample> pending(pairs.begin(), pairs.end());
  Rng rng(seed);
  std::shuffle(pending.begin(), pending.end(), rng);

  std::vector<std::vector<PairSample>> batches;
  while (pending.size() >= per_batch) {
    std::vector<PairSample> batch;
    std::vector<PairSample> rest;
    std::set<std::string> tracks;
    std::set<std::size_t> groups;
    for (auto& pair : pending) {
      if (batch.size() == per_batch) {
        rest.push_back(std::move(pair));
        continue;
      }
      bool fits = !tracks.contains(pair.track_a) && !tracks.contains(pair.track_b);
      std::optional<std::size_t> group;
      if (fits && cliques) {
        group = cliques->clique_of(pair.track_a);
        fits = !group || !groups.contains(*group);
      }
      if (!fits) {
        rest.push_back(std::move(pair));
        continue;
      }
      tracks.insert(pair.track_a);
      tracks.insert(pair.track_b);
      if (group) groups.insert(*group);
      batch.push_back(std::move(pair));
    }
    if (batch.size() < per_batch) {
      // No further batch can be completed; everything left is dropped.
      rest.insert(rest.end(), batch.begin(), batch.end());
      pending = std::move(rest);
      break;
    }
    batches.push_back(std::move(batch));
    pending = std::move(rest);
  }
  if (dropped) *dropped = pending.size();
  return batches;
}

double batch_prec_at_1(const EmbeddingIndex& index, std::span<const PairSample> batch) {
  std::vector<std::pair<std::string, std::string>> queries;  // (track, partner)
  for (const auto& p : batch) {
    queries.emplace_back(p.track_a, p.track_b);
    queries.emplace_back(p.track_b, p.track_a);
  }
  std::size_t correct = 0;
  for (const auto& [query, partner] : queries) {
    const auto& qv = index.at(query);
    const std::string* best = nullptr;
    double best_dist = 0.0;
    for (const auto& [candidate, unused] : queries) {
      if (candidate == query) continue;
      const double d = cosine_distance(qv, index.at(candidate));
      if (!best || d < best_dist || (d == best_dist && candidate < *best)) {
        best = &candidate;
        best_dist = d;
      }
    }
    if (best && *best == partner) ++correct;
  }
  return queries.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(queries.size());
}

EvalReport prec_at_1(const EmbeddingIndex& index, std::span<const PairSample> pairs,
                     std::size_t batch_size, std::uint64_t seed, const CliqueSet* cliques) {
  for (const auto& p : pairs) {
    index.at(p.track_a);
    index.at(p.track_b);
  }
  EvalReport report;
  report.batch_size = batch_size;
  const auto batches = make_eval_batches(pairs, batch_size, seed, cliques, &report.dropped_pairs);
  if (batches.empty()) {
    fail(ErrorCode::kBatchUnderfull, "only " + std::to_string(pairs.size()) +
                                         " cover pairs; a batch of " +
                                         std::to_string(batch_size) + " needs " +
                                         std::to_string(batch_size / 2) + " compatible pairs");
  }
  double total = 0.0;
  for (const auto& batch : batches) {
    const double score = batch_prec_at_1(index, batch);
    report.per_batch_scores.push_back(score);
    total += score;
  }
  report.n_batches = batches.size();
  report.prec_at_1 = total / static_cast<double>(batches.size());
  return report;
}

}  // namespace coverdet
