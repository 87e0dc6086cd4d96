#include <gtest/gtest.h>

#include <cmath>

#include "coverdet/error.hpp"
#include "coverdet/eval.hpp"
#include "coverdet/random.hpp"
#include "test_support.hpp"

using namespace coverdet;

namespace {

CliqueSet pairs_grid(std::size_t n) {
  std::vector<Clique> cliques;
  for (std::size_t c = 0; c < n; ++c) {
    const std::string id = "k" + std::to_string(1000 + c);
    cliques.push_back({id, {{id + "a", ""}, {id + "b", ""}}});
  }
  return CliqueSet(cliques);
}

std::vector<float> random_unit(Rng& rng, std::size_t dim) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(dim);
  double norm = 0.0;
  for (float& x : v) {
    x = n(rng);
    norm += x * x;
  }
  for (float& x : v) x = static_cast<float>(x / std::sqrt(norm));
  return v;
}

}  // namespace

TEST(Cosine, ClosedForms) {
  const std::vector<double> u{1, 2, 3}, neg{-1, -2, -3}, x{1, 0}, y{0, 1};
  EXPECT_NEAR(cosine_distance(std::span<const double>(u), std::span<const double>(u)), 0.0, 1e-12);
  EXPECT_NEAR(cosine_distance(std::span<const double>(x), std::span<const double>(y)), 1.0, 1e-12);
  EXPECT_NEAR(cosine_distance(std::span<const double>(u), std::span<const double>(neg)), 2.0, 1e-12);
  const std::vector<double> zero{0, 0, 0};
  try {
    cosine_distance(std::span<const double>(u), std::span<const double>(zero));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroVector);
  }
  EXPECT_THROW(cosine_distance(std::span<const double>(u), std::span<const double>(x)), Error);
}

TEST(Index, InsertChecks) {
  EmbeddingIndex index(3);
  index.insert("a", {1, 0, 0});
  EXPECT_THROW(index.insert("b", {1, 0}), Error);
  EXPECT_THROW(index.insert("c", {0, 0, 0}), Error);
  EXPECT_THROW(index.insert("d", {NAN, 0, 1}), Error);
  try {
    index.at("missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingEmbedding);
  }
}

TEST(Index, NearestAndFileRoundTrip) {
  EmbeddingIndex index(2);
  index.insert("q", {1, 0});
  index.insert("near", {1, 0.1f});
  index.insert("mid", {1, 1});
  index.insert("far", {-1, 0});
  const auto nn = index.nearest("q", 2);
  ASSERT_EQ(nn.size(), 2u);
  EXPECT_EQ(nn[0].first, "near");
  EXPECT_EQ(nn[1].first, "mid");

  coverdet::testing::TempDir dir("index");
  index.save(dir / "i.eidx");
  const auto back = EmbeddingIndex::load(dir / "i.eidx");
  EXPECT_EQ(back.entries(), index.entries());
  EXPECT_EQ(back.encode(), index.encode());
}

TEST(PrecAt1, PerfectOracle) {
  const auto cs = pairs_grid(40);
  EmbeddingIndex index(8);
  Rng rng(1);
  for (const auto& c : cs.cliques()) {
    const auto v = random_unit(rng, 8);
    for (const auto& t : c.tracks) index.insert(t.id, v);
  }
  const auto report = prec_at_1(index, positive_pairs(cs), 16, 3, &cs);
  EXPECT_EQ(report.prec_at_1, 1.0);
  EXPECT_EQ(report.n_batches, 5u);
  EXPECT_EQ(report.dropped_pairs, 0u);
}

TEST(PrecAt1, AdversarialPartnersScoreZero) {
  // Partners are antipodal; every other track sits closer.
  const auto cs = pairs_grid(8);
  EmbeddingIndex index(2);
  std::size_t c = 0;
  for (const auto& clique : cs.cliques()) {
    const double angle = 0.05 * static_cast<double>(c++);
    index.insert(clique.tracks[0].id, {static_cast<float>(std::cos(angle)), static_cast<float>(std::sin(angle))});
    index.insert(clique.tracks[1].id, {static_cast<float>(-std::cos(angle)), static_cast<float>(-std::sin(angle))});
  }
  EXPECT_EQ(prec_at_1(index, positive_pairs(cs), 16, 1, &cs).prec_at_1, 0.0);
}

TEST(PrecAt1, SecondNearestPartnerScoresZeroForThatQuery) {
  const auto cs = pairs_grid(2);
  EmbeddingIndex index(2);
  index.insert("k1000a", {1, 0});
  index.insert("k1000b", {0, 1});
  index.insert("k1001a", {1, 0.2f});
  index.insert("k1001b", {1, 0.3f});
  const auto pairs = positive_pairs(cs);
  // k1000a: nearest is k1001a (wrong). k1000b: nearest k1001b (wrong).
  // k1001a: nearest k1001b (right). k1001b: nearest k1001a (right).
  EXPECT_DOUBLE_EQ(batch_prec_at_1(index, pairs), 0.5);
}

TEST(PrecAt1, RandomEmbeddingsApproachOneFifteenth) {
  const auto cs = pairs_grid(8 * 1200);
  EmbeddingIndex index(16);
  Rng rng(2);
  for (const auto& c : cs.cliques()) {
    for (const auto& t : c.tracks) index.insert(t.id, random_unit(rng, 16));
  }
  const auto report = prec_at_1(index, positive_pairs(cs), 16, 5, &cs);
  EXPECT_GE(report.n_batches, 1000u);
  EXPECT_NEAR(report.prec_at_1, 1.0 / 15.0, 0.01);
}

TEST(PrecAt1, ScaleInvarianceAndDeterminism) {
  const auto cs = pairs_grid(48);
  EmbeddingIndex index(6), scaled(6);
  Rng rng(3);
  for (const auto& c : cs.cliques()) {
    for (const auto& t : c.tracks) {
      auto v = random_unit(rng, 6);
      index.insert(t.id, v);
      for (float& x : v) x *= 37.5f;
      scaled.insert(t.id, v);
    }
  }
  const auto pairs = positive_pairs(cs);
  const auto a = prec_at_1(index, pairs, 16, 9, &cs);
  const auto b = prec_at_1(scaled, pairs, 16, 9, &cs);
  EXPECT_EQ(a.per_batch_scores, b.per_batch_scores);
  EXPECT_EQ(a.per_batch_scores, prec_at_1(index, pairs, 16, 9, &cs).per_batch_scores);
  double mean = 0.0;
  for (double s : a.per_batch_scores) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    mean += s;
  }
  EXPECT_NEAR(a.prec_at_1, mean / static_cast<double>(a.n_batches), 1e-15);
}

TEST(PrecAt1, PartialBatchDroppedAndUnderfull) {
  const auto cs = pairs_grid(13);
  EmbeddingIndex index(4);
  Rng rng(4);
  for (const auto& c : cs.cliques()) {
    for (const auto& t : c.tracks) index.insert(t.id, random_unit(rng, 4));
  }
  const auto report = prec_at_1(index, positive_pairs(cs), 16, 1, &cs);
  EXPECT_EQ(report.n_batches, 1u);
  EXPECT_EQ(report.dropped_pairs, 5u);

  const auto small = pairs_grid(7);
  try {
    prec_at_1(index, positive_pairs(small), 16, 1, &small);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBatchUnderfull);
  }
}

TEST(PrecAt1, MissingEmbedding) {
  const auto cs = pairs_grid(8);
  EmbeddingIndex index(2);
  index.insert("k1000a", {1, 0});
  try {
    prec_at_1(index, positive_pairs(cs), 16, 1, &cs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingEmbedding);
  }
}

TEST(EvalBatches, NoTrackOrCliqueRepeatsWithinABatch) {
  std::vector<Clique> cliques;
  for (int c = 0; c < 10; ++c) {
    const std::string id = "c" + std::to_string(c);
    cliques.push_back({id, {{id + "x", ""}, {id + "y", ""}, {id + "z", ""}, {id + "w", ""}}});
  }
  const CliqueSet cs(cliques);
  std::size_t dropped = 0;
  const auto batches = make_eval_batches(positive_pairs(cs), 16, 5, &cs, &dropped);
  EXPECT_EQ(batches.size() * 8 + dropped, cs.n_positive_pairs());
  for (const auto& batch : batches) {
    ASSERT_EQ(batch.size(), 8u);
    std::set<std::string> tracks;
    std::set<std::size_t> seen_cliques;
    for (const auto& p : batch) {
      EXPECT_TRUE(tracks.insert(p.track_a).second);
      EXPECT_TRUE(tracks.insert(p.track_b).second);
      EXPECT_TRUE(seen_cliques.insert(*cs.clique_of(p.track_a)).second);
    }
  }
}
