#include <gtest/gtest.h>

#include <cmath>

#include "coverdet/binary_io.hpp"
#include "coverdet/checkpoint.hpp"
#include "coverdet/error.hpp"
#include "coverdet/ops.hpp"
#include "coverdet/random.hpp"
#include "coverdet/siamese.hpp"
#include "test_support.hpp"

using namespace coverdet;

namespace {

ArchitectureConfig tiny_arch() {
  ArchitectureConfig config;
  config.conv_layers = {{4, 3, 3}, {2, 3, 3}};
  config.fc_widths = {8, 4};
  config.input_bins = 12;
  config.input_frames = 16;
  return config;
}

Tensor random_input(const ArchitectureConfig& config, std::uint64_t seed, std::size_t n = 1) {
  Rng rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(n * config.input_bins * config.input_frames);
  for (float& x : v) x = u(rng);
  return Tensor({n, 1, config.input_bins, config.input_frames}, v);
}

std::vector<float> as_vector(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Compare, ClosedForms) {
  const Tensor v({3}, {0.3f, -1.0f, 2.0f});
  EXPECT_EQ(compare(Tensor({3}, {1, 1, 1}), v, v).item(), 0.5f);
  EXPECT_EQ(compare(Tensor({3}, {-4, 2, 7}), v, v).item(), 0.5f);
  EXPECT_EQ(compare(Tensor({3}, {0, 0, 0}), v, Tensor({3}, {9, 9, 9})).item(), 0.5f);
  const auto p = compare(TensorD({2}, {1.0, -1.0}), TensorD({2}, {1.0, 0.0}), TensorD({2}, {0.0, 0.0}));
  EXPECT_NEAR(p.item(), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(p.item(), 0.7311, 1e-4);
  EXPECT_THROW(compare(Tensor({2}, {1, 1}), v, v), Error);
}

TEST(Compare, SymmetricExactly) {
  Rng rng(4);
  std::normal_distribution<float> n(0.0f, 2.0f);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> a(16), b(16), w(16);
    for (std::size_t i = 0; i < 16; ++i) {
      a[i] = n(rng);
      b[i] = n(rng);
      w[i] = n(rng) * 0.1f;
    }
    const Tensor alpha({16}, w), va({16}, a), vb({16}, b);
    ASSERT_EQ(compare(alpha, va, vb).item(), compare(alpha, vb, va).item());
  }
}

TEST(Bce, ClosedForms) {
  EXPECT_NEAR(bce_loss(TensorD::scalar(0.5), 1).item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(TensorD::scalar(1.0 - 1e-7), 1).item(), 1e-7, 1e-9);
  EXPECT_NEAR(bce_loss(TensorD::scalar(0.9), 0).item(), 2.302585, 1e-6);
  EXPECT_NEAR(bce_loss(TensorD::scalar(1.0), 1).item(), -std::log(1.0 - 1e-7), 1e-12);
  EXPECT_NEAR(bce_loss(TensorD::scalar(0.0), 1).item(), -std::log(1e-7), 1e-9);
  EXPECT_THROW(bce_loss(TensorD::scalar(0.5), 2), Error);
}

TEST(Bce, LogitFormAgreesWithProbabilityForm) {
  for (double z : {-8.0, -1.5, -0.01, 0.0, 0.7, 3.0, 12.0}) {
    for (int y : {0, 1}) {
      const double p = 1.0 / (1.0 + std::exp(-z));
      EXPECT_NEAR(bce_with_logits(TensorD::scalar(z), y).item(), bce_loss(TensorD::scalar(p), y).item(), 1e-9);
    }
  }
  // Far outside the clamp the logit form keeps a useful gradient.
  auto z = TensorD::scalar(-40.0).detach(true);
  bce_with_logits(z, 1).backward();
  EXPECT_NEAR(z.grad()[0], -1.0, 1e-12);
  EXPECT_NEAR(bce_with_logits(TensorD::scalar(-40.0), 1).item(), 40.0, 1e-9);
}

TEST(Architecture, DefaultsAndValidation) {
  ArchitectureConfig config;
  EXPECT_EQ(config.embedding_dim(), 64u);
  EXPECT_EQ(config.input_bins, 84u);
  EXPECT_EQ(config.input_frames, 130u);
  for (std::size_t i = 1; i < config.conv_layers.size(); ++i) {
    EXPECT_LE(config.conv_layers[i].filters, config.conv_layers[i - 1].filters);
  }
  EXPECT_NO_THROW(config.validate());
  ArchitectureConfig bad = config;
  bad.conv_layers.clear();
  EXPECT_THROW(bad.validate(), Error);
  bad = config;
  bad.fc_widths.clear();
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Embed, ShapeAndInferenceDeterminism) {
  const auto config = tiny_arch();
  const auto model = SiameseModel::create(config, 5);
  const auto x = random_input(config, 1, 3);
  const auto a = model.embed(x);
  const auto b = model.embed(x);
  EXPECT_EQ(a.shape(), (Shape{3, 4}));
  EXPECT_EQ(as_vector(a), as_vector(b));
  EXPECT_EQ(model.alpha().shape(), (Shape{4}));
  EXPECT_THROW(model.embed(Tensor({1, 1, 12, 15}, std::vector<float>(180, 0.5f))), Error);
}

TEST(Embed, SeededModelIsReproducibleOnSilence) {
  ArchitectureConfig config;
  const Tensor silence({1, 1, 84, 130}, std::vector<float>(84 * 130, 0.0f));
  const auto a = SiameseModel::create(config, 77).embed(silence);
  const auto b = SiameseModel::create(config, 77).embed(silence);
  EXPECT_EQ(a.shape(), (Shape{1, 64}));
  for (float v : a.values()) ASSERT_TRUE(std::isfinite(v));
  EXPECT_EQ(as_vector(a), as_vector(b));
}

TEST(Embed, TwinsShareOneParameterSet) {
  const auto config = tiny_arch();
  auto model = SiameseModel::create(config, 9);
  const auto xa = random_input(config, 1);
  const auto xb = random_input(config, 2);
  const auto va = as_vector(model.embed(xa));
  const auto vb = as_vector(model.embed(xb));
  // Perturb one first-layer weight: both twins' outputs move.
  model.parameters()[0].tensor.mutable_values()[0] += 0.5f;
  EXPECT_NE(as_vector(model.embed(xa)), va);
  EXPECT_NE(as_vector(model.embed(xb)), vb);

  // One gradient step on a pair touches a single set of tensors.
  const auto both = model.embed(Tensor({2, 1, 12, 16}, [&] {
    std::vector<float> v(xa.values().begin(), xa.values().end());
    v.insert(v.end(), xb.values().begin(), xb.values().end());
    return v;
  }()));
  bce_loss(compare(model.alpha(), select_row(both, 0), select_row(both, 1)), 1).backward();
  std::size_t with_grad = 0;
  for (const auto& p : model.parameters()) with_grad += p.tensor.has_grad();
  EXPECT_EQ(with_grad, model.parameters().size());
}

TEST(Embed, ParameterLayout) {
  const auto model = SiameseModel::create(tiny_arch(), 3);
  std::vector<std::string> names;
  for (const auto& p : model.parameters()) names.push_back(p.name);
  const std::vector<std::string> expected{"conv0.kernel", "conv0.bias", "conv1.kernel",
                                          "conv1.bias",   "fc0.weight", "fc0.bias",
                                          "fc1.weight",   "fc1.bias",   "alpha"};
  EXPECT_EQ(names, expected);
  for (const auto& p : model.parameters()) {
    const bool is_weight = p.name.ends_with("kernel") || p.name.ends_with("weight");
    EXPECT_EQ(p.decay, is_weight) << p.name;
    if (p.name.ends_with("bias")) {
      for (float v : p.tensor.values()) EXPECT_EQ(v, 0.0f);
    }
  }
  for (float a : model.alpha().values()) EXPECT_EQ(a, static_cast<float>(tiny_arch().alpha_init));
}

TEST(Embed, CloneIsIndependent) {
  auto model = SiameseModel::create(tiny_arch(), 3);
  auto copy = model.clone();
  copy.parameters()[0].tensor.mutable_values()[0] += 1.0f;
  EXPECT_NE(copy.parameters()[0].tensor.values()[0], model.parameters()[0].tensor.values()[0]);
}

TEST(Checkpoint, RoundTripRestoresModel) {
  coverdet::testing::TempDir dir("ckpt");
  const auto config = tiny_arch();
  const auto model = SiameseModel::create(config, 21);
  save_checkpoint(dir / "m.ckpt", model);
  const auto back = load_checkpoint(dir / "m.ckpt", config.input_frames, config.input_bins);
  EXPECT_EQ(back.config().conv_layers, config.conv_layers);
  EXPECT_EQ(back.config().fc_widths, config.fc_widths);
  const auto x = random_input(config, 4, 2);
  EXPECT_EQ(as_vector(back.embed(x)), as_vector(model.embed(x)));

  try {
    load_checkpoint(dir / "m.ckpt", 40, 12);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimMismatch);
  }
  auto bytes = read_file(dir / "m.ckpt");
  bytes[bytes.size() / 2] ^= 0x40;
  try {
    decode_checkpoint(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kChecksumMismatch);
  }
}

TEST(Checkpoint, AdamStateRoundTrip) {
  coverdet::testing::TempDir dir("adam");
  const auto model = SiameseModel::create(tiny_arch(), 1);
  AdamConfig config;
  config.l2_lambda = 0.005;
  auto state = make_adam_state(model.parameters(), config);
  state.step = 17;
  state.m[0][0] = 0.25f;
  state.v[1][0] = 0.125f;
  save_adam_state(dir / "m.adam", state);
  const auto back = load_adam_state(dir / "m.adam");
  EXPECT_EQ(back.step, 17u);
  EXPECT_EQ(back.config.l2_lambda, 0.005);
  EXPECT_EQ(back.m, state.m);
  EXPECT_EQ(back.v, state.v);
}

TEST(SpectrogramInput, ScalesDecibelsToUnitRange) {
  CqtSpectrogram spec;
  spec.n_bins = 2;
  spec.n_frames = 2;
  spec.data = {0.0f, -80.0f, -40.0f, -20.0f};
  const auto t = spectrogram_input<float>(spec);
  EXPECT_EQ(t.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(as_vector(t), (std::vector<float>{1.0f, 0.0f, 0.5f, 0.75f}));
}
