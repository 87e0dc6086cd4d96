#include "coverdet/oracle/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "coverdet/ops.hpp"
#include "coverdet/random.hpp"
#include "coverdet/siamese.hpp"

namespace coverdet::oracle {
namespace {

TensorD random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = dist(rng);
  return TensorD(std::move(shape), std::move(values));
}

// Reduces an arbitrary output to a scalar with fixed random weights, so every
// output element contributes a distinct amount to the checked gradient.
TensorD weighted_sum(const TensorD& out, const TensorD& weights) {
  return sum(mul(out, weights));
}

double evaluate(const ScalarFn& fn, std::span<const TensorD> inputs) {
  return fn(inputs).item();
}

// A check that skipped most of its elements has not really checked anything.
bool verdict(const GradCheckResult& r) {
  return r.failed == 0 && r.checked > 0 && r.skipped * 10 <= r.checked + r.skipped;
}

}  // namespace

GradCheckResult check_gradients(const std::string& name, const ScalarFn& fn,
                                std::vector<TensorD> inputs, const GradCheckOptions& options) {
  GradCheckResult result;
  result.name = name;

  std::vector<TensorD> leaves;
  for (const auto& t : inputs) leaves.push_back(t.detach(true));
  fn(leaves).backward();

  std::vector<TensorD> probe;
  for (const auto& t : inputs) probe.push_back(t.detach(false));
  const double eps = options.epsilon;

  for (std::size_t i = 0; i < probe.size(); ++i) {
    const auto analytic = leaves[i].grad();
    auto values = probe[i].mutable_values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double a = analytic.empty() ? 0.0 : analytic[j];
      const double original = values[j];
      const double f0 = evaluate(fn, probe);
      values[j] = original + eps;
      const double f_plus = evaluate(fn, probe);
      values[j] = original - eps;
      const double f_minus = evaluate(fn, probe);
      values[j] = original;

      const double forward = (f_plus - f0) / eps;
      const double backward = (f0 - f_minus) / eps;
      const double central = (f_plus - f_minus) / (2.0 * eps);
      const double one_sided_scale =
          std::max({std::abs(forward), std::abs(backward), options.floor});
      if (std::abs(forward - backward) > 10.0 * options.tolerance * one_sided_scale &&
          std::abs(forward - backward) > 1e-6) {
        ++result.skipped;
        continue;
      }
      const double rel = std::abs(a - central) /
                         std::max({std::abs(a), std::abs(central), options.floor});
      result.max_rel_error = std::max(result.max_rel_error, rel);
      ++result.checked;
      if (rel >= options.tolerance) ++result.failed;
    }
  }
  result.passed = verdict(result);
  return result;
}

std::vector<GradCheckResult> run_gradcheck_suite(std::size_t instances, std::uint64_t seed) {
  std::vector<GradCheckResult> merged;
  auto record = [&](GradCheckResult r) {
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const auto& m) { return m.name == r.name; });
    if (it == merged.end()) {
      merged.push_back(std::move(r));
      return;
    }
    it->checked += r.checked;
    it->skipped += r.skipped;
    it->failed += r.failed;
    it->max_rel_error = std::max(it->max_rel_error, r.max_rel_error);
    it->passed = verdict(*it);
  };

  for (std::size_t instance = 0; instance < instances; ++instance) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(instance)));

    {
      const auto w = random_tensor({1, 1, 3, 3}, rng);
      record(check_gradients(
          "conv2d", [&](auto in) { return weighted_sum(conv2d(in[0], in[1], in[2]), w); },
          {random_tensor({1, 1, 4, 4}, rng), random_tensor({1, 1, 2, 2}, rng),
           random_tensor({1}, rng)}));
    }
    {
      const auto w = random_tensor({2, 3, 3, 5}, rng);
      record(check_gradients(
          "conv2d-multichannel",
          [&](auto in) { return weighted_sum(conv2d(in[0], in[1], in[2]), w); },
          {random_tensor({2, 2, 5, 6}, rng), random_tensor({3, 2, 3, 2}, rng),
           random_tensor({3}, rng)}));
    }
    {
      const auto w = random_tensor({1, 1, 3, 3}, rng);
      record(check_gradients("maxpool2", [&](auto in) { return weighted_sum(maxpool2(in[0]), w); },
                             {random_tensor({1, 1, 6, 6}, rng)}));
    }
    {
      const auto w = random_tensor({1, 2, 3, 4}, rng);
      record(check_gradients("maxpool2-odd", [&](auto in) { return weighted_sum(maxpool2(in[0]), w); },
                             {random_tensor({1, 2, 5, 7}, rng)}));
    }
    {
      const auto w = random_tensor({3, 5}, rng);
      record(check_gradients(
          "dense", [&](auto in) { return weighted_sum(dense(in[0], in[1], in[2]), w); },
          {random_tensor({3, 7}, rng), random_tensor({7, 5}, rng), random_tensor({5}, rng)}));
    }
    {
      const auto w = random_tensor({10}, rng);
      record(check_gradients("relu", [&](auto in) { return weighted_sum(relu(in[0]), w); },
                             {random_tensor({10}, rng)}));
      record(check_gradients("sigmoid", [&](auto in) { return weighted_sum(sigmoid(in[0]), w); },
                             {random_tensor({10}, rng, 3.0)}));
      const std::uint64_t mask_seed = rng();
      record(check_gradients(
          "dropout",
          [&](auto in) {
            Rng mask_rng(mask_seed);
            return weighted_sum(dropout(in[0], 0.5, true, mask_rng), w);
          },
          {random_tensor({10}, rng)}));
    }
    {
      const auto w = random_tensor({2, 3}, rng);
      record(check_gradients(
          "elementwise",
          [&](auto in) {
            const auto x = add(mul(in[0], in[1]), scale(square(sub(in[0], in[1])), 0.5));
            return add(weighted_sum(x, w), mean(reshape(in[1], Shape{6})));
          },
          {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}));
      record(check_gradients(
          "select_row-flatten",
          [&](auto in) { return sum(square(select_row(flatten(in[0]), 1))); },
          {random_tensor({2, 2, 3}, rng)}));
    }
    {
      const int label = static_cast<int>(instance % 2);
      record(check_gradients("compare", [&](auto in) { return compare(in[0], in[1], in[2]); },
                             {random_tensor({4}, rng), random_tensor({4}, rng),
                              random_tensor({4}, rng)}));
      record(check_gradients(
          "compare-bce",
          [&](auto in) { return bce_loss(compare(in[0], in[1], in[2]), label); },
          {random_tensor({4}, rng, 0.5), random_tensor({4}, rng), random_tensor({4}, rng)}));
      record(check_gradients(
          "compare-bce-logits",
          [&](auto in) { return bce_with_logits(compare_logit(in[0], in[1], in[2]), label); },
          {random_tensor({4}, rng), random_tensor({4}, rng), random_tensor({4}, rng)}));
    }
    {
      // Whole pipeline on a tiny twin network: 2 conv filters, d = 4.
      ArchitectureConfig config;
      config.conv_layers = {{2, 3, 3}};
      config.fc_widths = {6, 4};
      config.input_bins = 8;
      config.input_frames = 10;
      auto model = BasicSiameseModel<double>::create(config, rng());
      std::vector<std::string> names;
      std::vector<TensorD> params;
      for (const auto& p : model.parameters()) {
        names.push_back(p.name);
        params.push_back(p.name == "alpha" ? random_tensor(p.tensor.shape(), rng, 0.5)
                                           : p.tensor.detach());
      }
      const auto input = random_tensor({2, 1, 8, 10}, rng);
      const std::uint64_t dropout_seed = rng();
      const int label = static_cast<int>(instance % 2);
      record(check_gradients(
          "siamese-pipeline",
          [&](auto in) {
            std::vector<BasicParameter<double>> named;
            for (std::size_t i = 0; i < in.size(); ++i) named.push_back({names[i], in[i], true});
            const auto twin = BasicSiameseModel<double>::from_parameters(config, std::move(named));
            Rng drop(dropout_seed);
            const auto emb = twin.embed(input, {true, 0.5, &drop});
            const auto va = select_row(emb, 0);
            const auto vb = select_row(emb, 1);
            return add(bce_loss(compare(twin.alpha(), va, vb), label),
                       bce_with_logits(compare_logit(twin.alpha(), va, vb), label));
          },
          params));
    }
  }
  return merged;
}

}  // namespace coverdet::oracle
