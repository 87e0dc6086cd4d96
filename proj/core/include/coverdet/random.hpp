#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace coverdet {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for a named stochastic stage, so that stages draw from isolated
/// streams: changing one stage never perturbs another.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage);

/// Seed for the i-th item of a stage (per-clique, per-pair, per-epoch...).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

}  // namespace coverdet
