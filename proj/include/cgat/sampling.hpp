#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cgat/mesh_process.hpp"

namespace cgat {

struct SplitFractions {
  double train = 0.80;
  double val = 0.05;
  double test = 0.15;
};

/// Per-class shuffled assignment with largest-remainder rounding of the
/// fractions; every class keeps at least one training sample. Labels must
/// cover 0..max without gaps (EmptyClass otherwise).
std::vector<Split> stratified_split(std::span<const int> labels, std::uint64_t seed,
                                    SplitFractions fractions = {});

/// One epoch of class-balanced minibatches: ceil(n / batch_size) batches of
/// indices into `labels`, drawn with replacement with per-sample weight
/// proportional to 1 / class frequency. Deterministic in (seed, epoch).
std::vector<std::vector<std::size_t>> balanced_batches(std::span<const int> labels, std::size_t batch_size,
                                                       std::uint64_t seed, std::uint64_t epoch);

/// Mixes several values into one 64-bit seed (splitmix64 chain).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> values);

}  // namespace cgat
