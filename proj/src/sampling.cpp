#include <algorithm>
#include <cmath>
#include <random>

#include "cgat/error.hpp"
#include "cgat/sampling.hpp"

namespace cgat {

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> values) {
  std::uint64_t state = 0x9e3779b97f4a7c15ull;
  for (auto v : values) {
    state ^= v + 0x9e3779b97f4a7c15ull + (state << 6) + (state >> 2);
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    state = z ^ (z >> 31);
  }
  return state;
}

std::vector<Split> stratified_split(std::span<const int> labels, std::uint64_t seed, SplitFractions fractions) {
  if (labels.empty()) fail(ErrorCode::empty_class, "no samples to split");
  const double total = fractions.train + fractions.val + fractions.test;
  if (!(fractions.train > 0.0) || fractions.val < 0.0 || fractions.test < 0.0 || !(total > 0.0)) {
    fail(ErrorCode::invalid_config, "split fractions must be non-negative with a positive train share");
  }
  const int max_label = *std::max_element(labels.begin(), labels.end());
  if (*std::min_element(labels.begin(), labels.end()) < 0) fail(ErrorCode::label_out_of_range, "negative label");
  std::vector<std::vector<std::size_t>> members(max_label + 1);
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);

  std::vector<Split> out(labels.size(), Split::none);
  const double share[3] = {fractions.train / total, fractions.val / total, fractions.test / total};
  for (int c = 0; c <= max_label; ++c) {
    auto& idx = members[c];
    if (idx.empty()) fail(ErrorCode::empty_class, "class " + std::to_string(c) + " has no samples");
    std::mt19937_64 rng(mix_seed({seed, static_cast<std::uint64_t>(c)}));
    std::shuffle(idx.begin(), idx.end(), rng);

    const double n = static_cast<double>(idx.size());
    std::size_t count[3];
    double remainder[3];
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double ideal = n * share[s];
      count[s] = static_cast<std::size_t>(std::floor(ideal));
      remainder[s] = ideal - static_cast<double>(count[s]);
      assigned += count[s];
    }
    while (assigned < idx.size()) {
      int best = 0;
      for (int s = 1; s < 3; ++s) {
        if (remainder[s] > remainder[best]) best = s;
      }
      ++count[best];
      remainder[best] = -1.0;
      ++assigned;
    }
    if (count[0] == 0) {
      const int donor = count[2] >= count[1] ? 2 : 1;
      --count[donor];
      ++count[0];
    }
    std::size_t pos = 0;
    const Split kinds[3] = {Split::train, Split::val, Split::test};
    for (int s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < count[s]; ++k) out[idx[pos++]] = kinds[s];
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> balanced_batches(std::span<const int> labels, std::size_t batch_size,
                                                       std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) fail(ErrorCode::invalid_config, "batch size must be positive");
  if (labels.empty()) return {};
  std::vector<std::size_t> frequency;
  for (int label : labels) {
    if (label < 0) fail(ErrorCode::label_out_of_range, "negative label");
    if (static_cast<std::size_t>(label) >= frequency.size()) frequency.resize(label + 1, 0);
    ++frequency[label];
  }
  std::vector<double> weights;
  weights.reserve(labels.size());
  for (int label : labels) weights.push_back(1.0 / static_cast<double>(frequency[label]));
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::mt19937_64 rng(mix_seed({seed, epoch, 0xba7c4ull}));
  const std::size_t batches = (labels.size() + batch_size - 1) / batch_size;
  std::vector<std::vector<std::size_t>> out(batches);
  for (auto& b : out) {
    b.reserve(batch_size);
    for (std::size_t k = 0; k < batch_size; ++k) b.push_back(pick(rng));
  }
  return out;
}

}  // namespace cgat
