#pragma once

// Pairing bags into contamination models and merging small bags into big ones.
//
// A pair (b+, b-) with observed proportions g+ >= g- is a mutual contamination
// model with kappa = (1 - g+, g-), so that 1 - kappa+ - kappa- = g+ - g-.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include "llp/bags.hpp"
#include "llp/common.hpp"
#include "llp/loss.hpp"

namespace llp {

// Pairs whose gap is below this get zero weight and are left out of training.
inline constexpr double kGapFloor = 1e-6;

// Largest instance count solved exactly by the subset program.
inline constexpr std::size_t kExactMatchingLimit = 16;

template <std::ranges::input_range R>
double harmonic_mean(const R& values) {
  double inv = 0.0;
  std::size_t m = 0;
  for (double v : values) {
    if (!(v > 0.0)) throw usage_error("harmonic mean needs positive values");
    inv += 1.0 / v;
    ++m;
  }
  if (m == 0) throw usage_error("harmonic mean of an empty list");
  return static_cast<double>(m) / inv;
}

inline double harmonic_mean(std::initializer_list<double> values) {
  return harmonic_mean(std::vector<double>(values));
}

// What the pairing layer needs to know about a bag.
struct BagSummary {
  double lp = 0.0;
  std::size_t size = 1;
};

inline std::vector<BagSummary> summarize(std::span<const Bag> bags) {
  std::vector<BagSummary> out;
  out.reserve(bags.size());
  for (const auto& b : bags) out.push_back({b.empirical_lp, b.size()});
  return out;
}

struct BagPair {
  std::size_t plus = 0;   // index of the bag with the larger proportion
  std::size_t minus = 0;
  double plus_lp = 0.0;
  double minus_lp = 0.0;
  std::size_t plus_size = 1;
  std::size_t minus_size = 1;

  double gap() const { return plus_lp - minus_lp; }
  Contamination kappa() const { return {1.0 - plus_lp, minus_lp}; }
  double nbar() const {
    return 2.0 / (1.0 / static_cast<double>(plus_size) + 1.0 / static_cast<double>(minus_size));
  }
  // Contribution HM(n+, n-) * gap^2 to the matching objective.
  double objective() const { return nbar() * gap() * gap(); }
};

// Orients bags i and j so that plus holds the larger proportion; ties put the
// lower index on the plus side.
inline BagPair make_pair(std::span<const BagSummary> bags, std::size_t i, std::size_t j) {
  if (j < i) std::swap(i, j);
  const bool i_plus = bags[i].lp >= bags[j].lp;
  const std::size_t p = i_plus ? i : j;
  const std::size_t m = i_plus ? j : i;
  return {p, m, bags[p].lp, bags[m].lp, bags[p].size, bags[m].size};
}

inline double matching_weight(const BagSummary& a, const BagSummary& b) {
  const double hm = 2.0 / (1.0 / static_cast<double>(a.size) + 1.0 / static_cast<double>(b.size));
  const double d = a.lp - b.lp;
  return hm * d * d;
}

enum class PairingMethod { sorted, optimal };

struct Pairing {
  std::vector<BagPair> pairs;
  double objective = 0.0;
  // Whether the objective is certified maximal among all perfect matchings.
  bool exact = true;
  std::vector<std::string> warnings;
};

namespace detail {

inline void check_even(std::size_t count) {
  if (count < 2 || count % 2 != 0)
    throw usage_error("pairing needs an even number of bags (got " + std::to_string(count) + ")");
}

inline Pairing finish(std::span<const BagSummary> bags, const std::vector<std::size_t>& mate, bool exact) {
  Pairing out;
  out.exact = exact;
  for (std::size_t i = 0; i < mate.size(); ++i) {
    if (i < mate[i]) out.pairs.push_back(make_pair(bags, i, mate[i]));
  }
  std::sort(out.pairs.begin(), out.pairs.end(), [](const BagPair& a, const BagPair& b) {
    return std::min(a.plus, a.minus) < std::min(b.plus, b.minus);
  });
  for (const auto& p : out.pairs) out.objective += p.objective();
  return out;
}

// Exact maximum-weight perfect matching by dynamic programming over subsets:
// best[mask] pairs the lowest set bit of mask with every other set bit.
inline std::vector<std::size_t> subset_matching(std::span<const BagSummary> bags) {
  const std::size_t n = bags.size();
  const std::uint32_t full = (n == 32) ? 0xffffffffu : ((1u << n) - 1u);
  std::vector<double> best(std::size_t{full} + 1, -1.0);
  std::vector<std::uint8_t> choice(std::size_t{full} + 1, 0);
  best[0] = 0.0;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    if (std::popcount(mask) % 2 != 0) continue;
    const int i = std::countr_zero(mask);
    const std::uint32_t rest = mask & ~(1u << i);
    for (std::uint32_t r = rest; r != 0; r &= r - 1) {
      const int j = std::countr_zero(r);
      const std::uint32_t sub = rest & ~(1u << j);
      const double v = best[sub] + matching_weight(bags[i], bags[j]);
      if (v > best[mask]) {
        best[mask] = v;
        choice[mask] = static_cast<std::uint8_t>(j);
      }
    }
  }
  std::vector<std::size_t> mate(n);
  for (std::uint32_t mask = full; mask != 0;) {
    const int i = std::countr_zero(mask);
    const int j = choice[mask];
    mate[i] = j;
    mate[j] = i;
    mask &= ~((1u << i) | (1u << j));
  }
  return mate;
}

inline std::vector<std::size_t> sorted_matching(std::span<const BagSummary> bags) {
  std::vector<std::size_t> order(bags.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return bags[a].lp < bags[b].lp; });
  std::vector<std::size_t> mate(bags.size());
  for (std::size_t r = 0, s = bags.size() - 1; r < s; ++r, --s) {
    mate[order[r]] = order[s];
    mate[order[s]] = order[r];
  }
  return mate;
}

// Improve a matching by exchanging partners between two pairs until no
// exchange increases the objective.
inline void two_swap_search(std::span<const BagSummary> bags, std::vector<std::size_t>& mate) {
  const auto w = [&](std::size_t a, std::size_t b) { return matching_weight(bags[a], bags[b]); };
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t a = 0; a < mate.size(); ++a) {
      for (std::size_t c = a + 1; c < mate.size(); ++c) {
        const std::size_t b = mate[a];
        const std::size_t d = mate[c];
        if (c == b || a > b || c > d) continue;
        const double current = w(a, b) + w(c, d);
        const double alt1 = w(a, c) + w(b, d);
        const double alt2 = w(a, d) + w(b, c);
        const double eps = 1e-14 * std::max(1.0, current);
        if (alt1 > current + eps && alt1 >= alt2) {
          mate[a] = c; mate[c] = a; mate[b] = d; mate[d] = b;
          improved = true;
        } else if (alt2 > current + eps) {
          mate[a] = d; mate[d] = a; mate[b] = c; mate[c] = b;
          improved = true;
        }
      }
    }
  }
}

}  // namespace detail

// Maximizes sum HM(n_i, n_j) (g_i - g_j)^2 over perfect matchings. Exact up to
// kExactMatchingLimit bags; larger inputs start from the sorted pairing and run
// a pairwise-exchange local search.
inline Pairing pair_optimal(std::span<const BagSummary> bags) {
  detail::check_even(bags.size());
  if (bags.size() <= kExactMatchingLimit) return detail::finish(bags, detail::subset_matching(bags), true);
  auto mate = detail::sorted_matching(bags);
  const bool equal_sizes = std::all_of(bags.begin(), bags.end(),
                                       [&](const BagSummary& b) { return b.size == bags.front().size; });
  if (!equal_sizes) detail::two_swap_search(bags, mate);
  // With equal sizes the sorted pairing is already optimal.
  return detail::finish(bags, mate, equal_sizes);
}

// Largest proportion with the smallest, second largest with second smallest,
// and so on. Optimal when all bags have the same size; with unequal sizes this
// warns and defers to pair_optimal.
inline Pairing pair_sorted(std::span<const BagSummary> bags) {
  detail::check_even(bags.size());
  const bool equal_sizes = std::all_of(bags.begin(), bags.end(),
                                       [&](const BagSummary& b) { return b.size == bags.front().size; });
  if (!equal_sizes) {
    auto out = pair_optimal(bags);
    out.warnings.push_back("bag sizes differ; sorted pairing is not optimal, used pair_optimal");
    return out;
  }
  return detail::finish(bags, detail::sorted_matching(bags), true);
}

inline Pairing pair_bags(std::span<const BagSummary> bags, PairingMethod method) {
  return method == PairingMethod::sorted ? pair_sorted(bags) : pair_optimal(bags);
}

// Objective of every perfect matching, by recursion. For testing only; the
// count is (2N-1)!!.
inline double brute_force_matching_objective(std::span<const BagSummary> bags) {
  detail::check_even(bags.size());
  std::vector<bool> used(bags.size(), false);
  double best = -std::numeric_limits<double>::infinity();
  auto rec = [&](auto&& self, double acc) -> void {
    std::size_t i = 0;
    while (i < used.size() && used[i]) ++i;
    if (i == used.size()) {
      best = std::max(best, acc);
      return;
    }
    used[i] = true;
    for (std::size_t j = i + 1; j < used.size(); ++j) {
      if (used[j]) continue;
      used[j] = true;
      self(self, acc + matching_weight(bags[i], bags[j]));
      used[j] = false;
    }
    used[i] = false;
  };
  rec(rec, 0.0);
  return best;
}

// ---------------------------------------------------------------------------
// Weights

enum class WeightMode {
  bag,       // w_i ∝ gap_i^2
  instance,  // w_i ∝ nbar_i gap_i^2
};

// Normalized weights proportional to scale_i * gap_i^2; gaps at or under
// kGapFloor get exactly zero.
inline std::vector<double> optimal_weights(std::span<const double> gaps, std::span<const double> scales) {
  if (gaps.size() != scales.size()) throw usage_error("optimal_weights: gap/scale length mismatch");
  std::vector<double> w(gaps.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (!(gaps[i] > kGapFloor)) continue;
    w[i] = scales[i] * gaps[i] * gaps[i];
    total += w[i];
  }
  if (!(total > 0.0)) throw compute_error("all pairs degenerate: every LP gap is below the floor");
  for (auto& v : w) v /= total;
  return w;
}

inline std::vector<double> optimal_weights(std::span<const BagPair> pairs, WeightMode mode = WeightMode::bag) {
  std::vector<double> gaps, scales;
  for (const auto& p : pairs) {
    gaps.push_back(p.gap());
    scales.push_back(mode == WeightMode::instance ? p.nbar() : 1.0);
  }
  return optimal_weights(gaps, scales);
}

// ---------------------------------------------------------------------------
// K-merging schemes

enum class MergeScheme { blockwise_pairwise, blockwise_max };

struct MergedPair {
  std::vector<std::size_t> plus_indices;   // I+, ascending
  std::vector<std::size_t> minus_indices;  // I-, ascending
  double plus_lp = 0.0;                    // mean observed proportion over I+
  double minus_lp = 0.0;
  std::size_t plus_size = 0;               // instances in the merged plus bag
  std::size_t minus_size = 0;

  double gap() const { return plus_lp - minus_lp; }
  Contamination kappa() const { return {1.0 - plus_lp, minus_lp}; }
  double nbar() const {
    return 2.0 / (1.0 / static_cast<double>(plus_size) + 1.0 / static_cast<double>(minus_size));
  }
};

namespace detail {

inline void check_merge(std::span<const BagSummary> bags, std::size_t k) {
  if (k == 0) throw usage_error("merge: K must be positive");
  if (bags.empty() || bags.size() % (2 * k) != 0)
    throw usage_error("merge: bag count " + std::to_string(bags.size()) + " is not divisible by 2K = " +
                      std::to_string(2 * k));
  for (const auto& b : bags)
    if (b.size != bags.front().size) throw usage_error("merge: all small bags must have the same size");
}

inline MergedPair assemble_merge(std::span<const BagSummary> bags, std::vector<std::size_t> plus,
                                 std::vector<std::size_t> minus) {
  std::sort(plus.begin(), plus.end());
  std::sort(minus.begin(), minus.end());
  MergedPair m;
  double sp = 0.0, sm = 0.0;
  for (auto i : plus) {
    sp += bags[i].lp;
    m.plus_size += bags[i].size;
  }
  for (auto i : minus) {
    sm += bags[i].lp;
    m.minus_size += bags[i].size;
  }
  m.plus_lp = sp / static_cast<double>(plus.size());
  m.minus_lp = sm / static_cast<double>(minus.size());
  m.plus_indices = std::move(plus);
  m.minus_indices = std::move(minus);
  return m;
}

}  // namespace detail

// Blockwise-pairwise: within each block of 2K consecutive bags, consecutive
// non-overlapping pairs (j, j+1) send the larger proportion to I+ (the first
// of the two on ties).
inline std::vector<MergedPair> merge_bp(std::span<const BagSummary> bags, std::size_t k) {
  detail::check_merge(bags, k);
  std::vector<MergedPair> out;
  for (std::size_t start = 0; start < bags.size(); start += 2 * k) {
    std::vector<std::size_t> plus, minus;
    for (std::size_t j = start; j < start + 2 * k; j += 2) {
      if (bags[j].lp >= bags[j + 1].lp) {
        plus.push_back(j);
        minus.push_back(j + 1);
      } else {
        plus.push_back(j + 1);
        minus.push_back(j);
      }
    }
    out.push_back(detail::assemble_merge(bags, std::move(plus), std::move(minus)));
  }
  return out;
}

// Blockwise-max: within each block of 2K bags the K largest proportions form
// I+ (lower index first on ties).
inline std::vector<MergedPair> merge_bm(std::span<const BagSummary> bags, std::size_t k) {
  detail::check_merge(bags, k);
  std::vector<MergedPair> out;
  for (std::size_t start = 0; start < bags.size(); start += 2 * k) {
    std::vector<std::size_t> order(2 * k);
    std::iota(order.begin(), order.end(), start);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return bags[a].lp > bags[b].lp; });
    std::vector<std::size_t> plus(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<std::size_t> minus(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    out.push_back(detail::assemble_merge(bags, std::move(plus), std::move(minus)));
  }
  return out;
}

inline std::vector<MergedPair> merge(std::span<const BagSummary> bags, std::size_t k, MergeScheme scheme) {
  return scheme == MergeScheme::blockwise_max ? merge_bm(bags, k) : merge_bp(bags, k);
}

// Scheme A dominates scheme B on this input when every merged gap under A is at
// least the gap under B. `tolerance` absorbs rounding between means of
// different subsets with equal exact sums.
inline bool check_dominates(std::span<const MergedPair> a, std::span<const MergedPair> b,
                            double tolerance = 1e-12) {
  if (a.size() != b.size()) throw usage_error("check_dominates: merged outputs differ in length");
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto block_a = a[i].plus_indices;
    block_a.insert(block_a.end(), a[i].minus_indices.begin(), a[i].minus_indices.end());
    auto block_b = b[i].plus_indices;
    block_b.insert(block_b.end(), b[i].minus_indices.begin(), b[i].minus_indices.end());
    std::sort(block_a.begin(), block_a.end());
    std::sort(block_b.begin(), block_b.end());
    if (block_a != block_b) throw usage_error("check_dominates: block structure differs at pair " + std::to_string(i));
  }
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].gap() < b[i].gap() - tolerance) return false;
  return true;
}

}  // namespace llp
