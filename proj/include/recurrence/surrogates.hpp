#pragma once

// Twin surrogates and the correlation-of-recurrences synchronization index.

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "recurrence/core.hpp"
#include "recurrence/separation.hpp"

namespace recurrence {

struct SurrogateSpec {
  std::size_t count = 1;
  std::uint64_t seed = 0;
  /// Below this many non-trivial twin classes the result carries a warning.
  std::size_t min_twin_classes = 1;
};

struct SurrogateSet {
  std::vector<Trajectory> surrogates;
  /// Classes with at least two members.
  std::size_t twin_classes = 0;
  bool low_twin_warning = false;
};

/// Follows the original dynamics index by index; at a point with twins the
/// walk continues from the successor of a uniformly chosen class member.
/// Stepping past the last sample continues from a uniformly chosen member
/// of the first sample's twin class. Surrogate k is seeded by (seed, k).
inline SurrogateSet twin_surrogates(const Trajectory& traj, const RecurrenceMatrix& r, const SurrogateSpec& spec) {
  const std::size_t n = traj.size();
  if (r.size() != n) throw InputError("matrix and trajectory sizes differ");
  if (n < 2) throw InputError("surrogates need at least two points");
  if (spec.count == 0) throw InputError("surrogate count must be positive");

  const auto part = twin_partition(r);
  SurrogateSet out;
  for (const auto& cls : part.classes)
    if (cls.size() > 1) ++out.twin_classes;
  out.low_twin_warning = out.twin_classes < spec.min_twin_classes;

  for (std::size_t k = 0; k < spec.count; ++k) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    std::mt19937_64 rng(seq);
    auto pick = [&](std::size_t idx) {
      const auto& cls = part.classes[part.class_of[idx]];
      return cls.size() > 1 ? cls[rng() % cls.size()] : idx;
    };
    std::vector<double> coords;
    coords.reserve(n * traj.dim());
    std::size_t idx = rng() % n;
    while (true) {
      const auto p = traj.point(idx);
      coords.insert(coords.end(), p.begin(), p.end());
      if (coords.size() == n * traj.dim()) break;
      std::size_t next = pick(idx) + 1;
      if (next >= n) next = pick(0);
      idx = next;
    }
    out.surrogates.emplace_back(traj.dim(), std::move(coords), traj.dt());
  }
  return out;
}

/// Pearson correlation of the off-diagonal bits of two recurrence matrices.
inline double sync_index(const RecurrenceMatrix& rx, const RecurrenceMatrix& ry) {
  if (rx.size() != ry.size()) {
    throw InputError("matrix sizes differ: " + std::to_string(rx.size()) + " vs " + std::to_string(ry.size()));
  }
  const std::size_t n = rx.size();
  if (n < 2) throw DegenerateInputError("sync index needs at least two points");
  const auto pairs = static_cast<__int128>(n) * static_cast<__int128>(n - 1);
  const auto nx = static_cast<__int128>(rx.off_diagonal_count());
  const auto ny = static_cast<__int128>(ry.off_diagonal_count());
  __int128 both = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = rx.row(i).words();
    const auto b = ry.row(i).words();
    for (std::size_t k = 0; k < a.size(); ++k) both += std::popcount(a[k] & b[k]);
  }
  both -= static_cast<__int128>(n);
  if (nx == 0 || nx == pairs || ny == 0 || ny == pairs) {
    throw DegenerateInputError("a recurrence matrix has constant off-diagonal bits");
  }
  const __int128 cov = pairs * both - nx * ny;
  const __int128 vx = nx * (pairs - nx);
  const __int128 vy = ny * (pairs - ny);
  if (cov == vx && vx == vy) return 1.0;
  return static_cast<double>(cov) / std::sqrt(static_cast<double>(vx) * static_cast<double>(vy));
}

}  // namespace recurrence
