#pragma once

// Recurrence matrix construction (direct and grid-accelerated), threshold
// calibration, the RQM1 binary format and PGM rendering.

#include <algorithm>
#include <atomic>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "recurrence/core.hpp"
#include "recurrence/parallel.hpp"

namespace recurrence {

/// Reference O(N^2) construction: R[i][j] = 1 iff d(x_i, x_j) < epsilon.
inline RecurrenceMatrix build_matrix_naive(const Trajectory& traj, double epsilon, Metric metric = Metric::euclidean) {
  RecurrenceMatrix r(traj.size(), epsilon, metric);
  const std::size_t n = traj.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (detail::distance(traj.point(i), traj.point(j), metric) < epsilon) r.set_unchecked(i, j);
  return r;
}

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform binning with cells of side >= epsilon in every coordinate. Any
/// pair within epsilon under the maximum norm (hence under every supported
/// norm) lies in the same or adjacent cells, so the 3^d neighborhood is a
/// superset filter; exact distances make the final decision.
class CellGrid {
 public:
  static constexpr std::size_t kMaxDim = 6;

  static bool applicable(const Trajectory& traj) { return traj.dim() <= kMaxDim && traj.size() >= 32; }

  CellGrid(const Trajectory& traj, double epsilon) : traj_(traj), dim_(traj.dim()) {
    origin_.assign(dim_, std::numeric_limits<double>::infinity());
    double range = 0.0;
    std::vector<double> hi(dim_, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const auto p = traj.point(i);
      for (std::size_t k = 0; k < dim_; ++k) {
        origin_[k] = std::min(origin_[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    }
    for (std::size_t k = 0; k < dim_; ++k) range = std::max(range, hi[k] - origin_[k]);
    // The margin absorbs rounding in the cell-index division; the cap keeps
    // indices well inside the range where that rounding stays below it.
    side_ = epsilon * (1.0 + 1e-6);
    if (range / side_ > 1e9) side_ = range / 1e9;

    keys_.resize(traj.size() * dim_);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const auto p = traj.point(i);
      for (std::size_t k = 0; k < dim_; ++k)
        keys_[i * dim_ + k] = static_cast<std::int64_t>(std::floor((p[k] - origin_[k]) / side_));
      cells_[hash(&keys_[i * dim_])].push_back(static_cast<std::uint32_t>(i));
    }

    std::size_t count = 1;
    for (std::size_t k = 0; k < dim_; ++k) count *= 3;
    offsets_.resize(count * dim_);
    for (std::size_t c = 0; c < count; ++c) {
      std::size_t rem = c;
      for (std::size_t k = 0; k < dim_; ++k) {
        offsets_[c * dim_ + k] = static_cast<std::int64_t>(rem % 3) - 1;
        rem /= 3;
      }
    }
  }

  /// Calls visit(j) for every point j in the 3^d cells around point i,
  /// each exactly once.
  template <typename Visit>
  void for_each_candidate(std::size_t i, Visit&& visit) const {
    std::array<std::int64_t, kMaxDim> target{};
    const std::int64_t* own = &keys_[i * dim_];
    const std::size_t count = offsets_.size() / dim_;
    for (std::size_t c = 0; c < count; ++c) {
      for (std::size_t k = 0; k < dim_; ++k) target[k] = own[k] + offsets_[c * dim_ + k];
      const auto it = cells_.find(hash(target.data()));
      if (it == cells_.end()) continue;
      for (std::uint32_t j : it->second) {
        if (std::equal(target.data(), target.data() + dim_, &keys_[j * dim_])) visit(std::size_t{j});
      }
    }
  }

 private:
  std::uint64_t hash(const std::int64_t* key) const {
    std::uint64_t h = 0x51ed270b27a4c1f3ULL;
    for (std::size_t k = 0; k < dim_; ++k) h = mix64(h ^ static_cast<std::uint64_t>(key[k]));
    return h;
  }

  const Trajectory& traj_;
  std::size_t dim_;
  double side_ = 1.0;
  std::vector<double> origin_;
  std::vector<std::int64_t> keys_;
  std::vector<std::int64_t> offsets_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

}  // namespace detail

/// R[i][j] = 1 iff d(x_i, x_j) < epsilon (strict, so points at distance
/// exactly epsilon are not recurrent). Grid-accelerated when the dimension
/// allows; always bit-identical to build_matrix_naive.
inline RecurrenceMatrix build_matrix(const Trajectory& traj, double epsilon, Metric metric = Metric::euclidean) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InputError("epsilon must be positive and finite");
  if (!detail::CellGrid::applicable(traj)) return build_matrix_naive(traj, epsilon, metric);

  const detail::CellGrid grid(traj, epsilon);
  RecurrenceMatrix r(traj.size(), epsilon, metric);
  parallel_for(traj.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = traj.point(i);
      grid.for_each_candidate(i, [&](std::size_t j) {
        if (detail::distance(p, traj.point(j), metric) < epsilon) r.set_unchecked(i, j);
      });
    }
  });
  return r;
}

/// Row i of the recurrence matrix, computed directly in O(N) without
/// materializing the matrix (for long series).
inline BitVector recurrence_row(const Trajectory& traj, std::size_t i, double epsilon, Metric metric = Metric::euclidean) {
  if (i >= traj.size()) throw InputError("reference index out of range");
  if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
  BitVector row(traj.size());
  const auto p = traj.point(i);
  for (std::size_t j = 0; j < traj.size(); ++j)
    if (detail::distance(p, traj.point(j), metric) < epsilon) row.set(j);
  return row;
}

/// Number of unordered pairs i < j with d(x_i, x_j) < epsilon.
inline std::uint64_t count_recurrent_pairs(const Trajectory& traj, double epsilon, Metric metric = Metric::euclidean) {
  const std::size_t n = traj.size();
  std::vector<std::uint64_t> partial(max_threads() + 1, 0);
  std::atomic<std::size_t> slot{0};
  auto count_rows = [&](auto&& candidates, std::size_t begin, std::size_t end) {
    std::uint64_t c = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = traj.point(i);
      candidates(i, [&](std::size_t j) {
        if (j > i && detail::distance(p, traj.point(j), metric) < epsilon) ++c;
      });
    }
    partial[slot.fetch_add(1)] += c;
  };
  if (detail::CellGrid::applicable(traj)) {
    const detail::CellGrid grid(traj, epsilon);
    parallel_for(n, [&](std::size_t b, std::size_t e) {
      count_rows([&](std::size_t i, auto&& visit) { grid.for_each_candidate(i, visit); }, b, e);
    });
  } else {
    parallel_for(n, [&](std::size_t b, std::size_t e) {
      count_rows(
          [&](std::size_t i, auto&& visit) {
            for (std::size_t j = i + 1; j < n; ++j) visit(j);
          },
          b, e);
    });
  }
  return std::accumulate(partial.begin(), partial.end(), std::uint64_t{0});
}

// ---------------------------------------------------------------------------
// Epsilon calibration
// ---------------------------------------------------------------------------

struct EpsilonCalibration {
  double target_rate = 0.0;
  double achieved_rate = 0.0;
  double epsilon = 0.0;
};

namespace detail {

inline bool all_points_identical(const Trajectory& traj) {
  const auto first = traj.point(0);
  for (std::size_t i = 1; i < traj.size(); ++i)
    if (!std::equal(first.begin(), first.end(), traj.point(i).begin())) return false;
  return true;
}

/// Picks epsilon from a sorted multiset of pairwise distances so that the
/// count of distances strictly below it is as close as possible to `want`.
/// Returns {epsilon, count}.
inline std::pair<double, std::size_t> epsilon_for_count(const std::vector<double>& sorted, std::size_t want) {
  const std::size_t total = sorted.size();
  want = std::clamp<std::size_t>(want, 1, total);
  const double pivot = sorted[want - 1];
  const auto below = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), pivot) - sorted.begin());
  const auto upto = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), pivot) - sorted.begin());

  double upper_eps;
  if (upto < total) {
    const double next = sorted[upto];
    upper_eps = pivot + (next - pivot) / 2;
    if (!(upper_eps > pivot)) upper_eps = next;
  } else {
    upper_eps = pivot > 0 ? pivot * (1.0 + 1e-9) : std::numeric_limits<double>::min();
  }
  const auto dist = [want](std::size_t c) { return c > want ? c - want : want - c; };
  if (pivot > 0.0 && dist(below) < dist(upto)) return {pivot, below};
  return {upper_eps, upto};
}

}  // namespace detail

/// Chooses epsilon so the off-diagonal recurrence rate is as close as
/// possible to `target_rate`. Exact over all pairs when there are at most
/// `max_pairs` of them; otherwise a seeded pair subsample gives a starting
/// bracket that is refined by bisection on the exact rate.
inline EpsilonCalibration calibrate_epsilon(const Trajectory& traj, double target_rate, Metric metric = Metric::euclidean,
                                            std::uint64_t seed = 0, std::size_t max_pairs = 2'000'000) {
  if (!(target_rate > 0.0 && target_rate <= 1.0)) throw InputError("target rate must lie in (0, 1]");
  const std::size_t n = traj.size();
  if (n < 2) throw InputError("calibration needs at least two points");
  if (detail::all_points_identical(traj)) {
    throw CalibrationError("all points are identical; the recurrence rate is 1 for every epsilon");
  }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);

  if (pairs <= static_cast<double>(max_pairs)) {
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(pairs));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) d.push_back(detail::distance(traj.point(i), traj.point(j), metric));
    std::sort(d.begin(), d.end());
    const auto want = static_cast<std::size_t>(std::llround(target_rate * pairs));
    const auto [eps, count] = detail::epsilon_for_count(d, want);
    return {target_rate, static_cast<double>(count) / pairs, eps};
  }

  std::mt19937_64 rng(seed);
  std::vector<double> sample;
  sample.reserve(max_pairs);
  while (sample.size() < max_pairs) {
    const std::size_t i = rng() % n;
    const std::size_t j = rng() % n;
    if (i != j) sample.push_back(detail::distance(traj.point(i), traj.point(j), metric));
  }
  std::sort(sample.begin(), sample.end());
  auto quantile = [&](double q) {
    const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(sample.size() - 1));
    return sample[k];
  };
  auto rate_at = [&](double eps) { return static_cast<double>(count_recurrent_pairs(traj, eps, metric)) / pairs; };

  EpsilonCalibration best{target_rate, 0.0, 0.0};
  double best_gap = std::numeric_limits<double>::infinity();
  auto consider = [&](double eps, double rate) {
    const double gap = std::abs(rate - target_rate);
    if (gap < best_gap) {
      best_gap = gap;
      best = {target_rate, rate, eps};
    }
  };

  const double tiny = std::numeric_limits<double>::min();
  double lo = std::max(quantile(target_rate * 0.8), tiny);
  double hi = std::max(quantile(std::min(1.0, target_rate * 1.2)), 2 * tiny);
  double rate_lo = rate_at(lo);
  double rate_hi = rate_at(hi);
  consider(lo, rate_lo);
  consider(hi, rate_hi);
  for (int k = 0; k < 60 && rate_lo > target_rate; ++k) {
    lo /= 2;
    rate_lo = rate_at(lo);
    consider(lo, rate_lo);
  }
  for (int k = 0; k < 60 && rate_hi < target_rate; ++k) {
    hi *= 2;
    rate_hi = rate_at(hi);
    consider(hi, rate_hi);
  }
  const double resolution = 0.5 / pairs;
  for (int it = 0; it < 40 && best_gap > resolution; ++it) {
    const double mid = lo + (hi - lo) / 2;
    if (!(mid > lo && mid < hi)) break;
    const double rate = rate_at(mid);
    consider(mid, rate);
    if (rate < target_rate) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// RQM1 binary format
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 4> kMatrixMagic{'R', 'Q', 'M', '1'};
inline constexpr std::size_t kMatrixHeaderBytes = 4 + 8 + 8 + 1;

/// Packed payload size: the n*n bits are stored contiguously, row-major.
inline constexpr std::size_t matrix_payload_bytes(std::size_t n) { return (n * n + 7) / 8; }

/// Header: magic "RQM1", u64 n, f64 epsilon, u8 metric id (all little-endian),
/// then n*n bits row-major, LSB-first within each byte.
inline std::string encode_matrix(const RecurrenceMatrix& r) {
  const std::size_t n = r.size();
  std::string out(kMatrixHeaderBytes + matrix_payload_bytes(n), '\0');
  std::memcpy(out.data(), kMatrixMagic.data(), 4);
  auto put_u64 = [&](std::size_t at, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out[at + b] = static_cast<char>((v >> (8 * b)) & 0xffu);
  };
  put_u64(4, n);
  put_u64(12, std::bit_cast<std::uint64_t>(r.epsilon()));
  out[20] = static_cast<char>(static_cast<std::uint8_t>(r.metric()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!r(i, j)) continue;
      const std::size_t t = i * n + j;
      out[kMatrixHeaderBytes + t / 8] = static_cast<char>(static_cast<unsigned char>(out[kMatrixHeaderBytes + t / 8]) |
                                                         (1u << (t % 8)));
    }
  }
  return out;
}

inline RecurrenceMatrix decode_matrix(std::string_view bytes) {
  if (bytes.size() < kMatrixHeaderBytes) throw FormatError("truncated header");
  if (!std::equal(kMatrixMagic.begin(), kMatrixMagic.end(), bytes.begin())) throw FormatError("bad magic");
  auto get_u64 = [&](std::size_t at) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= std::uint64_t{static_cast<unsigned char>(bytes[at + b])} << (8 * b);
    return v;
  };
  const std::uint64_t n = get_u64(4);
  const double eps = std::bit_cast<double>(get_u64(12));
  const auto metric_id = static_cast<std::uint8_t>(bytes[20]);
  if (n == 0 || n > (std::uint64_t{1} << 31)) throw FormatError("implausible matrix size " + std::to_string(n));
  if (!(eps > 0.0) || !std::isfinite(eps)) throw FormatError("epsilon must be positive and finite");
  if (metric_id > 2) throw FormatError("unknown metric id " + std::to_string(metric_id));
  const std::size_t expected = matrix_payload_bytes(n);
  const std::size_t have = bytes.size() - kMatrixHeaderBytes;
  if (have != expected) {
    throw FormatError("payload has " + std::to_string(have) + " bytes, n=" + std::to_string(n) + " requires " +
                      std::to_string(expected));
  }
  RecurrenceMatrix r(n, eps, static_cast<Metric>(metric_id));
  const auto payload = bytes.substr(kMatrixHeaderBytes);
  for (std::size_t t = 0; t < n * n; ++t)
    if ((static_cast<unsigned char>(payload[t / 8]) >> (t % 8)) & 1u) r.set_unchecked(t / n, t % n);
  if ((n * n) % 8 != 0 && (static_cast<unsigned char>(payload.back()) >> ((n * n) % 8)) != 0) {
    throw FormatError("non-zero padding bits");
  }
  try {
    r.validate();
  } catch (const InputError& e) {
    throw FormatError(e.what());
  }
  return r;
}

inline void save_matrix(const RecurrenceMatrix& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  const std::string bytes = encode_matrix(r);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline RecurrenceMatrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_matrix(bytes);
}

/// Binary P5 greymap: black (0) where R = 1, white (255) where R = 0.
inline std::string encode_pgm(const RecurrenceMatrix& r) {
  const std::size_t n = r.size();
  std::string out = "P5\n" + std::to_string(n) + " " + std::to_string(n) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + n * n, static_cast<char>(255));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (r(i, j)) out[header + i * n + j] = 0;
  return out;
}

inline void export_pgm(const RecurrenceMatrix& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  const std::string bytes = encode_pgm(r);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace recurrence
