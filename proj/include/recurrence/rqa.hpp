#pragma once

// Recurrence-based invariants: recurrence rate, diagonal line statistics,
// the K2 entropy from diagonal length decay, and correlation sums for D2.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "recurrence/core.hpp"
#include "recurrence/parallel.hpp"
#include "recurrence/recmat.hpp"
#include "recurrence/systems.hpp"

namespace recurrence {

/// Off-diagonal density sum_{i != j} R[i][j] / (N (N - 1)).
inline double recurrence_rate(const RecurrenceMatrix& r) {
  const std::size_t n = r.size();
  if (n < 2) throw InputError("recurrence rate needs at least two points");
  return static_cast<double>(r.off_diagonal_count()) / (static_cast<double>(n) * static_cast<double>(n - 1));
}

struct DiagonalHistogram {
  /// length -> number of maximal segments of exactly that length, over both
  /// triangles (the line of identity excluded).
  std::map<std::size_t, std::size_t> counts;
  double epsilon = 0.0;
  std::size_t n = 0;

  std::size_t segments() const {
    std::size_t s = 0;
    for (const auto& [len, c] : counts) s += c;
    return s;
  }
};

inline DiagonalHistogram diagonal_histogram(const RecurrenceMatrix& r, std::size_t lmin = 1) {
  if (lmin == 0) throw InputError("minimum line length must be positive");
  const std::size_t n = r.size();
  DiagonalHistogram h{{}, r.epsilon(), n};
  if (n < 2) return h;

  // Upper triangle only; symmetry doubles every segment.
  const std::size_t diagonals = n - 1;
  std::vector<std::map<std::size_t, std::size_t>> partial(max_threads());
  std::atomic<std::size_t> slot{0};
  parallel_for(diagonals, [&](std::size_t begin, std::size_t end) {
    auto& local = partial[slot.fetch_add(1)];
    for (std::size_t k = begin + 1; k <= end; ++k) {
      std::size_t run = 0;
      for (std::size_t i = 0; i + k < n; ++i) {
        if (r(i, i + k)) {
          ++run;
        } else if (run) {
          if (run >= lmin) local[run] += 2;
          run = 0;
        }
      }
      if (run >= lmin) local[run] += 2;
    }
  });
  for (const auto& local : partial)
    for (const auto& [len, c] : local) h.counts[len] += c;
  return h;
}

struct LengthRange {
  std::size_t lo = 2;
  std::size_t hi = 12;
};

struct K2Estimate {
  /// Slope of -ln P(length >= l) against l * dt.
  double value = 0.0;
  /// RMS residual of the straight-line fit.
  double residual = 0.0;
  std::size_t segments = 0;
};

inline constexpr std::size_t kMinK2Segments = 100;

namespace detail {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double e = y[k] - (f.intercept + f.slope * x[k]);
    ss += e * e;
  }
  f.residual = std::sqrt(ss / n);
  return f;
}

}  // namespace detail

/// K2 from the decay of the cumulative diagonal length distribution.
inline K2Estimate estimate_k2(const DiagonalHistogram& h, LengthRange range, double dt = 1.0) {
  if (range.lo == 0 || range.hi <= range.lo) throw InputError("length range must satisfy 1 <= lo < hi");
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  const std::size_t total = h.segments();
  std::size_t in_range = 0;
  for (const auto& [len, c] : h.counts)
    if (len >= range.lo) in_range += c;
  if (in_range < kMinK2Segments) {
    throw InsufficientDataError("only " + std::to_string(in_range) + " diagonal segments of length >= " +
                                std::to_string(range.lo) + "; need " + std::to_string(kMinK2Segments));
  }
  std::vector<double> x, y;
  std::vector<std::size_t> deficient;
  for (std::size_t l = range.lo; l <= range.hi; ++l) {
    std::size_t at_least = 0;
    for (auto it = h.counts.lower_bound(l); it != h.counts.end(); ++it) at_least += it->second;
    if (at_least == 0) {
      deficient.push_back(l);
      continue;
    }
    x.push_back(static_cast<double>(l) * dt);
    y.push_back(-std::log(static_cast<double>(at_least) / static_cast<double>(total)));
  }
  if (!deficient.empty()) {
    std::string lens;
    for (auto l : deficient) lens += (lens.empty() ? "" : ",") + std::to_string(l);
    throw InsufficientDataError("no diagonal segments of length >= " + lens);
  }
  const auto fit = detail::least_squares(x, y);
  return {fit.slope, fit.residual, in_range};
}

inline K2Estimate estimate_k2(const RecurrenceMatrix& r, LengthRange range, double dt = 1.0) {
  return estimate_k2(diagonal_histogram(r, 1), range, dt);
}

inline K2Estimate estimate_k2(const Trajectory& traj, double epsilon, Metric metric = Metric::euclidean,
                              LengthRange range = {}) {
  return estimate_k2(build_matrix(traj, epsilon, metric), range, traj.dt());
}

// ---------------------------------------------------------------------------
// Correlation sum
// ---------------------------------------------------------------------------

struct CorrelationPoint {
  double epsilon = 0.0;
  double sum = 0.0;
};

/// C(eps) = fraction of distinct pairs with d < eps, for each eps in the
/// ascending list. One pass over all pairs serves every threshold.
inline std::vector<CorrelationPoint> correlation_sum(const Trajectory& traj, const std::vector<double>& epsilons,
                                                     Metric metric = Metric::euclidean) {
  const std::size_t n = traj.size();
  if (n < 2) throw InputError("correlation sum needs at least two points");
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    if (!(epsilons[k] > 0.0)) throw InputError("thresholds must be positive");
    if (k && epsilons[k] < epsilons[k - 1]) throw InputError("thresholds must be ascending");
  }
  const std::size_t m = epsilons.size();
  std::vector<std::vector<std::uint64_t>> partial(max_threads(), std::vector<std::uint64_t>(m + 1, 0));
  std::atomic<std::size_t> slot{0};
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    auto& local = partial[slot.fetch_add(1)];
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = traj.point(i);
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = detail::distance(p, traj.point(j), metric);
        // first threshold strictly greater than d
        ++local[static_cast<std::size_t>(std::upper_bound(epsilons.begin(), epsilons.end(), d) - epsilons.begin())];
      }
    }
  });
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  std::vector<CorrelationPoint> out(m);
  std::uint64_t running = 0;
  for (std::size_t k = 0; k < m; ++k) {
    for (const auto& local : partial) running += local[k];
    out[k] = {epsilons[k], static_cast<double>(running) / pairs};
  }
  return out;
}

/// Logarithmically spaced thresholds in [lo, hi].
inline std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi > lo) || count < 2) throw InputError("need 0 < lo < hi and at least two points");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k)
    out[k] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * static_cast<double>(k) / static_cast<double>(count - 1));
  return out;
}

struct D2Estimate {
  double slope = 0.0;
  double residual = 0.0;
  std::size_t points = 0;
};

/// Log-log slope of C(eps) over thresholds in [lo, hi] with C > 0.
inline D2Estimate fit_d2(const std::vector<CorrelationPoint>& curve, double lo, double hi) {
  std::vector<double> x, y;
  for (const auto& p : curve) {
    if (p.epsilon >= lo && p.epsilon <= hi && p.sum > 0.0) {
      x.push_back(std::log(p.epsilon));
      y.push_back(std::log(p.sum));
    }
  }
  if (x.size() < 2) throw InsufficientDataError("need at least two positive correlation-sum points in the fit range");
  const auto fit = detail::least_squares(x, y);
  return {fit.slope, fit.residual, x.size()};
}

inline std::string format_histogram_csv(const DiagonalHistogram& h) {
  std::string out = "# length,count\n";
  for (const auto& [len, c] : h.counts) out += std::to_string(len) + "," + std::to_string(c) + "\n";
  return out;
}

inline std::string format_correlation_csv(const std::vector<CorrelationPoint>& curve) {
  std::string out = "# epsilon,correlation_sum\n";
  for (const auto& p : curve) {
    detail::append_double(out, p.epsilon);
    out += ',';
    detail::append_double(out, p.sum);
    out += '\n';
  }
  return out;
}

}  // namespace recurrence
