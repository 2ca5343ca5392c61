#pragma once

// First-return and successive return times of an epsilon-ball around a
// reference point, with tests for the exponential law, independence of
// successive returns and Poisson counts.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "recurrence/core.hpp"

namespace recurrence {

struct ReturnTimeSample {
  std::size_t reference_index = 0;
  double epsilon = 0.0;
  std::vector<std::uint64_t> times;
};

/// Smallest n >= 1 with row[i + n] = 1, or nullopt if the orbit does not
/// come back inside the observed window.
inline std::optional<std::uint64_t> first_return_time(BitRowView row, std::size_t i) {
  if (i >= row.size()) throw InputError("reference index out of range");
  for (std::size_t j = i + 1; j < row.size(); ++j)
    if (row[j]) return j - i;
  return std::nullopt;
}

inline std::optional<std::uint64_t> first_return_time(const RecurrenceMatrix& r, std::size_t i) {
  if (i >= r.size()) throw InputError("reference index out of range");
  return first_return_time(r.row(i), i);
}

/// Offsets (relative to i) at which the orbit enters the ball: a run of
/// consecutive ones is a single visit starting at its first sample.
inline std::vector<std::size_t> visit_starts(BitRowView row, std::size_t i) {
  if (i >= row.size()) throw InputError("reference index out of range");
  std::vector<std::size_t> starts;
  bool inside = false;
  for (std::size_t j = i; j < row.size(); ++j) {
    const bool bit = row[j];
    if (bit && !inside) starts.push_back(j - i);
    inside = bit;
  }
  return starts;
}

/// Gaps between successive visit starts. Fewer than two visits give an empty sample.
inline ReturnTimeSample return_times(BitRowView row, std::size_t i, double epsilon = 0.0) {
  const auto starts = visit_starts(row, i);
  ReturnTimeSample s{i, epsilon, {}};
  for (std::size_t k = 1; k < starts.size(); ++k) s.times.push_back(starts[k] - starts[k - 1]);
  return s;
}

inline ReturnTimeSample return_times(const RecurrenceMatrix& r, std::size_t i) {
  if (i >= r.size()) throw InputError("reference index out of range");
  return return_times(r.row(i), i, r.epsilon());
}

inline std::string format_samples_csv(const ReturnTimeSample& s) {
  std::string out = "# reference_index=" + std::to_string(s.reference_index) + "\n";
  for (auto t : s.times) out += std::to_string(t) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Exponential law
// ---------------------------------------------------------------------------

/// Asymptotic Kolmogorov survival function P(K > lambda).
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  constexpr double pi = 3.14159265358979323846;
  if (lambda < 1.18) {
    double sum = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double odd = 2.0 * k - 1.0;
      sum += std::exp(-odd * odd * pi * pi / (8.0 * lambda * lambda));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct ExponentialTest {
  std::size_t n = 0;
  double mean = 0.0;
  double statistic = 0.0;
  double p_value = 0.0;
};

inline constexpr std::size_t kMinTestSample = 50;

/// Kolmogorov-Smirnov test of t/mean against the unit exponential. Return
/// times live on the sampling lattice, so the reference law is the
/// exponential observed at integer times, P(T <= k) = 1 - (1 - 1/mean)^k,
/// and the supremum is taken over the lattice.
inline ExponentialTest test_exponential(const ReturnTimeSample& sample) {
  const std::size_t n = sample.times.size();
  if (n < kMinTestSample) {
    throw InsufficientDataError("exponential test needs at least " + std::to_string(kMinTestSample) +
                                " return times, have " + std::to_string(n));
  }
  std::vector<std::uint64_t> t = sample.times;
  std::sort(t.begin(), t.end());
  const double mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(n);
  const double q = 1.0 - 1.0 / mean;
  double d = 0.0;
  std::size_t idx = 0;
  // Both CDFs are constant between lattice points; check every k up to the maximum.
  for (std::uint64_t k = 0; k <= t.back(); ++k) {
    while (idx < n && t[idx] <= k) ++idx;
    const double empirical = static_cast<double>(idx) / static_cast<double>(n);
    const double model = 1.0 - std::pow(q, static_cast<double>(k));
    d = std::max(d, std::abs(empirical - model));
  }
  const double rn = std::sqrt(static_cast<double>(n));
  return {n, mean, d, kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d)};
}

// ---------------------------------------------------------------------------
// Independence
// ---------------------------------------------------------------------------

struct IndependenceTest {
  std::size_t n = 0;
  /// Empty when a lagged series has zero variance.
  std::optional<double> autocorrelation;
  double p_value = 1.0;
};

namespace detail {

inline std::optional<double> lag1_correlation(const std::vector<double>& x) {
  const std::size_t m = x.size() - 1;
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    ma += x[k];
    mb += x[k + 1];
  }
  ma /= static_cast<double>(m);
  mb /= static_cast<double>(m);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double a = x[k] - ma, b = x[k + 1] - mb;
    sab += a * b;
    saa += a * a;
    sbb += b * b;
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

/// Lag-1 Pearson autocorrelation of successive return times with a two-sided
/// permutation p-value from `shuffles` seeded shuffles.
inline IndependenceTest test_independence(const ReturnTimeSample& sample, std::uint64_t seed = 0,
                                          std::size_t shuffles = 1000) {
  const std::size_t n = sample.times.size();
  if (n < kMinTestSample) {
    throw InsufficientDataError("independence test needs at least " + std::to_string(kMinTestSample) +
                                " return times, have " + std::to_string(n));
  }
  std::vector<double> x(sample.times.begin(), sample.times.end());
  IndependenceTest out{n, detail::lag1_correlation(x), 1.0};
  if (!out.autocorrelation) return out;
  const double observed = std::abs(*out.autocorrelation);
  std::mt19937_64 rng(seed);
  std::size_t extreme = 0;
  for (std::size_t s = 0; s < shuffles; ++s) {
    for (std::size_t k = n - 1; k > 0; --k) std::swap(x[k], x[rng() % (k + 1)]);
    const auto r = detail::lag1_correlation(x);
    if (r && std::abs(*r) >= observed - 1e-12) ++extreme;
  }
  out.p_value = static_cast<double>(extreme + 1) / static_cast<double>(shuffles + 1);
  return out;
}

// ---------------------------------------------------------------------------
// Poisson counts
// ---------------------------------------------------------------------------

struct PoissonCountTest {
  std::size_t windows = 0;
  double mean = 0.0;
  double variance = 0.0;
  double dispersion = 0.0;
  double chi_square = 0.0;
  std::size_t degrees_of_freedom = 0;
  double p_value = 0.0;
};

inline constexpr std::size_t kMinWindows = 30;

/// Counts visit starts (from index i on) in disjoint windows of `window`
/// samples and tests the counts against a Poisson law with the empirical
/// mean. Tail bins are pooled so every expected count is at least 5.
inline PoissonCountTest test_poisson_counts(BitRowView row, std::size_t i, std::size_t window) {
  if (window == 0) throw InputError("window must be positive");
  if (i >= row.size()) throw InputError("reference index out of range");
  const std::size_t windows = (row.size() - i) / window;
  if (windows < kMinWindows) {
    throw InsufficientDataError("need at least " + std::to_string(kMinWindows) + " windows, have " +
                                std::to_string(windows));
  }
  std::vector<std::size_t> counts(windows, 0);
  for (std::size_t s : visit_starts(row, i))
    if (s / window < windows) ++counts[s / window];

  PoissonCountTest out;
  out.windows = windows;
  const double w = static_cast<double>(windows);
  out.mean = std::accumulate(counts.begin(), counts.end(), 0.0) / w;
  if (out.mean <= 0.0) throw InsufficientDataError("no visits to the reference ball");
  double ss = 0.0;
  for (auto c : counts) ss += (static_cast<double>(c) - out.mean) * (static_cast<double>(c) - out.mean);
  out.variance = ss / (w - 1.0);
  out.dispersion = out.variance / out.mean;

  const std::size_t max_count = *std::max_element(counts.begin(), counts.end());
  const auto kmax = std::max<std::size_t>(max_count, static_cast<std::size_t>(std::ceil(out.mean + 6.0 * std::sqrt(out.mean) + 6.0)));
  std::vector<double> observed(kmax + 1, 0.0), expected(kmax + 1, 0.0);
  for (auto c : counts) observed[c] += 1.0;
  double pmf = std::exp(-out.mean), cdf = 0.0;
  for (std::size_t k = 0; k < kmax; ++k) {
    expected[k] = w * pmf;
    cdf += pmf;
    pmf *= out.mean / static_cast<double>(k + 1);
  }
  expected[kmax] = w * std::max(0.0, 1.0 - cdf);

  std::vector<std::pair<double, double>> bins;  // (observed, expected)
  double ob = 0.0, ex = 0.0;
  for (std::size_t k = 0; k <= kmax; ++k) {
    ob += observed[k];
    ex += expected[k];
    if (ex >= 5.0) {
      bins.emplace_back(ob, ex);
      ob = ex = 0.0;
    }
  }
  if (ex > 0.0 || ob > 0.0) {
    if (bins.empty()) {
      bins.emplace_back(ob, ex);
    } else {
      bins.back().first += ob;
      bins.back().second += ex;
    }
  }
  for (const auto& [o, e] : bins) out.chi_square += (o - e) * (o - e) / e;
  out.degrees_of_freedom = bins.size() > 2 ? bins.size() - 2 : 1;
  const boost::math::chi_squared_distribution<double> chi2(static_cast<double>(out.degrees_of_freedom));
  out.p_value = boost::math::cdf(boost::math::complement(chi2, out.chi_square));
  return out;
}

inline PoissonCountTest test_poisson_counts(const RecurrenceMatrix& r, std::size_t i, std::size_t window) {
  if (i >= r.size()) throw InputError("reference index out of range");
  return test_poisson_counts(r.row(i), i, window);
}

struct ReturnStatsReport {
  ReturnTimeSample sample;
  std::optional<std::uint64_t> first_return;
  std::optional<ExponentialTest> exponential;
  std::optional<IndependenceTest> independence;
  std::optional<PoissonCountTest> poisson;
};

inline std::string format_report(const ReturnStatsReport& rep) {
  std::ostringstream out;
  out.precision(17);
  out << "reference_index: " << rep.sample.reference_index << '\n';
  out << "epsilon: " << rep.sample.epsilon << '\n';
  out << "first_return_time: ";
  if (rep.first_return) {
    out << *rep.first_return << '\n';
  } else {
    out << "none\n";
  }
  out << "return_times: " << rep.sample.times.size() << '\n';
  if (rep.exponential) {
    out << "exponential_mean: " << rep.exponential->mean << '\n';
    out << "exponential_ks_statistic: " << rep.exponential->statistic << '\n';
    out << "exponential_p_value: " << rep.exponential->p_value << '\n';
  }
  if (rep.independence) {
    out << "lag1_autocorrelation: ";
    if (rep.independence->autocorrelation) {
      out << *rep.independence->autocorrelation << '\n';
    } else {
      out << "undefined (zero variance)\n";
    }
    out << "independence_p_value: " << rep.independence->p_value << '\n';
  }
  if (rep.poisson) {
    out << "poisson_windows: " << rep.poisson->windows << '\n';
    out << "poisson_mean: " << rep.poisson->mean << '\n';
    out << "poisson_dispersion: " << rep.poisson->dispersion << '\n';
    out << "poisson_chi_square: " << rep.poisson->chi_square << '\n';
    out << "poisson_dof: " << rep.poisson->degrees_of_freedom << '\n';
    out << "poisson_p_value: " << rep.poisson->p_value << '\n';
  }
  return out.str();
}

}  // namespace recurrence
