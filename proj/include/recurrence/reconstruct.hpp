#pragma once

// Reconstruction of a point set from the binary recurrence matrix alone:
// neighborhood-overlap dissimilarities, metric multidimensional scaling by
// stress majorization, and agreement metrics against the input matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "recurrence/core.hpp"
#include "recurrence/parallel.hpp"
#include "recurrence/recmat.hpp"
#include "recurrence/separation.hpp"

namespace recurrence {

/// Symmetric N x N dissimilarities in [0, 1] with a zero diagonal.
struct ProxyDistanceMatrix {
  std::size_t n = 0;
  std::vector<double> values;  // row-major

  double operator()(std::size_t i, std::size_t j) const noexcept { return values[i * n + j]; }
  double& at(std::size_t i, std::size_t j) noexcept { return values[i * n + j]; }
};

enum class ProxyKind {
  /// 1 - |N_i & N_j| / |N_i | N_j| over epsilon-neighborhoods.
  jaccard,
  /// Shortest paths through the recurrence graph with Jaccard edge weights,
  /// scaled to [0, 1]. Does not saturate for pairs farther apart than 2 epsilon.
  geodesic,
};

inline std::string_view to_string(ProxyKind k) { return k == ProxyKind::jaccard ? "jaccard" : "geodesic"; }

inline ProxyKind proxy_from_string(std::string_view s) {
  if (s == "jaccard") return ProxyKind::jaccard;
  if (s == "geodesic") return ProxyKind::geodesic;
  throw InputError("unknown proxy '" + std::string(s) + "'");
}

/// Jaccard dissimilarity of the epsilon-neighborhoods (matrix rows).
inline ProxyDistanceMatrix proxy_distances(const RecurrenceMatrix& r) {
  const std::size_t n = r.size();
  ProxyDistanceMatrix out{n, std::vector<double>(n * n, 0.0)};
  std::vector<std::size_t> sizes(n);
  for (std::size_t i = 0; i < n; ++i) sizes[i] = r.row(i).count();
  parallel_for(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          const auto wi = r.row(i).words();
          for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto wj = r.row(j).words();
            std::size_t inter = 0;
            for (std::size_t k = 0; k < wi.size(); ++k) inter += static_cast<std::size_t>(std::popcount(wi[k] & wj[k]));
            const std::size_t uni = sizes[i] + sizes[j] - inter;
            out.values[i * n + j] = 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
          }
        }
      },
      16);
  return out;
}

/// All-pairs shortest paths over recurrence edges (R[i][j] = 1) weighted by
/// the Jaccard dissimilarity, divided by the largest finite path length.
/// Pairs in different connected components get 1.
inline ProxyDistanceMatrix geodesic_distances(const RecurrenceMatrix& r, const ProxyDistanceMatrix& jaccard) {
  const std::size_t n = r.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  ProxyDistanceMatrix g{n, std::vector<double>(n * n, inf)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i == j) {
        g.values[i * n + j] = 0.0;
      } else if (r(i, j)) {
        g.values[i * n + j] = jaccard(i, j);
      }

  // Floyd-Warshall; rows for a fixed pivot are independent.
  for (std::size_t k = 0; k < n; ++k) {
    const double* rowk = g.values.data() + k * n;
    parallel_for(
        n,
        [&](std::size_t begin, std::size_t end) {
          for (std::size_t i = begin; i < end; ++i) {
            double* rowi = g.values.data() + i * n;
            const double dik = rowi[k];
            if (dik == inf) continue;
            for (std::size_t j = 0; j < n; ++j) rowi[j] = std::min(rowi[j], dik + rowk[j]);
          }
        },
        256);
  }

  double longest = 0.0;
  for (double v : g.values)
    if (v != inf) longest = std::max(longest, v);
  for (double& v : g.values) v = (v == inf) ? 1.0 : (longest > 0.0 ? v / longest : 0.0);
  return g;
}

inline ProxyDistanceMatrix proxy_distances(const RecurrenceMatrix& r, ProxyKind kind) {
  auto jac = proxy_distances(r);
  if (kind == ProxyKind::jaccard) return jac;
  return geodesic_distances(r, jac);
}

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

struct EmbedOptions {
  std::size_t max_iterations = 500;
  double relative_tolerance = 1e-9;
};

struct Embedding {
  Trajectory points;
  /// Raw stress divided by the sum of squared dissimilarities.
  double stress = 0.0;
  /// Raw stress sum_{i<j} (delta - d)^2 of the initial and every iterated configuration.
  std::vector<double> stress_trace;
};

namespace detail {

/// Top-m eigenpairs of a symmetric matrix by largest eigenvalue. Dense solve
/// for small problems, seeded subspace iteration with Rayleigh-Ritz otherwise.
inline void top_eigenpairs(const Eigen::MatrixXd& b, std::size_t m, std::uint64_t seed, Eigen::VectorXd& values,
                           Eigen::MatrixXd& vectors) {
  const auto n = static_cast<Eigen::Index>(b.rows());
  const auto want = static_cast<Eigen::Index>(m);
  if (n <= 400) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    values = es.eigenvalues().reverse().head(std::min(want, n));
    vectors = es.eigenvectors().rowwise().reverse().leftCols(std::min(want, n));
    return;
  }
  const Eigen::Index block = std::min<Eigen::Index>(n, want + 8);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd q(n, block);
  for (Eigen::Index c = 0; c < block; ++c)
    for (Eigen::Index r = 0; r < n; ++r) q(r, c) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
  q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
  Eigen::VectorXd previous = Eigen::VectorXd::Zero(block);
  for (int it = 0; it < 300; ++it) {
    Eigen::MatrixXd z = b * q;
    qr.compute(z);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
    if (it % 10 == 9) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(q.transpose() * b * q);
      const Eigen::VectorXd ev = small.eigenvalues();
      const double scale = std::max(1e-300, ev.cwiseAbs().maxCoeff());
      if ((ev - previous).cwiseAbs().maxCoeff() < 1e-10 * scale) break;
      previous = ev;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(q.transpose() * b * q);
  values = small.eigenvalues().reverse().head(std::min(want, block));
  vectors = (q * small.eigenvectors()).rowwise().reverse().leftCols(std::min(want, block));
}

/// Raw stress of configuration x (n x m, row-major) and the Guttman
/// transform n^-1 B(X) X written to `next`.
inline double guttman_step(const ProxyDistanceMatrix& delta, const std::vector<double>& x, std::size_t m,
                           std::vector<double>& next) {
  const std::size_t n = delta.n;
  std::vector<double> row_stress(n, 0.0);
  parallel_for(
      n,
      [&](std::size_t begin, std::size_t end) {
        std::vector<double> acc(m);
        for (std::size_t i = begin; i < end; ++i) {
          std::fill(acc.begin(), acc.end(), 0.0);
          const double* xi = &x[i * m];
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double* xj = &x[j * m];
            double d2 = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
              const double t = xi[k] - xj[k];
              d2 += t * t;
            }
            const double d = std::sqrt(d2);
            const double target = delta(i, j);
            if (j > i) s += (target - d) * (target - d);
            if (d > 0.0) {
              const double w = target / d;
              for (std::size_t k = 0; k < m; ++k) acc[k] += w * (xi[k] - xj[k]);
            }
          }
          row_stress[i] = s;
          for (std::size_t k = 0; k < m; ++k) next[i * m + k] = acc[k] / static_cast<double>(n);
        }
      },
      16);
  return std::accumulate(row_stress.begin(), row_stress.end(), 0.0);
}

}  // namespace detail

/// Metric MDS: classical scaling start, then SMACOF iterations minimizing
/// sum_{i<j} (delta_ij - |p_i - p_j|)^2. Stops on relative improvement below
/// the tolerance or after max_iterations.
inline Embedding embed(const ProxyDistanceMatrix& delta, std::size_t m, std::uint64_t seed = 0,
                       const EmbedOptions& opts = {}) {
  const std::size_t n = delta.n;
  if (m == 0) throw InputError("embedding dimension must be positive");
  if (n == 0) throw InputError("empty dissimilarity matrix");
  const double total = std::accumulate(delta.values.begin(), delta.values.end(), 0.0);
  if (!(total > 0.0)) throw DegenerateInputError("all dissimilarities are zero (single twin class)");

  // Classical scaling: B = -1/2 J D^2 J.
  Eigen::MatrixXd b(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b(i, j) = delta(i, j) * delta(i, j);
  const Eigen::VectorXd row_mean = b.rowwise().mean();
  const double grand = row_mean.mean();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b(i, j) = -0.5 * (b(i, j) - row_mean(i) - row_mean(j) + grand);

  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  detail::top_eigenpairs(b, m, seed, values, vectors);

  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sum_sq += delta(i, j) * delta(i, j);
  const double jitter_scale = 1e-3 * std::sqrt(sum_sq / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1) + 1));
  const double top = values.size() > 0 ? std::max(0.0, values(0)) : 0.0;

  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> x(n * m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const bool usable = static_cast<Eigen::Index>(k) < values.size() && values(static_cast<Eigen::Index>(k)) > 1e-12 * top &&
                        top > 0.0;
    const double s = usable ? std::sqrt(values(static_cast<Eigen::Index>(k))) : 0.0;
    for (std::size_t i = 0; i < n; ++i)
      x[i * m + k] = usable ? s * vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))
                            : jitter_scale * unit(rng);
  }

  Embedding out{Trajectory(m, std::vector<double>(n * m, 0.0)), 0.0, {}};
  std::vector<double> next(n * m);
  double current = detail::guttman_step(delta, x, m, next);
  out.stress_trace.push_back(current);
  for (std::size_t it = 0; it < opts.max_iterations && current > 0.0; ++it) {
    std::vector<double> candidate = next;
    const double s = detail::guttman_step(delta, candidate, m, next);
    out.stress_trace.push_back(s);
    const double improvement = (current - s) / current;
    x.swap(candidate);
    current = s;
    if (improvement < opts.relative_tolerance) break;
  }
  out.stress = sum_sq > 0.0 ? current / sum_sq : 0.0;
  out.points = Trajectory(m, std::move(x));
  return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side has no variance.
inline double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("spearman: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  auto ranks = [n](std::span<const double> v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) { return v[p] < v[q]; });
    std::vector<double> r(n);
    for (std::size_t s = 0; s < n;) {
      std::size_t e = s + 1;
      while (e < n && v[idx[e]] == v[idx[s]]) ++e;
      const double avg = 0.5 * static_cast<double>(s + e - 1) + 1.0;
      for (std::size_t t = s; t < e; ++t) r[idx[t]] = avg;
      s = e;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sab += (ra[k] - mean) * (rb[k] - mean);
    saa += (ra[k] - mean) * (ra[k] - mean);
    sbb += (rb[k] - mean) * (rb[k] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

struct ValidationMetrics {
  double matched_epsilon = 0.0;
  double bit_agreement = 0.0;
  double distance_rank_correlation = 0.0;
};

/// Compares R with the euclidean recurrence matrix of `reconstructed` at the
/// threshold whose recurrence rate matches R's, and rank-correlates the
/// given proxy dissimilarities with the reconstructed distances.
inline ValidationMetrics validate(const RecurrenceMatrix& r, const Trajectory& reconstructed,
                                  const ProxyDistanceMatrix& delta) {
  const std::size_t n = r.size();
  if (reconstructed.size() != n) {
    throw InputError("reconstruction has " + std::to_string(reconstructed.size()) + " points, matrix has " +
                     std::to_string(n));
  }
  if (delta.n != n) throw InputError("proxy matrix size mismatch");
  ValidationMetrics out;
  if (n < 2) {
    out.matched_epsilon = r.epsilon();
    out.bit_agreement = 1.0;
    return out;
  }

  std::vector<double> dist;
  std::vector<double> proxy;
  dist.reserve(n * (n - 1) / 2);
  proxy.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      dist.push_back(detail::distance(reconstructed.point(i), reconstructed.point(j), Metric::euclidean));
      proxy.push_back(delta(i, j));
    }
  out.distance_rank_correlation = spearman(proxy, dist);

  std::vector<double> sorted = dist;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t want = r.off_diagonal_count() / 2;
  if (want == 0) {
    const auto first_positive = std::upper_bound(sorted.begin(), sorted.end(), 0.0);
    out.matched_epsilon = first_positive == sorted.end() ? 1.0 : *first_positive;
  } else {
    out.matched_epsilon = detail::epsilon_for_count(sorted, want).first;
  }

  const auto rebuilt = build_matrix(reconstructed, out.matched_epsilon, Metric::euclidean);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = r.row(i).words();
    const auto b = rebuilt.row(i).words();
    for (std::size_t k = 0; k < a.size(); ++k) mismatches += static_cast<std::size_t>(std::popcount(a[k] ^ b[k]));
  }
  out.bit_agreement = 1.0 - static_cast<double>(mismatches) / (static_cast<double>(n) * static_cast<double>(n - 1));
  return out;
}

inline ValidationMetrics validate(const RecurrenceMatrix& r, const Trajectory& reconstructed,
                                  ProxyKind kind = ProxyKind::geodesic) {
  if (reconstructed.size() != r.size()) {
    throw InputError("reconstruction has " + std::to_string(reconstructed.size()) + " points, matrix has " +
                     std::to_string(r.size()));
  }
  return validate(r, reconstructed, proxy_distances(r, kind));
}

struct ReconstructOptions {
  std::size_t dim = 3;
  std::uint64_t seed = 0;
  ProxyKind proxy = ProxyKind::geodesic;
  EmbedOptions embed;
};

struct ReconstructionResult {
  Trajectory embedded;
  double stress = 0.0;
  std::vector<double> stress_trace;
  double matched_epsilon = 0.0;
  double bit_agreement = 0.0;
  double distance_rank_correlation = 0.0;
  std::size_t twin_classes = 0;
};

/// Full pipeline: proxy dissimilarities, embedding of the twin-collapsed
/// matrix, re-expansion of twins to coincident points, validation.
inline ReconstructionResult reconstruct(const RecurrenceMatrix& r, const ReconstructOptions& opts = {}) {
  const std::size_t n = r.size();
  if (n < 2) throw InputError("reconstruction needs at least two points");
  const auto delta = proxy_distances(r, opts.proxy);
  const auto partition = twin_partition(r);
  const std::size_t classes = partition.classes.size();
  if (classes < 2) throw DegenerateInputError("matrix has a single twin class; nothing to reconstruct");

  ProxyDistanceMatrix quotient{classes, std::vector<double>(classes * classes, 0.0)};
  for (std::size_t a = 0; a < classes; ++a)
    for (std::size_t b = 0; b < classes; ++b)
      quotient.at(a, b) = delta(partition.classes[a].front(), partition.classes[b].front());

  auto emb = embed(quotient, opts.dim, opts.seed, opts.embed);
  std::vector<double> coords(n * opts.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = emb.points.point(partition.class_of[i]);
    std::copy(p.begin(), p.end(), coords.begin() + static_cast<std::ptrdiff_t>(i * opts.dim));
  }
  Trajectory expanded(opts.dim, std::move(coords));
  const auto metrics = validate(r, expanded, delta);
  return {std::move(expanded), emb.stress,          std::move(emb.stress_trace), metrics.matched_epsilon,
          metrics.bit_agreement, metrics.distance_rank_correlation, classes};
}

inline std::string format_report(const ReconstructionResult& res) {
  std::ostringstream out;
  out.precision(17);
  out << "n: " << res.embedded.size() << '\n';
  out << "dim: " << res.embedded.dim() << '\n';
  out << "twin_classes: " << res.twin_classes << '\n';
  out << "iterations: " << (res.stress_trace.empty() ? 0 : res.stress_trace.size() - 1) << '\n';
  out << "stress: " << res.stress << '\n';
  out << "matched_epsilon: " << res.matched_epsilon << '\n';
  out << "bit_agreement: " << res.bit_agreement << '\n';
  out << "distance_rank_correlation: " << res.distance_rank_correlation << '\n';
  return out.str();
}

}  // namespace recurrence
