#pragma once

// Shared data types: trajectories, metrics, packed recurrence matrices and
// the error hierarchy used across the library.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace recurrence {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments: dimension mismatches, out-of-range parameters.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed CSV text.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Malformed binary matrix file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Trajectory generation failed (bad parameters or numerical blow-up).
class GenerationError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Input is well formed but carries no usable structure (e.g. a single twin class).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Not enough data for a statistic to be meaningful.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Metric
// ---------------------------------------------------------------------------

/// Underlying values are the metric ids of the RQM1 file format.
enum class Metric : std::uint8_t { euclidean = 0, maximum = 1, manhattan = 2 };

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::euclidean: return "euclidean";
    case Metric::maximum: return "maximum";
    case Metric::manhattan: return "manhattan";
  }
  return "unknown";
}

inline Metric metric_from_string(std::string_view name) {
  if (name == "euclidean") return Metric::euclidean;
  if (name == "maximum" || name == "max") return Metric::maximum;
  if (name == "manhattan") return Metric::manhattan;
  throw InputError("unknown metric '" + std::string(name) + "'");
}

namespace detail {

// Unchecked kernel; callers guarantee equal lengths.
inline double distance(std::span<const double> p, std::span<const double> q, Metric m) noexcept {
  double acc = 0.0;
  switch (m) {
    case Metric::euclidean:
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double d = p[k] - q[k];
        acc += d * d;
      }
      return std::sqrt(acc);
    case Metric::maximum:
      for (std::size_t k = 0; k < p.size(); ++k) acc = std::max(acc, std::abs(p[k] - q[k]));
      return acc;
    case Metric::manhattan:
      for (std::size_t k = 0; k < p.size(); ++k) acc += std::abs(p[k] - q[k]);
      return acc;
  }
  return acc;
}

}  // namespace detail

inline double metric_distance(std::span<const double> p, std::span<const double> q,
                              Metric m = Metric::euclidean) {
  if (p.size() != q.size()) {
    throw InputError("dimension mismatch: " + std::to_string(p.size()) + " vs " +
                     std::to_string(q.size()));
  }
  return detail::distance(p, q, m);
}

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

/// Ordered sequence of points in R^dim sampled with a uniform time step.
/// Coordinates are stored row-major in a single buffer.
class Trajectory {
 public:
  Trajectory(std::size_t dim, std::vector<double> coords, double dt = 1.0)
      : dim_(dim), dt_(dt), coords_(std::move(coords)) {
    if (dim_ == 0) throw InputError("trajectory dimension must be positive");
    if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw InputError("time step must be positive");
    if (coords_.empty()) throw InputError("trajectory must contain at least one point");
    if (coords_.size() % dim_ != 0) {
      throw InputError("coordinate count " + std::to_string(coords_.size()) +
                       " is not a multiple of dimension " + std::to_string(dim_));
    }
    for (std::size_t k = 0; k < coords_.size(); ++k) {
      if (!std::isfinite(coords_[k])) {
        throw InputError("non-finite coordinate at point " + std::to_string(k / dim_));
      }
    }
  }

  static Trajectory from_points(const std::vector<std::vector<double>>& points, double dt = 1.0) {
    if (points.empty()) throw InputError("trajectory must contain at least one point");
    const std::size_t dim = points.front().size();
    std::vector<double> coords;
    coords.reserve(points.size() * dim);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].size() != dim) {
        throw InputError("point " + std::to_string(i) + " has " + std::to_string(points[i].size()) +
                         " coordinates, expected " + std::to_string(dim));
      }
      coords.insert(coords.end(), points[i].begin(), points[i].end());
    }
    return Trajectory(dim, std::move(coords), dt);
  }

  static Trajectory from_series(std::span<const double> series, double dt = 1.0) {
    return Trajectory(1, std::vector<double>(series.begin(), series.end()), dt);
  }

  std::size_t size() const noexcept { return coords_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  double dt() const noexcept { return dt_; }

  std::span<const double> point(std::size_t i) const noexcept {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<const double> coords() const noexcept { return coords_; }

  bool operator==(const Trajectory&) const = default;

 private:
  std::size_t dim_;
  double dt_;
  std::vector<double> coords_;
};

// ---------------------------------------------------------------------------
// Packed bits
// ---------------------------------------------------------------------------

using Word = std::uint64_t;
inline constexpr std::size_t kWordBits = 64;

inline constexpr std::size_t words_for(std::size_t bits) noexcept {
  return (bits + kWordBits - 1) / kWordBits;
}

/// Read-only view of one packed bit row of length `size()`.
class BitRowView {
 public:
  BitRowView(std::span<const Word> words, std::size_t n) noexcept : words_(words), n_(n) {}

  std::size_t size() const noexcept { return n_; }
  bool operator[](std::size_t j) const noexcept {
    return (words_[j / kWordBits] >> (j % kWordBits)) & 1u;
  }
  std::span<const Word> words() const noexcept { return words_; }

  std::size_t count() const noexcept {
    std::size_t c = 0;
    for (Word w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

 private:
  std::span<const Word> words_;
  std::size_t n_;
};

/// Owning packed bit vector (used for single recurrence rows computed
/// directly from a trajectory, without materializing the full matrix).
class BitVector {
 public:
  explicit BitVector(std::size_t n = 0) : words_(words_for(n), 0), n_(n) {}

  static BitVector from_bools(const std::vector<int>& bits) {
    BitVector v(bits.size());
    for (std::size_t j = 0; j < bits.size(); ++j)
      if (bits[j]) v.set(j);
    return v;
  }

  std::size_t size() const noexcept { return n_; }
  bool operator[](std::size_t j) const noexcept { return view()[j]; }
  void set(std::size_t j) noexcept { words_[j / kWordBits] |= Word{1} << (j % kWordBits); }
  BitRowView view() const noexcept { return {words_, n_}; }
  operator BitRowView() const noexcept { return view(); }  // NOLINT(google-explicit-constructor)

 private:
  std::vector<Word> words_;
  std::size_t n_;
};

// ---------------------------------------------------------------------------
// RecurrenceMatrix
// ---------------------------------------------------------------------------

/// Symmetric binary N x N matrix R[i][j] = 1 iff d(x_i, x_j) < epsilon,
/// together with the threshold and metric that produced it. Rows are packed
/// into 64-bit words; the unit diagonal and symmetry are class invariants.
class RecurrenceMatrix {
 public:
  /// Builds from explicit 0/1 rows, validating symmetry and the unit diagonal.
  static RecurrenceMatrix from_rows(const std::vector<std::vector<int>>& rows, double epsilon = 1.0,
                                    Metric metric = Metric::euclidean) {
    const std::size_t n = rows.size();
    RecurrenceMatrix r(n, epsilon, metric);
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i].size() != n) throw InputError("recurrence matrix rows must be square");
      for (std::size_t j = 0; j < n; ++j) {
        if (rows[i][j] != 0 && rows[i][j] != 1) throw InputError("recurrence matrix entries must be 0 or 1");
        if (rows[i][j]) r.set_unchecked(i, j);
      }
    }
    r.validate();
    return r;
  }

  std::size_t size() const noexcept { return n_; }
  double epsilon() const noexcept { return epsilon_; }
  Metric metric() const noexcept { return metric_; }
  std::size_t words_per_row() const noexcept { return stride_; }

  bool operator()(std::size_t i, std::size_t j) const noexcept {
    return (bits_[i * stride_ + j / kWordBits] >> (j % kWordBits)) & 1u;
  }

  BitRowView row(std::size_t i) const noexcept {
    return {std::span<const Word>(bits_.data() + i * stride_, stride_), n_};
  }

  /// Rows double as columns because the matrix is symmetric.
  BitRowView column(std::size_t j) const noexcept { return row(j); }

  /// Number of ones off the main diagonal.
  std::size_t off_diagonal_count() const noexcept {
    std::size_t c = 0;
    for (Word w : bits_) c += static_cast<std::size_t>(std::popcount(w));
    return c - n_;
  }

  bool operator==(const RecurrenceMatrix&) const = default;

  /// Throws InputError unless the matrix is symmetric with a unit diagonal.
  void validate() const {
    for (std::size_t i = 0; i < n_; ++i) {
      if (!(*this)(i, i)) throw InputError("diagonal entry " + std::to_string(i) + " is not 1");
      for (std::size_t j = i + 1; j < n_; ++j) {
        if ((*this)(i, j) != (*this)(j, i)) {
          throw InputError("matrix is not symmetric at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
        }
      }
    }
  }

  // Construction interface for the builders in this library. Rows may be
  // filled concurrently from disjoint row ranges.
  RecurrenceMatrix(std::size_t n, double epsilon, Metric metric)
      : n_(n), stride_(words_for(n)), epsilon_(epsilon), metric_(metric), bits_(n * words_for(n), 0) {
    if (n == 0) throw InputError("recurrence matrix must have at least one row");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InputError("epsilon must be positive and finite");
  }
  void set_unchecked(std::size_t i, std::size_t j) noexcept {
    bits_[i * stride_ + j / kWordBits] |= Word{1} << (j % kWordBits);
  }
  std::span<Word> mutable_row(std::size_t i) noexcept { return {bits_.data() + i * stride_, stride_}; }

 private:
  std::size_t n_;
  std::size_t stride_;
  double epsilon_;
  Metric metric_;
  std::vector<Word> bits_;
};

}  // namespace recurrence
