#pragma once

// Finite-data checks of the separation hypothesis and twin (identical
// neighborhood) detection/collapse.

#include <cstdint>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "recurrence/core.hpp"
#include "recurrence/parallel.hpp"

namespace recurrence {

struct SeparationReport {
  bool satisfied = true;
  /// Unordered pairs (i < j) lacking a separating witness in at least one direction.
  std::vector<std::pair<std::size_t, std::size_t>> violating_pairs;
  /// Classes of bit-identical columns, ordered by first member; members ascending.
  std::vector<std::vector<std::size_t>> twin_classes;
  std::size_t n_effective = 0;
};

namespace detail {

/// True if some z has col_a[z] = 1 and col_b[z] = 0.
inline bool has_witness(BitRowView a, BitRowView b) {
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t k = 0; k < wa.size(); ++k)
    if (wa[k] & ~wb[k]) return true;
  return false;
}

inline std::uint64_t hash_row(BitRowView row) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Word w : row.words()) {
    h ^= w;
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  return h;
}

inline bool same_row(BitRowView a, BitRowView b) {
  return std::equal(a.words().begin(), a.words().end(), b.words().begin());
}

}  // namespace detail

/// Partition of indices into classes of identical matrix columns, plus the
/// class id of every index.
struct TwinPartition {
  std::vector<std::vector<std::size_t>> classes;
  std::vector<std::size_t> class_of;
};

inline TwinPartition twin_partition(const RecurrenceMatrix& r) {
  TwinPartition out;
  out.class_of.resize(r.size());
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_hash;  // hash -> class ids
  for (std::size_t i = 0; i < r.size(); ++i) {
    auto& candidates = by_hash[detail::hash_row(r.column(i))];
    bool placed = false;
    for (std::size_t c : candidates) {
      if (detail::same_row(r.column(out.classes[c].front()), r.column(i))) {
        out.classes[c].push_back(i);
        out.class_of[i] = c;
        placed = true;
        break;
      }
    }
    if (!placed) {
      out.class_of[i] = out.classes.size();
      candidates.push_back(out.classes.size());
      out.classes.push_back({i});
    }
  }
  return out;
}

/// For every unordered pair (i, j) looks for z with R[i][z] = 0, R[j][z] = 1
/// and for z' with the roles swapped; a pair missing either witness is
/// reported. R = 0 is accepted as the far-witness criterion (d >= epsilon).
inline SeparationReport check_separation(const RecurrenceMatrix& r) {
  const std::size_t n = r.size();
  SeparationReport report;
  auto partition = twin_partition(r);
  report.twin_classes = std::move(partition.classes);
  report.n_effective = report.twin_classes.size();

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> per_row(n);
  parallel_for(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          const auto ci = r.column(i);
          for (std::size_t j = i + 1; j < n; ++j) {
            const auto cj = r.column(j);
            if (!detail::has_witness(cj, ci) || !detail::has_witness(ci, cj)) per_row[i].emplace_back(i, j);
          }
        }
      },
      16);
  for (auto& rows : per_row)
    report.violating_pairs.insert(report.violating_pairs.end(), rows.begin(), rows.end());
  report.satisfied = report.violating_pairs.empty();
  return report;
}

/// key: value lines followed by the pair and class lists, in a fixed order.
inline std::string format_report(const SeparationReport& rep, std::size_t n) {
  std::ostringstream out;
  out << "satisfied: " << (rep.satisfied ? "true" : "false") << '\n';
  out << "n: " << n << '\n';
  out << "n_effective: " << rep.n_effective << '\n';
  out << "violating_pairs: " << rep.violating_pairs.size() << '\n';
  out << "twin_classes: " << rep.twin_classes.size() << '\n';
  for (const auto& [i, j] : rep.violating_pairs) out << "pair: " << i << ' ' << j << '\n';
  for (const auto& cls : rep.twin_classes) {
    if (cls.size() < 2) continue;
    out << "twins:";
    for (std::size_t k : cls) out << ' ' << k;
    out << '\n';
  }
  return out.str();
}

struct CollapsedMatrix {
  RecurrenceMatrix matrix;
  /// old index -> class index in the quotient
  std::vector<std::size_t> index_map;
  /// class index -> representative (first member) in the original
  std::vector<std::size_t> representatives;
};

/// Quotient over twin classes, one representative per class in order of
/// first occurrence.
inline CollapsedMatrix collapse_twins(const RecurrenceMatrix& r) {
  auto partition = twin_partition(r);
  const std::size_t m = partition.classes.size();
  std::vector<std::size_t> reps(m);
  for (std::size_t c = 0; c < m; ++c) reps[c] = partition.classes[c].front();
  RecurrenceMatrix q(m, r.epsilon(), r.metric());
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b)
      if (r(reps[a], reps[b])) q.set_unchecked(a, b);
  return {std::move(q), std::move(partition.class_of), std::move(reps)};
}

}  // namespace recurrence
