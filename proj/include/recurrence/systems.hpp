#pragma once

// Trajectory sources: classic maps and flows, CSV ingestion and delay
// embedding of scalar series.

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "recurrence/core.hpp"

namespace recurrence {

enum class SystemKind { bernoulli, logistic, henon, lorenz, roessler };

inline std::string_view to_string(SystemKind k) {
  switch (k) {
    case SystemKind::bernoulli: return "bernoulli";
    case SystemKind::logistic: return "logistic";
    case SystemKind::henon: return "henon";
    case SystemKind::lorenz: return "lorenz";
    case SystemKind::roessler: return "roessler";
  }
  return "unknown";
}

inline SystemKind system_from_string(std::string_view name) {
  if (name == "bernoulli") return SystemKind::bernoulli;
  if (name == "logistic") return SystemKind::logistic;
  if (name == "henon") return SystemKind::henon;
  if (name == "lorenz") return SystemKind::lorenz;
  if (name == "roessler" || name == "rossler") return SystemKind::roessler;
  throw InputError("unknown system '" + std::string(name) + "'");
}

inline bool is_flow(SystemKind k) { return k == SystemKind::lorenz || k == SystemKind::roessler; }

inline std::size_t system_dim(SystemKind k) {
  switch (k) {
    case SystemKind::bernoulli:
    case SystemKind::logistic: return 1;
    case SystemKind::henon: return 2;
    case SystemKind::lorenz:
    case SystemKind::roessler: return 3;
  }
  return 0;
}

/// Standard chaotic-regime parameters for each system.
inline std::map<std::string, double> default_params(SystemKind k) {
  switch (k) {
    case SystemKind::bernoulli: return {};
    case SystemKind::logistic: return {{"r", 4.0}};
    case SystemKind::henon: return {{"a", 1.4}, {"b", 0.3}};
    case SystemKind::lorenz: return {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}};
    case SystemKind::roessler: return {{"a", 0.15}, {"b", 0.2}, {"c", 10.0}};
  }
  return {};
}

inline std::vector<double> default_initial_condition(SystemKind k) {
  switch (k) {
    case SystemKind::bernoulli: return {0.3};
    case SystemKind::logistic: return {0.3};
    case SystemKind::henon: return {0.1, 0.1};
    case SystemKind::lorenz: return {1.0, 1.0, 1.0};
    case SystemKind::roessler: return {1.0, 1.0, 1.0};
  }
  return {};
}

struct SystemSpec {
  SystemKind kind = SystemKind::logistic;
  /// Overrides of the defaults; unknown names are rejected.
  std::map<std::string, double> params;
  /// Empty means the system's default initial condition.
  std::vector<double> x0;
  std::size_t n = 1000;
  double dt = 0.01;
  std::size_t transient = 0;
  /// Bernoulli only: amplitude of the seeded uniform kick added each step
  /// so that floating-point doubling does not collapse the orbit to 0.
  double perturbation = 1e-12;
  std::uint64_t seed = 0;
  /// Flows only: fixed RK4 steps of dt / substeps between recorded samples.
  std::size_t substeps = 8;
};

namespace detail {

/// Uniform double in [0,1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename Field>
std::array<double, 3> rk4_step(const Field& f, const std::array<double, 3>& s, double h) {
  auto axpy = [](const std::array<double, 3>& a, const std::array<double, 3>& b, double c) {
    return std::array<double, 3>{a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]};
  };
  const auto k1 = f(s);
  const auto k2 = f(axpy(s, k1, h / 2));
  const auto k3 = f(axpy(s, k2, h / 2));
  const auto k4 = f(axpy(s, k3, h));
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) out[c] = s[c] + h / 6 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
  return out;
}

}  // namespace detail

/// Vector fields of the supported flows, exposed for independent integrators.
inline std::array<double, 3> lorenz_field(const std::array<double, 3>& s, double sigma, double rho, double beta) {
  return {sigma * (s[1] - s[0]), s[0] * (rho - s[2]) - s[1], s[0] * s[1] - beta * s[2]};
}

inline std::array<double, 3> roessler_field(const std::array<double, 3>& s, double a, double b, double c) {
  return {-s[1] - s[2], s[0] + a * s[1], b + s[2] * (s[0] - c)};
}

/// Iterates a map exactly or integrates a flow with fixed-step RK4, discarding
/// `transient` samples before recording `n`.
inline Trajectory generate(const SystemSpec& spec) {
  if (spec.n == 0) throw GenerationError("sample count must be positive");
  const bool flow = is_flow(spec.kind);
  if (flow && !(spec.dt > 0.0 && std::isfinite(spec.dt))) throw GenerationError("dt must be positive for flows");
  if (flow && spec.substeps == 0) throw GenerationError("substeps must be positive");

  auto params = default_params(spec.kind);
  for (const auto& [name, value] : spec.params) {
    if (!params.contains(name)) {
      throw GenerationError("unknown parameter '" + name + "' for system " + std::string(to_string(spec.kind)));
    }
    if (!std::isfinite(value)) throw GenerationError("parameter '" + name + "' is not finite");
    params[name] = value;
  }
  const std::size_t dim = system_dim(spec.kind);
  std::vector<double> state = spec.x0.empty() ? default_initial_condition(spec.kind) : spec.x0;
  if (state.size() != dim) {
    throw GenerationError("initial condition has " + std::to_string(state.size()) + " coordinates, system " +
                          std::string(to_string(spec.kind)) + " needs " + std::to_string(dim));
  }
  if (spec.kind == SystemKind::bernoulli && !(spec.perturbation >= 0.0)) {
    throw GenerationError("perturbation must be non-negative");
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<double> coords;
  coords.reserve(spec.n * dim);
  const std::size_t total = spec.transient + spec.n;

  auto advance = [&](std::size_t step) {
    switch (spec.kind) {
      case SystemKind::bernoulli: {
        double x = 2.0 * state[0];
        x -= std::floor(x);
        if (spec.perturbation > 0.0) {
          x += spec.perturbation * detail::unit_uniform(rng);
          x -= std::floor(x);
        }
        state[0] = x;
        break;
      }
      case SystemKind::logistic: state[0] = params["r"] * state[0] * (1.0 - state[0]); break;
      case SystemKind::henon: {
        const double x = 1.0 - params["a"] * state[0] * state[0] + state[1];
        state[1] = params["b"] * state[0];
        state[0] = x;
        break;
      }
      case SystemKind::lorenz:
      case SystemKind::roessler: {
        std::array<double, 3> s{state[0], state[1], state[2]};
        const double h = spec.dt / static_cast<double>(spec.substeps);
        for (std::size_t k = 0; k < spec.substeps; ++k) {
          if (spec.kind == SystemKind::lorenz) {
            const double sg = params["sigma"], rh = params["rho"], bt = params["beta"];
            s = detail::rk4_step([&](const auto& v) { return lorenz_field(v, sg, rh, bt); }, s, h);
          } else {
            const double a = params["a"], b = params["b"], c = params["c"];
            s = detail::rk4_step([&](const auto& v) { return roessler_field(v, a, b, c); }, s, h);
          }
        }
        state.assign(s.begin(), s.end());
        break;
      }
    }
    for (double v : state) {
      if (!std::isfinite(v)) throw GenerationError("non-finite state at step " + std::to_string(step));
    }
  };

  for (double v : state) {
    if (!std::isfinite(v)) throw GenerationError("non-finite initial condition");
  }
  for (std::size_t step = 0; step < total; ++step) {
    if (step >= spec.transient) coords.insert(coords.end(), state.begin(), state.end());
    if (step + 1 < total) advance(step + 1);
  }
  return Trajectory(dim, std::move(coords), flow ? spec.dt : 1.0);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace detail

/// Parses CSV text: optional leading '#' comment lines, then one sample per
/// row with comma-separated reals. Blank lines are ignored.
inline Trajectory parse_csv(std::istream& in, double dt = 1.0) {
  std::vector<double> coords;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  std::string line;
  bool in_header = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = detail::trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      if (!in_header) throw ParseError(line_no, "comment after data rows");
      continue;
    }
    in_header = false;
    std::size_t cols = 0;
    std::string_view rest = text;
    while (true) {
      const std::size_t comma = rest.find(',');
      const std::string_view cell = detail::trim(rest.substr(0, comma));
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw ParseError(line_no, "non-numeric cell '" + std::string(cell) + "'");
      }
      if (!std::isfinite(v)) throw ParseError(line_no, "non-finite value");
      coords.push_back(v);
      ++cols;
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (dim == 0) {
      dim = cols;
    } else if (cols != dim) {
      throw ParseError(line_no, "expected " + std::to_string(dim) + " columns, found " + std::to_string(cols));
    }
  }
  if (dim == 0) throw ParseError(line_no == 0 ? 1 : line_no, "no data rows");
  return Trajectory(dim, std::move(coords), dt);
}

inline Trajectory load_csv(const std::string& path, double dt = 1.0) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_csv(in, dt);
}

/// Shortest round-trip formatting, so save -> load is bit-exact.
inline std::string format_csv(const Trajectory& traj, const std::vector<std::string>& header_comments = {}) {
  std::string out;
  for (const auto& c : header_comments) {
    out += "# ";
    out += c;
    out += '\n';
  }
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto p = traj.point(i);
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (k) out += ',';
      detail::append_double(out, p[k]);
    }
    out += '\n';
  }
  return out;
}

inline void save_csv(const Trajectory& traj, const std::string& path,
                     const std::vector<std::string>& header_comments = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << format_csv(traj, header_comments);
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Point k is (s_k, s_{k+lag}, ..., s_{k+(m-1)lag}).
inline Trajectory delay_embed(std::span<const double> series, std::size_t m, std::size_t lag, double dt = 1.0) {
  if (m == 0) throw InputError("embedding dimension must be positive");
  if (lag == 0) throw InputError("lag must be positive");
  const std::size_t span = (m - 1) * lag;
  if (series.size() < span + 1) {
    throw InputError("series of length " + std::to_string(series.size()) + " too short; need at least " +
                     std::to_string(span + 1));
  }
  const std::size_t n = series.size() - span;
  std::vector<double> coords;
  coords.reserve(n * m);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t c = 0; c < m; ++c) coords.push_back(series[k + c * lag]);
  return Trajectory(m, std::move(coords), dt);
}

}  // namespace recurrence
