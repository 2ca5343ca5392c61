#pragma once

// Subcommand front end. Kept in a header so tests can drive dispatch()
// in-process.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "recurrence/recurrence.hpp"

namespace recurrence::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInsufficientData = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string in, out, report, plot, matrix, x_path, y_path, samples_out, hist_out, corr_out, collapse_out;
  std::string out_prefix = "surrogate_";
  std::string system = "logistic";
  std::string metric = "euclidean";
  std::string proxy = "geodesic";
  std::vector<double> x0;
  std::vector<std::string> params;
  std::optional<double> epsilon, rate;
  std::optional<std::size_t> embed_dim;
  std::size_t lag = 1;
  std::size_t n = 1000, transient = 0, m = 3, lmin = 1, k2_min = 2, k2_max = 12, index = 0, window = 0;
  std::size_t count = 1, min_twins = 1, max_iter = 500, shuffles = 1000, corr_count = 16;
  std::size_t substeps = 8;
  double dt = 0.01, perturbation = 1e-12, traj_dt = 1.0;
  std::optional<double> corr_min, corr_max, fit_min, fit_max;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::string fmt(double v) {
  std::string s;
  recurrence::detail::append_double(s, v);
  return s;
}

inline Trajectory read_trajectory(const RunConfig& cfg) {
  auto traj = load_csv(cfg.in, cfg.traj_dt);
  if (!cfg.embed_dim) return traj;
  if (traj.dim() != 1) throw InputError("delay embedding needs a single-column series");
  return delay_embed(traj.coords(), *cfg.embed_dim, cfg.lag, cfg.traj_dt);
}

inline void require_one_threshold(const RunConfig& cfg) {
  if (cfg.epsilon.has_value() == cfg.rate.has_value()) {
    throw UsageError("exactly one of --epsilon and --rate is required");
  }
}

/// Threshold from --epsilon or calibrated from --rate; the string is a report line.
inline std::pair<double, std::string> resolve_threshold(const RunConfig& cfg, const Trajectory& traj, Metric metric) {
  require_one_threshold(cfg);
  if (cfg.epsilon) return {*cfg.epsilon, ""};
  const auto cal = calibrate_epsilon(traj, *cfg.rate, metric, cfg.seed);
  return {cal.epsilon, "target_rate: " + fmt(cal.target_rate) + "\nachieved_rate: " + fmt(cal.achieved_rate) + "\n"};
}

inline void add_threshold_flags(CLI::App* cmd, RunConfig& cfg) {
  auto* eps = cmd->add_option("--epsilon", cfg.epsilon, "Recurrence threshold (exclusive with --rate)");
  auto* rate = cmd->add_option("--rate", cfg.rate, "Target off-diagonal recurrence rate in (0,1] (exclusive with --epsilon)");
  eps->excludes(rate);
}

// ---------------------------------------------------------------------------

inline int run_generate(const RunConfig& cfg) {
  SystemSpec spec;
  spec.kind = system_from_string(cfg.system);
  spec.n = cfg.n;
  spec.dt = cfg.dt;
  spec.transient = cfg.transient;
  spec.x0 = cfg.x0;
  spec.seed = cfg.seed;
  spec.perturbation = cfg.perturbation;
  spec.substeps = cfg.substeps;
  for (const auto& p : cfg.params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw UsageError("--param expects name=value, got '" + p + "'");
    try {
      spec.params[p.substr(0, eq)] = std::stod(p.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("--param value is not a number: '" + p + "'");
    }
  }
  const auto traj = generate(spec);
  save_csv(traj, cfg.out,
           {"system=" + std::string(to_string(spec.kind)) + " n=" + std::to_string(spec.n) + " dt=" + fmt(traj.dt()) +
            " seed=" + std::to_string(spec.seed)});
  return kOk;
}

inline int run_recmat(const RunConfig& cfg) {
  require_one_threshold(cfg);
  const Metric metric = metric_from_string(cfg.metric);
  const auto traj = read_trajectory(cfg);
  const auto [eps, calibration] = resolve_threshold(cfg, traj, metric);
  const auto r = build_matrix(traj, eps, metric);
  if (!cfg.out.empty()) save_matrix(r, cfg.out);
  if (!cfg.plot.empty()) export_pgm(r, cfg.plot);
  std::string summary = "n: " + std::to_string(r.size()) + "\nepsilon: " + fmt(eps) + "\nmetric: " +
                        std::string(to_string(metric)) + "\n" + calibration;
  if (r.size() >= 2) summary += "recurrence_rate: " + fmt(recurrence_rate(r)) + "\n";
  write_text(cfg.report, summary);
  return kOk;
}

inline int run_verify(const RunConfig& cfg) {
  const auto r = load_matrix(cfg.in);
  const auto rep = check_separation(r);
  write_text(cfg.report, format_report(rep, r.size()));
  if (!cfg.collapse_out.empty()) save_matrix(collapse_twins(r).matrix, cfg.collapse_out);
  return kOk;
}

inline int run_reconstruct(const RunConfig& cfg) {
  if (cfg.m == 0) throw UsageError("--m must be positive");
  const auto r = load_matrix(cfg.in);
  ReconstructOptions opts;
  opts.dim = cfg.m;
  opts.seed = cfg.seed;
  opts.proxy = proxy_from_string(cfg.proxy);
  opts.embed.max_iterations = cfg.max_iter;
  const auto res = reconstruct(r, opts);
  if (!cfg.out.empty()) save_csv(res.embedded, cfg.out, {"reconstruction seed=" + std::to_string(cfg.seed)});
  write_text(cfg.report, format_report(res));
  return kOk;
}

inline int run_stats(const RunConfig& cfg) {
  BitVector owned;
  BitRowView row(std::span<const Word>{}, 0);
  std::optional<RecurrenceMatrix> matrix;
  double eps = 0.0;
  if (!cfg.matrix.empty()) {
    if (!cfg.in.empty()) throw UsageError("use either --matrix or --in, not both");
    matrix = load_matrix(cfg.matrix);
    if (cfg.index >= matrix->size()) throw InputError("--index out of range");
    row = matrix->row(cfg.index);
    eps = matrix->epsilon();
  } else if (!cfg.in.empty()) {
    const auto traj = read_trajectory(cfg);
    if (cfg.index >= traj.size()) throw InputError("--index out of range");
    require_one_threshold(cfg);
    const Metric metric = metric_from_string(cfg.metric);
    if (cfg.epsilon) {
      eps = *cfg.epsilon;
    } else {
      // ball holding the requested fraction of samples
      if (!(*cfg.rate > 0.0 && *cfg.rate <= 1.0)) throw InputError("--rate must lie in (0,1]");
      std::vector<double> d(traj.size());
      for (std::size_t j = 0; j < traj.size(); ++j) d[j] = metric_distance(traj.point(cfg.index), traj.point(j), metric);
      std::sort(d.begin(), d.end());
      const auto k = std::min(traj.size() - 1, static_cast<std::size_t>(*cfg.rate * static_cast<double>(traj.size())));
      eps = d[k] > 0.0 ? d[k] : std::numeric_limits<double>::min();
    }
    owned = recurrence_row(traj, cfg.index, eps, metric);
    row = owned.view();
  } else {
    throw UsageError("stats needs --matrix or --in");
  }

  ReturnStatsReport rep;
  rep.sample = return_times(row, cfg.index, eps);
  rep.first_return = first_return_time(row, cfg.index);
  rep.exponential = test_exponential(rep.sample);
  rep.independence = test_independence(rep.sample, cfg.seed, cfg.shuffles);
  const std::size_t window =
      cfg.window ? cfg.window : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(rep.exponential->mean)));
  rep.poisson = test_poisson_counts(row, cfg.index, window);
  if (!cfg.samples_out.empty()) write_text(cfg.samples_out, format_samples_csv(rep.sample));
  write_text(cfg.report, format_report(rep));
  return kOk;
}

inline int run_invariants(const RunConfig& cfg) {
  require_one_threshold(cfg);
  const Metric metric = metric_from_string(cfg.metric);
  const auto traj = read_trajectory(cfg);
  const auto [eps, calibration] = resolve_threshold(cfg, traj, metric);
  const auto r = build_matrix(traj, eps, metric);
  std::string rep = "n: " + std::to_string(r.size()) + "\nepsilon: " + fmt(eps) + "\n" + calibration;
  rep += "recurrence_rate: " + fmt(recurrence_rate(r)) + "\n";
  const auto hist = diagonal_histogram(r, cfg.lmin);
  rep += "diagonal_segments: " + std::to_string(hist.segments()) + "\n";
  if (!cfg.hist_out.empty()) write_text(cfg.hist_out, format_histogram_csv(hist));

  if (cfg.corr_min || cfg.corr_max || !cfg.corr_out.empty()) {
    const double lo = cfg.corr_min.value_or(eps / 10.0);
    const double hi = cfg.corr_max.value_or(eps);
    const auto curve = correlation_sum(traj, log_spaced(lo, hi, cfg.corr_count), metric);
    if (!cfg.corr_out.empty()) write_text(cfg.corr_out, format_correlation_csv(curve));
    const auto d2 = fit_d2(curve, cfg.fit_min.value_or(lo), cfg.fit_max.value_or(hi));
    rep += "d2_slope: " + fmt(d2.slope) + "\nd2_residual: " + fmt(d2.residual) + "\n";
  }
  // K2 last: insufficient diagonal statistics still leave the other outputs written.
  const auto k2 = estimate_k2(diagonal_histogram(r, 1), {cfg.k2_min, cfg.k2_max}, traj.dt());
  rep += "k2: " + fmt(k2.value) + "\nk2_residual: " + fmt(k2.residual) + "\nk2_segments: " + std::to_string(k2.segments) + "\n";
  write_text(cfg.report, rep);
  return kOk;
}

inline int run_surrogate(const RunConfig& cfg) {
  const Metric metric = metric_from_string(cfg.metric);
  const auto traj = read_trajectory(cfg);
  std::optional<RecurrenceMatrix> r;
  if (!cfg.matrix.empty()) {
    if (cfg.epsilon || cfg.rate) throw UsageError("--matrix excludes --epsilon/--rate");
    r = load_matrix(cfg.matrix);
  } else {
    const auto [eps, calibration] = resolve_threshold(cfg, traj, metric);
    r = build_matrix(traj, eps, metric);
  }
  const auto set = twin_surrogates(traj, *r, {cfg.count, cfg.seed, cfg.min_twins});
  if (set.low_twin_warning) {
    std::cerr << "warning: only " << set.twin_classes << " twin classes with two or more members (minimum " << cfg.min_twins
              << "); surrogates follow the original orbit closely\n";
  }
  for (std::size_t k = 0; k < set.surrogates.size(); ++k) {
    save_csv(set.surrogates[k], cfg.out_prefix + std::to_string(k) + ".csv",
             {"twin surrogate seed=" + std::to_string(cfg.seed) + " index=" + std::to_string(k)});
  }
  write_text(cfg.report, "surrogates: " + std::to_string(set.surrogates.size()) +
                             "\nnontrivial_twin_classes: " + std::to_string(set.twin_classes) + "\n");
  return kOk;
}

inline int run_sync(const RunConfig& cfg) {
  const auto rx = load_matrix(cfg.x_path);
  const auto ry = load_matrix(cfg.y_path);
  write_text(cfg.report, "sync_index: " + fmt(sync_index(rx, ry)) + "\n");
  return kOk;
}

}  // namespace detail

/// Parses argv and runs one subcommand. Exit codes: 0 success, 1 usage,
/// 2 data or format error, 3 insufficient data for a statistic.
inline int dispatch(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Recurrence matrices: construction, verification, reconstruction and statistics"};
  app.require_subcommand(1);
  RunConfig cfg;
  app.add_option("--threads", cfg.threads, "Worker thread cap (0 = hardware concurrency)");

  auto* gen = app.add_subcommand("generate", "Generate a trajectory of a map or flow");
  gen->add_option("--system", cfg.system, "bernoulli|logistic|henon|lorenz|roessler")->required();
  gen->add_option("--n", cfg.n, "Number of recorded samples");
  gen->add_option("--dt", cfg.dt, "Sampling step (flows)");
  gen->add_option("--substeps", cfg.substeps, "RK4 steps per sample (flows)");
  gen->add_option("--transient", cfg.transient, "Samples discarded before recording");
  gen->add_option("--x0", cfg.x0, "Initial condition, comma separated")->delimiter(',');
  gen->add_option("--param", cfg.params, "Parameter override name=value (repeatable)");
  gen->add_option("--seed", cfg.seed, "Seed for the Bernoulli perturbation");
  gen->add_option("--perturbation", cfg.perturbation, "Bernoulli per-step kick amplitude");
  gen->add_option("--out", cfg.out, "Output CSV")->required();

  auto* rec = app.add_subcommand("recmat", "Build a recurrence matrix from a CSV trajectory");
  rec->add_option("--in", cfg.in, "Input CSV trajectory")->required();
  detail::add_threshold_flags(rec, cfg);
  rec->add_option("--metric", cfg.metric, "euclidean|maximum|manhattan");
  rec->add_option("--embed-dim", cfg.embed_dim, "Delay-embed a single-column series in this dimension");
  rec->add_option("--lag", cfg.lag, "Delay embedding lag");
  rec->add_option("--seed", cfg.seed, "Seed for pair subsampling during calibration");
  rec->add_option("--out", cfg.out, "Output RQM1 matrix file");
  rec->add_option("--plot", cfg.plot, "Output PGM recurrence plot");
  rec->add_option("--report", cfg.report, "Summary output (default stdout)");

  auto* ver = app.add_subcommand("verify", "Check the separation condition and twins");
  ver->add_option("--in", cfg.in, "Input RQM1 matrix")->required();
  ver->add_option("--report", cfg.report, "Report output (default stdout)");
  ver->add_option("--collapse-out", cfg.collapse_out, "Write the twin-collapsed matrix here");

  auto* recon = app.add_subcommand("reconstruct", "Reconstruct a point set from a recurrence matrix");
  recon->add_option("--in", cfg.in, "Input RQM1 matrix")->required();
  recon->add_option("--m", cfg.m, "Embedding dimension");
  recon->add_option("--seed", cfg.seed, "Embedding seed");
  recon->add_option("--proxy", cfg.proxy, "geodesic|jaccard");
  recon->add_option("--max-iter", cfg.max_iter, "Maximum majorization iterations");
  recon->add_option("--out", cfg.out, "Output CSV of reconstructed points");
  recon->add_option("--report", cfg.report, "Validation report (default stdout)");

  auto* st = app.add_subcommand("stats", "Return-time statistics for one reference point");
  st->add_option("--matrix", cfg.matrix, "Input RQM1 matrix");
  st->add_option("--in", cfg.in, "Input CSV trajectory (row computed directly)");
  detail::add_threshold_flags(st, cfg);
  st->add_option("--metric", cfg.metric, "euclidean|maximum|manhattan (with --in)");
  st->add_option("--embed-dim", cfg.embed_dim, "Delay-embed a single-column series");
  st->add_option("--lag", cfg.lag, "Delay embedding lag");
  st->add_option("--index", cfg.index, "Reference point index");
  st->add_option("--window", cfg.window, "Window length for Poisson counts (0 = mean return time)");
  st->add_option("--seed", cfg.seed, "Permutation test seed");
  st->add_option("--shuffles", cfg.shuffles, "Permutation test shuffles");
  st->add_option("--samples-out", cfg.samples_out, "Write return times as single-column CSV");
  st->add_option("--report", cfg.report, "Report output (default stdout)");

  auto* inv = app.add_subcommand("invariants", "Recurrence rate, diagonal lines, K2 and D2");
  inv->add_option("--in", cfg.in, "Input CSV trajectory")->required();
  detail::add_threshold_flags(inv, cfg);
  inv->add_option("--metric", cfg.metric, "euclidean|maximum|manhattan");
  inv->add_option("--dt", cfg.traj_dt, "Sampling step of the input series");
  inv->add_option("--embed-dim", cfg.embed_dim, "Delay-embed a single-column series");
  inv->add_option("--lag", cfg.lag, "Delay embedding lag");
  inv->add_option("--seed", cfg.seed, "Seed for pair subsampling during calibration");
  inv->add_option("--lmin", cfg.lmin, "Minimum diagonal length kept in the histogram");
  inv->add_option("--k2-min", cfg.k2_min, "Smallest diagonal length in the K2 fit");
  inv->add_option("--k2-max", cfg.k2_max, "Largest diagonal length in the K2 fit");
  inv->add_option("--corr-min", cfg.corr_min, "Smallest threshold of the correlation sum");
  inv->add_option("--corr-max", cfg.corr_max, "Largest threshold of the correlation sum");
  inv->add_option("--corr-count", cfg.corr_count, "Number of log-spaced thresholds");
  inv->add_option("--fit-min", cfg.fit_min, "Lower end of the D2 fit range");
  inv->add_option("--fit-max", cfg.fit_max, "Upper end of the D2 fit range");
  inv->add_option("--hist-out", cfg.hist_out, "Diagonal histogram CSV");
  inv->add_option("--corr-out", cfg.corr_out, "Correlation sum CSV");
  inv->add_option("--report", cfg.report, "Report output (default stdout)");

  auto* sur = app.add_subcommand("surrogate", "Generate twin surrogates");
  sur->add_option("--in", cfg.in, "Input CSV trajectory")->required();
  sur->add_option("--matrix", cfg.matrix, "Recurrence matrix of the input (else built here)");
  detail::add_threshold_flags(sur, cfg);
  sur->add_option("--metric", cfg.metric, "euclidean|maximum|manhattan");
  sur->add_option("--embed-dim", cfg.embed_dim, "Delay-embed a single-column series");
  sur->add_option("--lag", cfg.lag, "Delay embedding lag");
  sur->add_option("--count", cfg.count, "Number of surrogates");
  sur->add_option("--seed", cfg.seed, "Surrogate seed");
  sur->add_option("--min-twins", cfg.min_twins, "Warn below this many twin classes");
  sur->add_option("--out-prefix", cfg.out_prefix, "Surrogate k is written to <prefix><k>.csv");
  sur->add_option("--report", cfg.report, "Summary output (default stdout)");

  auto* syn = app.add_subcommand("sync", "Synchronization index of two recurrence matrices");
  syn->add_option("--x", cfg.x_path, "First RQM1 matrix")->required();
  syn->add_option("--y", cfg.y_path, "Second RQM1 matrix")->required();
  syn->add_option("--report", cfg.report, "Output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  set_max_threads(cfg.threads);
  try {
    if (*gen) return detail::run_generate(cfg);
    if (*rec) return detail::run_recmat(cfg);
    if (*ver) return detail::run_verify(cfg);
    if (*recon) return detail::run_reconstruct(cfg);
    if (*st) return detail::run_stats(cfg);
    if (*inv) return detail::run_invariants(cfg);
    if (*sur) return detail::run_surrogate(cfg);
    if (*syn) return detail::run_sync(cfg);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const InsufficientDataError& e) {
    err << "insufficient data: " << e.what() << '\n';
    return kInsufficientData;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace recurrence::cli
