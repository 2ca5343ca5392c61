// Acceptance suite. Prints one PASS/FAIL line per criterion.
//   recurrence_acceptance            run every criterion
//   recurrence_acceptance 4 5        run selected criteria
// Exit status is non-zero if any selected criterion fails.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "recurrence/recurrence.hpp"

using namespace recurrence;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets, fixed here.
constexpr double kRuntimeOracleSeconds = 60.0;
constexpr double kReconstructionMinAgreement = 0.90;
constexpr double kReconstructionMinRank = 0.90;
constexpr double kReconstructionMaxSpread = 0.07;
constexpr double kReconstructionSecondsPerRate = 300.0;
constexpr double kReturnMinP = 0.01;
constexpr double kDispersionLo = 0.7, kDispersionHi = 1.3;
constexpr int kReturnMinRuns = 8;
constexpr double kReturnSeconds = 300.0;
constexpr double kK2RelTolerance = 0.25;
constexpr double kK2Seconds = 120.0;
constexpr double kD2SegmentTolerance = 0.15, kD2SquareTolerance = 0.2;
constexpr double kSurrogateRateTolerance = 0.05;
constexpr double kSyncNullBound = 0.05;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

Trajectory uniform_cloud(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> c(n * dim);
  for (auto& x : c) x = u(rng);
  return {dim, std::move(c)};
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  Stopwatch clock;
  std::mt19937_64 rng(2024);
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 100 + rng() % 901;
    const std::size_t dim = 1 + rng() % 3;
    const auto metric = static_cast<Metric>(trial % 3);
    auto traj = uniform_cloud(n, dim, rng);
    // every fifth trajectory is snapped to a lattice to force exact threshold ties
    if (trial % 5 == 4) {
      std::vector<double> c(traj.coords().begin(), traj.coords().end());
      for (auto& x : c) x = std::round(x * 20.0) / 20.0;
      traj = Trajectory(dim, c);
    }
    const double eps = trial % 5 == 4 ? 0.05 * static_cast<double>(1 + rng() % 4)
                                      : std::uniform_real_distribution<double>(0.01, 0.3)(rng);
    if (!(build_matrix(traj, eps, metric) == build_matrix_naive(traj, eps, metric))) ++mismatches;
  }
  const double t = clock.seconds();
  return {mismatches == 0 && t < kRuntimeOracleSeconds,
          std::to_string(mismatches) + " of 50 trajectories differ; " + num(t, 3) + " s (limit " + num(kRuntimeOracleSeconds) + " s)"};
}

Outcome boundary_convention() {
  int bad = 0, cases = 0;
  auto check = [&](const Trajectory& t, double eps, Metric m, std::size_t i, std::size_t j) {
    ++cases;
    if (metric_distance(t.point(i), t.point(j), m) != eps) {
      ++bad;
      return;
    }
    if (build_matrix(t, eps, m)(i, j) || build_matrix_naive(t, eps, m)(i, j)) ++bad;
  };
  const auto pair = Trajectory::from_points({{0.0, 0.0}, {3.0, 4.0}});
  check(pair, 5.0, Metric::euclidean, 0, 1);
  check(pair, 4.0, Metric::maximum, 0, 1);
  check(pair, 7.0, Metric::manhattan, 0, 1);
  // large enough to take the grid path; integer spacing keeps distances exact
  std::vector<double> line;
  for (int k = 0; k < 200; ++k) line.push_back(static_cast<double>(k));
  const auto t = Trajectory::from_series(line);
  for (auto m : {Metric::euclidean, Metric::maximum, Metric::manhattan}) check(t, 3.0, m, 10, 13);
  return {bad == 0, std::to_string(cases - bad) + " of " + std::to_string(cases) + " pairs at distance exactly epsilon are 0"};
}

Outcome isometry_invariance() {
  SystemSpec spec{.kind = SystemKind::lorenz, .n = 1000, .dt = 0.01, .transient = 1000};
  const auto traj = generate(spec);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = g(rng);
  const Eigen::Matrix3d q = Eigen::HouseholderQR<Eigen::Matrix3d>(a).householderQ();
  const Eigen::Vector3d shift(g(rng) * 10, g(rng) * 10, g(rng) * 10);
  std::vector<double> c;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Eigen::Vector3d p(traj.point(i)[0], traj.point(i)[1], traj.point(i)[2]);
    const Eigen::Vector3d r = q * p + shift;
    c.insert(c.end(), {r[0], r[1], r[2]});
  }
  const Trajectory moved(3, c);
  const double eps = calibrate_epsilon(traj, 0.1).epsilon;
  const auto ra = build_matrix(traj, eps), rb = build_matrix(moved, eps);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < ra.size(); ++i)
    for (std::size_t j = 0; j < ra.size(); ++j) diff += ra(i, j) != rb(i, j);
  return {diff == 0, std::to_string(diff) + " differing entries after rotation + translation (epsilon " + num(eps, 6) + ")"};
}

struct SweepRow {
  double rate, agreement, rank, seconds;
};

const std::vector<SweepRow>& reconstruction_sweep() {
  static std::optional<std::vector<SweepRow>> cache;
  if (cache) return *cache;
  SystemSpec spec{.kind = SystemKind::bernoulli, .n = 2000, .transient = 100, .seed = 1};
  const auto traj = generate(spec);
  std::vector<SweepRow> rows;
  for (double rate : {0.05, 0.10, 0.25, 0.50}) {
    Stopwatch clock;
    const auto r = build_matrix(traj, calibrate_epsilon(traj, rate).epsilon);
    const auto res = reconstruct(r, {.dim = 1});
    rows.push_back({rate, res.bit_agreement, res.distance_rank_correlation, clock.seconds()});
  }
  cache = rows;
  return *cache;
}

Outcome reconstruction_quality() {
  bool ok = true;
  std::string detail;
  for (const auto& row : reconstruction_sweep()) {
    ok &= row.agreement >= kReconstructionMinAgreement && row.rank >= kReconstructionMinRank &&
          row.seconds < kReconstructionSecondsPerRate;
    detail += "rate " + num(row.rate) + ": agreement " + num(row.agreement) + ", rank " + num(row.rank) + ", " +
              num(row.seconds, 3) + " s; ";
  }
  return {ok, detail + "need >= " + num(kReconstructionMinAgreement) + " / " + num(kReconstructionMinRank)};
}

Outcome reconstruction_robustness() {
  double lo = 1.0, hi = 0.0;
  for (const auto& row : reconstruction_sweep()) {
    lo = std::min(lo, row.agreement);
    hi = std::max(hi, row.agreement);
  }
  return {hi - lo <= kReconstructionMaxSpread,
          "bit_agreement spread " + num(hi - lo) + " (min " + num(lo) + ", max " + num(hi) + "; limit " + num(kReconstructionMaxSpread) + ")"};
}

Outcome separation_condition() {
  // duplicated point: indices 2 and 5 coincide
  const auto dup = Trajectory::from_series(std::vector<double>{0.1, 0.4, 0.7, 0.2, 0.9, 0.7, 0.55});
  const auto rep = check_separation(build_matrix(dup, 0.12));
  const bool pair_found = std::find(rep.violating_pairs.begin(), rep.violating_pairs.end(),
                                    std::pair<std::size_t, std::size_t>{2, 5}) != rep.violating_pairs.end();
  bool twins_found = false;
  for (const auto& cls : rep.twin_classes) twins_found |= cls == std::vector<std::size_t>{2, 5};
  const bool dup_ok = !rep.satisfied && pair_found && twins_found;

  int satisfied = 0;
  std::string counts;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 g(seed);
    SystemSpec spec{.kind = SystemKind::logistic, .x0 = {0.05 + 0.9 * detail::unit_uniform(g)}, .n = 1000, .transient = 100};
    const auto traj = generate(spec);
    const auto r = build_matrix(traj, calibrate_epsilon(traj, 0.1, Metric::euclidean, seed).epsilon);
    const auto s = check_separation(r);
    satisfied += s.satisfied;
    counts += (counts.empty() ? "" : ",") + std::to_string(s.violating_pairs.size());
  }
  return {dup_ok && satisfied == 10, std::string("duplicate pair ") + (dup_ok ? "reported" : "NOT reported") +
                                         "; logistic satisfied in " + std::to_string(satisfied) +
                                         " of 10 runs (violating pairs per seed: " + counts + ")"};
}

Outcome return_time_properties() {
  Stopwatch clock;
  int ks = 0, indep = 0, disp = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 g(100 + seed);
    SystemSpec spec{.kind = SystemKind::logistic, .x0 = {0.05 + 0.9 * detail::unit_uniform(g)}, .n = 50000, .transient = 1000};
    const auto traj = generate(spec);
    std::mt19937_64 rng(seed);
    const std::size_t ref = rng() % 1000;
    // ball holding 1% of the samples
    std::vector<double> d(traj.size());
    for (std::size_t j = 0; j < traj.size(); ++j) d[j] = metric_distance(traj.point(ref), traj.point(j));
    std::sort(d.begin(), d.end());
    const double eps = d[traj.size() / 100];
    const auto row = recurrence_row(traj, ref, eps);
    const auto sample = return_times(row, ref, eps);
    const auto e = test_exponential(sample);
    const auto ind = test_independence(sample, seed);
    const auto po = test_poisson_counts(row, ref, static_cast<std::size_t>(e.mean));
    ks += e.p_value > kReturnMinP;
    indep += ind.p_value > kReturnMinP;
    disp += po.dispersion >= kDispersionLo && po.dispersion <= kDispersionHi;
    detail += "[" + num(e.p_value, 2) + " " + num(ind.p_value, 2) + " " + num(po.dispersion, 3) + "]";
  }
  const double t = clock.seconds();
  return {ks >= kReturnMinRuns && indep >= kReturnMinRuns && disp >= kReturnMinRuns && t < kReturnSeconds,
          "KS " + std::to_string(ks) + "/10, independence " + std::to_string(indep) + "/10, dispersion " +
              std::to_string(disp) + "/10, " + num(t, 3) + " s; per seed [ks_p ind_p disp]: " + detail};
}

Outcome k2_oracle() {
  const double target = std::log(2.0);
  bool ok = true;
  std::string detail;
  for (auto kind : {SystemKind::bernoulli, SystemKind::logistic}) {
    Stopwatch clock;
    SystemSpec spec{.kind = kind, .x0 = {0.1}, .n = 20000, .transient = 100};
    const auto traj = generate(spec);
    const auto cal = calibrate_epsilon(traj, 0.05);
    const auto k2 = estimate_k2(traj, cal.epsilon, Metric::euclidean, {2, 12});
    const double t = clock.seconds();
    ok &= std::abs(k2.value - target) <= kK2RelTolerance * target && t < kK2Seconds;
    detail += std::string(to_string(kind)) + " " + num(k2.value) + " (" + num(t, 3) + " s); ";
  }
  return {ok, detail + "target ln 2 = " + num(target) + " +/- " + num(100 * kK2RelTolerance) + "%"};
}

Outcome d2_oracle() {
  std::mt19937_64 rng(1);
  const auto eps = log_spaced(0.005, 0.05, 12);
  const auto seg = fit_d2(correlation_sum(uniform_cloud(5000, 1, rng), eps), 0.005, 0.05).slope;
  const auto sq = fit_d2(correlation_sum(uniform_cloud(5000, 2, rng), eps), 0.005, 0.05).slope;
  return {std::abs(seg - 1.0) <= kD2SegmentTolerance && std::abs(sq - 2.0) <= kD2SquareTolerance,
          "segment slope " + num(seg) + ", square slope " + num(sq)};
}

Outcome surrogate_structure() {
  SystemSpec spec{.kind = SystemKind::roessler, .n = 2000, .dt = 0.1, .transient = 1000};
  const auto traj = generate(spec);
  const double eps = calibrate_epsilon(traj, 0.1).epsilon;
  const auto r = build_matrix(traj, eps);
  const double rate0 = recurrence_rate(r);
  std::set<std::vector<double>> points;
  for (std::size_t i = 0; i < traj.size(); ++i) points.emplace(traj.point(i).begin(), traj.point(i).end());
  double worst = 0.0;
  std::size_t foreign = 0, twins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto set = twin_surrogates(traj, r, {.count = 1, .seed = seed});
    twins = set.twin_classes;
    const auto& s = set.surrogates.front();
    for (std::size_t i = 0; i < s.size(); ++i) foreign += !points.contains(std::vector<double>(s.point(i).begin(), s.point(i).end()));
    worst = std::max(worst, std::abs(recurrence_rate(build_matrix(s, eps)) - rate0));
  }
  return {worst <= kSurrogateRateTolerance && foreign == 0,
          "max |rate difference| " + num(worst) + " (rate " + num(rate0) + "), " + std::to_string(foreign) +
              " points outside the original set, " + std::to_string(twins) + " non-trivial twin classes"};
}

Outcome sync_index_check() {
  SystemSpec spec{.kind = SystemKind::henon, .n = 1000, .transient = 100};
  const auto a = generate(spec), b = generate(spec);
  const double same = sync_index(build_matrix(a, 0.1), build_matrix(b, 0.1));
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const auto x = uniform_cloud(1000, 1, rng), y = uniform_cloud(1000, 1, rng);
    const auto rx = build_matrix(x, calibrate_epsilon(x, 0.1).epsilon);
    const auto ry = build_matrix(y, calibrate_epsilon(y, 0.1).epsilon);
    worst = std::max(worst, std::abs(sync_index(rx, ry)));
  }
  return {same == 1.0 && worst < kSyncNullBound,
          "identical: " + num(same, 17) + "; max |index| over 10 noise pairs " + num(worst)};
}

Outcome cli_determinism() {
  const auto root = fs::temp_directory_path() / "recurrence_acceptance_determinism";
  fs::remove_all(root);
  auto run_pipeline = [&](const fs::path& dir) {
    fs::create_directories(dir);
    const auto p = [&](const char* name) { return (dir / name).string(); };
    const std::vector<std::vector<std::string>> steps = {
        {"generate", "--system", "roessler", "--n", "800", "--dt", "0.1", "--transient", "200", "--out", p("t.csv")},
        {"recmat", "--in", p("t.csv"), "--rate", "0.1", "--seed", "5", "--out", p("r.rqm"), "--plot", p("r.pgm"), "--report", p("recmat.txt")},
        {"verify", "--in", p("r.rqm"), "--report", p("verify.txt")},
        {"reconstruct", "--in", p("r.rqm"), "--m", "3", "--seed", "5", "--out", p("rec.csv"), "--report", p("rec.txt")},
        {"generate", "--system", "logistic", "--n", "20000", "--x0", "0.2", "--out", p("l.csv")},
        {"stats", "--in", p("l.csv"), "--rate", "0.01", "--index", "3", "--seed", "5", "--samples-out", p("ret.csv"), "--report", p("stats.txt")},
        {"invariants", "--in", p("t.csv"), "--rate", "0.05", "--dt", "0.1", "--k2-max", "8", "--hist-out", p("hist.csv"), "--report", p("inv.txt")},
        {"surrogate", "--in", p("t.csv"), "--matrix", p("r.rqm"), "--count", "3", "--seed", "5", "--out-prefix", p("s"), "--report", p("sur.txt")},
        {"sync", "--x", p("r.rqm"), "--y", p("r.rqm"), "--report", p("sync.txt")},
    };
    std::vector<int> codes;
    std::ostringstream sink;
    for (auto args : steps) {
      args.insert(args.begin(), "recurrence");
      std::vector<const char*> argv;
      for (const auto& s : args) argv.push_back(s.c_str());
      codes.push_back(cli::dispatch(static_cast<int>(argv.size()), argv.data(), sink));
    }
    return codes;
  };
  const auto ca = run_pipeline(root / "a"), cb = run_pipeline(root / "b");
  auto slurp = [](const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    ++files;
    differing += slurp(entry.path()) != slurp(root / "b" / entry.path().filename());
  }
  std::string codes;
  for (int c : ca) codes += std::to_string(c);
  const bool codes_ok = ca == cb && std::all_of(ca.begin(), ca.end(), [](int c) { return c == 0; });
  fs::remove_all(root);
  return {codes_ok && differing == 0 && files >= 17,
          std::to_string(files) + " files compared, " + std::to_string(differing) + " differ; exit codes " + codes};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"accelerated matrix equals naive matrix", oracle_equivalence}},
      {2, {"distance exactly epsilon is not recurrent", boundary_convention}},
      {3, {"isometry invariance of the recurrence matrix", isometry_invariance}},
      {4, {"reconstruction quality over the epsilon sweep", reconstruction_quality}},
      {5, {"reconstruction robustness across epsilon", reconstruction_robustness}},
      {6, {"separation condition", separation_condition}},
      {7, {"return-time properties", return_time_properties}},
      {8, {"K2 entropy oracle", k2_oracle}},
      {9, {"correlation dimension oracle", d2_oracle}},
      {10, {"twin surrogate structure", surrogate_structure}},
      {11, {"synchronization index", sync_index_check}},
      {12, {"CLI determinism", cli_determinism}},
  };
  std::vector<int> selected;
  for (int k = 1; k < argc; ++k) {
    const int id = std::atoi(argv[k]);
    if (!criteria.contains(id)) {
      std::cerr << "unknown criterion '" << argv[k] << "'\n";
      return 2;
    }
    selected.push_back(id);
  }
  if (selected.empty())
    for (const auto& [id, _] : criteria) selected.push_back(id);

  int failed = 0;
  for (int id : selected) {
    const auto& [name, fn] = criteria.at(id);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d %s: %s (%s)\n", id, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
