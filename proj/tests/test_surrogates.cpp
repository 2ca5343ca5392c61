#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "recurrence/recmat.hpp"
#include "recurrence/surrogates.hpp"
#include "recurrence/systems.hpp"

using namespace recurrence;

namespace {

std::vector<double> xs_of(const Trajectory& t) { return {t.coords().begin(), t.coords().end()}; }

}  // namespace

TEST(TwinSurrogates, NoTwinsGivesRotation) {
  std::vector<double> xs;
  for (int k = 0; k < 20; ++k) xs.push_back(static_cast<double>(k));
  const auto t = Trajectory::from_series(xs);
  const auto set = twin_surrogates(t, build_matrix(t, 0.5), {.count = 3, .seed = 4});
  EXPECT_EQ(set.twin_classes, 0u);
  EXPECT_TRUE(set.low_twin_warning);
  for (const auto& s : set.surrogates) {
    const auto ys = xs_of(s);
    const auto start = static_cast<std::size_t>(ys[0]);
    for (std::size_t k = 0; k < ys.size(); ++k) EXPECT_EQ(ys[k], xs[(start + k) % xs.size()]);
  }
}

TEST(TwinSurrogates, AllTwinsResampleUniformly) {
  std::vector<double> xs(40);
  for (std::size_t k = 0; k < xs.size(); ++k) xs[k] = 0.001 * static_cast<double>(k);
  const auto t = Trajectory::from_series(xs);
  const auto set = twin_surrogates(t, build_matrix(t, 1.0), {.count = 1, .seed = 1});
  EXPECT_EQ(set.twin_classes, 1u);
  const auto ys = xs_of(set.surrogates[0]);
  // i.i.d. draws: some values repeat and the order is not the original walk
  EXPECT_LT(std::set<double>(ys.begin(), ys.end()).size(), xs.size());
  EXPECT_NE(ys, xs);
}

TEST(TwinSurrogates, PointsComeFromTheOriginalSet) {
  SystemSpec spec{.kind = SystemKind::henon, .n = 500, .transient = 100};
  const auto t = generate(spec);
  const auto r = build_matrix(t, calibrate_epsilon(t, 0.1).epsilon);
  const auto set = twin_surrogates(t, r, {.count = 4, .seed = 9});
  std::set<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < t.size(); ++i) pts.emplace(t.point(i)[0], t.point(i)[1]);
  for (const auto& s : set.surrogates) {
    ASSERT_EQ(s.size(), t.size());
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_TRUE(pts.contains({s.point(i)[0], s.point(i)[1]}));
  }
}

TEST(TwinSurrogates, SeededPerIndex) {
  SystemSpec spec{.kind = SystemKind::logistic, .n = 300};
  const auto t = generate(spec);
  const auto r = build_matrix(t, 0.05);
  const auto a = twin_surrogates(t, r, {.count = 3, .seed = 2});
  const auto b = twin_surrogates(t, r, {.count = 5, .seed = 2});
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(a.surrogates[k], b.surrogates[k]);
  EXPECT_NE(a.surrogates[0], a.surrogates[1]);
}

TEST(TwinSurrogates, Errors) {
  const auto t = Trajectory::from_series(std::vector<double>{0, 1, 2});
  const auto r = build_matrix(t, 0.5);
  EXPECT_THROW(twin_surrogates(t, r, {.count = 0}), InputError);
  EXPECT_THROW(twin_surrogates(Trajectory::from_series(std::vector<double>{0, 1}), r, {}), InputError);
}

TEST(SyncIndex, IdenticalAndIsometric) {
  SystemSpec spec{.kind = SystemKind::henon, .n = 400, .transient = 50};
  const auto t = generate(spec);
  const auto r = build_matrix(t, 0.2);
  EXPECT_EQ(sync_index(r, r), 1.0);
  std::vector<double> c;
  for (std::size_t i = 0; i < t.size(); ++i) {
    c.push_back(-t.point(i)[1] + 5.0);
    c.push_back(t.point(i)[0] - 2.0);
  }
  EXPECT_EQ(sync_index(r, build_matrix(Trajectory(2, c), 0.2)), 1.0);
}

TEST(SyncIndex, IndependentNoiseIsNearZero) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> a(1000), b(1000);
  for (auto& x : a) x = u(rng);
  for (auto& x : b) x = u(rng);
  const auto ta = Trajectory::from_series(a), tb = Trajectory::from_series(b);
  const auto ra = build_matrix(ta, calibrate_epsilon(ta, 0.1).epsilon);
  const auto rb = build_matrix(tb, calibrate_epsilon(tb, 0.1).epsilon);
  EXPECT_LT(std::abs(sync_index(ra, rb)), 0.05);
}

TEST(SyncIndex, HandComputedValue) {
  const auto x = RecurrenceMatrix::from_rows({{1, 1, 0}, {1, 1, 0}, {0, 0, 1}});
  const auto y = RecurrenceMatrix::from_rows({{1, 1, 1}, {1, 1, 0}, {1, 0, 1}});
  // off-diagonal bits (6 ordered pairs): x = 1,0,1,0,0,0  y = 1,1,1,0,1,0
  const double mx = 2.0 / 6, my = 4.0 / 6;
  const double cov = (2.0 / 6) - mx * my;
  EXPECT_NEAR(sync_index(x, y), cov / std::sqrt(mx * (1 - mx) * my * (1 - my)), 1e-12);
}

TEST(SyncIndex, Errors) {
  const auto ones = RecurrenceMatrix::from_rows({{1, 1}, {1, 1}});
  const auto diag = RecurrenceMatrix::from_rows({{1, 0}, {0, 1}});
  const auto three = RecurrenceMatrix::from_rows({{1, 1, 0}, {1, 1, 0}, {0, 0, 1}});
  EXPECT_THROW(sync_index(ones, diag), DegenerateInputError);
  EXPECT_THROW(sync_index(ones, three), InputError);
}
