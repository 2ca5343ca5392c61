// Return times of a logistic-map orbit to a small ball, and the three
// statistical checks on them.

#include <algorithm>
#include <iostream>

#include "recurrence/recurrence.hpp"

int main() {
  using namespace recurrence;
  const auto orbit = generate({.kind = SystemKind::logistic, .x0 = {0.2}, .n = 50000, .transient = 1000});
  const std::size_t ref = 17;

  std::vector<double> d(orbit.size());
  for (std::size_t j = 0; j < orbit.size(); ++j) d[j] = metric_distance(orbit.point(ref), orbit.point(j));
  std::nth_element(d.begin(), d.begin() + orbit.size() / 100, d.end());
  const double eps = d[orbit.size() / 100];

  const auto row = recurrence_row(orbit, ref, eps);
  ReturnStatsReport rep;
  rep.sample = return_times(row, ref, eps);
  rep.first_return = first_return_time(row, ref);
  rep.exponential = test_exponential(rep.sample);
  rep.independence = test_independence(rep.sample, 0);
  rep.poisson = test_poisson_counts(row, ref, static_cast<std::size_t>(rep.exponential->mean));
  std::cout << format_report(rep);
}
