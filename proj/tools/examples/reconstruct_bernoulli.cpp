// Builds a recurrence matrix of the Bernoulli shift, forgets the orbit and
// recovers a point set from the matrix alone.

#include <iostream>

#include "recurrence/recurrence.hpp"

int main() {
  using namespace recurrence;
  const auto orbit = generate({.kind = SystemKind::bernoulli, .n = 800, .transient = 100, .seed = 1});
  const auto cal = calibrate_epsilon(orbit, 0.1);
  const auto r = build_matrix(orbit, cal.epsilon);

  const auto sep = check_separation(r);
  std::cout << "separation satisfied: " << std::boolalpha << sep.satisfied << " (" << sep.violating_pairs.size()
            << " violating pairs, " << sep.n_effective << " distinct neighbourhoods)\n";

  const auto res = reconstruct(r, {.dim = 1});
  std::cout << format_report(res);
}
