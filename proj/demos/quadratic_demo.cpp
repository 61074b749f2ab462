// min (x - 1)^2 over [-1, 3], written as h(F(x)) with h = identity on R.
// Prints the EPCA trace, one line per outer iteration.

#include <cmath>
#include <cstdio>

#include "capx/epca.hpp"

using namespace capx;

int main() {
  Vector lo(1), hi(1), one(1), q(1), x0(1);
  lo << -1.0;
  hi << 3.0;
  one << 1.0;
  q << -2.0;
  x0 << 3.0;
  const CompositeProblem P(ClosedSet::box(lo, hi), OuterFunction::linear(one),
                           InnerMapping::quadratic_array({QuadraticForm::make(Matrix::Constant(1, 1, 2.0), q, 1.0)}));
  EpcaConfig cfg;
  cfg.x0 = x0;
  for (int k = 1; k <= 20; ++k) cfg.delta.push_back(std::ldexp(1.0, -k));
  const EpcaTrace tr = run_epca({20, [&P](std::size_t, const EpcaTrace&) { return P; }}, cfg);
  std::printf("%4s %22s %8s %12s %12s\n", "nu", "x", "iters", "residual", "delta");
  for (const auto& r : tr.records)
    std::printf("%4zu %22.17g %8zu %12.3e %12.3e\n", r.nu, r.triple.x(0), r.inner_iterations, r.residual.combined,
                r.delta);
  return 0;
}
