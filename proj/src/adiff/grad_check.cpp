#include "homoenc/adiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace homoenc::ad {

GradCheckResult grad_check(Tape& tape, Var output, std::span<const double> point, double h) {
  std::vector<double> x(point.begin(), point.end());
  tape.forward(x, output);
  tape.backward(output);
  const std::vector<double> analytic = tape.leaf_gradients();

  GradCheckResult result;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = tape.forward(x, output);
    x[i] = x0 - h;
    const double down = tape.forward(x, output);
    x[i] = x0;
    const double fd = (up - down) / (2.0 * h);
    if (!std::isfinite(fd)) throw GradCheckError(i, "non-finite finite-difference estimate");
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
    if (err > result.max_relative_error || !std::isfinite(err)) {
      result.max_relative_error = err;
      result.worst_leaf = i;
    }
  }
  tape.forward(x, output);
  return result;
}

}  // namespace homoenc::ad
