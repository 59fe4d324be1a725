#include "phi/pruning.hpp"

#include <algorithm>
#include <cmath>

namespace phi {

WidthPruneReport inwidth_filter(std::span<const double> confidences, int k) {
  if (confidences.empty()) throw DomainError("inwidth_filter over no candidates");
  if (k < 0) throw DomainError("inwidth_filter needs k >= 0");
  double sum = 0.0;
  for (double s : confidences) {
    if (!std::isfinite(s)) throw DomainError("inwidth_filter: non-finite confidence");
    sum += s;
  }
  const double n = static_cast<double>(confidences.size());
  WidthPruneReport rep;
  rep.mean = sum / n;
  double var = 0.0;
  for (double s : confidences) var += (s - rep.mean) * (s - rep.mean);
  rep.stddev = std::sqrt(var / n);
  rep.threshold = rep.mean - static_cast<double>(k) * rep.stddev;

  // max >= mean holds exactly in real arithmetic; pinning the maximum keeps
  // that true under rounding as well.
  const double best = *std::max_element(confidences.begin(), confidences.end());
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double s = confidences[i];
    (s >= rep.threshold || s == best ? rep.kept : rep.dropped).push_back(static_cast<int>(i));
  }
  return rep;
}

bool should_early_stop(const ClusterAssignment& assignment, double delta, int t, int t_min) {
  if (t < 1) throw DomainError("should_early_stop: t must be >= 1");
  if (assignment.labels.empty()) return false;
  return t >= t_min && assignment.largest_fraction >= delta;
}

}  // namespace phi
