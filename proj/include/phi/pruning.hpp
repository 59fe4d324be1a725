#pragma once

#include <span>
#include <vector>

#include "phi/clustering.hpp"

namespace phi {

struct WidthPruneReport {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double threshold = 0.0;
  std::vector<int> kept;
  std::vector<int> dropped;
};

/// Keeps candidates whose confidence is at least mean - k * stddev over the
/// whole pool. The maximum always survives, so `kept` is never empty.
WidthPruneReport inwidth_filter(std::span<const double> confidences, int k);

/// True iff t >= t_min and the largest cluster holds at least delta of the paths.
bool should_early_stop(const ClusterAssignment& assignment, double delta, int t, int t_min);

}  // namespace phi
