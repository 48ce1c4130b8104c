#pragma once

#include "gmmtvc/dataset.hpp"
#include "gmmtvc/model_spec.hpp"

#include <cstdint>
#include <vector>

namespace gmmtvc {

/// Lloyd's k-means with k-means++ seeding on the rows of points.
/// Returns 0-based cluster labels; deterministic given seed.
std::vector<int> kmeans(const Mat& points, int k, std::uint64_t seed, int max_iterations = 100);

/// Per-individual OLS intercept and slope of y on time (observed cells only).
/// Rows with fewer than two observed y values get NaN.
Mat outcome_ols_summaries(const LongitudinalDataset& data);

/// Data-driven starting values: k-means on outcome_ols_summaries, then
/// within-cluster moment estimates per class; gating starts at zero. A grid
/// search picks the form coefficient (knot, b or c) per cluster.
Theta initial_theta(const LongitudinalDataset& data, const ModelSpec& spec, std::uint64_t seed);

/// Moment estimates for one class from the given members.
ClassParameters moment_start(const LongitudinalDataset& data, const std::vector<int>& members,
                             const ModelLayout& layout);

}  // namespace gmmtvc
