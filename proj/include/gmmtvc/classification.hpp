#pragma once

#include "gmmtvc/likelihood.hpp"

#include <cstdint>
#include <vector>

namespace gmmtvc {

/// N x K posterior membership probabilities; rows sum to one.
using PosteriorMatrix = Mat;

/// Bayes rule on gating probabilities and class densities, normalized in
/// log space. Throws ModelError if theta is infeasible for the data.
PosteriorMatrix posterior(const LongitudinalDataset& data, const Theta& theta, const ModelSpec& spec);
PosteriorMatrix posterior_from_logliks(const Mat& class_ll, const Mat& log_pi);

/// Index of the largest posterior per row (ties go to the lowest class).
std::vector<int> modal_labels(const PosteriorMatrix& post);

/// Best label permutation for predicted -> truth (exhaustive, K <= 8).
std::vector<int> best_label_permutation(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Share of correctly classified individuals after the best relabeling of
/// the predicted labels.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

struct KappaResult {
    double kappa = 0.0;
    double lower = 0.0;  ///< 2.5% bootstrap percentile
    double upper = 0.0;  ///< 97.5% bootstrap percentile
    std::vector<int> alignment;  ///< column of b matched to each column of a
};

/// Chance-corrected agreement between two probabilistic solutions computed
/// from the expected joint classification table after aligning b's columns
/// to a's by maximum trace. Reduces to Cohen's kappa for one-hot rows.
double latent_kappa_point(const PosteriorMatrix& a, const PosteriorMatrix& b);
KappaResult latent_kappa(const PosteriorMatrix& a, const PosteriorMatrix& b, int bootstrap_reps = 1000,
                         std::uint64_t seed = 20230101);

}  // namespace gmmtvc
