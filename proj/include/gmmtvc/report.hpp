#pragma once

#include "gmmtvc/model_spec.hpp"

#include <string>
#include <vector>

namespace gmmtvc {

/// Moves outcome growth-factor quantities (alpha_y, Psi_eta_y, beta_tic,
/// beta_tvc) between the user-facing basis (eta0, eta1, eta2) and the
/// (1, t - g, |t - g|) basis used internally. Identity for every form other
/// than the bilinear spline.
ClassParameters to_internal_basis(const ClassParameters& original);
ClassParameters to_original_basis(const ClassParameters& internal);

/// Names of the reporting-scale parameters: natural scale, original basis,
/// plus the derived conditional growth-factor means mu_y.
std::vector<std::string> report_names(const ModelSpec& spec, int waves);
Vec report_values(const Theta& theta, const ModelSpec& spec, int waves);

/// Mean of the first outcome growth factor (baseline) in the original basis.
double baseline_growth_mean(const ClassParameters& internal, const ModelLayout& layout);

/// Class order by ascending baseline_growth_mean.
std::vector<int> baseline_order(const Theta& theta, const ModelLayout& layout);

}  // namespace gmmtvc
