#pragma once

#include "gmmtvc/model_core.hpp"

namespace gmmtvc {

/// Which blocks a submodel contains. The observed vector is laid out as
/// (x_1..x_J, y_1..y_J, x_e) with absent blocks dropped.
struct ModelLayout {
    FormKind form = FormKind::BilinearSpline;
    TvcDecomposition decomposition = TvcDecomposition::IntervalSlopes;
    bool has_tic = true;  ///< second-type TIC x_e
    bool has_tvc = true;  ///< decomposed time-varying covariate

    int growth_factors() const { return growth_factor_count(form); }
    int latent_dim() const { return (has_tic ? 1 : 0) + (has_tvc ? 2 : 0) + growth_factors(); }
    int observed_dim(int waves) const { return (has_tvc ? waves : 0) + waves + (has_tic ? 1 : 0); }

    bool operator==(const ModelLayout&) const = default;
};

/// Per-class expert parameters. For bilinear splines alpha_y, Psi_eta_y and
/// both beta vectors are stored in the reparameterized (1, t-g, |t-g|)
/// basis. Blocks that the layout excludes are ignored.
struct ClassParameters {
    double mu_x = 0.0;
    double phi_x = 1.0;
    Eigen::Vector2d mu_eta_x = Eigen::Vector2d::Zero();
    Eigen::Matrix2d Phi_eta_x = Eigen::Matrix2d::Identity();
    RelativeRates rates;
    Vec alpha_y;
    Mat Psi_eta_y;
    Vec beta_tic;
    Vec beta_tvc;
    double kappa = 0.0;
    double rho_bl = 0.0;
    double theta_x = 1.0;
    double theta_y = 1.0;
    double theta_xy = 0.0;
    FunctionalForm form = Linear{};
};

/// Zero-initialized parameters with consistent dimensions.
ClassParameters make_class_parameters(const ModelLayout& layout, int waves);

/// Throws ModelError unless dimensions match the layout and the
/// (semi)definiteness constraints hold. Latent and residual covariances may
/// be singular here; the likelihood rejects those separately.
void validate(const ClassParameters& params, const ModelLayout& layout, int waves);

/// observed = offset + A * latent + residual, latent ~ N(mean, cov),
/// residual ~ N(0, residual). Latent order: (x_e, eta0_x, eta1_x, zeta_y).
struct LatentDesign {
    Mat A;
    Vec offset;
    Vec mean;
    Mat cov;
    Mat residual;
};

LatentDesign latent_design(const ClassParameters& params, const Occasions& occasions,
                           const ModelLayout& layout);

struct ImpliedMoments {
    Vec mean;
    Mat cov;
};

ImpliedMoments implied_moments(const ClassParameters& params, const Occasions& occasions,
                               const ModelLayout& layout);

struct GrowthMoments {
    Vec mean;  ///< conditional growth-factor means mu_eta_y
    Mat var;   ///< Var(y) of the outcome growth factors
};

/// Growth-factor mean and covariance after integrating out x_e and the TVC
/// baseline.
GrowthMoments conditional_growth_moments(const ClassParameters& params, const ModelLayout& layout);

/// Covariance of (x_e, eta0_x, eta1_x) restricted to the blocks present.
Mat covariate_cov(const ClassParameters& params, const ModelLayout& layout);

}  // namespace gmmtvc
