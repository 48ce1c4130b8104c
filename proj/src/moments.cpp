#include "gmmtvc/moments.hpp"

#include <cmath>

namespace gmmtvc {

namespace {

bool is_psd(const Mat& m, double tol = 1e-12) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) return false;
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol * scale;
}

}  // namespace

ClassParameters make_class_parameters(const ModelLayout& layout, int waves) {
    const int C = layout.growth_factors();
    ClassParameters p;
    p.rates = RelativeRates(Vec::Ones(waves - 1));
    p.alpha_y = Vec::Zero(C);
    p.Psi_eta_y = Mat::Identity(C, C);
    p.beta_tic = Vec::Zero(C);
    p.beta_tvc = Vec::Zero(C);
    switch (layout.form) {
        case FormKind::NegativeExponential: p.form = NegativeExponential{1.0}; break;
        case FormKind::JenssBayley: p.form = JenssBayley{-1.0}; break;
        case FormKind::BilinearSpline: p.form = BilinearSpline{0.5 * (waves - 1)}; break;
        default: p.form = make_form(layout.form); break;
    }
    return p;
}

void validate(const ClassParameters& p, const ModelLayout& layout, int waves) {
    const int C = layout.growth_factors();
    if (kind_of(p.form) != layout.form) throw ModelError("functional form does not match layout");
    if (p.alpha_y.size() != C || p.Psi_eta_y.rows() != C || p.Psi_eta_y.cols() != C)
        throw ModelError("outcome growth-factor dimensions do not match the functional form");
    if (!is_psd(p.Psi_eta_y)) throw ModelError("Psi_eta_y must be symmetric positive semidefinite");
    if (!(p.theta_y >= 0.0)) throw ModelError("theta_y must be non-negative");
    if (layout.has_tic) {
        if (p.beta_tic.size() != C) throw ModelError("beta_tic has wrong length");
        if (!(p.phi_x >= 0.0)) throw ModelError("phi_x must be non-negative");
    }
    if (layout.has_tvc) {
        if (p.beta_tvc.size() != C) throw ModelError("beta_tvc has wrong length");
        if (p.rates.size() != waves - 1) throw ModelError("relative rates must have length J-1");
        if (!is_psd(p.Phi_eta_x)) throw ModelError("Phi_eta_x must be symmetric positive semidefinite");
        if (!(p.theta_x >= 0.0)) throw ModelError("theta_x must be non-negative");
        if (p.theta_xy * p.theta_xy > p.theta_x * p.theta_y * (1.0 + 1e-12))
            throw ModelError("|theta_xy| must not exceed sqrt(theta_x * theta_y)");
    }
    if (layout.has_tic && layout.has_tvc && !(std::abs(p.rho_bl) <= 1.0))
        throw ModelError("rho_bl must lie in [-1, 1]");
}

Mat covariate_cov(const ClassParameters& p, const ModelLayout& layout) {
    const int n = (layout.has_tic ? 1 : 0) + (layout.has_tvc ? 2 : 0);
    Mat v = Mat::Zero(n, n);
    int o = 0;
    if (layout.has_tic) v(0, 0) = p.phi_x, o = 1;
    if (layout.has_tvc) {
        v.block<2, 2>(o, o) = p.Phi_eta_x;
        if (layout.has_tic) {
            const double c = p.rho_bl * std::sqrt(p.phi_x * p.Phi_eta_x(0, 0));
            v(0, 1) = v(1, 0) = c;
        }
    }
    return v;
}

LatentDesign latent_design(const ClassParameters& p, const Occasions& occasions,
                           const ModelLayout& layout) {
    const int J = static_cast<int>(occasions.size());
    validate(p, layout, J);
    const int C = layout.growth_factors();
    const int L = layout.latent_dim();
    const int d = layout.observed_dim(J);
    const int nc = L - C;  // covariate latents
    const int ic_tic = layout.has_tic ? 0 : -1;
    const int ic_eta0 = layout.has_tvc ? (layout.has_tic ? 1 : 0) : -1;
    const int ic_eta1 = layout.has_tvc ? ic_eta0 + 1 : -1;
    const int x_row = 0;
    const int y_row = layout.has_tvc ? J : 0;
    const int xe_row = y_row + J;

    Mat lambda_y(J, C);
    detail::fill_outcome_loadings(p.form, occasions.times(), lambda_y);

    LatentDesign out;
    out.A = Mat::Zero(d, L);
    out.offset = Vec::Zero(d);
    out.offset.segment(y_row, J) = lambda_y * p.alpha_y;

    // zeta_y enters y directly through the outcome loadings.
    out.A.block(y_row, nc, J, C) = lambda_y;
    if (layout.has_tic) {
        out.A.block(y_row, ic_tic, J, 1) = lambda_y * p.beta_tic;
        out.A(xe_row, ic_tic) = 1.0;
    }
    if (layout.has_tvc) {
        Mat lambda_x(J, 2);
        detail::fill_tvc_loadings(occasions.times(), p.rates.values(), lambda_x);
        Vec state(J);
        detail::fill_state_loadings(occasions.times(), p.rates.values(), layout.decomposition, state);
        out.A.block(x_row, ic_eta0, J, 2) = lambda_x;
        out.A.block(y_row, ic_eta0, J, 1) = lambda_y * p.beta_tvc;
        out.A.block(y_row, ic_eta1, J, 1) = p.kappa * state;
    }

    out.mean = Vec::Zero(L);
    if (layout.has_tic) out.mean[ic_tic] = p.mu_x;
    if (layout.has_tvc) out.mean.segment<2>(ic_eta0) = p.mu_eta_x;

    out.cov = Mat::Zero(L, L);
    out.cov.topLeftCorner(nc, nc) = covariate_cov(p, layout);
    out.cov.bottomRightCorner(C, C) = p.Psi_eta_y;

    out.residual = Mat::Zero(d, d);
    for (int j = 0; j < J; ++j) {
        out.residual(y_row + j, y_row + j) = p.theta_y;
        if (layout.has_tvc) {
            out.residual(x_row + j, x_row + j) = p.theta_x;
            out.residual(x_row + j, y_row + j) = p.theta_xy;
            out.residual(y_row + j, x_row + j) = p.theta_xy;
        }
    }
    return out;
}

ImpliedMoments implied_moments(const ClassParameters& p, const Occasions& occasions,
                               const ModelLayout& layout) {
    const LatentDesign ld = latent_design(p, occasions, layout);
    ImpliedMoments m;
    m.mean = ld.offset + ld.A * ld.mean;
    const Mat c = ld.A * ld.cov * ld.A.transpose() + ld.residual;
    m.cov = 0.5 * (c + c.transpose());
    return m;
}

GrowthMoments conditional_growth_moments(const ClassParameters& p, const ModelLayout& layout) {
    const int C = layout.growth_factors();
    GrowthMoments g{p.alpha_y, p.Psi_eta_y};
    const int n = (layout.has_tic ? 1 : 0) + (layout.has_tvc ? 1 : 0);
    if (n == 0) return g;
    Mat beta(C, n);
    Vec mu(n);
    Mat cov(n, n);
    int o = 0;
    if (layout.has_tic) {
        beta.col(o) = p.beta_tic;
        mu[o] = p.mu_x;
        ++o;
    }
    if (layout.has_tvc) {
        beta.col(o) = p.beta_tvc;
        mu[o] = p.mu_eta_x[0];
    }
    const Mat full = covariate_cov(p, layout);
    // (x_e, eta0_x) block only; eta1_x does not enter the growth factors.
    cov = full.topLeftCorner(n, n);
    g.mean += beta * mu;
    g.var += beta * cov * beta.transpose();
    return g;
}

}  // namespace gmmtvc
