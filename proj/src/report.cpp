#include "gmmtvc/report.hpp"

#include <algorithm>
#include <numeric>

namespace gmmtvc {

namespace {

ClassParameters change_basis(const ClassParameters& in, const Eigen::Matrix3d& T) {
    ClassParameters out = in;
    out.alpha_y = T * in.alpha_y;
    out.Psi_eta_y = T * in.Psi_eta_y * T.transpose();
    if (in.beta_tic.size() == 3) out.beta_tic = T * in.beta_tic;
    if (in.beta_tvc.size() == 3) out.beta_tvc = T * in.beta_tvc;
    return out;
}

}  // namespace

ClassParameters to_internal_basis(const ClassParameters& original) {
    if (kind_of(original.form) != FormKind::BilinearSpline) return original;
    return change_basis(original, bilinear_transform(std::get<BilinearSpline>(original.form).gamma));
}

ClassParameters to_original_basis(const ClassParameters& internal) {
    if (kind_of(internal.form) != FormKind::BilinearSpline) return internal;
    return change_basis(internal, bilinear_inverse_transform(std::get<BilinearSpline>(internal.form).gamma));
}

std::vector<std::string> report_names(const ModelSpec& spec, int waves) {
    const auto& L = spec.layout;
    const int C = L.growth_factors();
    std::vector<std::string> n;
    for (int k = 0; k < spec.classes; ++k) {
        const std::string p = "c" + std::to_string(k + 1) + ".";
        if (L.has_tic) n.push_back(p + "mu_x"), n.push_back(p + "phi_x");
        if (L.has_tvc) {
            n.push_back(p + "mu_eta_x0"), n.push_back(p + "mu_eta_x1");
            n.push_back(p + "Phi_x00"), n.push_back(p + "Phi_x01"), n.push_back(p + "Phi_x11");
            for (int j = 2; j <= waves - 1; ++j) n.push_back(p + "rate" + std::to_string(j));
        }
        for (int c = 0; c < C; ++c) n.push_back(p + "alpha_y" + std::to_string(c));
        for (int c = 0; c < C; ++c) n.push_back(p + "mu_y" + std::to_string(c));
        for (int r = 0; r < C; ++r)
            for (int c = 0; c <= r; ++c) n.push_back(p + "Psi_y" + std::to_string(c) + std::to_string(r));
        if (L.has_tic)
            for (int c = 0; c < C; ++c) n.push_back(p + "beta_tic" + std::to_string(c));
        if (L.has_tvc) {
            for (int c = 0; c < C; ++c) n.push_back(p + "beta_tvc" + std::to_string(c));
            n.push_back(p + "kappa");
        }
        if (L.has_tic && L.has_tvc) n.push_back(p + "rho_bl");
        if (L.has_tvc) n.push_back(p + "theta_x");
        n.push_back(p + "theta_y");
        if (L.has_tvc) n.push_back(p + "theta_xy");
        switch (L.form) {
            case FormKind::BilinearSpline: n.push_back(p + "knot"); break;
            case FormKind::NegativeExponential: n.push_back(p + "b"); break;
            case FormKind::JenssBayley: n.push_back(p + "c"); break;
            default: break;
        }
    }
    for (int k = 1; k < spec.classes; ++k) {
        const std::string p = "g" + std::to_string(k + 1) + ".";
        n.push_back(p + "b0");
        for (int g = 0; g < spec.gating_tics; ++g) n.push_back(p + "b" + std::to_string(g + 1));
    }
    return n;
}

Vec report_values(const Theta& theta, const ModelSpec& spec, int waves) {
    const auto& L = spec.layout;
    const int C = L.growth_factors();
    std::vector<double> v;
    for (int k = 0; k < spec.classes; ++k) {
        const ClassParameters p = to_original_basis(theta.classes[k]);
        if (L.has_tic) v.push_back(p.mu_x), v.push_back(p.phi_x);
        if (L.has_tvc) {
            v.push_back(p.mu_eta_x[0]), v.push_back(p.mu_eta_x[1]);
            v.push_back(p.Phi_eta_x(0, 0)), v.push_back(p.Phi_eta_x(0, 1)), v.push_back(p.Phi_eta_x(1, 1));
            for (int j = 1; j < waves - 1; ++j) v.push_back(p.rates[j]);
        }
        const GrowthMoments g = conditional_growth_moments(p, L);
        for (int c = 0; c < C; ++c) v.push_back(p.alpha_y[c]);
        for (int c = 0; c < C; ++c) v.push_back(g.mean[c]);
        for (int r = 0; r < C; ++r)
            for (int c = 0; c <= r; ++c) v.push_back(p.Psi_eta_y(c, r));
        if (L.has_tic)
            for (int c = 0; c < C; ++c) v.push_back(p.beta_tic[c]);
        if (L.has_tvc) {
            for (int c = 0; c < C; ++c) v.push_back(p.beta_tvc[c]);
            v.push_back(p.kappa);
        }
        if (L.has_tic && L.has_tvc) v.push_back(p.rho_bl);
        if (L.has_tvc) v.push_back(p.theta_x);
        v.push_back(p.theta_y);
        if (L.has_tvc) v.push_back(p.theta_xy);
        if (has_form_coefficient(L.form)) v.push_back(form_coefficient(p.form));
    }
    for (int k = 0; k < spec.classes - 1; ++k) {
        v.push_back(theta.gating.intercept[k]);
        for (int g = 0; g < spec.gating_tics; ++g) v.push_back(theta.gating.coef(k, g));
    }
    return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double baseline_growth_mean(const ClassParameters& internal, const ModelLayout& layout) {
    return conditional_growth_moments(to_original_basis(internal), layout).mean[0];
}

std::vector<int> baseline_order(const Theta& theta, const ModelLayout& layout) {
    std::vector<int> order(theta.classes.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> key;
    for (const auto& c : theta.classes) key.push_back(baseline_growth_mean(c, layout));
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key[a] < key[b]; });
    return order;
}

}  // namespace gmmtvc
