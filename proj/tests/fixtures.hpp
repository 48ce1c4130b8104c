#pragma once

#include "gmmtvc/likelihood.hpp"

#include <random>

namespace fixtures {

using namespace gmmtvc;

// Two-wave linear model with every structural path switched on.
inline ClassParameters linear_two_wave() {
    ModelLayout L;
    L.form = FormKind::Linear;
    ClassParameters p = make_class_parameters(L, 2 + 1);
    p.rates = RelativeRates(Vec::Ones(1));
    p.mu_x = 1.0;
    p.phi_x = 2.0;
    p.mu_eta_x << 3.0, 0.5;
    p.Phi_eta_x << 1.0, 0.2, 0.2, 0.5;
    p.alpha_y = Eigen::Vector2d(10.0, 2.0);
    p.Psi_eta_y = (Mat(2, 2) << 4.0, 0.5, 0.5, 1.0).finished();
    p.beta_tic = Eigen::Vector2d(0.3, 0.1);
    p.beta_tvc = Eigen::Vector2d(0.6, -0.2);
    p.kappa = 0.4;
    p.rho_bl = 0.5;
    p.theta_x = 0.5;
    p.theta_y = 1.5;
    p.theta_xy = 0.2;
    p.form = Linear{};
    return p;
}

inline ModelLayout linear_layout() {
    ModelLayout L;
    L.form = FormKind::Linear;
    return L;
}

// Bilinear class in the internal basis with a knot at gamma.
inline ClassParameters bilinear_class(int waves, double gamma, double shift = 0.0) {
    ModelLayout L;
    ClassParameters p = make_class_parameters(L, waves);
    Vec rates(waves - 1);
    for (int j = 0; j < waves - 1; ++j) rates[j] = 1.0 - 0.05 * j;
    p.rates = RelativeRates(rates);
    p.mu_x = 0.2;
    p.phi_x = 1.3;
    p.mu_eta_x << 0.1 + shift, 0.8;
    p.Phi_eta_x << 1.0, 0.1, 0.1, 0.3;
    p.alpha_y = reparameterize_bilinear({48.0 + shift, 4.5, 1.65}, gamma);
    Mat psi(3, 3);
    psi << 6.0, 0.4, 0.2, 0.4, 1.0, 0.1, 0.2, 0.1, 0.8;
    const Eigen::Matrix3d T = bilinear_transform(gamma);
    p.Psi_eta_y = T * psi * T.transpose();
    p.beta_tic = T * Eigen::Vector3d(0.3, 0.1, 0.05);
    p.beta_tvc = T * Eigen::Vector3d(0.6, 0.2, 0.1);
    p.kappa = 0.4;
    p.rho_bl = 0.3;
    p.theta_x = 0.7;
    p.theta_y = 1.2;
    p.theta_xy = 0.25;
    p.form = BilinearSpline{gamma};
    return p;
}

inline Vec jittered_times(int waves, std::mt19937_64& rng, double delta = 0.25) {
    std::uniform_real_distribution<double> u(-delta, delta);
    Vec t(waves);
    for (int j = 0; j < waves; ++j) t[j] = j + u(rng);
    return t;
}

// Dense multivariate normal log-density written out with an explicit inverse
// and determinant.
inline double dense_normal_logpdf(const Vec& v, const Vec& mean, const Mat& cov) {
    const Vec d = v - mean;
    const double quad = d.dot(cov.inverse() * d);
    return -0.5 * (static_cast<double>(v.size()) * std::log(2.0 * M_PI) + std::log(cov.determinant()) + quad);
}

// Observed vector in (x, y, x_e) order with missing cells removed, and the
// matching index list.
inline std::vector<int> observed_index(const Individual& ind, const ModelLayout& L) {
    const int J = static_cast<int>(ind.times.size());
    std::vector<int> idx;
    int o = 0;
    if (L.has_tvc) {
        for (int j = 0; j < J; ++j)
            if (!is_missing(ind.x[j])) idx.push_back(o + j);
        o += J;
    }
    for (int j = 0; j < J; ++j)
        if (!is_missing(ind.y[j])) idx.push_back(o + j);
    o += J;
    if (L.has_tic) idx.push_back(o);
    return idx;
}

inline Vec stacked(const Individual& ind, const ModelLayout& L) {
    const int J = static_cast<int>(ind.times.size());
    Vec v(L.observed_dim(J));
    int o = 0;
    if (L.has_tvc) v.segment(0, J) = ind.x, o = J;
    v.segment(o, J) = ind.y;
    if (L.has_tic) v[o + J] = ind.xe;
    return v;
}

}  // namespace fixtures
