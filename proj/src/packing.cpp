#include "gmmtvc/packing.hpp"

#include <cmath>

namespace gmmtvc {

namespace {

int tri(int n) { return n * (n + 1) / 2; }

void pack_cov(const Mat& cov, double* out) {
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) throw ModelError("covariance matrix is not positive definite");
    const Mat L = llt.matrixL();
    int o = 0;
    for (Eigen::Index r = 0; r < L.rows(); ++r)
        for (Eigen::Index c = 0; c <= r; ++c) out[o++] = r == c ? std::log(L(r, c)) : L(r, c);
}

Mat unpack_cov(const double* in, int n) {
    Mat L = Mat::Zero(n, n);
    int o = 0;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c <= r; ++c) L(r, c) = r == c ? std::exp(in[o++]) : in[o++];
    return L * L.transpose();
}

double floor_variance(double log_v) { return std::max(std::exp(log_v), kVarianceFloor); }

void add_cov_names(std::vector<std::string>& names, const std::string& prefix, const std::string& what, int n) {
    for (int r = 0; r < n; ++r)
        for (int c = 0; c <= r; ++c)
            names.push_back(prefix + (r == c ? "logchol_" : "chol_") + what + std::to_string(r) + std::to_string(c));
}

}  // namespace

int class_parameter_count(const ModelLayout& layout, int waves) {
    const int C = layout.growth_factors();
    int n = C + tri(C) + 1;  // alpha, Psi, theta_y
    if (layout.has_tic) n += 2 + C;  // mu_x, phi_x, beta_tic
    if (layout.has_tvc) n += 2 + 3 + (waves - 2) + C + 1 + 2;  // mu, Phi, rates, beta_tvc, kappa, theta_x, theta_xy
    if (layout.has_tic && layout.has_tvc) n += 1;  // rho_bl
    if (has_form_coefficient(layout.form)) n += 1;
    return n;
}

ParameterMap::ParameterMap(const ModelSpec& spec, int waves) : spec_(spec), waves_(waves) {
    spec.validate();
    if (waves < 3) throw ModelError("need at least 3 waves");
    const auto& L = spec.layout;
    const int C = L.growth_factors();
    per_class_ = class_parameter_count(L, waves);
    for (int k = 0; k < spec.classes; ++k) {
        const std::string p = "c" + std::to_string(k + 1) + ".";
        auto& n = names_;
        if (L.has_tic) n.push_back(p + "mu_x"), n.push_back(p + "log_phi_x");
        if (L.has_tvc) {
            n.push_back(p + "mu_eta_x0"), n.push_back(p + "mu_eta_x1");
            add_cov_names(n, p, "Phi_x", 2);
            for (int j = 2; j <= waves - 1; ++j) n.push_back(p + "rate" + std::to_string(j));
        }
        for (int c = 0; c < C; ++c) n.push_back(p + "alpha" + std::to_string(c));
        add_cov_names(n, p, "Psi_y", C);
        if (L.has_tic)
            for (int c = 0; c < C; ++c) n.push_back(p + "beta_tic" + std::to_string(c));
        if (L.has_tvc) {
            for (int c = 0; c < C; ++c) n.push_back(p + "beta_tvc" + std::to_string(c));
            n.push_back(p + "kappa");
        }
        if (L.has_tic && L.has_tvc) n.push_back(p + "atanh_rho_bl");
        if (L.has_tvc) n.push_back(p + "log_theta_x");
        n.push_back(p + "log_theta_y");
        if (L.has_tvc) n.push_back(p + "atanh_corr_xy");
        if (has_form_coefficient(L.form))
            n.push_back(p + (L.form == FormKind::BilinearSpline ? "knot"
                             : L.form == FormKind::NegativeExponential ? "log_b" : "log_neg_c"));
    }
    for (int k = 1; k < spec.classes; ++k) {
        const std::string p = "g" + std::to_string(k + 1) + ".";
        names_.push_back(p + "b0");
        for (int g = 0; g < spec.gating_tics; ++g) names_.push_back(p + "b" + std::to_string(g + 1));
    }
    total_ = static_cast<int>(names_.size());
}

void pack_class(const ClassParameters& p, const ModelLayout& L, int waves, Eigen::Ref<Vec> out) {
    const int C = L.growth_factors();
    if (out.size() != class_parameter_count(L, waves)) throw ModelError("packed class block has wrong length");
    double* o = out.data();
    if (L.has_tic) {
        *o++ = p.mu_x;
        *o++ = std::log(p.phi_x);
    }
    if (L.has_tvc) {
        *o++ = p.mu_eta_x[0];
        *o++ = p.mu_eta_x[1];
        pack_cov(p.Phi_eta_x, o);
        o += 3;
        if (p.rates.size() != waves - 1) throw ModelError("relative rates must have length J-1");
        for (int j = 1; j < waves - 1; ++j) *o++ = p.rates[j];
    }
    for (int c = 0; c < C; ++c) *o++ = p.alpha_y[c];
    pack_cov(p.Psi_eta_y, o);
    o += tri(C);
    if (L.has_tic)
        for (int c = 0; c < C; ++c) *o++ = p.beta_tic[c];
    if (L.has_tvc) {
        for (int c = 0; c < C; ++c) *o++ = p.beta_tvc[c];
        *o++ = p.kappa;
    }
    if (L.has_tic && L.has_tvc) *o++ = std::atanh(p.rho_bl);
    if (L.has_tvc) *o++ = std::log(std::max(p.theta_x, kVarianceFloor));
    *o++ = std::log(std::max(p.theta_y, kVarianceFloor));
    if (L.has_tvc) *o++ = std::atanh(p.theta_xy / std::sqrt(p.theta_x * p.theta_y));
    if (has_form_coefficient(L.form)) {
        const double coef = form_coefficient(p.form);
        switch (L.form) {
            case FormKind::NegativeExponential: *o++ = std::log(coef); break;
            case FormKind::JenssBayley: *o++ = std::log(-coef); break;
            default: *o++ = coef; break;
        }
    }
}

ClassParameters unpack_class(const Eigen::Ref<const Vec>& in, const ModelLayout& L, int waves) {
    const int C = L.growth_factors();
    if (in.size() != class_parameter_count(L, waves)) throw ModelError("packed class block has wrong length");
    const double* o = in.data();
    ClassParameters p;
    if (L.has_tic) {
        p.mu_x = *o++;
        p.phi_x = std::exp(*o++);
    }
    if (L.has_tvc) {
        p.mu_eta_x[0] = *o++;
        p.mu_eta_x[1] = *o++;
        p.Phi_eta_x = unpack_cov(o, 2);
        o += 3;
        Vec rates(waves - 1);
        rates[0] = 1.0;
        for (int j = 1; j < waves - 1; ++j) rates[j] = *o++;
        p.rates = RelativeRates(std::move(rates));
    } else {
        p.rates = RelativeRates(Vec::Ones(waves - 1));
    }
    p.alpha_y = Eigen::Map<const Vec>(o, C);
    o += C;
    p.Psi_eta_y = unpack_cov(o, C);
    o += tri(C);
    p.beta_tic = Vec::Zero(C);
    p.beta_tvc = Vec::Zero(C);
    if (L.has_tic) {
        p.beta_tic = Eigen::Map<const Vec>(o, C);
        o += C;
    }
    if (L.has_tvc) {
        p.beta_tvc = Eigen::Map<const Vec>(o, C);
        o += C;
        p.kappa = *o++;
    }
    if (L.has_tic && L.has_tvc) p.rho_bl = std::tanh(*o++);
    if (L.has_tvc) p.theta_x = floor_variance(*o++);
    p.theta_y = floor_variance(*o++);
    if (L.has_tvc) p.theta_xy = std::tanh(*o++) * std::sqrt(p.theta_x * p.theta_y);
    double coef = 0.0;
    if (has_form_coefficient(L.form)) {
        const double u = *o++;
        switch (L.form) {
            case FormKind::NegativeExponential: coef = std::exp(u); break;
            case FormKind::JenssBayley: coef = -std::exp(u); break;
            default: coef = u; break;
        }
    }
    p.form = make_form(L.form, coef);
    return p;
}

GatingParameters unpack_gating(const Eigen::Ref<const Vec>& in, int classes, int gating_tics) {
    GatingParameters g = GatingParameters::zeros(classes, gating_tics);
    Eigen::Index o = 0;
    for (int k = 0; k < classes - 1; ++k) {
        g.intercept[k] = in[o++];
        for (int j = 0; j < gating_tics; ++j) g.coef(k, j) = in[o++];
    }
    return g;
}

Vec pack_parameters(const Theta& theta, const ParameterMap& map) {
    const auto& spec = map.spec();
    if (static_cast<int>(theta.classes.size()) != spec.classes) throw ModelError("theta has wrong number of classes");
    if (theta.gating.intercept.size() != spec.classes - 1 || theta.gating.coef.cols() != spec.gating_tics)
        throw ModelError("gating parameters do not match the model specification");
    Vec out(map.size());
    for (int k = 0; k < spec.classes; ++k)
        pack_class(theta.classes[k], spec.layout, map.waves(), out.segment(map.class_offset(k), map.class_block_size()));
    Eigen::Index o = map.gating_offset();
    for (int k = 0; k < spec.classes - 1; ++k) {
        out[o++] = theta.gating.intercept[k];
        for (int j = 0; j < spec.gating_tics; ++j) out[o++] = theta.gating.coef(k, j);
    }
    return out;
}

Theta unpack_parameters(const Vec& packed, const ParameterMap& map) {
    if (packed.size() != map.size())
        throw ModelError("packed vector has length " + std::to_string(packed.size()) + ", expected " +
                         std::to_string(map.size()));
    const auto& spec = map.spec();
    Theta t;
    for (int k = 0; k < spec.classes; ++k)
        t.classes.push_back(unpack_class(packed.segment(map.class_offset(k), map.class_block_size()), spec.layout,
                                         map.waves()));
    t.gating = unpack_gating(packed.tail(map.size() - map.gating_offset()), spec.classes, spec.gating_tics);
    return t;
}

}  // namespace gmmtvc
