#include "gmmtvc/likelihood.hpp"

#include <cmath>
#include <numbers>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gmmtvc {

namespace {

constexpr int kMaxLatent = 5;  // eta0_x, eta1_x and at most 3 growth factors
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxLatent, 1>;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxLatent, kMaxLatent>;

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Row j of the outcome loadings, written into out[0..C).
inline void outcome_row(const FunctionalForm& form, FormKind kind, double t, double* out) {
    out[0] = 1.0;
    switch (kind) {
        case FormKind::Linear: out[1] = t; break;
        case FormKind::Quadratic: out[1] = t, out[2] = t * t; break;
        case FormKind::NegativeExponential: out[1] = -std::expm1(-std::get<NegativeExponential>(form).b * t); break;
        case FormKind::JenssBayley: out[1] = t, out[2] = std::expm1(std::get<JenssBayley>(form).c * t); break;
        case FormKind::BilinearSpline: {
            const double d = t - std::get<BilinearSpline>(form).gamma;
            out[1] = d, out[2] = std::abs(d);
            break;
        }
    }
}

}  // namespace

ClassKernel::ClassKernel(const ClassParameters& params, const ModelLayout& layout)
    : p_(params), layout_(layout), C_(layout.growth_factors()) {
    const bool tvc = layout.has_tvc;
    const bool tic = layout.has_tic;
    q_ = C_ + (tvc ? 2 : 0);

    if (tic) {
        if (!(p_.phi_x > 0.0) || !std::isfinite(p_.phi_x)) {
            feasible_ = false;
            return;
        }
        log_phi_x_ = std::log(p_.phi_x);
    }

    Mat V = Mat::Zero(q_, q_);
    if (tvc) V.topLeftCorner<2, 2>() = p_.Phi_eta_x;
    V.bottomRightCorner(C_, C_) = p_.Psi_eta_y;
    if (tic && tvc) {
        const double c = p_.rho_bl * std::sqrt(p_.phi_x * p_.Phi_eta_x(0, 0));
        eta0_shift_ = c / p_.phi_x;
        V(0, 0) -= c * c / p_.phi_x;
    }
    if (!V.allFinite()) {
        feasible_ = false;
        return;
    }
    Eigen::LLT<Mat> llt(V);
    if (llt.info() == Eigen::Success) {
        S_ = llt.matrixL();
    } else {
        Eigen::SelfAdjointEigenSolver<Mat> es(V);
        const double scale = std::max(1.0, V.cwiseAbs().maxCoeff());
        if (es.eigenvalues().minCoeff() < -1e-12 * scale) {
            feasible_ = false;
            return;
        }
        S_ = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    if (tvc) {
        Eigen::Matrix2d R;
        R << p_.theta_x, p_.theta_xy, p_.theta_xy, p_.theta_y;
        const double det = R.determinant();
        if (!(p_.theta_x > 0.0) || !(p_.theta_y > 0.0) || !(det > 0.0)) {
            feasible_ = false;
            return;
        }
        r_inv_ = R.inverse();
        r_logdet_ = std::log(det);
    } else if (!(p_.theta_y > 0.0)) {
        feasible_ = false;
    }
}

double ClassKernel::loglik(const Individual& ind) const {
    if (!feasible_) return kInfeasible;
    const bool tvc = layout_.has_tvc;
    const bool tic = layout_.has_tic;
    const int C = C_;
    const int q = q_;
    const Eigen::Index J = ind.times.size();
    const int zoff = tvc ? 2 : 0;  // first zeta column

    double ll = 0.0;
    double mu0 = 0.0, mu1 = 0.0;
    double gy[3] = {p_.alpha_y[0], p_.alpha_y[1], C > 2 ? p_.alpha_y[2] : 0.0};
    if (tic) {
        const double dx = ind.xe - p_.mu_x;
        ll += -0.5 * (kLog2Pi + log_phi_x_ + dx * dx / p_.phi_x);
        for (int c = 0; c < C; ++c) gy[c] += p_.beta_tic[c] * ind.xe;
        if (tvc) mu0 = p_.mu_eta_x[0] + eta0_shift_ * dx;
    } else if (tvc) {
        mu0 = p_.mu_eta_x[0];
    }
    if (tvc) mu1 = p_.mu_eta_x[1];

    SmallMat M = SmallMat::Zero(q, q);
    SmallVec v = SmallVec::Zero(q);
    SmallVec ax(q), ay(q), bx(q), by(q);
    double quad = 0.0;
    double logdet = 0.0;
    int nobs = 0;

    const double inv_tx = tvc ? 1.0 / p_.theta_x : 0.0;
    const double inv_ty = 1.0 / p_.theta_y;
    const double log_tx = tvc ? std::log(p_.theta_x) : 0.0;
    const double log_ty = std::log(p_.theta_y);
    const FormKind kind = kind_of(p_.form);
    const Vec& rates = p_.rates.values();

    double cum = 0.0;  // cumulative TVC loading
    double row[3];
    for (Eigen::Index j = 0; j < J; ++j) {
        const double t = ind.times[j];
        double state = 0.0;
        if (j > 0 && tvc) {
            const double dt = t - ind.times[j - 1];
            cum += rates[j - 1] * dt;
            state = rates[j - 1];
            if (layout_.decomposition == TvcDecomposition::IntervalChanges) state *= dt;
        }
        const bool ox = tvc && !is_missing(ind.x[j]);
        const bool oy = !is_missing(ind.y[j]);
        if (!ox && !oy) continue;

        double rx = 0.0, ry = 0.0;
        if (ox) {
            ax.setZero();
            ax[0] = 1.0;
            ax[1] = cum;
            bx.noalias() = S_.transpose() * ax;
            rx = ind.x[j] - (mu0 + cum * mu1);
        }
        if (oy) {
            outcome_row(p_.form, kind, t, row);
            double mean = 0.0, btvc = 0.0;
            for (int c = 0; c < C; ++c) {
                mean += row[c] * gy[c];
                ay[zoff + c] = row[c];
            }
            if (tvc) {
                for (int c = 0; c < C; ++c) btvc += row[c] * p_.beta_tvc[c];
                ay[0] = btvc;
                ay[1] = p_.kappa * state;
                mean += btvc * mu0 + p_.kappa * state * mu1;
            }
            by.noalias() = S_.transpose() * ay;
            ry = ind.y[j] - mean;
        }

        if (ox && oy) {
            const double ux = r_inv_(0, 0) * rx + r_inv_(0, 1) * ry;
            const double uy = r_inv_(1, 0) * rx + r_inv_(1, 1) * ry;
            quad += rx * ux + ry * uy;
            v += bx * ux + by * uy;
            // W rows for the 2x2 block
            const SmallVec wx = r_inv_(0, 0) * bx + r_inv_(0, 1) * by;
            const SmallVec wy = r_inv_(1, 0) * bx + r_inv_(1, 1) * by;
            M.noalias() += bx * wx.transpose();
            M.noalias() += by * wy.transpose();
            logdet += r_logdet_;
            nobs += 2;
        } else if (ox) {
            quad += rx * rx * inv_tx;
            v += bx * (rx * inv_tx);
            M.noalias() += (bx * inv_tx) * bx.transpose();
            logdet += log_tx;
            nobs += 1;
        } else {
            quad += ry * ry * inv_ty;
            v += by * (ry * inv_ty);
            M.noalias() += (by * inv_ty) * by.transpose();
            logdet += log_ty;
            nobs += 1;
        }
    }
    M.diagonal().array() += 1.0;
    Eigen::LLT<SmallMat> llt(M);
    if (llt.info() != Eigen::Success) return kInfeasible;
    const auto& L = llt.matrixL();
    SmallVec z = L.solve(v);
    logdet += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    quad -= z.squaredNorm();
    ll += -0.5 * (nobs * kLog2Pi + logdet + quad);
    return std::isfinite(ll) ? ll : kInfeasible;
}

double class_loglik(const Individual& ind, const ClassParameters& params, const ModelLayout& layout) {
    validate(params, layout, static_cast<int>(ind.times.size()));
    return ClassKernel(params, layout).loglik(ind);
}

double class_loglik_reference(const Individual& ind, const ClassParameters& params, const ModelLayout& layout) {
    const Occasions occ(ind.times);
    const ImpliedMoments m = implied_moments(params, occ, layout);
    const Eigen::Index J = ind.times.size();
    Vec obs(m.mean.size());
    Eigen::Index o = 0;
    if (layout.has_tvc) obs.segment(o, J) = ind.x, o += J;
    obs.segment(o, J) = ind.y, o += J;
    if (layout.has_tic) obs[o] = ind.xe;

    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < obs.size(); ++r)
        if (!is_missing(obs[r])) keep.push_back(r);
    const auto n = static_cast<Eigen::Index>(keep.size());
    Vec resid(n);
    Mat cov(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        resid[a] = obs[keep[a]] - m.mean[keep[a]];
        for (Eigen::Index b = 0; b < n; ++b) cov(a, b) = m.cov(keep[a], keep[b]);
    }
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) return kInfeasible;
    const Vec z = llt.matrixL().solve(resid);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double ll = -0.5 * (static_cast<double>(n) * kLog2Pi + logdet + z.squaredNorm());
    return std::isfinite(ll) ? ll : kInfeasible;
}

void class_loglik_all(const LongitudinalDataset& data, const ClassKernel& kernel, Eigen::Ref<Vec> out) {
    const auto n = static_cast<long>(data.size());
    if (!kernel.feasible()) {
        out.setConstant(kInfeasible);
        return;
    }
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) out[i] = kernel.loglik(data.rows[static_cast<std::size_t>(i)]);
}

Mat class_logliks(const LongitudinalDataset& data, const Theta& theta, const ModelSpec& spec) {
    Mat ll(data.size(), spec.classes);
    for (int k = 0; k < spec.classes; ++k) {
        validate(theta.classes[k], spec.layout, data.waves());
        class_loglik_all(data, ClassKernel(theta.classes[k], spec.layout), ll.col(k));
    }
    return ll;
}

Mat gating_logliks(const LongitudinalDataset& data, const GatingParameters& gating) {
    const int K = gating.classes();
    Mat lp(data.size(), K);
    Vec row(K);
    for (std::size_t i = 0; i < data.size(); ++i) {
        gating_log_probabilities(K > 1 ? data.rows[i].xg.head(gating.coef.cols()).eval() : Vec(), gating, row);
        lp.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return lp;
}

double combine_mixture(const Mat& class_ll, const Mat& log_pi) {
    double total = 0.0;
    const Eigen::Index K = class_ll.cols();
    for (Eigen::Index i = 0; i < class_ll.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < K; ++k) {
            // A single infeasible class density makes the whole point infeasible.
            if (!std::isfinite(class_ll(i, k))) return kInfeasible;
            mx = std::max(mx, class_ll(i, k) + log_pi(i, k));
        }
        if (!std::isfinite(mx)) return kInfeasible;
        double s = 0.0;
        for (Eigen::Index k = 0; k < K; ++k) s += std::exp(class_ll(i, k) + log_pi(i, k) - mx);
        total += mx + std::log(s);
    }
    return total;
}

double mixture_loglik(const LongitudinalDataset& data, const Theta& theta, const ModelSpec& spec) {
    if (static_cast<int>(theta.classes.size()) != spec.classes) throw ModelError("theta has wrong number of classes");
    if (spec.classes > 1 && data.gating_tics() < spec.gating_tics)
        throw ModelError("dataset has fewer first-type TICs than the gating function uses");
    return combine_mixture(class_logliks(data, theta, spec), gating_logliks(data, theta.gating));
}

double mixture_loglik_reference(const LongitudinalDataset& data, const Theta& theta, const ModelSpec& spec) {
    double total = 0.0;
    for (const auto& ind : data.rows) {
        const Vec pi = spec.classes > 1 ? gating_probabilities(ind.xg.head(spec.gating_tics), theta.gating)
                                        : Vec::Ones(1).eval();
        std::vector<double> terms;
        double mx = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < spec.classes; ++k) {
            const double l = class_loglik_reference(ind, theta.classes[k], spec.layout);
            terms.push_back(std::log(pi[k]) + l);
            mx = std::max(mx, terms.back());
        }
        if (!std::isfinite(mx)) return kInfeasible;
        double s = 0.0;
        for (double t : terms) s += std::exp(t - mx);
        total += mx + std::log(s);
    }
    return total;
}

// ---------------------------------------------------------------------------

MixtureObjective::MixtureObjective(const LongitudinalDataset& data, const ModelSpec& spec)
    : data_(data), spec_(spec), map_(spec, data.waves()) {
    if (spec.classes > 1 && data.gating_tics() < spec.gating_tics)
        throw ModelError("dataset has fewer first-type TICs than the gating function uses");
}

void MixtureObjective::eval_class(const Vec& x, int k, Eigen::Ref<Vec> out) const {
    const ClassParameters p =
        unpack_class(x.segment(map_.class_offset(k), map_.class_block_size()), spec_.layout, map_.waves());
    class_loglik_all(data_, ClassKernel(p, spec_.layout), out);
}

void MixtureObjective::eval_gating(const Vec& x, Mat& out) const {
    const GatingParameters g =
        unpack_gating(x.tail(map_.size() - map_.gating_offset()), spec_.classes, spec_.gating_tics);
    out = gating_logliks(data_, g);
}

void MixtureObjective::ensure_base(const Vec& x) {
    if (base_x_.size() == x.size() && base_x_ == x) return;
    value(x);
}

double MixtureObjective::value(const Vec& x) {
    if (x.size() != map_.size()) throw ModelError("packed vector has wrong length");
    if (!x.allFinite()) return std::numeric_limits<double>::infinity();
    ll_.resize(static_cast<Eigen::Index>(data_.size()), spec_.classes);
    for (int k = 0; k < spec_.classes; ++k) eval_class(x, k, ll_.col(k));
    eval_gating(x, lp_);
    base_x_ = x;
    const double l = combine_mixture(ll_, lp_);
    base_value_ = std::isfinite(l) ? -l : std::numeric_limits<double>::infinity();
    return base_value_;
}

namespace {
double neg(double l) { return std::isfinite(l) ? -l : std::numeric_limits<double>::infinity(); }
}  // namespace

Vec MixtureObjective::gradient(const Vec& x, double rel_step) {
    ensure_base(x);
    const int P = map_.size();
    Vec g(P);
    Mat ll = ll_;
    Mat lp = lp_;
    Vec col(ll.rows());
    for (int i = 0; i < P; ++i) {
        const double h = rel_step * std::max(1.0, std::abs(x[i]));
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const int k = map_.owner(i);
        double fp, fm;
        if (k >= 0) {
            eval_class(xp, k, col);
            ll.col(k) = col;
            fp = neg(combine_mixture(ll, lp_));
            eval_class(xm, k, col);
            ll.col(k) = col;
            fm = neg(combine_mixture(ll, lp_));
            ll.col(k) = ll_.col(k);
        } else {
            eval_gating(xp, lp);
            fp = neg(combine_mixture(ll_, lp));
            eval_gating(xm, lp);
            fm = neg(combine_mixture(ll_, lp));
        }
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Vec MixtureObjective::forward_gradient(const Vec& x, double rel_step) {
    ensure_base(x);
    const double f0 = base_value_;
    const int P = map_.size();
    Vec g(P);
    for (int i = 0; i < P; ++i) {
        const double h = rel_step * std::max(1.0, std::abs(x[i]));
        Vec xp = x;
        xp[i] += h;
        Mat ll = ll_;
        Mat lp = lp_;
        const int k = map_.owner(i);
        if (k >= 0) {
            Vec col(ll.rows());
            eval_class(xp, k, col);
            ll.col(k) = col;
        } else {
            eval_gating(xp, lp);
        }
        g[i] = (neg(combine_mixture(ll, lp)) - f0) / h;
    }
    return g;
}

Mat MixtureObjective::hessian(const Vec& x, double rel_step) {
    ensure_base(x);
    const int P = map_.size();
    const auto N = static_cast<Eigen::Index>(data_.size());
    Vec h(P);
    for (int i = 0; i < P; ++i) h[i] = rel_step * (1.0 + std::abs(x[i]));

    // Single perturbations x +/- h_i: cached class columns or gating tables.
    std::vector<Vec> col_p(P), col_m(P);
    std::vector<Mat> lp_p(P), lp_m(P);
    for (int i = 0; i < P; ++i) {
        Vec xp = x, xm = x;
        xp[i] += h[i];
        xm[i] -= h[i];
        const int k = map_.owner(i);
        if (k >= 0) {
            col_p[i].resize(N), col_m[i].resize(N);
            eval_class(xp, k, col_p[i]);
            eval_class(xm, k, col_m[i]);
        } else {
            eval_gating(xp, lp_p[i]);
            eval_gating(xm, lp_m[i]);
        }
    }

    Mat H(P, P);
    Mat ll(N, spec_.classes);
    Mat lp;
    Vec col(N);
    const double signs[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    for (int i = 0; i < P; ++i) {
        for (int j = i; j < P; ++j) {
            const int ki = map_.owner(i);
            const int kj = map_.owner(j);
            double f[4];
            for (int s = 0; s < 4; ++s) {
                const double si = signs[s][0], sj = signs[s][1];
                ll = ll_;
                const Mat* lpp = &lp_;
                if (ki >= 0 && ki == kj) {
                    Vec xs = x;
                    xs[i] += si * h[i];
                    xs[j] += sj * h[j];
                    eval_class(xs, ki, col);
                    ll.col(ki) = col;
                } else if (ki < 0 && kj < 0) {
                    Vec xs = x;
                    xs[i] += si * h[i];
                    xs[j] += sj * h[j];
                    eval_gating(xs, lp);
                    lpp = &lp;
                } else {
                    // i and j touch disjoint pieces: reuse single perturbations.
                    for (int which = 0; which < 2; ++which) {
                        const int idx = which == 0 ? i : j;
                        const double sg = which == 0 ? si : sj;
                        const int k = map_.owner(idx);
                        if (k >= 0)
                            ll.col(k) = sg > 0 ? col_p[idx] : col_m[idx];
                        else
                            lpp = sg > 0 ? &lp_p[idx] : &lp_m[idx];
                    }
                }
                f[s] = neg(combine_mixture(ll, *lpp));
            }
            H(i, j) = H(j, i) = (f[0] - f[1] - f[2] + f[3]) / (4.0 * h[i] * h[j]);
        }
    }
    return H;
}

}  // namespace gmmtvc
