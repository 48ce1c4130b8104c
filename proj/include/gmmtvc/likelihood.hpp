#pragma once

#include "gmmtvc/dataset.hpp"
#include "gmmtvc/packing.hpp"

#include <limits>

namespace gmmtvc {

inline constexpr double kInfeasible = -std::numeric_limits<double>::infinity();

/// Per-class quantities that do not depend on the individual: the latent
/// covariance conditional on x_e (as a square-root factor), and the inverse
/// of the contemporaneous residual block. The density of one individual is
/// then evaluated with the Woodbury identity and the matrix determinant
/// lemma in O(J q^2) with q = latent dimension after conditioning on x_e.
class ClassKernel {
public:
    ClassKernel(const ClassParameters& params, const ModelLayout& layout);

    bool feasible() const { return feasible_; }
    /// log-density of the individual's observed entries; kInfeasible when
    /// the class parameters are infeasible.
    double loglik(const Individual& ind) const;

private:
    ClassParameters p_;
    ModelLayout layout_;
    int C_ = 0;
    int q_ = 0;
    bool feasible_ = true;
    double eta0_shift_ = 0.0;  // E[eta0 | x_e] slope in x_e
    Mat S_;                    // conditional latent covariance = S S'
    double log_phi_x_ = 0.0;
    Eigen::Matrix2d r_inv_ = Eigen::Matrix2d::Zero();
    double r_logdet_ = 0.0;
};

/// Observed-entry (FIML) log-density of one individual under one class.
double class_loglik(const Individual& ind, const ClassParameters& params, const ModelLayout& layout);

/// Serial reference: dense implied moments, subvector selection and a
/// Cholesky factorization of the full observed covariance. Returns
/// kInfeasible when that covariance is not positive definite.
double class_loglik_reference(const Individual& ind, const ClassParameters& params, const ModelLayout& layout);

/// Evaluates kernel.loglik for every individual into out (OpenMP over
/// individuals; each thread writes disjoint entries).
void class_loglik_all(const LongitudinalDataset& data, const ClassKernel& kernel, Eigen::Ref<Vec> out);

/// N x K per-class log-densities.
Mat class_logliks(const LongitudinalDataset& data, const Theta& theta, const ModelSpec& spec);
/// N x K log gating probabilities.
Mat gating_logliks(const LongitudinalDataset& data, const GatingParameters& gating);

/// sum_i log sum_k exp(lp(i,k) + ll(i,k)) with a fixed summation order.
double combine_mixture(const Mat& class_ll, const Mat& log_pi);

/// Mixture log-likelihood using the parallel kernel.
double mixture_loglik(const LongitudinalDataset& data, const Theta& theta, const ModelSpec& spec);
/// Serial reference built on class_loglik_reference.
double mixture_loglik_reference(const LongitudinalDataset& data, const Theta& theta, const ModelSpec& spec);

/// Negative mixture log-likelihood over the packed vector. Caches the
/// per-class log-densities of the last evaluated point so that finite
/// differences only recompute the class a parameter belongs to.
class MixtureObjective {
public:
    MixtureObjective(const LongitudinalDataset& data, const ModelSpec& spec);

    const ParameterMap& map() const { return map_; }
    const LongitudinalDataset& data() const { return data_; }

    /// -loglik; +inf for infeasible points.
    double value(const Vec& x);
    /// Central-difference gradient with step rel_step * max(1, |x_i|).
    Vec gradient(const Vec& x, double rel_step = 1e-5);
    /// Forward-difference gradient, used to cross-check the central one.
    Vec forward_gradient(const Vec& x, double rel_step = 1e-7);
    /// Central second differences with step rel_step * (1 + |x_i|).
    Mat hessian(const Vec& x, double rel_step = 1e-4);

    const Mat& last_class_ll() const { return ll_; }
    const Mat& last_log_pi() const { return lp_; }

private:
    void eval_class(const Vec& x, int k, Eigen::Ref<Vec> out) const;
    void eval_gating(const Vec& x, Mat& out) const;
    void ensure_base(const Vec& x);

    const LongitudinalDataset& data_;
    ModelSpec spec_;
    ParameterMap map_;
    Vec base_x_;
    Mat ll_;
    Mat lp_;
    double base_value_ = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace gmmtvc
