#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <variant>

namespace gmmtvc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised on inconsistent dimensions or invalid model inputs.
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Measurement times for one individual. Strictly increasing, at least 3
/// waves, all finite.
class Occasions {
public:
    Occasions() = default;
    explicit Occasions(Vec times);

    const Vec& times() const { return times_; }
    Eigen::Index size() const { return times_.size(); }
    double operator[](Eigen::Index j) const { return times_[j]; }
    double front() const { return times_[0]; }
    double back() const { return times_[times_.size() - 1]; }

    /// Checks the invariants without constructing; returns an empty string
    /// when valid.
    static std::string validate(const Vec& times);

private:
    Vec times_;
};

/// Relative rates of change of the TVC over the J-1 intervals. The first
/// rate is the identification constraint and is always exactly 1.
class RelativeRates {
public:
    RelativeRates() = default;
    explicit RelativeRates(Vec rates);
    /// Builds rates from the J-2 free entries (rates[1..]).
    static RelativeRates from_free(const Vec& free);

    const Vec& values() const { return rates_; }
    Eigen::Index size() const { return rates_.size(); }
    double operator[](Eigen::Index j) const { return rates_[j]; }
    Vec free() const { return rates_.tail(rates_.size() - 1); }

private:
    Vec rates_;
};

enum class TvcDecomposition { IntervalSlopes, IntervalChanges };

struct TvcGrowthFactors {
    double eta0 = 0.0;  ///< latent baseline
    double eta1 = 0.0;  ///< slope of the first interval
};

struct Linear {};
struct Quadratic {};
struct NegativeExponential { double b = 1.0; };
struct JenssBayley { double c = -1.0; };
struct BilinearSpline { double gamma = 0.0; };

/// Outcome functional form; the class-level growth coefficient (b, c or the
/// knot) lives in the alternative.
using FunctionalForm =
    std::variant<Linear, Quadratic, NegativeExponential, JenssBayley, BilinearSpline>;

enum class FormKind { Linear, Quadratic, NegativeExponential, JenssBayley, BilinearSpline };

FormKind kind_of(const FunctionalForm& form);
/// Number of outcome growth factors.
int growth_factor_count(FormKind kind);
inline int growth_factor_count(const FunctionalForm& form) { return growth_factor_count(kind_of(form)); }
/// True when the form carries a class-level coefficient (b, c, knot).
bool has_form_coefficient(FormKind kind);
double form_coefficient(const FunctionalForm& form);
FunctionalForm make_form(FormKind kind, double coefficient = 0.0);

std::string to_string(FormKind kind);
FormKind form_kind_from_string(const std::string& name);
std::string to_string(TvcDecomposition d);
TvcDecomposition decomposition_from_string(const std::string& name);

/// J x 2 TVC loading matrix: a column of ones and the cumulative
/// rate-weighted elapsed time.
Mat tvc_loadings(const Occasions& occasions, const RelativeRates& rates);

/// Interval-specific slopes or changes implied by the TVC growth factors.
/// The first element is always 0.
Vec state_features(const TvcGrowthFactors& factors, const Occasions& occasions,
                   const RelativeRates& rates, TvcDecomposition decomposition);

/// J x C outcome loadings. Bilinear splines use the (1, t - g, |t - g|)
/// basis. Throws if the knot is outside the observed time range.
Mat outcome_loadings(const FunctionalForm& form, const Occasions& occasions);

namespace detail {
// Unchecked versions used by the likelihood kernels.
void fill_tvc_loadings(const Vec& times, const Vec& rates, Eigen::Ref<Mat> out);
void fill_state_loadings(const Vec& times, const Vec& rates, TvcDecomposition decomposition,
                         Eigen::Ref<Vec> out);
void fill_outcome_loadings(const FunctionalForm& form, const Vec& times, Eigen::Ref<Mat> out);
}  // namespace detail

struct BilinearFactors {
    double eta0 = 0.0;
    double eta1 = 0.0;
    double eta2 = 0.0;
};

/// (eta0, eta1, eta2) -> (eta0 + g*eta1, (eta1 + eta2)/2, (eta2 - eta1)/2).
Eigen::Vector3d reparameterize_bilinear(const BilinearFactors& f, double gamma);
BilinearFactors inverse_reparameterize_bilinear(const Eigen::Vector3d& r, double gamma);

/// Linear map T with reparameterized = T * original; lets covariance and
/// coefficient vectors move between bases.
Eigen::Matrix3d bilinear_transform(double gamma);
Eigen::Matrix3d bilinear_inverse_transform(double gamma);

}  // namespace gmmtvc
