#pragma once

#include "gmmtvc/classification.hpp"
#include "gmmtvc/optimizer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gmmtvc {

struct FitOptions {
    int max_attempts = 10;
    /// Converged solutions to collect before stopping; the best one is kept.
    int starts = 1;
    std::uint64_t seed = 1;
    BfgsOptions bfgs;
    /// A class whose expected share falls below this counts as a failed attempt.
    double min_class_share = 0.01;
    /// Starting values for the first attempt in place of the k-means start.
    std::optional<Theta> start;
    /// Multiplicative and additive jitter sd applied to packed values on retries.
    double jitter_scale = 0.25;
    double jitter_shift = 0.05;
};

enum class FitStatus { Converged, Failed };

struct FitResult {
    ModelSpec spec;
    int waves = 0;
    int n = 0;
    FitStatus status = FitStatus::Failed;
    int attempts_used = 0;
    std::string message;

    Theta estimates;
    Vec packed;
    std::vector<std::string> names;  ///< reporting-scale names
    Vec values;                      ///< reporting-scale estimates
    Vec standard_errors;             ///< delta-method Wald SEs (same order)
    Mat packed_covariance;           ///< inverse Hessian on the packed scale

    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    int n_free_parameters = 0;
    PosteriorMatrix posterior;

    bool converged() const { return status == FitStatus::Converged; }
    /// Index of a reporting-scale parameter by name; -1 if absent.
    int index_of(const std::string& name) const;
    double lower(int i) const { return values[i] - 1.959963984540054 * standard_errors[i]; }
    double upper(int i) const { return values[i] + 1.959963984540054 * standard_errors[i]; }
};

/// FIML fit by BFGS from k-means starts, retrying from jittered starts. On
/// success classes are ordered by ascending baseline outcome mean and SEs
/// come from the inverse numerical Hessian.
FitResult fit(const LongitudinalDataset& data, const ModelSpec& spec, const FitOptions& options = {});

/// Fills the derived pieces of a result (relabeling, Hessian, SEs, ICs,
/// posterior) from a packed optimum. Returns false with a message when the
/// Hessian is not positive definite.
bool finalize_fit(const LongitudinalDataset& data, MixtureObjective& objective, const Vec& packed,
                  FitResult& result);

/// Reporting-scale values and delta-method SEs after reordering the classes
/// (new class k = fitted class order[k], gating re-referenced).
void permuted_report(const FitResult& result, const std::vector<int>& order, Vec& values, Vec& standard_errors);

inline double aic_of(double loglik, int p) { return -2.0 * loglik + 2.0 * p; }
double bic_of(double loglik, int p, std::size_t n);

struct EnumerationRow {
    int classes = 0;
    bool converged = false;
    double neg2ll = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    int n_free_parameters = 0;
    std::vector<double> residual_variances;  ///< theta_y per class
    std::vector<double> mixing_proportions;
    std::string message;
};

struct EnumerationResult {
    std::vector<EnumerationRow> rows;
    int selected = 0;  ///< argmin BIC among converged rows; 0 when none converged
};

/// Index of the smallest finite BIC among the flagged rows, or -1.
int select_by_bic(const std::vector<double>& bic, const std::vector<bool>& usable = {});

/// Fits K = 1..k_max with everything else taken from spec_template. The
/// usual first pass drops covariates (has_tic, has_tvc off, gating_tics 0).
EnumerationResult enumerate_classes(const LongitudinalDataset& data, const ModelSpec& spec_template, int k_max,
                                    const FitOptions& options = {});

}  // namespace gmmtvc
