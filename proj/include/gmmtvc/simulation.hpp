#pragma once

#include "gmmtvc/fit.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gmmtvc {

/// Generating values for one latent class, outcome quantities in the
/// original bilinear basis (eta0, eta1, eta2).
struct ClassTruth {
    Eigen::Vector3d growth_mean = Eigen::Vector3d::Zero();  ///< alpha_y
    Eigen::Matrix3d growth_cov = Eigen::Matrix3d::Identity();  ///< Psi_eta_y (unexplained)
    double knot = 4.5;
    Eigen::Vector3d beta_tic = Eigen::Vector3d::Zero();
    Eigen::Vector3d beta_tvc = Eigen::Vector3d::Zero();
    Eigen::Vector2d tvc_mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d tvc_cov = Eigen::Matrix2d::Identity();
    Vec rates;  ///< J-1 relative rates, rates[0] == 1
    double mu_x = 0.0;
    double phi_x = 1.0;
    double rho_bl = 0.0;
    double kappa = 0.0;
    double theta_x = 1.0;
    double theta_y = 1.0;
    double residual_corr = 0.0;  ///< theta_xy / sqrt(theta_x theta_y)
};

enum class MembershipRule { Stochastic, Modal };

struct SimulationCondition {
    std::string name;
    int n = 500;
    int waves = 10;  ///< nominal times 0, 1, ..., waves-1
    double delta = 0.25;
    double xg_corr = 0.3;
    /// Gating truth for classes 2..K: row k-2 = (intercept, coef_1, coef_2).
    Mat gating;
    TvcDecomposition decomposition = TvcDecomposition::IntervalSlopes;
    MembershipRule membership = MembershipRule::Stochastic;
    double mahalanobis_d = 0.86;  ///< descriptive only
    std::vector<ClassTruth> classes;

    int class_count() const { return static_cast<int>(classes.size()); }
    void validate() const;
};

/// Regression coefficients (beta_tic, beta_tvc) giving each outcome growth
/// factor a share r2 of explained variance, with trait_share of the
/// explained part attributed to the trait feature. phi_x = Phi_x(0,0) = 1.
std::pair<Eigen::Vector3d, Eigen::Vector3d> explained_variance_coefficients(const Eigen::Matrix3d& growth_cov,
                                                                           double r2, double trait_share,
                                                                           double rho_bl);

/// The reference design with the selectable levels. allocation: 1 (1:1) or
/// 2 (1:2); knot_gap 1.0, 1.5 or 2.0; scenario 1..3; theta_y 1 or 2.
SimulationCondition reference_condition(int allocation = 1, double knot_gap = 1.0, int scenario = 2,
                                        double theta_y = 1.0,
                                        TvcDecomposition decomposition = TvcDecomposition::IntervalSlopes);

/// Three-class variant of the reference design with equally spaced knots.
SimulationCondition three_class_condition(double knot_gap = 2.0, int scenario = 1, double theta_y = 1.0);

/// Generating parameters in the library's internal representation.
Theta truth_theta(const SimulationCondition& cond);
ModelSpec truth_spec(const SimulationCondition& cond);

/// Draws a dataset by the step-by-step recipe: x_g, membership, covariates
/// and growth factors, occasions, loadings, state features, true scores and
/// residuals. Bit-reproducible given seed.
LongitudinalDataset generate_dataset(const SimulationCondition& cond, std::uint64_t seed);

/// Seed for replication `index` of a study with base seed `base`.
std::uint64_t replication_seed(std::uint64_t base, int index);

// Performance metrics over S replications.
double relative_bias(const std::vector<double>& estimates, double truth);
double empirical_se(const std::vector<double>& estimates);
double relative_rmse(const std::vector<double>& estimates, double truth);
double coverage(const std::vector<double>& lower, const std::vector<double>& upper, double truth);
double mc_se_of_bias(const std::vector<double>& estimates);

struct ParameterMetrics {
    std::string name;
    double truth = 0.0;
    double mean = 0.0;
    double relative_bias = 0.0;  ///< absolute bias when absolute is set
    double empirical_se = 0.0;
    double relative_rmse = 0.0;  ///< plain RMSE when absolute is set
    double coverage = 0.0;
    double mc_se = 0.0;
    bool absolute = false;  ///< truth is zero: bias and RMSE are unscaled
};

struct ReplicationRecord {
    int index = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    int attempts = 0;
    double loglik = 0.0;
    double truth_loglik = 0.0;
    double accuracy = 0.0;
    std::vector<int> alignment;  ///< fitted class matched to each generating class
    Vec estimates;               ///< aligned, reporting scale
    Vec standard_errors;
    std::string message;
};

struct MetricsReport {
    std::string condition;
    std::vector<ParameterMetrics> parameters;
    double mean_accuracy = 0.0;
    double convergence_rate = 0.0;
    int reps_used = 0;
    int reps_attempted = 0;
    bool partial = false;  ///< attempt cap reached before S converged fits
};

struct MonteCarloOptions {
    int reps = 100;
    std::uint64_t seed = 2023;
    int jobs = 1;
    FitOptions fit;
    /// Start the first attempt of every fit at the generating values.
    bool truth_start = false;
};

struct MonteCarloRun {
    MetricsReport report;
    std::vector<ReplicationRecord> records;  ///< every attempted replication, index order
};

/// Permutation of fitted classes onto generating classes minimizing the
/// summed squared distance of knots and baseline means.
std::vector<int> align_to_truth(const Theta& fitted, const Theta& truth, const ModelLayout& layout);

/// Generate -> fit -> align for replication index.
ReplicationRecord run_replication(const SimulationCondition& cond, const ModelSpec& spec, int index,
                                  const MonteCarloOptions& options);

/// Runs replications until `reps` converged (cap 2 * reps attempts).
/// Parallel over replications; results are independent of jobs.
MonteCarloRun run_condition(const SimulationCondition& cond, const ModelSpec& spec,
                            const MonteCarloOptions& options);

/// Rebuilds the report from replication records (converged ones, in index
/// order, up to reps).
MetricsReport summarize(const SimulationCondition& cond, const ModelSpec& spec,
                        const std::vector<ReplicationRecord>& records, int reps);

/// Reporting-scale truth vector matching report_names(spec, waves).
Vec truth_report(const SimulationCondition& cond, const ModelSpec& spec);

// Text (JSON) I/O.
std::string condition_to_json(const SimulationCondition& cond);
SimulationCondition condition_from_json(const std::string& text);
std::string records_to_csv(const std::vector<ReplicationRecord>& records, const std::vector<std::string>& names);
std::vector<ReplicationRecord> records_from_csv(const std::string& text);
std::string metrics_to_csv(const MetricsReport& report);

}  // namespace gmmtvc
