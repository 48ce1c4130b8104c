#include "gmmtvc/simulation.hpp"

#include "gmmtvc/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace gmmtvc {

namespace {

using nlohmann::json;

// Square-root factor of a PSD matrix (Cholesky when possible).
Mat psd_factor(const Mat& m) {
    Eigen::LLT<Mat> llt(m);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw ModelError("covariance matrix is not positive semidefinite");
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

double bilinear_original(const Eigen::Vector3d& eta, double knot, double t) {
    return t <= knot ? eta[0] + eta[1] * t : eta[0] + eta[1] * knot + eta[2] * (t - knot);
}

Vec scenario_rates(int scenario, int cls, int waves) {
    Vec r(waves - 1);
    for (int j = 0; j < waves - 1; ++j) {
        if (scenario == 3)
            r[j] = cls == 0 ? 1.0 - 0.12 * j : 1.0 - 0.08 * j;
        else
            r[j] = 1.0 - 0.1 * j;
    }
    return r;
}

json mat_json(const Mat& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        a.push_back(row);
    }
    return a;
}

Mat json_mat(const json& a) {
    const auto rows = static_cast<Eigen::Index>(a.size());
    const auto cols = rows ? static_cast<Eigen::Index>(a.at(0).size()) : 0;
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(a.at(r).size()) != cols) throw ModelError("ragged matrix in condition file");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a.at(r).at(c).get<double>();
    }
    return m;
}

json vec_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vec json_vec(const json& a, Eigen::Index expected = -1) {
    const auto v = a.get<std::vector<double>>();
    if (expected >= 0 && static_cast<Eigen::Index>(v.size()) != expected)
        throw ModelError("condition file: expected a vector of length " + std::to_string(expected));
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Mat json_square(const json& a, Eigen::Index dim) {
    Mat m = json_mat(a);
    if (m.rows() != dim || m.cols() != dim)
        throw ModelError("condition file: expected a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
    return m;
}

std::vector<std::vector<int>> permutations(int k) {
    std::vector<int> p(static_cast<std::size_t>(k));
    std::iota(p.begin(), p.end(), 0);
    std::vector<std::vector<int>> out;
    do out.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
    return out;
}

}  // namespace

void SimulationCondition::validate() const {
    if (n < 1) throw ModelError("condition: n must be positive");
    if (waves < 3) throw ModelError("condition: need at least 3 waves");
    if (!(delta >= 0.0 && delta < 0.5)) throw ModelError("condition: delta must lie in [0, 0.5)");
    if (!(std::abs(xg_corr) < 1.0)) throw ModelError("condition: xg_corr must lie in (-1, 1)");
    if (classes.empty()) throw ModelError("condition: no classes");
    if (gating.rows() != class_count() - 1 || (class_count() > 1 && gating.cols() != 3))
        throw ModelError("condition: gating must have K-1 rows of (intercept, coef1, coef2)");
    for (const auto& c : classes) {
        if (c.rates.size() != waves - 1) throw ModelError("condition: rates must have length waves-1");
        if (c.rates[0] != 1.0) throw ModelError("condition: the first relative rate must be 1");
        if (!(c.knot > 0.0 && c.knot < waves - 1)) throw ModelError("condition: knot outside the time range");
        if (!(std::abs(c.rho_bl) <= 1.0) || !(std::abs(c.residual_corr) <= 1.0))
            throw ModelError("condition: correlations must lie in [-1, 1]");
        if (!(c.phi_x >= 0.0 && c.theta_x >= 0.0 && c.theta_y >= 0.0))
            throw ModelError("condition: variances must be non-negative");
        psd_factor(c.growth_cov);
        psd_factor(c.tvc_cov);
    }
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> explained_variance_coefficients(const Eigen::Matrix3d& growth_cov,
                                                                           double r2, double trait_share,
                                                                           double rho_bl) {
    if (!(r2 >= 0.0 && r2 < 1.0)) throw ModelError("r2 must lie in [0, 1)");
    if (!(trait_share >= 0.0 && trait_share < 1.0)) throw ModelError("trait_share must lie in [0, 1)");
    const double ratio = trait_share / (1.0 - trait_share);  // beta_tvc^2 / beta_tic^2
    const double e = r2 / (1.0 - r2);
    const double a = std::sqrt(e / (1.0 + ratio + 2.0 * rho_bl * std::sqrt(ratio)));
    Eigen::Vector3d tic, tvc;
    for (int g = 0; g < 3; ++g) {
        tic[g] = a * std::sqrt(growth_cov(g, g));
        tvc[g] = tic[g] * std::sqrt(ratio);
    }
    return {tic, tvc};
}

SimulationCondition reference_condition(int allocation, double knot_gap, int scenario, double theta_y,
                                        TvcDecomposition decomposition) {
    if (allocation != 1 && allocation != 2) throw ModelError("allocation must be 1 (1:1) or 2 (1:2)");
    if (scenario < 1 || scenario > 3) throw ModelError("scenario must be 1, 2 or 3");
    SimulationCondition c;
    std::ostringstream name;
    name << "alloc" << allocation << "_gap" << knot_gap << "_scen" << scenario << "_theta" << theta_y << "_"
         << to_string(decomposition);
    c.name = name.str();
    c.decomposition = decomposition;
    c.gating.resize(1, 3);
    c.gating << (allocation == 1 ? 0.0 : 0.775), std::log(1.5), std::log(1.7);
    Eigen::Matrix3d psi;
    psi << 25, 1.5, 1.5, 1.5, 1.0, 0.3, 1.5, 0.3, 1.0;
    const double r2[2] = {0.13, 0.26};
    const Eigen::Vector3d means[2] = {{48, 4.5, 1.65}, {52, 5.0, 1.80}};
    const double knots[2] = {4.5 + 0.5 * knot_gap, 4.5 - 0.5 * knot_gap};
    const double kappa[2] = {0.3, 0.6};
    for (int k = 0; k < 2; ++k) {
        ClassTruth t;
        t.growth_mean = means[k];
        t.growth_cov = psi;
        t.knot = knots[k];
        t.tvc_mean = {0.0, scenario == 2 ? (k == 0 ? 4.0 : 6.0) : 5.0};
        t.tvc_cov << 1.0, 0.3, 0.3, 1.0;
        t.rates = scenario_rates(scenario, k, c.waves);
        t.mu_x = 0.0;
        t.phi_x = 1.0;
        t.rho_bl = 0.3;
        t.kappa = kappa[k];
        t.theta_x = 1.0;
        t.theta_y = theta_y;
        t.residual_corr = 0.3;
        std::tie(t.beta_tic, t.beta_tvc) = explained_variance_coefficients(psi, r2[k], 0.7, t.rho_bl);
        c.classes.push_back(t);
    }
    return c;
}

SimulationCondition three_class_condition(double knot_gap, int scenario, double theta_y) {
    SimulationCondition c = reference_condition(1, knot_gap, scenario, theta_y);
    c.name = "three_class_gap" + std::to_string(knot_gap).substr(0, 3);
    ClassTruth low = c.classes[0];
    ClassTruth mid = c.classes[0];
    ClassTruth high = c.classes[1];
    low.growth_mean = {44, 4.0, 1.5};
    low.knot = 4.5 + knot_gap;
    mid.knot = 4.5;
    high.knot = 4.5 - knot_gap;
    c.classes = {low, mid, high};
    c.gating.resize(2, 3);
    c.gating << 0.0, std::log(1.5), std::log(1.7), 0.0, std::log(1.5), std::log(1.7);
    return c;
}

ModelSpec truth_spec(const SimulationCondition& cond) {
    ModelSpec s;
    s.classes = cond.class_count();
    s.layout.form = FormKind::BilinearSpline;
    s.layout.decomposition = cond.decomposition;
    s.layout.has_tic = true;
    s.layout.has_tvc = true;
    s.gating_tics = 2;
    return s;
}

Theta truth_theta(const SimulationCondition& cond) {
    cond.validate();
    const ModelSpec spec = truth_spec(cond);
    Theta t = make_theta(spec, cond.waves);
    for (int k = 0; k < cond.class_count(); ++k) {
        const ClassTruth& c = cond.classes[static_cast<std::size_t>(k)];
        ClassParameters p = make_class_parameters(spec.layout, cond.waves);
        p.mu_x = c.mu_x;
        p.phi_x = c.phi_x;
        p.mu_eta_x = c.tvc_mean;
        p.Phi_eta_x = c.tvc_cov;
        p.rates = RelativeRates(c.rates);
        p.alpha_y = c.growth_mean;
        p.Psi_eta_y = c.growth_cov;
        p.beta_tic = c.beta_tic;
        p.beta_tvc = c.beta_tvc;
        p.kappa = c.kappa;
        p.rho_bl = c.rho_bl;
        p.theta_x = c.theta_x;
        p.theta_y = c.theta_y;
        p.theta_xy = c.residual_corr * std::sqrt(c.theta_x * c.theta_y);
        p.form = BilinearSpline{c.knot};
        t.classes[static_cast<std::size_t>(k)] = to_internal_basis(p);
    }
    for (int k = 0; k + 1 < cond.class_count(); ++k) {
        t.gating.intercept[k] = cond.gating(k, 0);
        t.gating.coef(k, 0) = cond.gating(k, 1);
        t.gating.coef(k, 1) = cond.gating(k, 2);
    }
    return t;
}

LongitudinalDataset generate_dataset(const SimulationCondition& cond, std::uint64_t seed) {
    cond.validate();
    const int K = cond.class_count();
    const int J = cond.waves;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    GatingParameters gating = GatingParameters::zeros(K, 2);
    for (int k = 0; k + 1 < K; ++k) {
        gating.intercept[k] = cond.gating(k, 0);
        gating.coef(k, 0) = cond.gating(k, 1);
        gating.coef(k, 1) = cond.gating(k, 2);
    }

    // Per-class factors for (x_e, eta0_x, eta1_x) and the unexplained
    // outcome growth factors.
    std::vector<Mat> cov_factor, growth_factor;
    for (const auto& c : cond.classes) {
        Eigen::Matrix3d v = Eigen::Matrix3d::Zero();
        v(0, 0) = c.phi_x;
        v.block<2, 2>(1, 1) = c.tvc_cov;
        v(0, 1) = v(1, 0) = c.rho_bl * std::sqrt(c.phi_x * c.tvc_cov(0, 0));
        cov_factor.push_back(psd_factor(v));
        growth_factor.push_back(psd_factor(c.growth_cov));
    }

    LongitudinalDataset data;
    data.rows.resize(static_cast<std::size_t>(cond.n));
    // Step 1: first-type TICs and membership.
    for (int i = 0; i < cond.n; ++i) {
        Individual& ind = data.rows[static_cast<std::size_t>(i)];
        ind.id = std::to_string(i + 1);
        const double z1 = std_normal(rng), z2 = std_normal(rng);
        ind.xg = Vec(2);
        ind.xg << z1, cond.xg_corr * z1 + std::sqrt(1.0 - cond.xg_corr * cond.xg_corr) * z2;
        const Vec pi = gating_probabilities(ind.xg, gating);
        int z = 0;
        if (cond.membership == MembershipRule::Modal) {
            pi.maxCoeff(&z);
        } else {
            double u = unit(rng), acc = 0.0;
            z = K - 1;
            for (int k = 0; k < K; ++k) {
                acc += pi[k];
                if (u < acc) {
                    z = k;
                    break;
                }
            }
        }
        ind.label = z;
    }
    for (int i = 0; i < cond.n; ++i) {
        Individual& ind = data.rows[static_cast<std::size_t>(i)];
        const int z = ind.label;
        const ClassTruth& c = cond.classes[static_cast<std::size_t>(z)];
        // Step 2: second-type TIC, TVC growth factors, outcome growth factors.
        Eigen::Vector3d u(std_normal(rng), std_normal(rng), std_normal(rng));
        const Eigen::Vector3d cov_draw = cov_factor[static_cast<std::size_t>(z)] * u;
        const double xe = c.mu_x + cov_draw[0];
        const double eta0x = c.tvc_mean[0] + cov_draw[1];
        const double eta1x = c.tvc_mean[1] + cov_draw[2];
        Eigen::Vector3d w(std_normal(rng), std_normal(rng), std_normal(rng));
        const Eigen::Vector3d eta_y = c.growth_mean + c.beta_tic * xe + c.beta_tvc * eta0x +
                                      growth_factor[static_cast<std::size_t>(z)] * w;
        ind.xe = xe;
        // Step 3: individual occasions.
        ind.times = Vec(J);
        for (int j = 0; j < J; ++j)
            ind.times[j] = j + (cond.delta > 0.0 ? cond.delta * (2.0 * unit(rng) - 1.0) : 0.0);
        // Steps 4-6: loadings, state features, true scores plus residuals.
        ind.x = Vec(J);
        ind.y = Vec(J);
        double cum = 0.0;
        const double sx = std::sqrt(c.theta_x);
        const double sy = std::sqrt(c.theta_y);
        const double rc = c.residual_corr;
        for (int j = 0; j < J; ++j) {
            const double t = ind.times[j];
            double state = 0.0;
            if (j > 0) {
                const double dt = t - ind.times[j - 1];
                cum += c.rates[j - 1] * dt;
                const double slope = eta1x * c.rates[j - 1];
                state = cond.decomposition == TvcDecomposition::IntervalSlopes ? slope : slope * dt;
            }
            const double e1 = std_normal(rng), e2 = std_normal(rng);
            ind.x[j] = eta0x + eta1x * cum + sx * e1;
            ind.y[j] = bilinear_original(eta_y, c.knot, t) + c.kappa * state +
                       sy * (rc * e1 + std::sqrt(1.0 - rc * rc) * e2);
        }
    }
    return data;
}

std::uint64_t replication_seed(std::uint64_t base, int index) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(index), 0x7f4a7c15u};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double relative_bias(const std::vector<double>& est, double truth) {
    if (est.empty()) throw ModelError("no estimates");
    if (truth == 0.0) throw ModelError("relative bias undefined for zero truth; use the absolute variant");
    double s = 0.0;
    for (double e : est) s += (e - truth) / truth;
    return s / static_cast<double>(est.size());
}

double empirical_se(const std::vector<double>& est) {
    if (est.size() < 2) throw ModelError("empirical SE needs at least two estimates");
    const double m = std::accumulate(est.begin(), est.end(), 0.0) / static_cast<double>(est.size());
    double s = 0.0;
    for (double e : est) s += (e - m) * (e - m);
    return std::sqrt(s / static_cast<double>(est.size() - 1));
}

double relative_rmse(const std::vector<double>& est, double truth) {
    if (est.empty()) throw ModelError("no estimates");
    if (truth == 0.0) throw ModelError("relative RMSE undefined for zero truth; use the absolute variant");
    double s = 0.0;
    for (double e : est) s += (e - truth) * (e - truth);
    return std::sqrt(s / static_cast<double>(est.size())) / truth;
}

double coverage(const std::vector<double>& lower, const std::vector<double>& upper, double truth) {
    if (lower.size() != upper.size() || lower.empty()) throw ModelError("interval bounds must be non-empty and paired");
    int hit = 0;
    for (std::size_t s = 0; s < lower.size(); ++s)
        if (lower[s] <= truth && truth <= upper[s]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(lower.size());
}

double mc_se_of_bias(const std::vector<double>& est) {
    return empirical_se(est) / std::sqrt(static_cast<double>(est.size()));
}

std::vector<int> align_to_truth(const Theta& fitted, const Theta& truth, const ModelLayout& layout) {
    const int K = static_cast<int>(truth.classes.size());
    if (static_cast<int>(fitted.classes.size()) != K) throw ModelError("class counts differ");
    std::vector<double> fk, tk, fb, tb;
    for (int k = 0; k < K; ++k) {
        const auto& f = fitted.classes[static_cast<std::size_t>(k)];
        const auto& t = truth.classes[static_cast<std::size_t>(k)];
        fk.push_back(has_form_coefficient(layout.form) ? form_coefficient(f.form) : 0.0);
        tk.push_back(has_form_coefficient(layout.form) ? form_coefficient(t.form) : 0.0);
        fb.push_back(baseline_growth_mean(f, layout));
        tb.push_back(baseline_growth_mean(t, layout));
    }
    std::vector<int> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& p : permutations(K)) {
        double d = 0.0;
        for (int k = 0; k < K; ++k) {
            const auto f = static_cast<std::size_t>(p[static_cast<std::size_t>(k)]);
            d += std::pow(fk[f] - tk[static_cast<std::size_t>(k)], 2) + std::pow(fb[f] - tb[static_cast<std::size_t>(k)], 2);
        }
        if (d < best_d) best_d = d, best = p;
    }
    return best;
}

Vec truth_report(const SimulationCondition& cond, const ModelSpec& spec) {
    return report_values(truth_theta(cond), spec, cond.waves);
}

ReplicationRecord run_replication(const SimulationCondition& cond, const ModelSpec& spec, int index,
                                  const MonteCarloOptions& options) {
    ReplicationRecord rec;
    rec.index = index;
    rec.seed = replication_seed(options.seed, index);
    try {
        const LongitudinalDataset data = generate_dataset(cond, rec.seed);
        const Theta truth = truth_theta(cond);
        const bool same_spec = spec == truth_spec(cond);
        if (same_spec) rec.truth_loglik = mixture_loglik(data, truth, spec);
        FitOptions fo = options.fit;
        fo.seed = rec.seed;
        if (options.truth_start && same_spec) fo.start = truth;
        const FitResult r = fit(data, spec, fo);
        rec.attempts = r.attempts_used;
        rec.message = r.message;
        rec.converged = r.converged();
        if (!rec.converged) return rec;
        rec.loglik = r.loglik;
        rec.alignment = same_spec ? align_to_truth(r.estimates, truth, spec.layout) : std::vector<int>{};
        if (rec.alignment.empty()) {
            rec.alignment.resize(static_cast<std::size_t>(spec.classes));
            std::iota(rec.alignment.begin(), rec.alignment.end(), 0);
        }
        permuted_report(r, rec.alignment, rec.estimates, rec.standard_errors);
        rec.accuracy = accuracy(modal_labels(r.posterior), data.labels());
    } catch (const std::exception& e) {
        rec.converged = false;
        rec.message = e.what();
    }
    return rec;
}

MetricsReport summarize(const SimulationCondition& cond, const ModelSpec& spec,
                        const std::vector<ReplicationRecord>& records, int reps) {
    MetricsReport rep;
    rep.condition = cond.name;
    std::vector<const ReplicationRecord*> used;
    int attempted = 0;
    for (const auto& r : records) {
        if (static_cast<int>(used.size()) >= reps) break;
        ++attempted;
        if (r.converged) used.push_back(&r);
    }
    rep.reps_used = static_cast<int>(used.size());
    rep.reps_attempted = attempted;
    rep.partial = rep.reps_used < reps;
    rep.convergence_rate = attempted ? static_cast<double>(rep.reps_used) / attempted : 0.0;
    if (used.empty()) return rep;

    double acc = 0.0;
    for (const auto* r : used) acc += r->accuracy;
    rep.mean_accuracy = acc / static_cast<double>(used.size());

    const auto names = report_names(spec, cond.waves);
    const Vec truth = spec == truth_spec(cond) ? truth_report(cond, spec) : Vec::Constant(names.size(), NAN);
    for (std::size_t p = 0; p < names.size(); ++p) {
        ParameterMetrics m;
        m.name = names[p];
        m.truth = truth[static_cast<Eigen::Index>(p)];
        std::vector<double> est, lo, hi;
        for (const auto* r : used) {
            const double e = r->estimates[static_cast<Eigen::Index>(p)];
            const double se = r->standard_errors[static_cast<Eigen::Index>(p)];
            est.push_back(e);
            lo.push_back(e - 1.959963984540054 * se);
            hi.push_back(e + 1.959963984540054 * se);
        }
        m.mean = std::accumulate(est.begin(), est.end(), 0.0) / static_cast<double>(est.size());
        m.absolute = std::abs(m.truth) < 1e-12;
        if (m.absolute) {
            m.relative_bias = m.mean - m.truth;
            double s = 0.0;
            for (double e : est) s += (e - m.truth) * (e - m.truth);
            m.relative_rmse = std::sqrt(s / static_cast<double>(est.size()));
        } else {
            m.relative_bias = relative_bias(est, m.truth);
            m.relative_rmse = relative_rmse(est, m.truth);
        }
        if (est.size() >= 2) {
            m.empirical_se = empirical_se(est);
            m.mc_se = mc_se_of_bias(est);
        }
        m.coverage = coverage(lo, hi, m.truth);
        rep.parameters.push_back(m);
    }
    return rep;
}

MonteCarloRun run_condition(const SimulationCondition& cond, const ModelSpec& spec, const MonteCarloOptions& options) {
    if (options.reps < 1) throw ModelError("reps must be at least 1");
    cond.validate();
    spec.validate();
    const int cap = 2 * options.reps;
    MonteCarloRun run;
    int converged = 0;
    int next = 0;
    while (converged < options.reps && next < cap) {
        // The batch depends only on how many converged fits are missing, so
        // the set of attempted replications does not depend on jobs.
        const int batch = std::min(options.reps - converged, cap - next);
        std::vector<ReplicationRecord> out(static_cast<std::size_t>(batch));
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, options.jobs))
        for (int b = 0; b < batch; ++b) out[static_cast<std::size_t>(b)] = run_replication(cond, spec, next + b, options);
        for (auto& r : out) {
            if (r.converged) ++converged;
            run.records.push_back(std::move(r));
        }
        next += batch;
    }
    run.report = summarize(cond, spec, run.records, options.reps);
    return run;
}

// ---------------------------------------------------------------------------

std::string condition_to_json(const SimulationCondition& c) {
    json j;
    j["name"] = c.name;
    j["n"] = c.n;
    j["waves"] = c.waves;
    j["delta"] = c.delta;
    j["xg_corr"] = c.xg_corr;
    j["gating"] = mat_json(c.gating);
    j["decomposition"] = to_string(c.decomposition);
    j["membership"] = c.membership == MembershipRule::Modal ? "modal" : "stochastic";
    j["mahalanobis_d"] = c.mahalanobis_d;
    json cls = json::array();
    for (const auto& t : c.classes) {
        json k;
        k["growth_mean"] = vec_json(t.growth_mean);
        k["growth_cov"] = mat_json(t.growth_cov);
        k["knot"] = t.knot;
        k["beta_tic"] = vec_json(t.beta_tic);
        k["beta_tvc"] = vec_json(t.beta_tvc);
        k["tvc_mean"] = vec_json(t.tvc_mean);
        k["tvc_cov"] = mat_json(t.tvc_cov);
        k["rates"] = vec_json(t.rates);
        k["mu_x"] = t.mu_x;
        k["phi_x"] = t.phi_x;
        k["rho_bl"] = t.rho_bl;
        k["kappa"] = t.kappa;
        k["theta_x"] = t.theta_x;
        k["theta_y"] = t.theta_y;
        k["residual_corr"] = t.residual_corr;
        cls.push_back(k);
    }
    j["classes"] = cls;
    return j.dump(2);
}

SimulationCondition condition_from_json(const std::string& text) {
    SimulationCondition c;
    try {
        const json j = json::parse(text);
        c.name = j.value("name", std::string("condition"));
        c.n = j.at("n").get<int>();
        c.waves = j.at("waves").get<int>();
        c.delta = j.value("delta", 0.25);
        c.xg_corr = j.value("xg_corr", 0.3);
        c.gating = j.contains("gating") && !j.at("gating").empty() ? json_mat(j.at("gating")) : Mat(0, 3);
        c.decomposition = decomposition_from_string(j.value("decomposition", std::string("slopes")));
        const std::string m = j.value("membership", std::string("stochastic"));
        if (m != "modal" && m != "stochastic") throw ModelError("membership must be modal or stochastic");
        c.membership = m == "modal" ? MembershipRule::Modal : MembershipRule::Stochastic;
        c.mahalanobis_d = j.value("mahalanobis_d", 0.0);
        for (const auto& k : j.at("classes")) {
            ClassTruth t;
            t.growth_mean = json_vec(k.at("growth_mean"), 3);
            t.growth_cov = json_square(k.at("growth_cov"), 3);
            t.knot = k.at("knot").get<double>();
            t.beta_tic = json_vec(k.at("beta_tic"), 3);
            t.beta_tvc = json_vec(k.at("beta_tvc"), 3);
            t.tvc_mean = json_vec(k.at("tvc_mean"), 2);
            t.tvc_cov = json_square(k.at("tvc_cov"), 2);
            t.rates = json_vec(k.at("rates"));
            t.mu_x = k.value("mu_x", 0.0);
            t.phi_x = k.value("phi_x", 1.0);
            t.rho_bl = k.value("rho_bl", 0.0);
            t.kappa = k.value("kappa", 0.0);
            t.theta_x = k.value("theta_x", 1.0);
            t.theta_y = k.value("theta_y", 1.0);
            t.residual_corr = k.value("residual_corr", 0.0);
            c.classes.push_back(t);
        }
    } catch (const json::exception& e) {
        throw ModelError(std::string("condition file: ") + e.what());
    }
    if (c.gating.rows() == 0 && c.classes.size() > 1) throw ModelError("condition file: gating missing");
    c.validate();
    return c;
}

std::string records_to_csv(const std::vector<ReplicationRecord>& records, const std::vector<std::string>& names) {
    std::ostringstream o;
    o << "index,seed,converged,attempts,loglik,truth_loglik,accuracy,alignment";
    for (const auto& n : names) o << ",est:" << n;
    for (const auto& n : names) o << ",se:" << n;
    o << ",message\n";
    for (const auto& r : records) {
        o << r.index << ',' << r.seed << ',' << (r.converged ? 1 : 0) << ',' << r.attempts << ','
          << format_double(r.loglik) << ',' << format_double(r.truth_loglik) << ',' << format_double(r.accuracy)
          << ',';
        for (std::size_t k = 0; k < r.alignment.size(); ++k) o << (k ? ";" : "") << r.alignment[k];
        for (std::size_t p = 0; p < names.size(); ++p)
            o << ',' << (r.converged ? format_double(r.estimates[static_cast<Eigen::Index>(p)]) : "");
        for (std::size_t p = 0; p < names.size(); ++p)
            o << ',' << (r.converged ? format_double(r.standard_errors[static_cast<Eigen::Index>(p)]) : "");
        std::string msg = r.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        o << ',' << msg << '\n';
    }
    return o.str();
}

std::vector<ReplicationRecord> records_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty replication log");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    std::size_t n_est = 0;
    for (const auto& h : header)
        if (h.rfind("est:", 0) == 0) ++n_est;
    const std::size_t expected = 8 + 2 * n_est + 1;
    std::vector<ReplicationRecord> out;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() != expected) throw DataError("replication log row " + std::to_string(row) + ": wrong cell count");
        ReplicationRecord r;
        try {
            r.index = std::stoi(cells[0]);
            r.seed = std::stoull(cells[1]);
            r.converged = cells[2] == "1";
            r.attempts = std::stoi(cells[3]);
            r.loglik = std::stod(cells[4]);
            r.truth_loglik = std::stod(cells[5]);
            r.accuracy = std::stod(cells[6]);
            std::stringstream al(cells[7]);
            std::string a;
            while (std::getline(al, a, ';'))
                if (!a.empty()) r.alignment.push_back(std::stoi(a));
            if (r.converged) {
                r.estimates.resize(static_cast<Eigen::Index>(n_est));
                r.standard_errors.resize(static_cast<Eigen::Index>(n_est));
                for (std::size_t p = 0; p < n_est; ++p) {
                    r.estimates[static_cast<Eigen::Index>(p)] = std::stod(cells[8 + p]);
                    r.standard_errors[static_cast<Eigen::Index>(p)] = std::stod(cells[8 + n_est + p]);
                }
            }
        } catch (const std::logic_error&) {
            throw DataError("replication log row " + std::to_string(row) + ": malformed number");
        }
        r.message = cells.back();
        out.push_back(std::move(r));
    }
    return out;
}

std::string metrics_to_csv(const MetricsReport& rep) {
    std::ostringstream o;
    o << "parameter,truth,mean,relative_bias,empirical_se,relative_rmse,coverage,mc_se,absolute\n";
    for (const auto& m : rep.parameters)
        o << m.name << ',' << format_double(m.truth) << ',' << format_double(m.mean) << ','
          << format_double(m.relative_bias) << ',' << format_double(m.empirical_se) << ','
          << format_double(m.relative_rmse) << ',' << format_double(m.coverage) << ',' << format_double(m.mc_se)
          << ',' << (m.absolute ? 1 : 0) << '\n';
    o << "# mean_accuracy," << format_double(rep.mean_accuracy) << '\n';
    o << "# convergence_rate," << format_double(rep.convergence_rate) << '\n';
    o << "# reps_used," << rep.reps_used << '\n';
    o << "# reps_attempted," << rep.reps_attempted << '\n';
    o << "# partial," << (rep.partial ? 1 : 0) << '\n';
    return o.str();
}

}  // namespace gmmtvc
