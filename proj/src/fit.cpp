#include "gmmtvc/fit.hpp"

#include "gmmtvc/report.hpp"
#include "gmmtvc/starts.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace gmmtvc {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t attempt_seed(std::uint64_t seed, int attempt) {
    return splitmix(seed ^ splitmix(static_cast<std::uint64_t>(attempt) + 0x51ED270B27ULL));
}

std::optional<Vec> starting_point(const LongitudinalDataset& data, const ModelSpec& spec, const ParameterMap& map,
                                  const FitOptions& opt, int attempt) {
    const std::uint64_t s = attempt_seed(opt.seed, attempt);
    Vec x;
    try {
        const Theta t = (opt.start && attempt == 1) || (opt.start && attempt % 2 == 0)
                            ? *opt.start
                            : initial_theta(data, spec, s);
        x = pack_parameters(t, map);
    } catch (const ModelError&) {
        return std::nullopt;
    }
    if (attempt > 1) {
        std::mt19937_64 rng(s);
        std::normal_distribution<double> mult(1.0, opt.jitter_scale), add(0.0, opt.jitter_shift);
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = x[i] * mult(rng) + add(rng);
    }
    return x;
}

// SEs of report_values(permute_classes(unpack(x), order)) by the delta
// method with a central-difference Jacobian.
Vec delta_method_se(const ParameterMap& map, const Vec& x, const Mat& cov, const std::vector<int>& order) {
    const ModelSpec& spec = map.spec();
    auto f = [&](const Vec& v) {
        Theta t = unpack_parameters(v, map);
        if (!order.empty()) t = permute_classes(t, order);
        return report_values(t, spec, map.waves());
    };
    const Vec f0 = f(x);
    Mat G(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
        Vec xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        G.col(j) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return (G * cov * G.transpose()).diagonal().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

int FitResult::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

double bic_of(double loglik, int p, std::size_t n) {
    return -2.0 * loglik + static_cast<double>(p) * std::log(static_cast<double>(n));
}

bool finalize_fit(const LongitudinalDataset& data, MixtureObjective& objective, const Vec& packed,
                  FitResult& r) {
    const ParameterMap& map = objective.map();
    const ModelSpec& spec = map.spec();
    // Reorder in packed space; repacking an unpacked near-singular
    // covariance can fail its Cholesky.
    const Theta fitted = unpack_parameters(packed, map);
    const std::vector<int> order0 = baseline_order(fitted, spec.layout);
    Vec x = packed;
    for (int k = 0; k < spec.classes; ++k)
        x.segment(map.class_offset(k), map.class_block_size()) =
            packed.segment(map.class_offset(order0[static_cast<std::size_t>(k)]), map.class_block_size());
    const GatingParameters g = permute_classes(fitted, order0).gating;
    Eigen::Index go = map.gating_offset();
    for (int k = 0; k < spec.classes - 1; ++k) {
        x[go++] = g.intercept[k];
        for (int j = 0; j < spec.gating_tics; ++j) x[go++] = g.coef(k, j);
    }

    // Residual variances sitting on the floor are fixed at the bound: the
    // objective is flat below it, so they are moved clear of the kink and
    // left out of the Hessian (zero variance in packed_covariance).
    const double log_floor = std::log(kVarianceFloor);
    std::vector<int> free_idx;
    for (int i = 0; i < map.size(); ++i) {
        const std::string& nm = map.names()[static_cast<std::size_t>(i)];
        const bool floored = nm.ends_with("log_theta_x") || nm.ends_with("log_theta_y");
        if (floored && x[i] <= log_floor + 1e-3)
            x[i] = log_floor - 0.5;
        else
            free_idx.push_back(i);
    }

    Mat H = objective.hessian(x);
    H = (0.5 * (H + H.transpose())).eval();

    const auto m = static_cast<Eigen::Index>(free_idx.size());
    Mat Hf(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) Hf(a, b) = H(free_idx[a], free_idx[b]);
    Eigen::LLT<Mat> llt(Hf);
    const bool pd = Hf.allFinite() && llt.info() == Eigen::Success;

    // BFGS stops on a scaled gradient; a few Newton steps with the Hessian
    // already in hand tighten the optimum when they reduce the objective.
    double f = objective.value(x);
    for (int step = 0; pd && step < 5; ++step) {
        const Vec g = objective.gradient(x);
        Vec gf(m);
        for (Eigen::Index a = 0; a < m; ++a) gf[a] = g[free_idx[a]];
        const Vec d = llt.solve(gf);
        bool moved = false;
        for (double s = 1.0; s > 0.01 && !moved; s *= 0.5) {
            Vec trial = x;
            for (Eigen::Index a = 0; a < m; ++a) trial[free_idx[a]] -= s * d[a];
            const double ft = objective.value(trial);
            if (ft < f) {
                x = trial;
                f = ft;
                moved = true;
            }
        }
        if (!moved) break;
    }

    objective.value(x);
    r.estimates = unpack_parameters(x, map);
    r.packed = x;
    r.loglik = -f;
    r.n_free_parameters = map.size();
    r.aic = aic_of(r.loglik, r.n_free_parameters);
    r.bic = bic_of(r.loglik, r.n_free_parameters, data.size());
    r.posterior = posterior_from_logliks(objective.last_class_ll(), objective.last_log_pi());
    r.names = report_names(spec, map.waves());
    r.values = report_values(r.estimates, spec, map.waves());

    if (!pd) {
        r.standard_errors = Vec::Constant(r.values.size(), std::numeric_limits<double>::quiet_NaN());
        return false;
    }
    const Mat cf = llt.solve(Mat::Identity(m, m));
    r.packed_covariance = Mat::Zero(H.rows(), H.cols());
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) r.packed_covariance(free_idx[a], free_idx[b]) = cf(a, b);
    r.standard_errors = delta_method_se(map, x, r.packed_covariance, {});
    return true;
}

void permuted_report(const FitResult& r, const std::vector<int>& order, Vec& values, Vec& se) {
    const ParameterMap map(r.spec, r.waves);
    values = report_values(permute_classes(r.estimates, order), r.spec, r.waves);
    if (r.packed_covariance.size() == 0)
        se = Vec::Constant(values.size(), std::numeric_limits<double>::quiet_NaN());
    else
        se = delta_method_se(map, r.packed, r.packed_covariance, order);
}

FitResult fit(const LongitudinalDataset& data, const ModelSpec& spec, const FitOptions& opt) {
    spec.validate();
    validate(data);
    if (data.empty()) throw DataError("dataset is empty");
    if (opt.max_attempts < 1) throw ModelError("max_attempts must be at least 1");

    MixtureObjective objective(data, spec);
    const ParameterMap& map = objective.map();
    auto value = [&](const Vec& x) { return objective.value(x); };
    auto grad = [&](const Vec& x) { return objective.gradient(x); };

    FitResult best;
    best.spec = spec;
    best.waves = data.waves();
    best.n = static_cast<int>(data.size());
    best.n_free_parameters = map.size();
    int found = 0;
    std::string last_message = "no attempt made";

    int attempt = 1;
    for (; attempt <= opt.max_attempts; ++attempt) {
        const auto x0 = starting_point(data, spec, map, opt, attempt);
        if (!x0) {
            last_message = "could not build starting values";
            continue;
        }
        const BfgsResult res = minimize_bfgs(value, grad, *x0, opt.bfgs);
        if (!res.converged) {
            last_message = res.message;
            continue;
        }
        objective.value(res.x);
        const Vec share = posterior_from_logliks(objective.last_class_ll(), objective.last_log_pi()).colwise().mean();
        if (share.minCoeff() < opt.min_class_share) {
            last_message = "a class fell below the minimum share";
            continue;
        }
        FitResult r = best;
        if (!finalize_fit(data, objective, res.x, r)) {
            last_message = "Hessian not positive definite";
            continue;
        }
        r.status = FitStatus::Converged;
        r.message = res.message;
        if (found == 0 || r.loglik > best.loglik) best = std::move(r);
        if (++found >= opt.starts) break;
    }
    best.attempts_used = std::min(attempt, opt.max_attempts);
    if (found == 0) {
        best.status = FitStatus::Failed;
        best.message = last_message;
    }
    return best;
}

int select_by_bic(const std::vector<double>& bic, const std::vector<bool>& usable) {
    int best = -1;
    for (std::size_t i = 0; i < bic.size(); ++i) {
        if (!usable.empty() && !usable[i]) continue;
        if (!std::isfinite(bic[i])) continue;
        if (best < 0 || bic[i] < bic[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

EnumerationResult enumerate_classes(const LongitudinalDataset& data, const ModelSpec& spec_template, int k_max,
                                    const FitOptions& options) {
    if (k_max < 1) throw ModelError("k_max must be at least 1");
    EnumerationResult out;
    std::vector<double> bic;
    std::vector<bool> ok;
    for (int K = 1; K <= k_max; ++K) {
        ModelSpec s = spec_template;
        s.classes = K;
        const FitResult r = fit(data, s, options);
        EnumerationRow row;
        row.classes = K;
        row.converged = r.converged();
        row.n_free_parameters = r.n_free_parameters;
        row.message = r.message;
        if (row.converged) {
            row.neg2ll = -2.0 * r.loglik;
            row.aic = r.aic;
            row.bic = r.bic;
            for (const auto& c : r.estimates.classes) row.residual_variances.push_back(c.theta_y);
            const Vec pi = r.posterior.colwise().mean().transpose();
            row.mixing_proportions.assign(pi.data(), pi.data() + pi.size());
        } else {
            row.neg2ll = row.aic = row.bic = std::numeric_limits<double>::quiet_NaN();
        }
        bic.push_back(row.bic);
        ok.push_back(row.converged);
        out.rows.push_back(std::move(row));
    }
    const int idx = select_by_bic(bic, ok);
    out.selected = idx < 0 ? 0 : out.rows[static_cast<std::size_t>(idx)].classes;
    return out;
}

}  // namespace gmmtvc
