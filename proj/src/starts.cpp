#include "gmmtvc/starts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gmmtvc {

namespace {

double sq(double v) { return v * v; }

// Least squares of obs on the columns of X over the rows where obs is
// observed. Returns false when too few rows remain.
bool row_ls(const Mat& X, const Vec& obs, Vec& coef, double& rss, int& used) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < obs.size(); ++j)
        if (!is_missing(obs[j])) keep.push_back(j);
    used = static_cast<int>(keep.size());
    if (used <= X.cols()) return false;
    Mat A(used, X.cols());
    Vec b(used);
    for (int r = 0; r < used; ++r) A.row(r) = X.row(keep[r]), b[r] = obs[keep[r]];
    coef = A.colPivHouseholderQr().solve(b);
    rss = (A * coef - b).squaredNorm();
    return coef.allFinite();
}

Mat sample_cov(const std::vector<Vec>& v) {
    const auto n = static_cast<Eigen::Index>(v.size());
    const Eigen::Index d = v.empty() ? 0 : v.front().size();
    Vec mean = Vec::Zero(d);
    for (const auto& x : v) mean += x;
    mean /= static_cast<double>(std::max<Eigen::Index>(n, 1));
    Mat c = Mat::Zero(d, d);
    for (const auto& x : v) c += (x - mean) * (x - mean).transpose();
    return n > 1 ? Mat(c / static_cast<double>(n - 1)) : Mat::Identity(d, d);
}

Vec sample_mean(const std::vector<Vec>& v, Eigen::Index d) {
    Vec mean = Vec::Zero(d);
    for (const auto& x : v) mean += x;
    return v.empty() ? mean : Vec(mean / static_cast<double>(v.size()));
}

// Ridge until the matrix is comfortably positive definite.
Mat make_pd(Mat m, double min_eig) {
    m = (0.5 * (m + m.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    Vec ev = es.eigenvalues().cwiseMax(min_eig);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<double> coefficient_grid(FormKind kind, double t0, double t1) {
    std::vector<double> g;
    switch (kind) {
        case FormKind::BilinearSpline:
            for (int i = 1; i < 20; ++i) g.push_back(t0 + (t1 - t0) * i / 20.0);
            break;
        case FormKind::NegativeExponential:
            for (int i = 0; i < 16; ++i) g.push_back(0.05 * std::pow(1.4, i));
            break;
        case FormKind::JenssBayley:
            for (int i = 0; i < 16; ++i) g.push_back(-0.05 * std::pow(1.4, i));
            break;
        default: g.push_back(0.0); break;
    }
    return g;
}

// Total residual sum of squares of per-individual outcome fits under form.
double form_rss(const LongitudinalDataset& data, const std::vector<int>& members, const FunctionalForm& form) {
    const int C = growth_factor_count(form);
    double total = 0.0;
    Mat X(data.waves(), C);
    Vec coef;
    for (int i : members) {
        const auto& ind = data.rows[static_cast<std::size_t>(i)];
        detail::fill_outcome_loadings(form, ind.times, X);
        double rss = 0.0;
        int used = 0;
        if (row_ls(X, ind.y, coef, rss, used)) total += rss;
    }
    return total;
}

}  // namespace

std::vector<int> kmeans(const Mat& points, int k, std::uint64_t seed, int max_iterations) {
    const auto n = points.rows();
    if (k < 1) throw ModelError("k-means needs k >= 1");
    std::vector<int> label(static_cast<std::size_t>(n), 0);
    if (k == 1 || n == 0) return label;
    std::mt19937_64 rng(seed);
    Mat centers(k, points.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centers.row(0) = points.row(pick(rng));
    Vec d2(n);
    for (int c = 1; c < k; ++c) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int m = 0; m < c; ++m) best = std::min(best, (points.row(i) - centers.row(m)).squaredNorm());
            d2[i] = best;
        }
        const double total = d2.sum();
        Eigen::Index chosen = pick(rng);
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (Eigen::Index i = 0; i < n; ++i) {
                u -= d2[i];
                if (u <= 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        centers.row(c) = points.row(chosen);
    }
    for (int it = 0; it < max_iterations; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = (points.row(i) - centers.row(c)).squaredNorm();
                if (d < bd) bd = d, best = c;
            }
            if (label[static_cast<std::size_t>(i)] != best) changed = true;
            label[static_cast<std::size_t>(i)] = best;
        }
        Mat sum = Mat::Zero(k, points.cols());
        std::vector<int> count(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sum.row(label[static_cast<std::size_t>(i)]) += points.row(i);
            ++count[static_cast<std::size_t>(label[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < k; ++c)
            if (count[static_cast<std::size_t>(c)] > 0) centers.row(c) = sum.row(c) / count[static_cast<std::size_t>(c)];
        if (!changed && it > 0) break;
    }
    return label;
}

Mat outcome_ols_summaries(const LongitudinalDataset& data) {
    Mat out(static_cast<Eigen::Index>(data.size()), 2);
    Mat X(data.waves(), 2);
    Vec coef;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& ind = data.rows[i];
        X.col(0).setOnes();
        X.col(1) = ind.times;
        double rss = 0.0;
        int used = 0;
        // Two points are enough for a line here.
        std::vector<Eigen::Index> keep;
        for (Eigen::Index j = 0; j < ind.y.size(); ++j)
            if (!is_missing(ind.y[j])) keep.push_back(j);
        if (keep.size() >= 3 && row_ls(X, ind.y, coef, rss, used)) {
            out.row(static_cast<Eigen::Index>(i)) = coef.transpose();
        } else if (keep.size() == 2) {
            const double dt = ind.times[keep[1]] - ind.times[keep[0]];
            const double slope = (ind.y[keep[1]] - ind.y[keep[0]]) / dt;
            out(static_cast<Eigen::Index>(i), 0) = ind.y[keep[0]] - slope * ind.times[keep[0]];
            out(static_cast<Eigen::Index>(i), 1) = slope;
        } else {
            out.row(static_cast<Eigen::Index>(i)).setConstant(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return out;
}

ClassParameters moment_start(const LongitudinalDataset& data, const std::vector<int>& members,
                             const ModelLayout& layout) {
    const int J = data.waves();
    const int C = layout.growth_factors();
    ClassParameters p = make_class_parameters(layout, J);
    if (members.empty()) return p;

    // TIC moments.
    if (layout.has_tic) {
        double m = 0.0, v = 0.0;
        for (int i : members) m += data.rows[static_cast<std::size_t>(i)].xe;
        m /= static_cast<double>(members.size());
        for (int i : members) v += sq(data.rows[static_cast<std::size_t>(i)].xe - m);
        p.mu_x = m;
        p.phi_x = std::max(v / std::max<double>(1.0, static_cast<double>(members.size()) - 1.0), 1e-2);
    }

    // TVC: relative rates from mean interval slopes, then per-person growth
    // factors under those rates.
    std::vector<Vec> eta_x(data.size());
    std::vector<char> has_eta_x(data.size(), 0);
    if (layout.has_tvc) {
        Vec slope_sum = Vec::Zero(J - 1), slope_n = Vec::Zero(J - 1);
        for (int i : members) {
            const auto& ind = data.rows[static_cast<std::size_t>(i)];
            for (int j = 1; j < J; ++j)
                if (!is_missing(ind.x[j]) && !is_missing(ind.x[j - 1])) {
                    slope_sum[j - 1] += (ind.x[j] - ind.x[j - 1]) / (ind.times[j] - ind.times[j - 1]);
                    slope_n[j - 1] += 1.0;
                }
        }
        Vec rates = Vec::Ones(J - 1);
        const double first = slope_n[0] > 0 ? slope_sum[0] / slope_n[0] : 0.0;
        if (std::abs(first) > 1e-8)
            for (int j = 1; j < J - 1; ++j)
                if (slope_n[j] > 0) rates[j] = std::clamp(slope_sum[j] / slope_n[j] / first, -5.0, 5.0);
        p.rates = RelativeRates(rates);

        std::vector<Vec> etas;
        double rss_total = 0.0, dof = 0.0;
        Mat X(J, 2);
        Vec coef;
        for (int i : members) {
            const auto& ind = data.rows[static_cast<std::size_t>(i)];
            detail::fill_tvc_loadings(ind.times, rates, X);
            double rss = 0.0;
            int used = 0;
            if (row_ls(X, ind.x, coef, rss, used)) {
                etas.push_back(coef);
                eta_x[static_cast<std::size_t>(i)] = coef;
                has_eta_x[static_cast<std::size_t>(i)] = 1;
                rss_total += rss;
                dof += used - 2;
            }
        }
        p.theta_x = dof > 0 ? std::max(rss_total / dof, 1e-2) : 1.0;
        if (!etas.empty()) {
            const Vec m = sample_mean(etas, 2);
            p.mu_eta_x = m;
            const Mat c = sample_cov(etas);
            p.Phi_eta_x = make_pd(c, 1e-2 * std::max(1.0, c.trace()));
        }
        if (layout.has_tic) {
            // Correlation of x_e with the baseline factor.
            double sxy = 0.0, sxx = 0.0, syy = 0.0;
            int n = 0;
            for (int i : members)
                if (has_eta_x[static_cast<std::size_t>(i)]) {
                    const double a = data.rows[static_cast<std::size_t>(i)].xe - p.mu_x;
                    const double b = eta_x[static_cast<std::size_t>(i)][0] - p.mu_eta_x[0];
                    sxy += a * b, sxx += a * a, syy += b * b, ++n;
                }
            if (n > 2 && sxx > 0 && syy > 0) p.rho_bl = std::clamp(sxy / std::sqrt(sxx * syy), -0.9, 0.9);
        }
    }

    // Outcome: grid for the form coefficient, then per-person growth factors
    // regressed on (1, x_e, eta0_x).
    const auto grid = coefficient_grid(layout.form, data.rows.front().times.minCoeff(),
                                       data.rows.front().times.maxCoeff());
    double best_rss = std::numeric_limits<double>::infinity();
    double best_coef = grid.front();
    if (grid.size() > 1) {
        // Knot grid uses the range shared by the members' occasions.
        double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
        for (int i : members) {
            lo = std::max(lo, data.rows[static_cast<std::size_t>(i)].times.minCoeff());
            hi = std::min(hi, data.rows[static_cast<std::size_t>(i)].times.maxCoeff());
        }
        const auto g = layout.form == FormKind::BilinearSpline && hi > lo ? coefficient_grid(layout.form, lo, hi) : grid;
        for (double c : g) {
            const double r = form_rss(data, members, make_form(layout.form, c));
            if (r < best_rss) best_rss = r, best_coef = c;
        }
    }
    p.form = make_form(layout.form, best_coef);

    std::vector<Vec> eta_y;
    std::vector<int> who;
    double rss_total = 0.0, dof = 0.0;
    Mat X(J, C);
    Vec coef;
    for (int i : members) {
        const auto& ind = data.rows[static_cast<std::size_t>(i)];
        detail::fill_outcome_loadings(p.form, ind.times, X);
        double rss = 0.0;
        int used = 0;
        if (row_ls(X, ind.y, coef, rss, used)) {
            eta_y.push_back(coef);
            who.push_back(i);
            rss_total += rss;
            dof += used - C;
        }
    }
    p.theta_y = dof > 0 ? std::max(rss_total / dof, 1e-2) : 1.0;
    if (layout.has_tvc) p.theta_xy = 0.0;
    if (eta_y.empty()) return p;

    // Regress eta_y on the covariates present.
    std::vector<int> rows;
    for (std::size_t r = 0; r < who.size(); ++r)
        if (!layout.has_tvc || has_eta_x[static_cast<std::size_t>(who[r])]) rows.push_back(static_cast<int>(r));
    const int nz = 1 + (layout.has_tic ? 1 : 0) + (layout.has_tvc ? 1 : 0);
    if (static_cast<int>(rows.size()) > nz + C) {
        Mat Z(static_cast<Eigen::Index>(rows.size()), nz);
        Mat Y(static_cast<Eigen::Index>(rows.size()), C);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const int i = who[static_cast<std::size_t>(rows[r])];
            int c = 0;
            Z(static_cast<Eigen::Index>(r), c++) = 1.0;
            if (layout.has_tic) Z(static_cast<Eigen::Index>(r), c++) = data.rows[static_cast<std::size_t>(i)].xe;
            if (layout.has_tvc) Z(static_cast<Eigen::Index>(r), c++) = eta_x[static_cast<std::size_t>(i)][0];
            Y.row(static_cast<Eigen::Index>(r)) = eta_y[static_cast<std::size_t>(rows[r])].transpose();
        }
        const Mat B = Z.colPivHouseholderQr().solve(Y);  // nz x C
        int c = 0;
        p.alpha_y = B.row(c++).transpose();
        if (layout.has_tic) p.beta_tic = B.row(c++).transpose();
        if (layout.has_tvc) p.beta_tvc = B.row(c++).transpose();
        const Mat E = Y - Z * B;
        Mat cov = E.transpose() * E / static_cast<double>(rows.size() - nz);
        p.Psi_eta_y = make_pd(cov, 1e-2 * std::max(1.0, cov.trace() / C));
    } else {
        p.alpha_y = sample_mean(eta_y, C);
        const Mat cov = sample_cov(eta_y);
        p.Psi_eta_y = make_pd(cov, 1e-2 * std::max(1.0, cov.trace() / C));
    }
    return p;
}

Theta initial_theta(const LongitudinalDataset& data, const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (data.empty()) throw DataError("dataset is empty");
    const Mat s = outcome_ols_summaries(data);
    std::vector<int> usable;
    for (Eigen::Index i = 0; i < s.rows(); ++i)
        if (s.row(i).allFinite()) usable.push_back(static_cast<int>(i));
    Mat pts(static_cast<Eigen::Index>(usable.size()), 2);
    for (std::size_t r = 0; r < usable.size(); ++r) pts.row(static_cast<Eigen::Index>(r)) = s.row(usable[r]);
    // Standardize so intercept and slope weigh equally.
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
        const double m = pts.col(c).mean();
        const double sd = std::sqrt((pts.col(c).array() - m).square().sum() / std::max<Eigen::Index>(1, pts.rows() - 1));
        pts.col(c) = (pts.col(c).array() - m) / (sd > 0 ? sd : 1.0);
    }
    const auto lab = kmeans(pts, spec.classes, seed);

    std::vector<std::vector<int>> members(static_cast<std::size_t>(spec.classes));
    for (std::size_t r = 0; r < usable.size(); ++r) members[static_cast<std::size_t>(lab[r])].push_back(usable[r]);

    Theta t = make_theta(spec, data.waves());
    std::vector<int> everyone(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) everyone[i] = static_cast<int>(i);
    for (int k = 0; k < spec.classes; ++k) {
        const auto& m = members[static_cast<std::size_t>(k)];
        // Tiny clusters cannot support the moment estimates.
        t.classes[static_cast<std::size_t>(k)] =
            moment_start(data, static_cast<int>(m.size()) >= 10 ? m : everyone, spec.layout);
    }
    return t;
}

}  // namespace gmmtvc
