#include "doctest.h"

#include "fixtures.hpp"
#include "gmmtvc/fit.hpp"
#include "gmmtvc/report.hpp"

#include <random>

using namespace gmmtvc;

namespace {

const double kJ2Cov[5][5] = {
    {1.5, 1.2, 1.0121320343559643, 0.762842712474619, 0.7071067811865476},
    {1.2, 2.4, 0.9321320343559643, 1.242842712474619, 0.7071067811865476},
    {1.0121320343559643, 0.9321320343559643, 6.294558441227157, 5.282558441227157, 1.0242640687119284},
    {0.762842712474619, 1.242842712474619, 5.282558441227157, 8.350274169979695, 1.0828427124746192},
    {0.7071067811865476, 0.7071067811865476, 1.0242640687119284, 1.0828427124746192, 2.0},
};
const double kJ2Mean[5] = {3.0, 3.5, 12.1, 13.8, 1.0};

Individual two_wave_individual() {
    Individual ind;
    ind.id = "a";
    ind.times = Eigen::Vector2d(0.0, 1.0);
    ind.x = Eigen::Vector2d(2.1, 4.4);
    ind.y = Eigen::Vector2d(11.0, 16.2);
    ind.xe = 0.3;
    ind.xg = Eigen::Vector2d(0.0, 0.0);
    return ind;
}

LongitudinalDataset small_dataset(int n, int waves, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    LongitudinalDataset d;
    for (int i = 0; i < n; ++i) {
        Individual ind;
        ind.id = std::to_string(i);
        ind.times = fixtures::jittered_times(waves, rng);
        ind.x.resize(waves);
        ind.y.resize(waves);
        const double a = 45.0 + 3.0 * z(rng), b = 2.0 + 0.5 * z(rng);
        for (int j = 0; j < waves; ++j) {
            ind.x[j] = 0.5 * ind.times[j] + z(rng);
            ind.y[j] = a + b * ind.times[j] + z(rng);
        }
        ind.xe = z(rng);
        ind.xg = Eigen::Vector2d(z(rng), z(rng));
        d.rows.push_back(ind);
    }
    return d;
}

Theta two_class_theta(int waves) {
    ModelSpec spec;
    spec.classes = 2;
    Theta th = make_theta(spec, waves);
    th.classes[0] = fixtures::bilinear_class(waves, 0.4 * (waves - 1));
    th.classes[1] = fixtures::bilinear_class(waves, 0.6 * (waves - 1), 3.0);
    th.gating.intercept[0] = 0.4;
    th.gating.coef << 0.4, -0.3;
    return th;
}

}  // namespace

TEST_CASE("gating probabilities") {
    GatingParameters g = GatingParameters::zeros(2, 2);
    g.coef << std::log(1.5), std::log(1.7);
    Vec p = gating_probabilities(Eigen::Vector2d(0, 0), g);
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));

    g.intercept[0] = 0.775;
    p = gating_probabilities(Eigen::Vector2d(0, 0), g);
    CHECK(p[0] == doctest::Approx(0.3153).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(0.6847).epsilon(1e-4));
    CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(0.775))));

    const GatingParameters one = GatingParameters::zeros(1, 2);
    CHECK(gating_probabilities(Eigen::Vector2d(3, -1), one)[0] == 1.0);

    CHECK_THROWS_AS(gating_probabilities(Vec::Zero(3), g), ModelError);

    // far in the tails the log version stays finite
    GatingParameters big = GatingParameters::zeros(3, 1);
    big.coef << 800.0, -900.0;
    Vec lp(3);
    gating_log_probabilities(Vec::Constant(1, 2.0), big, lp);
    CHECK(lp.allFinite());
    CHECK(lp.array().exp().sum() == doctest::Approx(1.0));
}

TEST_CASE("class loglik on a two-wave fixture equals the dense density") {
    const ClassParameters p = fixtures::linear_two_wave();
    const ModelLayout L = fixtures::linear_layout();
    Individual ind = two_wave_individual();

    Mat cov(5, 5);
    Vec mean(5);
    for (int r = 0; r < 5; ++r) {
        mean[r] = kJ2Mean[r];
        for (int c = 0; c < 5; ++c) cov(r, c) = kJ2Cov[r][c];
    }
    const Vec obs = fixtures::stacked(ind, L);
    const double oracle = fixtures::dense_normal_logpdf(obs, mean, cov);
    CHECK(class_loglik(ind, p, L) == doctest::Approx(oracle).epsilon(1e-10));

    // drop y_2 and x_1: the oracle subsets rows and columns by hand
    ind.y[1] = kMissing;
    ind.x[0] = kMissing;
    const std::vector<int> keep = {1, 2, 4};
    Vec o(3), m(3);
    Mat c(3, 3);
    for (int a = 0; a < 3; ++a) {
        o[a] = obs[keep[a]];
        m[a] = mean[keep[a]];
        for (int b = 0; b < 3; ++b) c(a, b) = cov(keep[a], keep[b]);
    }
    CHECK(class_loglik(ind, p, L) == doctest::Approx(fixtures::dense_normal_logpdf(o, m, c)).epsilon(1e-10));
}

TEST_CASE("class loglik on three-wave fixtures equals the dense density") {
    ModelLayout L;
    const ClassParameters p = fixtures::bilinear_class(3, 1.2);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    for (int miss = 0; miss < 4; ++miss) {
        Individual ind;
        ind.times = fixtures::jittered_times(3, rng);
        const ImpliedMoments mom = implied_moments(p, Occasions(ind.times), L);
        ind.x = mom.mean.segment(0, 3) + Vec::NullaryExpr(3, [&] { return z(rng); });
        ind.y = mom.mean.segment(3, 3) + Vec::NullaryExpr(3, [&] { return 2.0 * z(rng); });
        ind.xe = mom.mean[6] + z(rng);
        ind.xg = Eigen::Vector2d::Zero();
        if (miss == 1) ind.y[2] = kMissing;
        if (miss == 2) ind.x[1] = kMissing, ind.y[0] = kMissing;
        if (miss == 3) ind.x[0] = ind.x[1] = ind.x[2] = kMissing;

        const Vec full = fixtures::stacked(ind, L);
        const auto idx = fixtures::observed_index(ind, L);
        const auto n = static_cast<Eigen::Index>(idx.size());
        Vec o(n), m(n);
        Mat c(n, n);
        for (Eigen::Index a = 0; a < n; ++a) {
            o[a] = full[idx[a]];
            m[a] = mom.mean[idx[a]];
            for (Eigen::Index b = 0; b < n; ++b) c(a, b) = mom.cov(idx[a], idx[b]);
        }
        const double oracle = fixtures::dense_normal_logpdf(o, m, c);
        CHECK(class_loglik(ind, p, L) == doctest::Approx(oracle).epsilon(1e-10));
        CHECK(class_loglik_reference(ind, p, L) == doctest::Approx(oracle).epsilon(1e-10));
    }
}

TEST_CASE("individual at the mean with identity covariance") {
    // no TVC, linear, Psi = 0: unit residuals and a unit-variance x_e give
    // Sigma = I over four observed entries
    ModelLayout L;
    L.form = FormKind::Linear;
    L.has_tvc = false;
    ClassParameters p = make_class_parameters(L, 3);
    p.Psi_eta_y.setZero();
    p.mu_x = 0.7;
    p.alpha_y = Eigen::Vector2d(1.0, 2.0);
    Individual ind;
    ind.times = Eigen::Vector3d(0, 1, 2);
    ind.y = Eigen::Vector3d(1, 3, 5);
    ind.x = Vec::Constant(3, kMissing);
    ind.xe = 0.7;
    ind.xg = Vec();
    CHECK(class_loglik(ind, p, L) == doctest::Approx(-2.0 * std::log(2.0 * M_PI)).epsilon(1e-14));
}

TEST_CASE("infeasible parameters give minus infinity") {
    ModelLayout L;
    ClassParameters p = fixtures::bilinear_class(4, 1.5);
    p.theta_x = 0.0;
    p.theta_xy = 0.0;
    Individual ind;
    ind.times = Eigen::Vector4d(0, 1, 2, 3);
    ind.y = Eigen::Vector4d(50, 52, 54, 55);
    ind.x = Eigen::Vector4d(0, 0.4, 0.7, 1.0);
    ind.xe = 0.0;
    ind.xg = Eigen::Vector2d::Zero();
    CHECK(class_loglik(ind, p, L) == kInfeasible);
    CHECK(class_loglik_reference(ind, p, L) == kInfeasible);
}

TEST_CASE("mixture loglik matches naive summation") {
    const int J = 5;
    LongitudinalDataset d = small_dataset(5, J, 21);
    d.rows[2].y[1] = kMissing;
    d.rows[4].x[3] = kMissing;
    ModelSpec spec;
    spec.classes = 2;
    const Theta th = two_class_theta(J);
    // shift the fixture onto the class curves so both densities matter
    for (auto& r : d.rows) r.y.array() += 10.0;

    double naive = 0.0;
    for (const auto& ind : d.rows) {
        const Vec pi = gating_probabilities(ind.xg, th.gating);
        double s = 0.0;
        for (int k = 0; k < 2; ++k) s += pi[k] * std::exp(class_loglik_reference(ind, th.classes[k], spec.layout));
        naive += std::log(s);
    }
    CHECK(mixture_loglik(d, th, spec) == doctest::Approx(naive).epsilon(1e-10));
    CHECK(mixture_loglik_reference(d, th, spec) == doctest::Approx(naive).epsilon(1e-10));
}

TEST_CASE("mixture of identical classes collapses to one class") {
    const int J = 5;
    const LongitudinalDataset d = small_dataset(30, J, 4);
    ModelSpec one;
    Theta t1 = make_theta(one, J);
    t1.classes[0] = fixtures::bilinear_class(J, 2.0);
    ModelSpec two;
    two.classes = 2;
    Theta t2 = make_theta(two, J);
    t2.classes = {t1.classes[0], t1.classes[0]};
    CHECK(mixture_loglik(d, t2, two) == doctest::Approx(mixture_loglik(d, t1, one)).epsilon(1e-12));

    double sum = 0.0;
    for (const auto& ind : d.rows) sum += class_loglik(ind, t1.classes[0], one.layout);
    CHECK(mixture_loglik(d, t1, one) == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("label swap with re-referenced gating leaves the likelihood unchanged") {
    const int J = 6;
    const LongitudinalDataset d = small_dataset(40, J, 9);
    ModelSpec spec;
    spec.classes = 2;
    const Theta th = two_class_theta(J);
    const Theta sw = permute_classes(th, {1, 0});
    CHECK(sw.gating.intercept[0] == doctest::Approx(-th.gating.intercept[0]));
    CHECK(mixture_loglik(d, sw, spec) == doctest::Approx(mixture_loglik(d, th, spec)).epsilon(1e-12));
}

TEST_CASE("packing") {
    ModelSpec spec;
    spec.classes = 2;
    const int J = 10;
    const ParameterMap map(spec, J);
    CHECK(map.size() == 75);
    CHECK(map.size() == static_cast<int>(map.names().size()));

    Theta th = two_class_theta(J);
    th.classes[0].theta_y = 1.0;
    th.classes[0].rho_bl = 0.3;
    const Vec x = pack_parameters(th, map);
    const auto at = [&](const std::string& n) {
        for (int i = 0; i < map.size(); ++i)
            if (map.names()[static_cast<std::size_t>(i)] == n) return x[i];
        FAIL("missing " << n);
        return 0.0;
    };
    CHECK(at("c1.log_theta_y") == 0.0);
    CHECK(at("c1.atanh_rho_bl") == doctest::Approx(0.3095196));
    CHECK(at("c2.knot") == doctest::Approx(0.6 * (J - 1)));

    CHECK_THROWS_AS(unpack_parameters(Vec::Zero(74), map), ModelError);
    CHECK(free_parameter_count(spec, J) == 75);
}

TEST_CASE("numerical gradient agrees with forward differences") {
    const int J = 6;
    const LongitudinalDataset d = small_dataset(60, J, 13);
    ModelSpec spec;
    spec.classes = 2;
    MixtureObjective obj(d, spec);
    const Vec x = pack_parameters(two_class_theta(J), obj.map());
    const Vec g = obj.gradient(x);
    const Vec f = obj.forward_gradient(x);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const std::string& nm = obj.map().names()[static_cast<std::size_t>(i)];
        if (nm.ends_with("knot")) continue;  // kinks at observed times
        CHECK_MESSAGE(std::abs(g[i] - f[i]) <= 1e-4 * std::max(1.0, std::abs(g[i])), nm);
    }
}

TEST_CASE("BFGS minimizes a Rosenbrock valley") {
    const auto f = [](const Vec& x) {
        return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    const auto g = [](const Vec& x) {
        Vec out(2);
        out[0] = -400.0 * x[0] * (x[1] - x[0] * x[0]) - 2.0 * (1.0 - x[0]);
        out[1] = 200.0 * (x[1] - x[0] * x[0]);
        return out;
    };
    const BfgsResult r = minimize_bfgs(f, g, Eigen::Vector2d(-1.2, 1.0));
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("BFGS backs away from infeasible regions") {
    const auto f = [](const Vec& x) {
        return x[0] <= 0.0 ? std::numeric_limits<double>::infinity() : x[0] - std::log(x[0]);
    };
    const auto g = [](const Vec& x) { return Vec::Constant(1, 1.0 - 1.0 / x[0]); };
    const BfgsResult r = minimize_bfgs(f, g, Vec::Constant(1, 5.0));
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("information criteria and BIC selection") {
    CHECK(aic_of(-100.0, 5) == 210.0);
    CHECK(bic_of(-100.0, 5, 100) == doctest::Approx(200.0 + 5.0 * std::log(100.0)));
    CHECK(select_by_bic({31512.85, 31573.00, 31357.30, 31391.49}) + 1 == 3);
    CHECK(select_by_bic({12.0}) == 0);
    CHECK(select_by_bic({31512.85, 31573.00, 31357.30, 31391.49}, {true, true, false, true}) + 1 == 4);
    CHECK(select_by_bic({1.0, 2.0}, {false, false}) == -1);
    CHECK(select_by_bic({std::nan(""), 5.0}) == 1);
}

TEST_CASE("one-class linear fit on noiseless lines") {
    // every individual lies exactly on its own line, so the growth-factor
    // means equal the sample means of (a_i, b_i) and theta_y hits the floor
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z;
    LongitudinalDataset d;
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    const int n = 80;
    for (int i = 0; i < n; ++i) {
        Individual ind;
        ind.id = std::to_string(i);
        ind.times = fixtures::jittered_times(5, rng);
        const double a = 2.0 + z(rng), b = 3.0 + 0.5 * z(rng);
        sum += Eigen::Vector2d(a, b);
        ind.y = (a + b * ind.times.array()).matrix();
        ind.x = Vec::Constant(5, kMissing);
        ind.xg = Vec();
        d.rows.push_back(ind);
    }
    ModelSpec spec;
    spec.layout.form = FormKind::Linear;
    spec.layout.has_tic = false;
    spec.layout.has_tvc = false;
    spec.gating_tics = 0;
    const FitResult r = fit(d, spec);
    REQUIRE(r.converged());
    const ClassParameters& c = r.estimates.classes[0];
    // With theta_y pinned at the floor the ML means are the GLS means under
    // the fitted covariance. Sigma_i then has condition number near 1e7, so
    // the objective carries rounding noise of about 1e-8 and the optimum is
    // only located to a few 1e-5.
    Mat info = Mat::Zero(2, 2);
    Vec score = Vec::Zero(2);
    for (const auto& ind : d.rows) {
        Mat lam(5, 2);
        lam.col(0).setOnes();
        lam.col(1) = ind.times;
        const Mat sigma = lam * c.Psi_eta_y * lam.transpose() + c.theta_y * Mat::Identity(5, 5);
        const Mat w = lam.transpose() * sigma.inverse();
        info += w * lam;
        score += w * ind.y;
    }
    const Vec gls = info.inverse() * score;
    CHECK(std::abs(c.alpha_y[0] - gls[0]) < 5e-5);
    CHECK(std::abs(c.alpha_y[1] - gls[1]) < 5e-5);
    CHECK(std::abs(gls[0] - sum[0] / n) < 1e-5);
    CHECK(std::abs(gls[1] - sum[1] / n) < 1e-5);
    CHECK(c.theta_y == doctest::Approx(kVarianceFloor));
    CHECK(r.aic == doctest::Approx(-2.0 * r.loglik + 2.0 * r.n_free_parameters));
    CHECK(r.bic == doctest::Approx(-2.0 * r.loglik + r.n_free_parameters * std::log(n)));
    CHECK(r.posterior.rows() == n);
    CHECK((r.posterior.array() == 1.0).all());
}

TEST_CASE("reporting basis round trip and names") {
    const ClassParameters p = fixtures::bilinear_class(8, 3.3);
    const ClassParameters o = to_original_basis(p);
    CHECK(o.alpha_y[0] == doctest::Approx(48.0));
    CHECK(o.alpha_y[1] == doctest::Approx(4.5));
    CHECK(o.alpha_y[2] == doctest::Approx(1.65));
    const ClassParameters back = to_internal_basis(o);
    CHECK((back.alpha_y - p.alpha_y).norm() < 1e-12);
    CHECK((back.Psi_eta_y - p.Psi_eta_y).norm() < 1e-12);
    CHECK((back.beta_tvc - p.beta_tvc).norm() < 1e-12);

    ModelSpec spec;
    spec.classes = 2;
    const auto names = report_names(spec, 8);
    const Vec vals = report_values(two_class_theta(8), spec, 8);
    CHECK(names.size() == static_cast<std::size_t>(vals.size()));
    const auto pos = std::find(names.begin(), names.end(), "c1.knot") - names.begin();
    CHECK(vals[pos] == doctest::Approx(0.4 * 7));
}

TEST_CASE("enumeration follows the template layout and picks the smallest BIC") {
    const LongitudinalDataset d = small_dataset(60, 5, 9);
    ModelSpec tmpl;
    tmpl.layout.form = FormKind::Linear;
    tmpl.layout.has_tic = false;
    tmpl.layout.has_tvc = false;
    tmpl.gating_tics = 2;  // gating slopes make the K = 2 count differ from the covariate-free one
    const EnumerationResult e = enumerate_classes(d, tmpl, 2);
    REQUIRE(e.rows.size() == 2);
    std::vector<double> bic;
    for (const auto& row : e.rows) {
        ModelSpec s = tmpl;
        s.classes = row.classes;
        CHECK(row.n_free_parameters == ParameterMap(s, 5).size());
        if (row.converged) {
            CHECK(row.bic == doctest::Approx(row.neg2ll + row.n_free_parameters * std::log(60.0)));
            CHECK(row.mixing_proportions.size() == static_cast<std::size_t>(row.classes));
        }
        bic.push_back(row.converged ? row.bic : std::nan(""));
    }
    REQUIRE(e.rows[0].converged);
    CHECK(e.selected == select_by_bic(bic) + 1);
}
