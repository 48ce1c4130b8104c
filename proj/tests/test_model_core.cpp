#include "doctest.h"

#include "gmmtvc/model_core.hpp"

#include <random>

using namespace gmmtvc;

namespace {
Vec v(std::initializer_list<double> xs) {
    Vec out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) out[i++] = x;
    return out;
}
}  // namespace

TEST_CASE("occasions reject bad time vectors") {
    CHECK_THROWS_AS(Occasions(v({0, 1})), ModelError);
    CHECK_THROWS_AS(Occasions(v({0, 2, 1})), ModelError);
    CHECK_THROWS_AS(Occasions(v({0, 1, 1})), ModelError);
    CHECK_THROWS_AS(Occasions(v({0, 1, std::nan("")})), ModelError);
    CHECK_NOTHROW(Occasions(v({-0.2, 1.1, 1.9})));
}

TEST_CASE("relative rates pin the first rate to one") {
    CHECK_THROWS_AS(RelativeRates(v({0.9, 0.8})), ModelError);
    const RelativeRates r = RelativeRates::from_free(v({0.9, 0.8}));
    CHECK(r.size() == 3);
    CHECK(r[0] == 1.0);
    CHECK(r[2] == 0.8);
}

TEST_CASE("tvc loadings accumulate rate-weighted intervals") {
    // cumulative sum written out interval by interval
    const Mat a = tvc_loadings(Occasions(v({0, 1, 2, 3})), RelativeRates(v({1, 0.9, 0.8})));
    CHECK(a.col(0).isOnes());
    CHECK(a(0, 1) == doctest::Approx(0.0));
    CHECK(a(1, 1) == doctest::Approx(1.0));
    CHECK(a(2, 1) == doctest::Approx(1.9));
    CHECK(a(3, 1) == doctest::Approx(2.7));

    const Mat b = tvc_loadings(Occasions(v({0, 1, 2})), RelativeRates(v({1, 1})));
    CHECK((b.col(1) - v({0, 1, 2})).norm() < 1e-15);

    const Mat c = tvc_loadings(Occasions(v({0, 0.8, 2.2})), RelativeRates(v({1, 0.5})));
    CHECK(c(1, 1) == doctest::Approx(0.8));
    CHECK(c(2, 1) == doctest::Approx(0.8 + 0.5 * 1.4));

    CHECK_THROWS_AS(tvc_loadings(Occasions(v({0, 1, 2})), RelativeRates(v({1, 1, 1}))), ModelError);
}

TEST_CASE("state features for slopes and changes") {
    const TvcGrowthFactors f{0.0, 5.0};
    const Vec s = state_features(f, Occasions(v({0, 1, 2})), RelativeRates(v({1, 0.9})),
                                 TvcDecomposition::IntervalSlopes);
    CHECK(s[0] == 0.0);
    CHECK(s[1] == doctest::Approx(5.0));
    CHECK(s[2] == doctest::Approx(4.5));

    const Vec c = state_features(f, Occasions(v({0, 1, 3})), RelativeRates(v({1, 0.9})),
                                 TvcDecomposition::IntervalChanges);
    CHECK(c[0] == 0.0);
    CHECK(c[1] == doctest::Approx(5.0));
    CHECK(c[2] == doctest::Approx(9.0));

    const Vec z = state_features({1.0, 0.0}, Occasions(v({0, 1, 2, 4})), RelativeRates(v({1, -3, 7})),
                                 TvcDecomposition::IntervalChanges);
    CHECK(z.isZero(0.0));
}

TEST_CASE("outcome loadings follow each functional form") {
    const Mat lin = outcome_loadings(Linear{}, Occasions(v({0, 1, 2})));
    CHECK(lin.rows() == 3);
    CHECK(lin.cols() == 2);
    CHECK((lin.col(0).array() == 1.0).all());
    CHECK((lin.col(1) - v({0, 1, 2})).norm() == 0.0);

    const Mat quad = outcome_loadings(Quadratic{}, Occasions(v({0, 1, 3})));
    CHECK(quad(2, 2) == doctest::Approx(9.0));

    const Mat knot = outcome_loadings(BilinearSpline{5.0}, Occasions(v({3, 5, 7})));
    CHECK(knot.row(0).transpose().isApprox(v({1, -2, 2})));
    CHECK(knot.row(1).transpose().isApprox(v({1, 0, 0})));
    CHECK(knot.row(2).transpose().isApprox(v({1, 2, 2})));

    const Mat ne = outcome_loadings(NegativeExponential{0.7}, Occasions(v({0, 1, 2})));
    CHECK(ne.cols() == 2);
    CHECK(ne(0, 1) == 0.0);
    CHECK(ne(2, 1) == doctest::Approx(1.0 - std::exp(-1.4)));

    const Mat jb = outcome_loadings(JenssBayley{-0.5}, Occasions(v({0, 1, 2})));
    CHECK(jb.cols() == 3);
    CHECK(jb(0, 2) == doctest::Approx(0.0));
    CHECK(jb(2, 2) == doctest::Approx(std::exp(-1.0) - 1.0));

    CHECK_THROWS_AS(outcome_loadings(BilinearSpline{9.0}, Occasions(v({0, 1, 2}))), ModelError);
    CHECK_THROWS_AS(outcome_loadings(NegativeExponential{-1.0}, Occasions(v({0, 1, 2}))), ModelError);
    CHECK_THROWS_AS(outcome_loadings(JenssBayley{0.5}, Occasions(v({0, 1, 2}))), ModelError);
}

TEST_CASE("first-row loadings at t = 0") {
    const Occasions occ(v({0, 1.5, 3, 4}));
    CHECK(outcome_loadings(Linear{}, occ)(0, 1) == 0.0);
    CHECK(outcome_loadings(Quadratic{}, occ)(0, 1) == 0.0);
    CHECK(outcome_loadings(NegativeExponential{0.3}, occ)(0, 1) == 0.0);
    CHECK(outcome_loadings(JenssBayley{-0.3}, occ)(0, 1) == 0.0);
    CHECK(outcome_loadings(BilinearSpline{2.0}, occ)(0, 1) == -2.0);
}

TEST_CASE("bilinear reparameterization") {
    const Eigen::Vector3d r = reparameterize_bilinear({48.0, 4.5, 1.65}, 5.0);
    CHECK(r[0] == doctest::Approx(70.5));
    CHECK(r[1] == doctest::Approx(3.075));
    CHECK(r[2] == doctest::Approx(-1.425));

    const Eigen::Vector3d line = reparameterize_bilinear({0.0, 2.5, 2.5}, 3.7);
    CHECK(line[0] == doctest::Approx(3.7 * 2.5));
    CHECK(line[1] == doctest::Approx(2.5));
    CHECK(line[2] == doctest::Approx(0.0));

    // matrix form agrees with the scalar map and inverts it
    const Eigen::Matrix3d T = bilinear_transform(5.0);
    CHECK((T * Eigen::Vector3d(48.0, 4.5, 1.65) - r).norm() < 1e-12);
    CHECK((bilinear_inverse_transform(5.0) * T - Eigen::Matrix3d::Identity()).norm() < 1e-15);
}

TEST_CASE("bilinear curves agree across bases") {
    // (1, t-g, |t-g|) . reparameterized == piecewise line in the original basis
    const double g = 4.2;
    const BilinearFactors f{40.0, 3.0, -1.0};
    const Eigen::Vector3d r = reparameterize_bilinear(f, g);
    const Vec t = v({0.0, 1.3, 4.2, 6.0, 9.1});
    const Mat lam = outcome_loadings(BilinearSpline{g}, Occasions(t));
    for (Eigen::Index j = 0; j < t.size(); ++j) {
        const double direct = t[j] <= g ? f.eta0 + f.eta1 * t[j] : f.eta0 + f.eta1 * g + f.eta2 * (t[j] - g);
        CHECK(lam.row(j).dot(r) == doctest::Approx(direct).epsilon(1e-13));
    }
}

TEST_CASE("form names round trip") {
    for (auto k : {FormKind::Linear, FormKind::Quadratic, FormKind::NegativeExponential, FormKind::JenssBayley,
                   FormKind::BilinearSpline})
        CHECK(form_kind_from_string(to_string(k)) == k);
    CHECK(form_kind_from_string("negexp") == FormKind::NegativeExponential);
    CHECK(form_kind_from_string("jenss") == FormKind::JenssBayley);
    CHECK(decomposition_from_string("changes") == TvcDecomposition::IntervalChanges);
    CHECK_THROWS_AS(form_kind_from_string("cubic"), ModelError);
    CHECK(growth_factor_count(FormKind::Linear) == 2);
    CHECK(growth_factor_count(FormKind::NegativeExponential) == 2);
    CHECK(growth_factor_count(FormKind::BilinearSpline) == 3);
}
