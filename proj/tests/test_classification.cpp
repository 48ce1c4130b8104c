#include "doctest.h"

#include "fixtures.hpp"
#include "gmmtvc/classification.hpp"

#include <algorithm>
#include <random>

using namespace gmmtvc;

namespace {

Mat one_hot(const std::vector<int>& labels, int K) {
    Mat m = Mat::Zero(static_cast<Eigen::Index>(labels.size()), K);
    for (std::size_t i = 0; i < labels.size(); ++i) m(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    return m;
}

// Cohen's kappa from counts, no alignment.
double cohen(const std::vector<int>& a, const std::vector<int>& b, int K) {
    std::vector<double> t(static_cast<std::size_t>(K * K), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) t[static_cast<std::size_t>(a[i] * K + b[i])] += 1.0;
    const double n = static_cast<double>(a.size());
    double po = 0.0, pe = 0.0;
    for (int k = 0; k < K; ++k) {
        po += t[static_cast<std::size_t>(k * K + k)] / n;
        double r = 0.0, c = 0.0;
        for (int l = 0; l < K; ++l) r += t[static_cast<std::size_t>(k * K + l)], c += t[static_cast<std::size_t>(l * K + k)];
        pe += (r / n) * (c / n);
    }
    return (po - pe) / (1.0 - pe);
}

Mat random_posterior(int n, int K, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(1.0, 1.0);
    Mat m(n, K);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < K; ++k) m(i, k) = g(rng);
        m.row(i) /= m.row(i).sum();
    }
    return m;
}

}  // namespace

TEST_CASE("posterior matches Bayes rule on a toy fixture") {
    Mat ll(3, 2), lp(3, 2);
    ll << -10.0, -12.0, -5.0, -4.0, -700.0, -701.5;
    lp << std::log(0.3), std::log(0.7), std::log(0.5), std::log(0.5), std::log(0.9), std::log(0.1);
    const Mat post = posterior_from_logliks(ll, lp);
    for (int i = 0; i < 2; ++i) {
        const double a = std::exp(lp(i, 0) + ll(i, 0)), b = std::exp(lp(i, 1) + ll(i, 1));
        CHECK(post(i, 0) == doctest::Approx(a / (a + b)).epsilon(1e-14));
    }
    // row 3 underflows in the naive form; shift by hand
    const double a = 0.9, b = 0.1 * std::exp(-1.5);
    CHECK(post(2, 0) == doctest::Approx(a / (a + b)).epsilon(1e-14));

    Mat bad = ll;
    bad(1, 0) = bad(1, 1) = kInfeasible;
    CHECK_THROWS_AS(posterior_from_logliks(bad, lp), ModelError);
}

TEST_CASE("posterior with identical classes and with one class") {
    LongitudinalDataset d;
    std::mt19937_64 rng(2);
    for (int i = 0; i < 6; ++i) {
        Individual ind;
        ind.times = fixtures::jittered_times(4, rng);
        ind.y = Vec::Constant(4, 48.0 + i);
        ind.x = Vec::Constant(4, 0.1 * i);
        ind.xe = 0.0;
        ind.xg = Eigen::Vector2d::Zero();
        d.rows.push_back(ind);
    }
    ModelSpec two;
    two.classes = 2;
    Theta th = make_theta(two, 4);
    th.classes = {fixtures::bilinear_class(4, 1.5), fixtures::bilinear_class(4, 1.5)};
    const Mat p = posterior(d, th, two);
    CHECK((p.array() - 0.5).abs().maxCoeff() < 1e-15);

    ModelSpec one;
    Theta t1 = make_theta(one, 4);
    t1.classes = {th.classes[0]};
    CHECK((posterior(d, t1, one).array() == 1.0).all());
}

TEST_CASE("modal labels break ties toward the lower class") {
    Mat p(3, 3);
    p << 0.2, 0.5, 0.3, 0.4, 0.4, 0.2, 0.1, 0.1, 0.8;
    CHECK(modal_labels(p) == std::vector<int>{1, 0, 2});
}

TEST_CASE("accuracy aligns labels") {
    const std::vector<int> truth = {0, 0, 1, 1, 2, 2, 2};
    CHECK(accuracy(truth, truth) == 1.0);
    std::vector<int> swapped = truth;
    for (int& l : swapped) l = (l + 1) % 3;
    CHECK(accuracy(swapped, truth) == 1.0);
    const std::vector<int> off = {0, 1, 1, 1, 2, 2, 0};
    CHECK(accuracy(off, truth) == doctest::Approx(5.0 / 7.0));
    CHECK_THROWS_AS(accuracy({0, 1}, {0}), ModelError);
}

TEST_CASE("latent kappa reduces to Cohen's kappa") {
    const std::vector<int> a = {0, 0, 1, 1, 1, 0, 1, 0, 0, 1, 2, 2, 0, 2};
    const std::vector<int> b = {0, 1, 1, 1, 0, 0, 1, 0, 2, 1, 2, 2, 0, 1};
    CHECK(latent_kappa_point(one_hot(a, 3), one_hot(b, 3)) == doctest::Approx(cohen(a, b, 3)).epsilon(1e-14));

    // relabeling b does not change the aligned value
    std::vector<int> b2 = b;
    for (int& l : b2) l = (l + 2) % 3;
    CHECK(latent_kappa_point(one_hot(a, 3), one_hot(b2, 3)) == doctest::Approx(cohen(a, b, 3)).epsilon(1e-14));

    std::vector<int> bal;
    for (int i = 0; i < 40; ++i) bal.push_back(i % 4);
    CHECK(latent_kappa_point(one_hot(bal, 4), one_hot(bal, 4)) == 1.0);
}

TEST_CASE("latent kappa near zero for independent posteriors") {
    std::mt19937_64 rng(8);
    const Mat a = random_posterior(20000, 2, rng);
    const Mat b = random_posterior(20000, 2, rng);
    CHECK(std::abs(latent_kappa_point(a, b)) < 0.02);
}

TEST_CASE("latent kappa bootstrap interval") {
    std::mt19937_64 rng(4);
    std::vector<int> la, lb;
    std::bernoulli_distribution flip(0.1);
    for (int i = 0; i < 300; ++i) {
        la.push_back(i % 2);
        lb.push_back(flip(rng) ? 1 - la.back() : la.back());
    }
    const KappaResult r = latent_kappa(one_hot(la, 2), one_hot(lb, 2), 500, 99);
    CHECK(r.lower <= r.kappa);
    CHECK(r.kappa <= r.upper);
    CHECK(r.upper - r.lower < 0.2);
    const KappaResult again = latent_kappa(one_hot(la, 2), one_hot(lb, 2), 500, 99);
    CHECK(again.lower == r.lower);
    CHECK(again.upper == r.upper);
    CHECK_THROWS_AS(latent_kappa(one_hot(la, 2), one_hot({0, 1}, 2)), ModelError);
}
