#include "gmmtvc/classification.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gmmtvc {

PosteriorMatrix posterior_from_logliks(const Mat& class_ll, const Mat& log_pi) {
    PosteriorMatrix post(class_ll.rows(), class_ll.cols());
    for (Eigen::Index i = 0; i < class_ll.rows(); ++i) {
        const Eigen::RowVectorXd t = class_ll.row(i) + log_pi.row(i);
        const double mx = t.maxCoeff();
        if (!std::isfinite(mx)) throw ModelError("posterior: infeasible parameters for row " + std::to_string(i + 1));
        Eigen::RowVectorXd e = (t.array() - mx).exp();
        post.row(i) = e / e.sum();
    }
    return post;
}

PosteriorMatrix posterior(const LongitudinalDataset& data, const Theta& theta, const ModelSpec& spec) {
    return posterior_from_logliks(class_logliks(data, theta, spec), gating_logliks(data, theta.gating));
}

std::vector<int> modal_labels(const PosteriorMatrix& post) {
    std::vector<int> out(static_cast<std::size_t>(post.rows()));
    for (Eigen::Index i = 0; i < post.rows(); ++i) {
        Eigen::Index k;
        post.row(i).maxCoeff(&k);
        out[static_cast<std::size_t>(i)] = static_cast<int>(k);
    }
    return out;
}

std::vector<int> best_label_permutation(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size()) throw ModelError("accuracy: label vectors differ in length");
    int K = 1;
    for (int v : predicted) K = std::max(K, v + 1);
    for (int v : truth) K = std::max(K, v + 1);
    if (K > 8) throw ModelError("accuracy: exhaustive alignment supports at most 8 classes");
    Mat counts = Mat::Zero(K, K);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (predicted[i] < 0 || truth[i] < 0) throw ModelError("accuracy: labels must be non-negative");
        counts(predicted[i], truth[i]) += 1.0;
    }
    std::vector<int> perm(K), best;
    std::iota(perm.begin(), perm.end(), 0);
    double best_hits = -1.0;
    do {
        double hits = 0.0;
        for (int k = 0; k < K; ++k) hits += counts(k, perm[k]);
        if (hits > best_hits) best_hits = hits, best = perm;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size()) throw ModelError("accuracy: label vectors differ in length");
    if (truth.empty()) throw ModelError("accuracy: no labels");
    const auto perm = best_label_permutation(predicted, truth);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += perm[predicted[i]] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

namespace {

Mat pad_columns(const Mat& m, Eigen::Index K) {
    Mat out = Mat::Zero(m.rows(), K);
    out.leftCols(m.cols()) = m;
    return out;
}

double kappa_from_table(const Mat& T) {
    const double po = T.trace();
    const Vec rows = T.rowwise().sum();
    const Vec cols = T.colwise().sum().transpose();
    const double pe = rows.dot(cols);
    return (po - pe) / (1.0 - pe);
}

Mat joint_table(const Mat& a, const Mat& b, const std::vector<Eigen::Index>& idx) {
    Mat T = Mat::Zero(a.cols(), b.cols());
    for (Eigen::Index i : idx) T.noalias() += a.row(i).transpose() * b.row(i);
    return T / static_cast<double>(idx.size());
}

std::vector<int> align(const Mat& T) {
    const auto K = static_cast<int>(T.rows());
    if (K > 6) throw ModelError("latent_kappa: exhaustive alignment supports at most 6 classes");
    std::vector<int> perm(K), best;
    std::iota(perm.begin(), perm.end(), 0);
    double best_trace = -1.0;
    do {
        double tr = 0.0;
        for (int k = 0; k < K; ++k) tr += T(k, perm[k]);
        if (tr > best_trace) best_trace = tr, best = perm;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

Mat permute_columns(const Mat& b, const std::vector<int>& perm) {
    Mat out(b.rows(), b.cols());
    for (std::size_t k = 0; k < perm.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = b.col(perm[k]);
    return out;
}

}  // namespace

double latent_kappa_point(const PosteriorMatrix& a, const PosteriorMatrix& b) {
    if (a.rows() != b.rows()) throw ModelError("latent_kappa: posterior matrices differ in number of rows");
    const Eigen::Index K = std::max(a.cols(), b.cols());
    const Mat A = pad_columns(a, K), B = pad_columns(b, K);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(a.rows()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    const auto perm = align(joint_table(A, B, all));
    return kappa_from_table(joint_table(A, permute_columns(B, perm), all));
}

KappaResult latent_kappa(const PosteriorMatrix& a, const PosteriorMatrix& b, int reps, std::uint64_t seed) {
    if (a.rows() != b.rows()) throw ModelError("latent_kappa: posterior matrices differ in number of rows");
    if (a.rows() == 0) throw ModelError("latent_kappa: empty posterior matrices");
    const Eigen::Index N = a.rows();
    const Eigen::Index K = std::max(a.cols(), b.cols());
    const Mat A = pad_columns(a, K);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(N));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    KappaResult res;
    res.alignment = align(joint_table(A, pad_columns(b, K), all));
    const Mat B = permute_columns(pad_columns(b, K), res.alignment);
    res.kappa = kappa_from_table(joint_table(A, B, all));

    if (reps > 0) {
        std::vector<double> boot;
        boot.reserve(static_cast<std::size_t>(reps));
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(N));
        for (int r = 0; r < reps; ++r) {
            std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(r + 1));
            std::uniform_int_distribution<Eigen::Index> pick(0, N - 1);
            for (auto& i : idx) i = pick(rng);
            const double k = kappa_from_table(joint_table(A, B, idx));
            if (std::isfinite(k)) boot.push_back(k);
        }
        if (!boot.empty()) {
            std::sort(boot.begin(), boot.end());
            auto q = [&](double p) {
                const double pos = p * static_cast<double>(boot.size() - 1);
                const auto lo = static_cast<std::size_t>(std::floor(pos));
                const auto hi = std::min(lo + 1, boot.size() - 1);
                return boot[lo] + (pos - static_cast<double>(lo)) * (boot[hi] - boot[lo]);
            };
            res.lower = q(0.025);
            res.upper = q(0.975);
        } else {
            res.lower = res.upper = res.kappa;
        }
    }
    return res;
}

}  // namespace gmmtvc
