#include "gmmtvc/model_core.hpp"

#include <cmath>
#include <sstream>

namespace gmmtvc {

std::string Occasions::validate(const Vec& times) {
    if (times.size() < 3) return "need at least 3 measurement occasions";
    for (Eigen::Index j = 0; j < times.size(); ++j) {
        if (!std::isfinite(times[j])) {
            std::ostringstream os;
            os << "time " << j + 1 << " is not finite";
            return os.str();
        }
        if (j > 0 && !(times[j] > times[j - 1])) {
            std::ostringstream os;
            os << "times not strictly increasing at occasion " << j + 1;
            return os.str();
        }
    }
    return {};
}

Occasions::Occasions(Vec times) : times_(std::move(times)) {
    if (auto msg = validate(times_); !msg.empty()) throw ModelError(msg);
}

RelativeRates::RelativeRates(Vec rates) : rates_(std::move(rates)) {
    if (rates_.size() < 1) throw ModelError("relative rates must be non-empty");
    if (rates_[0] != 1.0) throw ModelError("first relative rate must be exactly 1");
    if (!rates_.allFinite()) throw ModelError("relative rates must be finite");
}

RelativeRates RelativeRates::from_free(const Vec& free) {
    Vec r(free.size() + 1);
    r[0] = 1.0;
    r.tail(free.size()) = free;
    return RelativeRates(std::move(r));
}

FormKind kind_of(const FunctionalForm& form) {
    return static_cast<FormKind>(form.index());
}

int growth_factor_count(FormKind kind) {
    switch (kind) {
        case FormKind::Linear:
        case FormKind::NegativeExponential:
            return 2;
        default:
            return 3;
    }
}

bool has_form_coefficient(FormKind kind) {
    return kind == FormKind::NegativeExponential || kind == FormKind::JenssBayley ||
           kind == FormKind::BilinearSpline;
}

double form_coefficient(const FunctionalForm& form) {
    if (auto* f = std::get_if<NegativeExponential>(&form)) return f->b;
    if (auto* f = std::get_if<JenssBayley>(&form)) return f->c;
    if (auto* f = std::get_if<BilinearSpline>(&form)) return f->gamma;
    return 0.0;
}

FunctionalForm make_form(FormKind kind, double coefficient) {
    switch (kind) {
        case FormKind::Linear: return Linear{};
        case FormKind::Quadratic: return Quadratic{};
        case FormKind::NegativeExponential: return NegativeExponential{coefficient};
        case FormKind::JenssBayley: return JenssBayley{coefficient};
        case FormKind::BilinearSpline: return BilinearSpline{coefficient};
    }
    throw ModelError("unknown functional form");
}

std::string to_string(FormKind kind) {
    switch (kind) {
        case FormKind::Linear: return "linear";
        case FormKind::Quadratic: return "quadratic";
        case FormKind::NegativeExponential: return "negexp";
        case FormKind::JenssBayley: return "jenss";
        case FormKind::BilinearSpline: return "bilinear";
    }
    return "?";
}

FormKind form_kind_from_string(const std::string& name) {
    if (name == "linear") return FormKind::Linear;
    if (name == "quadratic") return FormKind::Quadratic;
    if (name == "negexp") return FormKind::NegativeExponential;
    if (name == "jenss") return FormKind::JenssBayley;
    if (name == "bilinear") return FormKind::BilinearSpline;
    throw ModelError("unknown functional form '" + name + "'");
}

std::string to_string(TvcDecomposition d) {
    return d == TvcDecomposition::IntervalSlopes ? "slopes" : "changes";
}

TvcDecomposition decomposition_from_string(const std::string& name) {
    if (name == "slopes") return TvcDecomposition::IntervalSlopes;
    if (name == "changes") return TvcDecomposition::IntervalChanges;
    throw ModelError("unknown decomposition '" + name + "'");
}

namespace detail {

void fill_tvc_loadings(const Vec& times, const Vec& rates, Eigen::Ref<Mat> out) {
    const Eigen::Index J = times.size();
    out.col(0).setOnes();
    out(0, 1) = 0.0;
    for (Eigen::Index j = 1; j < J; ++j)
        out(j, 1) = out(j - 1, 1) + rates[j - 1] * (times[j] - times[j - 1]);
}

void fill_state_loadings(const Vec& times, const Vec& rates, TvcDecomposition decomposition,
                         Eigen::Ref<Vec> out) {
    const Eigen::Index J = times.size();
    out[0] = 0.0;
    for (Eigen::Index j = 1; j < J; ++j) {
        out[j] = rates[j - 1];
        if (decomposition == TvcDecomposition::IntervalChanges) out[j] *= times[j] - times[j - 1];
    }
}

void fill_outcome_loadings(const FunctionalForm& form, const Vec& times, Eigen::Ref<Mat> out) {
    const Eigen::Index J = times.size();
    out.col(0).setOnes();
    switch (kind_of(form)) {
        case FormKind::Linear:
            out.col(1) = times;
            break;
        case FormKind::Quadratic:
            out.col(1) = times;
            out.col(2) = times.array().square();
            break;
        case FormKind::NegativeExponential: {
            const double b = std::get<NegativeExponential>(form).b;
            for (Eigen::Index j = 0; j < J; ++j) out(j, 1) = -std::expm1(-b * times[j]);
            break;
        }
        case FormKind::JenssBayley: {
            const double c = std::get<JenssBayley>(form).c;
            out.col(1) = times;
            for (Eigen::Index j = 0; j < J; ++j) out(j, 2) = std::expm1(c * times[j]);
            break;
        }
        case FormKind::BilinearSpline: {
            const double g = std::get<BilinearSpline>(form).gamma;
            for (Eigen::Index j = 0; j < J; ++j) {
                out(j, 1) = times[j] - g;
                out(j, 2) = std::abs(times[j] - g);
            }
            break;
        }
    }
}

}  // namespace detail

Mat tvc_loadings(const Occasions& occasions, const RelativeRates& rates) {
    if (rates.size() != occasions.size() - 1)
        throw ModelError("relative rates must have length J-1");
    Mat out(occasions.size(), 2);
    detail::fill_tvc_loadings(occasions.times(), rates.values(), out);
    return out;
}

Vec state_features(const TvcGrowthFactors& factors, const Occasions& occasions,
                   const RelativeRates& rates, TvcDecomposition decomposition) {
    if (rates.size() != occasions.size() - 1)
        throw ModelError("relative rates must have length J-1");
    Vec out(occasions.size());
    detail::fill_state_loadings(occasions.times(), rates.values(), decomposition, out);
    return factors.eta1 * out;
}

Mat outcome_loadings(const FunctionalForm& form, const Occasions& occasions) {
    switch (kind_of(form)) {
        case FormKind::NegativeExponential:
            if (!(std::get<NegativeExponential>(form).b > 0.0))
                throw ModelError("negative exponential rate b must be positive");
            break;
        case FormKind::JenssBayley:
            if (!(std::get<JenssBayley>(form).c < 0.0))
                throw ModelError("Jenss-Bayley coefficient c must be negative");
            break;
        case FormKind::BilinearSpline: {
            const double g = std::get<BilinearSpline>(form).gamma;
            if (!(g > occasions.front() && g < occasions.back()))
                throw ModelError("knot must lie strictly inside the observed time range");
            break;
        }
        default:
            break;
    }
    Mat out(occasions.size(), growth_factor_count(form));
    detail::fill_outcome_loadings(form, occasions.times(), out);
    return out;
}

Eigen::Vector3d reparameterize_bilinear(const BilinearFactors& f, double gamma) {
    return {f.eta0 + gamma * f.eta1, 0.5 * (f.eta1 + f.eta2), 0.5 * (f.eta2 - f.eta1)};
}

BilinearFactors inverse_reparameterize_bilinear(const Eigen::Vector3d& r, double gamma) {
    const double eta1 = r[1] - r[2];
    return {r[0] - gamma * eta1, eta1, r[1] + r[2]};
}

Eigen::Matrix3d bilinear_transform(double gamma) {
    Eigen::Matrix3d t;
    t << 1.0, gamma, 0.0,
         0.0, 0.5, 0.5,
         0.0, -0.5, 0.5;
    return t;
}

Eigen::Matrix3d bilinear_inverse_transform(double gamma) {
    Eigen::Matrix3d t;
    t << 1.0, -gamma, gamma,
         0.0, 1.0, -1.0,
         0.0, 1.0, 1.0;
    return t;
}

}  // namespace gmmtvc
