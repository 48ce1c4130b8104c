#include "gmmtvc/optimizer.hpp"

#include <cmath>
#include <limits>

namespace gmmtvc {

double scaled_gradient(const Vec& g, const Vec& x, double f) {
    const double fs = std::max(1.0, std::abs(f));
    double m = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) m = std::max(m, std::abs(g[i]) * std::max(1.0, std::abs(x[i])) / fs);
    return m;
}

BfgsResult minimize_bfgs(const std::function<double(const Vec&)>& value,
                         const std::function<Vec(const Vec&)>& gradient, Vec x0, const BfgsOptions& opt) {
    BfgsResult res;
    const Eigen::Index n = x0.size();
    res.x = std::move(x0);
    res.value = value(res.x);
    if (!std::isfinite(res.value)) {
        res.message = "objective not finite at the starting point";
        return res;
    }
    res.gradient = gradient(res.x);
    if (!res.gradient.allFinite()) {
        res.message = "gradient not finite at the starting point";
        return res;
    }

    Mat H = Mat::Identity(n, n);
    bool identity = true;
    bool scaled = false;
    double rel_change = std::numeric_limits<double>::infinity();
    constexpr double c1 = 1e-4;

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        const double gmax = scaled_gradient(res.gradient, res.x, res.value);
        if (gmax < opt.gradient_tolerance && rel_change < opt.relative_tolerance) {
            res.converged = true;
            res.message = "converged";
            return res;
        }

        Vec d = -H * res.gradient;
        double slope = res.gradient.dot(d);
        if (!(slope < 0.0)) {
            H.setIdentity();
            identity = true;
            scaled = false;
            d = -res.gradient;
            slope = res.gradient.dot(d);
        }
        double alpha = 1.0;
        const double dmax = d.cwiseAbs().maxCoeff();
        if (dmax * alpha > opt.max_step) alpha = opt.max_step / dmax;

        bool accepted = false;
        Vec xn;
        double fn = 0.0;
        for (int ls = 0; ls < 60; ++ls) {
            xn = res.x + alpha * d;
            fn = value(xn);
            if (std::isfinite(fn) && fn <= res.value + c1 * alpha * slope) {
                accepted = true;
                break;
            }
            double next = 0.5 * alpha;
            if (std::isfinite(fn)) {
                // Minimizer of the quadratic through f(0), f'(0), f(alpha).
                const double q = -slope * alpha * alpha / (2.0 * (fn - res.value - slope * alpha));
                if (q > 0.1 * alpha && q < 0.5 * alpha) next = q;
            } else {
                next = 0.25 * alpha;
            }
            alpha = next;
        }
        if (!accepted) {
            if (!identity) {
                H.setIdentity();
                identity = true;
                scaled = false;
                continue;
            }
            res.converged = gmax < opt.gradient_tolerance;
            res.message = res.converged ? "converged (no further decrease possible)" : "line search failed";
            // Leave the objective's cached point at res.x.
            value(res.x);
            return res;
        }

        Vec gn = gradient(xn);
        if (!gn.allFinite()) {
            res.message = "gradient not finite";
            return res;
        }
        const Vec s = xn - res.x;
        const Vec y = gn - res.gradient;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {
                H *= sy / y.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Vec Hy = H * y;
            const double yHy = y.dot(Hy);
            H += ((1.0 + rho * yHy) * rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
            identity = false;
        }
        rel_change = std::abs(res.value - fn) / std::max(1.0, std::abs(fn));
        res.x = std::move(xn);
        res.value = fn;
        res.gradient = std::move(gn);
    }
    res.message = "iteration limit reached";
    return res;
}

}  // namespace gmmtvc
