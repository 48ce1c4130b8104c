#pragma once

#include "gmmtvc/model_core.hpp"

#include <functional>
#include <string>

namespace gmmtvc {

struct BfgsOptions {
    int max_iterations = 2000;
    double relative_tolerance = 1e-8;  ///< on |f_k - f_{k+1}| / max(1, |f|)
    double gradient_tolerance = 1e-5;  ///< on scaled_gradient
    double max_step = 2.0;             ///< sup-norm cap on a single step
};

struct BfgsResult {
    Vec x;
    double value = 0.0;
    Vec gradient;
    int iterations = 0;
    bool converged = false;
    std::string message;
};

/// max_i |g_i| max(1, |x_i|) / max(1, |f|). The likelihood is only piecewise
/// smooth in a bilinear knot, so an unscaled gradient stalls well above any
/// fixed absolute tolerance there.
double scaled_gradient(const Vec& gradient, const Vec& x, double value);

/// Quasi-Newton minimization with an inverse-Hessian BFGS update and a
/// backtracking Armijo line search. The objective may return +inf for
/// infeasible points; the line search backs away from them.
BfgsResult minimize_bfgs(const std::function<double(const Vec&)>& value,
                         const std::function<Vec(const Vec&)>& gradient, Vec x0, const BfgsOptions& options = {});

}  // namespace gmmtvc
