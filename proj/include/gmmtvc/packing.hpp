#pragma once

#include "gmmtvc/model_spec.hpp"

#include <string>
#include <vector>

namespace gmmtvc {

/// Residual and covariate variances are floored here when unpacked, which
/// is where exact-fit data drives them.
inline constexpr double kVarianceFloor = 1e-6;

/// Positions of the packed (unconstrained) parameters. Each class occupies a
/// contiguous block; the gating block follows the last class.
class ParameterMap {
public:
    ParameterMap(const ModelSpec& spec, int waves);

    int size() const { return total_; }
    int class_block_size() const { return per_class_; }
    int class_offset(int k) const { return k * per_class_; }
    int gating_offset() const { return spec_.classes * per_class_; }
    /// Class that owns packed index i, or -1 for gating parameters.
    int owner(int i) const { return i < gating_offset() ? i / per_class_ : -1; }
    const std::vector<std::string>& names() const { return names_; }
    const ModelSpec& spec() const { return spec_; }
    int waves() const { return waves_; }

private:
    ModelSpec spec_;
    int waves_;
    int per_class_ = 0;
    int total_ = 0;
    std::vector<std::string> names_;
};

/// Variances -> log, correlations (rho_bl, residual xy) -> atanh,
/// covariance matrices -> log-Cholesky, b -> log b, c -> log(-c); the rest
/// is carried as is.
Vec pack_parameters(const Theta& theta, const ParameterMap& map);
/// Inverse of pack_parameters. Throws ModelError on length mismatch.
Theta unpack_parameters(const Vec& packed, const ParameterMap& map);

/// Single-class versions used by the likelihood kernels.
void pack_class(const ClassParameters& p, const ModelLayout& layout, int waves, Eigen::Ref<Vec> out);
ClassParameters unpack_class(const Eigen::Ref<const Vec>& packed, const ModelLayout& layout, int waves);
int class_parameter_count(const ModelLayout& layout, int waves);
GatingParameters unpack_gating(const Eigen::Ref<const Vec>& packed, int classes, int gating_tics);

/// Free-parameter count (the p in AIC/BIC).
inline int free_parameter_count(const ModelSpec& spec, int waves) { return ParameterMap(spec, waves).size(); }

}  // namespace gmmtvc
