#pragma once

#include "gmmtvc/fit.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gmmtvc {

std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text);

/// Results document: spec, status, information criteria, packed optimum
/// (enough to rebuild theta) and a table of estimates with Wald intervals.
/// posterior_file is recorded as given.
std::string fit_to_json(const FitResult& fit, const std::string& posterior_file = "",
                        double time_min = 0.0, double time_max = 0.0);

struct StoredFit {
    FitResult fit;  ///< posterior left empty
    std::string posterior_file;
    double time_min = 0.0;
    double time_max = 0.0;
};
StoredFit fit_from_json(const std::string& text);

std::string posterior_to_csv(const PosteriorMatrix& post, const LongitudinalDataset& data);
PosteriorMatrix posterior_from_csv(const std::string& text);

struct TrajectoryPoint {
    int cls = 0;  ///< 1-based
    double t = 0.0;
    double value = 0.0;
};

/// Class curves from the growth-factor means alone (no state term).
std::vector<TrajectoryPoint> emit_trajectories(const FitResult& fit, const Vec& time_grid);
std::string trajectories_to_csv(const std::vector<TrajectoryPoint>& points);

std::string enumeration_to_csv(const EnumerationResult& table);

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace gmmtvc
