#pragma once

#include "gmmtvc/model_core.hpp"

#include <cmath>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmmtvc {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// One row of the wide schema. Missing y/x cells are NaN; times, x_e and
/// x_g are always observed.
struct Individual {
    std::string id;
    Vec times;
    Vec y;
    Vec x;
    double xe = 0.0;
    Vec xg;
    int label = -1;  ///< true class (0-based) when known, else -1
};

struct LongitudinalDataset {
    std::vector<Individual> rows;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
    int waves() const { return rows.empty() ? 0 : static_cast<int>(rows.front().times.size()); }
    int gating_tics() const { return rows.empty() ? 0 : static_cast<int>(rows.front().xg.size()); }
    bool has_labels() const;
    std::vector<int> labels() const;
};

/// Thrown for malformed input files or datasets that break invariants.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Checks per-row invariants (equal wave counts, strictly increasing finite
/// times, observed x_e/x_g). Messages name the offending 1-based row.
void validate(const LongitudinalDataset& data);

/// Wide CSV: id, t_1..t_J, y_1..y_J, x_1..x_J, xe, xg1, xg2[, label].
/// Empty cells in y/x are missing.
LongitudinalDataset read_dataset(std::istream& in);
LongitudinalDataset read_dataset(const std::string& path);
/// Long CSV: id, t, y, x, xe, xg1, xg2[, label], one row per occasion,
/// rows of an individual contiguous and time-ordered.
LongitudinalDataset read_long_dataset(std::istream& in);
LongitudinalDataset read_long_dataset(const std::string& path);

void write_dataset(std::ostream& out, const LongitudinalDataset& data);
void write_dataset(const std::string& path, const LongitudinalDataset& data);

/// Canonical float formatting for every file this project writes.
std::string format_double(double v);

/// Baseline mean and sd used to standardize the TVC.
struct TvcScale {
    double mean = 0.0;
    double sd = 1.0;
    double to_original(double standardized) const { return standardized * sd + mean; }
};

/// Standardizes every wave of x by the mean and sd of the first wave.
/// Throws DataError when the baseline sd is zero.
LongitudinalDataset standardize_tvc(const LongitudinalDataset& data, TvcScale* scale = nullptr);

}  // namespace gmmtvc
