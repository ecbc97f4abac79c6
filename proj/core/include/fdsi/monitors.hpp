#pragma once

// Greedy monitoring-well placement by linear-Gaussian variance reduction of a
// target quantity, using prior ensemble statistics only.

#include <span>
#include <vector>

#include "fdsi/common.hpp"
#include "fdsi/datavec.hpp"

namespace fdsi::monitors {

inline constexpr std::size_t kMinEnsemble = 50;

/// Data one candidate well would record, one row per prior member, and the
/// noise variance of each recorded entry.
struct Candidate {
  datavec::MonitorColumn column;
  RowMatrix values;
  Eigen::VectorXd noise_var;
};

struct MonitorPlan {
  std::vector<datavec::MonitorColumn> wells;
  std::vector<std::size_t> candidate_index;  // position in the candidate list, in selection order
  std::vector<double> residual_variance;     // before any well, then after each added well
};

/// Trace of the conditional covariance of the standardised target columns
/// given the data of the `chosen` candidates.
[[nodiscard]] double residual_variance(const RowMatrix& target, std::span<const Candidate> candidates,
                                       std::span<const std::size_t> chosen);

/// Adds, one at a time, the candidate that minimises residual_variance. Ties
/// go to the earlier candidate.
[[nodiscard]] MonitorPlan place_monitors(const RowMatrix& target, std::span<const Candidate> candidates,
                                         std::size_t n_wells);

/// Candidates recording `fields` at every layer of each column and every
/// historical time of the prior d_full ensemble (rows). Strain noise uses the
/// mean |strain| over all candidate entries.
[[nodiscard]] std::vector<Candidate> build_candidates(const RowMatrix& prior_full, const datavec::DataLayout& layout,
                                                      GridDims dims, std::span<const datavec::MonitorColumn> columns,
                                                      std::span<const datavec::FieldKind> fields,
                                                      const datavec::NoiseModel& noise = {});

/// Every `stride`-th column of the grid, skipping the listed (i, j) locations.
[[nodiscard]] std::vector<datavec::MonitorColumn> strided_columns(GridDims dims, int stride,
                                                                  std::span<const std::pair<int, int>> excluded);

}  // namespace fdsi::monitors
