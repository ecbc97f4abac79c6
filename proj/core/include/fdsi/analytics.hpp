#pragma once

// Ensemble statistics: quantile bands, reconstruction error metrics,
// representative members and slip-tendency histograms.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fdsi/common.hpp"
#include "fdsi/datavec.hpp"
#include "fdsi/faultgeom.hpp"

namespace fdsi::analytics {

/// Linear interpolation between order statistics at h = (n-1) p.
[[nodiscard]] double quantile(std::span<const double> values, double p);
[[nodiscard]] double quantile_sorted(std::span<const double> sorted, double p);
[[nodiscard]] double interquartile_range(std::span<const double> values);

struct PercentileBand {
  Eigen::VectorXd p10;
  Eigen::VectorXd p50;
  Eigen::VectorXd p90;

  [[nodiscard]] Eigen::VectorXd width() const { return p90 - p10; }
};

/// Per-column P10/P50/P90 of `ensemble` (members are rows).
[[nodiscard]] PercentileBand percentile_band(const RowMatrix& ensemble);
/// Rows of the result follow `probs`.
[[nodiscard]] Eigen::MatrixXd column_quantiles(const RowMatrix& ensemble, std::span<const double> probs);

struct FieldErrors {
  std::array<double, datavec::kFieldCount> delta{};  // range-normalised, per field
  std::array<double, 2> stress_value_normalised{};    // sigma_n_eff, tau divided by reference values
  std::size_t excluded_times = 0;                     // (field, time) pairs with zero range
};

/// Stress errors use fault cells only.
[[nodiscard]] FieldErrors relative_errors(const datavec::DataVector& reconstructed,
                                          const datavec::DataVector& reference, const datavec::DataLayout& layout);

struct BoxSummary {
  double p10 = 0, p25 = 0, p50 = 0, p75 = 0, p90 = 0;
};
[[nodiscard]] BoxSummary box_summary(std::span<const double> values);

struct ErrorReport {
  std::vector<FieldErrors> cases;
  std::array<BoxSummary, datavec::kFieldCount> summary{};
};
[[nodiscard]] ErrorReport error_report(std::vector<FieldErrors> cases);

struct Representatives {
  std::vector<std::size_t> medoids;  // member indices, one per cluster
  std::vector<int> labels;           // cluster of every member
  Eigen::MatrixXd centroids;         // k x dim
  int attempts = 1;
};

/// k-means (k-means++ seeding) on the rows of `points`, then the medoid of
/// every cluster. An empty cluster triggers a reseed, at most 10 attempts.
[[nodiscard]] Representatives k_representatives(const RowMatrix& points, std::size_t k, std::uint64_t seed);

/// Member of `cluster` minimising the summed Euclidean distance to the others.
[[nodiscard]] std::size_t cluster_medoid(const RowMatrix& points, std::span<const std::size_t> cluster);

/// Average slip tendency of one fault at one time slot of a d_full vector.
[[nodiscard]] faultgeom::FaultAverage average_fst(const datavec::DataVector& d, const datavec::DataLayout& layout,
                                                  std::span<const std::size_t> fault_cells, std::size_t time_slot,
                                                  double friction = faultgeom::kDefaultFriction);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};
/// Uniform bins over [lo, hi]; the top edge is inclusive and values outside are ignored.
[[nodiscard]] Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

struct FstHistogram {
  Histogram prior;
  Histogram posterior;
  double truth = 0.0;
  double threshold = faultgeom::kDefaultFriction;
  std::size_t prior_excluded = 0;
  std::size_t posterior_excluded = 0;
  double prior_iqr = 0.0;
  double posterior_iqr = 0.0;
  double prior_slip_fraction = 0.0;  // members above the threshold
  double posterior_slip_fraction = 0.0;
};

/// Undefined (NaN) members are excluded and counted. Bins span the pooled
/// prior and posterior range.
[[nodiscard]] FstHistogram fst_histograms(std::span<const double> prior, std::span<const double> posterior, double truth,
                                          std::size_t bins = 30, double threshold = faultgeom::kDefaultFriction);

}  // namespace fdsi::analytics
