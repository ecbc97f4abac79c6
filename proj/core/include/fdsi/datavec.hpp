#pragma once

// Flattened spatio-temporal data vectors, the monitoring selection operator,
// the observation-noise model and per-field z-score normalisation.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdsi/common.hpp"
#include "fdsi/forward.hpp"

namespace fdsi::datavec {

enum class FieldKind : int { pressure = 0, strain_zz = 1, sigma_n_eff = 2, tau = 3 };
inline constexpr int kFieldCount = 4;

[[nodiscard]] std::string_view field_name(FieldKind kind) noexcept;
[[nodiscard]] FieldKind field_from_name(std::string_view name);
[[nodiscard]] constexpr bool is_stress(FieldKind kind) noexcept {
  return kind == FieldKind::sigma_n_eff || kind == FieldKind::tau;
}

using DataVector = Eigen::VectorXd;

/// Bijection between (field, cell, time slot) and positions in d_full.
///
/// d_full = [d_hm; d_pred]. Inside each segment entries are grouped by time
/// slot, then field (pressure, strain_zz, sigma_n_eff, tau), then cell, so each
/// time slot is one contiguous "frame" of 4 * N_b values. Time slots count the
/// historical times first, then the prediction times.
class DataLayout {
 public:
  DataLayout(std::size_t n_cells, std::vector<double> hm_times, std::vector<double> pred_times,
             std::vector<bool> fault_mask);

  [[nodiscard]] static std::size_t full_size_for(std::size_t n_cells, std::size_t n_hm, std::size_t n_pred) noexcept {
    return kFieldCount * n_cells * (n_hm + n_pred);
  }

  [[nodiscard]] std::size_t n_cells() const noexcept { return n_cells_; }
  [[nodiscard]] std::size_t n_hm_times() const noexcept { return hm_times_.size(); }
  [[nodiscard]] std::size_t n_pred_times() const noexcept { return pred_times_.size(); }
  [[nodiscard]] std::size_t n_times() const noexcept { return hm_times_.size() + pred_times_.size(); }
  [[nodiscard]] std::size_t frame_size() const noexcept { return kFieldCount * n_cells_; }
  [[nodiscard]] std::size_t hm_size() const noexcept { return frame_size() * n_hm_times(); }
  [[nodiscard]] std::size_t pred_size() const noexcept { return frame_size() * n_pred_times(); }
  [[nodiscard]] std::size_t full_size() const noexcept { return hm_size() + pred_size(); }

  [[nodiscard]] const std::vector<double>& hm_times() const noexcept { return hm_times_; }
  [[nodiscard]] const std::vector<double>& pred_times() const noexcept { return pred_times_; }
  [[nodiscard]] std::vector<double> times() const;
  [[nodiscard]] const std::vector<bool>& fault_mask() const noexcept { return fault_mask_; }
  [[nodiscard]] std::vector<std::size_t> fault_cells() const;

  [[nodiscard]] std::size_t index(FieldKind field, std::size_t cell, std::size_t time_slot) const;
  [[nodiscard]] bool in_history(std::size_t flat) const noexcept { return flat < hm_size(); }
  [[nodiscard]] FieldKind field_of(std::size_t flat) const noexcept;
  [[nodiscard]] std::size_t cell_of(std::size_t flat) const noexcept { return flat % n_cells_; }
  [[nodiscard]] std::size_t time_slot_of(std::size_t flat) const noexcept { return flat / frame_size(); }
  /// Stress entries outside fault cells: always zero, skipped by normalisation.
  [[nodiscard]] bool structural_zero(std::size_t flat) const noexcept;

  /// Positions that are not structural zeros, ascending. Every frame holds the
  /// same number of them.
  [[nodiscard]] const std::vector<std::size_t>& active_indices() const noexcept { return active_; }
  [[nodiscard]] std::size_t active_frame_size() const noexcept { return active_.size() / n_times(); }

 private:
  std::size_t n_cells_;
  std::vector<double> hm_times_;
  std::vector<double> pred_times_;
  std::vector<bool> fault_mask_;
  std::vector<std::size_t> active_;
};

/// Gathers the layout's times from `sim`; rejects a missing time.
[[nodiscard]] DataVector assemble_dfull(const forward::SimResult& sim, const DataLayout& layout);
/// Inverse of assemble_dfull on the layout's times (diagnostics are left empty).
[[nodiscard]] forward::SimResult scatter_dfull(const DataVector& d, const DataLayout& layout);

[[nodiscard]] DataVector compact(const DataVector& d, const DataLayout& layout);
[[nodiscard]] DataVector expand(const DataVector& active, const DataLayout& layout);

struct SelectionEntry {
  int well = 0;
  FieldKind field = FieldKind::pressure;
  std::size_t cell = 0;
  std::size_t time_slot = 0;
  std::size_t flat = 0;
};

/// The selection operator H stored as the list of gathered positions.
class SelectionIndex {
 public:
  SelectionIndex() = default;
  /// Validates uniqueness and that every entry lies in the historical segment.
  SelectionIndex(std::vector<SelectionEntry> entries, const DataLayout& layout);

  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
  [[nodiscard]] const std::vector<SelectionEntry>& entries() const noexcept { return entries_; }

 private:
  std::vector<SelectionEntry> entries_;
};

/// Entries for wells recording `fields` at every listed (column, layer) and
/// every historical time, ordered well, time, field, layer.
struct MonitorColumn {
  int i = 0;
  int j = 0;
  std::vector<int> layers;
};
[[nodiscard]] SelectionIndex build_selection(const DataLayout& layout, GridDims dims,
                                             std::span<const MonitorColumn> wells,
                                             std::span<const FieldKind> fields);

/// H d.
[[nodiscard]] Eigen::VectorXd extract_monitor(const DataVector& d, const SelectionIndex& sel);
/// H^T u, a full-length vector.
[[nodiscard]] DataVector scatter_monitor(const Eigen::VectorXd& u, const SelectionIndex& sel,
                                         std::size_t full_size);

struct NoiseModel {
  double pressure_std = 0.1;     // MPa
  double strain_fraction = 0.1;  // of mean |strain| over monitored entries
  double strain_floor = 1.0e-8;  // absolute std when the mean underflows
};

struct NoiseCovariance {
  Eigen::VectorXd variances;
  double strain_std = 0.0;
  bool strain_floor_applied = false;
};

/// Diagonal C_D. `monitored_strains` are the strain values whose mean |.| sets
/// the strain standard deviation.
[[nodiscard]] NoiseCovariance build_noise_cov(const SelectionIndex& sel, std::span<const double> monitored_strains,
                                              const NoiseModel& model = {});

struct ObservationSet {
  Eigen::VectorXd d_obs;
  Eigen::VectorXd cd_diag;
  Eigen::VectorXd d_true;
  std::vector<SelectionEntry> selection;
  std::uint64_t seed = 0;
  std::string truth_id;

  [[nodiscard]] std::string to_json_text() const;
  [[nodiscard]] static ObservationSet from_json_text(const std::string& text);
  friend bool operator==(const ObservationSet&, const ObservationSet&);
};

/// d_obs = H d_true + eps, eps ~ N(0, diag(cd_diag)).
[[nodiscard]] ObservationSet make_observations(const DataVector& d_true_full, const SelectionIndex& sel,
                                               const Eigen::VectorXd& cd_diag, std::uint64_t seed,
                                               std::string truth_id = "truth");

/// Per-field z-score statistics. Stress statistics use fault cells only.
struct NormStats {
  std::array<double, kFieldCount> mean{};
  std::array<double, kFieldCount> std{};
};

/// Fits on the rows of `training` (one d_full per row).
[[nodiscard]] NormStats fit_norm_stats(const RowMatrix& training, const DataLayout& layout);

[[nodiscard]] DataVector normalize(const DataVector& d, const NormStats& stats, const DataLayout& layout);
[[nodiscard]] DataVector denormalize(const DataVector& z, const NormStats& stats, const DataLayout& layout);

}  // namespace fdsi::datavec
