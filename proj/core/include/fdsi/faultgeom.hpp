#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fdsi::faultgeom {

inline constexpr double kDefaultFriction = 0.6;

/// A planar fault: one orientation shared by all of its grid cells.
struct FaultSpec {
  std::string name;
  double strike_deg = 0.0;  // from +x in the x-y plane, [0, 180)
  double dip_deg = 90.0;    // from horizontal, (0, 90]
  std::vector<std::size_t> cells;
  double friction_coeff = kDefaultFriction;

  void validate() const;
};

/// Symmetric 3x3 tensor, MPa, compression positive.
struct StressTensor {
  double xx = 0.0;
  double yy = 0.0;
  double zz = 0.0;
  double xy = 0.0;
  double xz = 0.0;
  double yz = 0.0;

  [[nodiscard]] static StressTensor diagonal(double sxx, double syy, double szz) noexcept {
    return StressTensor{sxx, syy, szz, 0.0, 0.0, 0.0};
  }
  [[nodiscard]] static StressTensor from_matrix(const Eigen::Matrix3d& m) noexcept;
  [[nodiscard]] Eigen::Matrix3d matrix() const noexcept;
};

/// Unit normal (-sin(strike) sin(dip), cos(strike) sin(dip), cos(dip)); the
/// z-component is non-negative.
[[nodiscard]] Eigen::Vector3d fault_normal(double strike_deg, double dip_deg);

/// t = sigma . n. Throws ValidationError when |n| deviates from 1 by more than 1e-8.
[[nodiscard]] Eigen::Vector3d traction(const StressTensor& sigma, const Eigen::Vector3d& n);

struct TractionParts {
  double sigma_n = 0.0;      // total normal traction n.t
  double sigma_n_eff = 0.0;  // sigma_n - biot * p
  double tau = 0.0;          // shear traction magnitude
  bool tensile = false;      // sigma_n_eff <= 0: slip tendency undefined
};

[[nodiscard]] TractionParts decompose_traction(const Eigen::Vector3d& t, const Eigen::Vector3d& n, double pressure,
                                               double biot);

struct SlipTendency {
  double value = 0.0;  // NaN when undefined
  bool defined = false;
  bool slip = false;  // value > friction
};

[[nodiscard]] SlipTendency slip_tendency(double tau, double sigma_n_eff, double friction = kDefaultFriction);

/// Per-cell fault state at one time.
struct FaultCellState {
  double sigma_n_eff = 0.0;
  double tau = 0.0;
  SlipTendency ts;
};

[[nodiscard]] FaultCellState evaluate_cell(const StressTensor& sigma, const Eigen::Vector3d& n, double pressure,
                                           double biot, double friction = kDefaultFriction);

struct FaultAverage {
  double value = 0.0;  // NaN when undefined
  bool defined = false;
  std::size_t undefined_cells = 0;
};

/// Arithmetic mean of per-cell slip tendency; undefined if any cell is.
[[nodiscard]] FaultAverage average_fst(std::span<const FaultCellState> cells);
[[nodiscard]] FaultAverage average_fst(std::span<const double> sigma_n_eff, std::span<const double> tau);

}  // namespace fdsi::faultgeom
