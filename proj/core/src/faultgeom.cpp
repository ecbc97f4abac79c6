#include "fdsi/faultgeom.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "fdsi/common.hpp"

namespace fdsi::faultgeom {
namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

void FaultSpec::validate() const {
  require(strike_deg >= 0.0 && strike_deg < 180.0, "fault " + name + ": strike must lie in [0, 180)");
  require(dip_deg > 0.0 && dip_deg <= 90.0, "fault " + name + ": dip must lie in (0, 90]");
  require(!cells.empty(), "fault " + name + ": cell list is empty");
  require(friction_coeff > 0.0, "fault " + name + ": friction coefficient must be positive");
}

StressTensor StressTensor::from_matrix(const Eigen::Matrix3d& m) noexcept {
  return StressTensor{m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)),
                      0.5 * (m(1, 2) + m(2, 1))};
}

Eigen::Matrix3d StressTensor::matrix() const noexcept {
  Eigen::Matrix3d m;
  m << xx, xy, xz, xy, yy, yz, xz, yz, zz;
  return m;
}

Eigen::Vector3d fault_normal(double strike_deg, double dip_deg) {
  const double th = strike_deg * kDeg;
  const double de = dip_deg * kDeg;
  return {-std::sin(th) * std::sin(de), std::cos(th) * std::sin(de), std::cos(de)};
}

Eigen::Vector3d traction(const StressTensor& s, const Eigen::Vector3d& n) {
  require(std::abs(n.norm() - 1.0) <= 1e-8, "traction requires a unit normal");
  return {s.xx * n.x() + s.xy * n.y() + s.xz * n.z(), s.xy * n.x() + s.yy * n.y() + s.yz * n.z(),
          s.xz * n.x() + s.yz * n.y() + s.zz * n.z()};
}

TractionParts decompose_traction(const Eigen::Vector3d& t, const Eigen::Vector3d& n, double pressure,
                                 double biot) {
  TractionParts parts;
  parts.sigma_n = n.dot(t);
  parts.sigma_n_eff = parts.sigma_n - biot * pressure;
  parts.tau = std::sqrt(std::max(t.squaredNorm() - parts.sigma_n * parts.sigma_n, 0.0));
  parts.tensile = !(parts.sigma_n_eff > 0.0);
  return parts;
}

SlipTendency slip_tendency(double tau, double sigma_n_eff, double friction) {
  SlipTendency ts;
  if (!(sigma_n_eff > 0.0)) {
    ts.value = kNaN;
    return ts;
  }
  ts.value = tau / sigma_n_eff;
  ts.defined = true;
  ts.slip = ts.value > friction;
  return ts;
}

FaultCellState evaluate_cell(const StressTensor& sigma, const Eigen::Vector3d& n, double pressure, double biot,
                             double friction) {
  const auto parts = decompose_traction(traction(sigma, n), n, pressure, biot);
  return FaultCellState{parts.sigma_n_eff, parts.tau, slip_tendency(parts.tau, parts.sigma_n_eff, friction)};
}

FaultAverage average_fst(std::span<const FaultCellState> cells) {
  require(!cells.empty(), "average slip tendency needs at least one cell");
  FaultAverage avg;
  double sum = 0.0;
  for (const auto& c : cells) {
    if (c.ts.defined) {
      sum += c.ts.value;
    } else {
      ++avg.undefined_cells;
    }
  }
  avg.defined = avg.undefined_cells == 0;
  avg.value = avg.defined ? sum / static_cast<double>(cells.size()) : kNaN;
  return avg;
}

FaultAverage average_fst(std::span<const double> sigma_n_eff, std::span<const double> tau) {
  require(sigma_n_eff.size() == tau.size(), "stress spans differ in length");
  std::vector<FaultCellState> cells(sigma_n_eff.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i] = FaultCellState{sigma_n_eff[i], tau[i], slip_tendency(tau[i], sigma_n_eff[i])};
  }
  return average_fst(cells);
}

}  // namespace fdsi::faultgeom
