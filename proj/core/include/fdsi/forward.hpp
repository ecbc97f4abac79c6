#pragma once

// Desk-scale flow-geomechanics surrogate: implicit single-phase, slightly
// compressible injection flow on a Cartesian grid with a uniaxial-strain
// poroelastic closure and fault traction evaluation.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "fdsi/common.hpp"
#include "fdsi/faultgeom.hpp"
#include "fdsi/geostat.hpp"

namespace fdsi::forward {

inline constexpr double kGravity = 9.80665;
inline constexpr double kMilliDarcy = 9.869233e-16;  // m^2
inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr double kDaysPerYear = 365.25;

struct Grid {
  int nx = 25;
  int ny = 25;
  int nz = 5;
  double dx = 1000.0;  // m
  double dy = 1000.0;
  double dz = 12.0;
  double top_depth = 1600.0;  // depth of the top face of layer 0, m

  [[nodiscard]] GridDims dims() const noexcept { return {nx, ny, nz}; }
  [[nodiscard]] std::size_t cell_count() const noexcept { return dims().size(); }
  [[nodiscard]] double cell_volume() const noexcept { return dx * dy * dz; }
  [[nodiscard]] double center_depth(int k) const noexcept { return top_depth + (k + 0.5) * dz; }
  void validate() const;
};

struct WellSpec {
  std::string name;
  int i = 0;
  int j = 0;
  std::vector<int> layers;  // empty: all layers
  double rate_m3_per_day = 0.0;
  double start_year = 0.0;
  double stop_year = 1.0e9;

  void validate(const Grid& grid) const;
  [[nodiscard]] std::vector<int> perforated_layers(const Grid& grid) const;
};

/// Reservoir-condition volume rate (m^3/day) for a CO2 mass rate in Mt/year.
[[nodiscard]] double mass_rate_to_volume_rate(double megatonnes_per_year, double co2_density = 520.0) noexcept;

struct FluidProperties {
  double total_compressibility = 5.0e-4;  // 1/MPa
  double viscosity_mpas = 0.5;
  double brine_density = 1000.0;  // kg/m^3, hydrostatic gradient
};

struct InitialConditions {
  double reference_pressure = 17.0;  // MPa at reference_depth
  double reference_depth = 1630.0;
  double bulk_density = 2300.0;  // kg/m^3, overburden

  [[nodiscard]] double hydrostatic_pressure(double depth, const FluidProperties& fluid) const noexcept;
  [[nodiscard]] double overburden_stress(double depth) const noexcept;
};

struct TimeStepping {
  double initial_dt_years = 0.05;
  double growth = 1.5;
  double max_dt_years = 2.0;
};

/// Planar fault described by orientation, a reference point on the plane
/// (x, y in metres; depth in metres) and a selection thickness.
struct FaultPlane {
  std::string name;
  double strike_deg = 0.0;
  double dip_deg = 60.0;
  double x = 0.0;
  double y = 0.0;
  double depth = 0.0;
  double thickness = 1000.0;
  double friction = faultgeom::kDefaultFriction;
};

/// Cells whose centre lies within thickness/2 of the plane.
[[nodiscard]] std::vector<std::size_t> select_fault_cells(const Grid& grid, const FaultPlane& plane);
[[nodiscard]] faultgeom::FaultSpec make_fault_spec(const Grid& grid, const FaultPlane& plane);

struct Scenario {
  Grid grid;
  std::vector<WellSpec> wells;
  std::vector<faultgeom::FaultSpec> faults;  // faults[0] uses logmult1, faults[1] logmult2
  FluidProperties fluid;
  InitialConditions initial;
  TimeStepping stepping;
  double kz_over_kx = 0.1;
  std::vector<double> report_times{2.0, 4.0, 6.0, 8.0, 20.0, 36.0, 50.0};

  void validate() const;
  /// Per-cell membership mask of the union of fault cells.
  [[nodiscard]] std::vector<bool> fault_mask() const;
};

/// Four fields at each report time; rows are times, columns cells. Stress
/// fields are zero off-fault.
struct SimResult {
  std::vector<double> times;
  RowMatrix pressure;     // MPa
  RowMatrix strain_zz;    // dimensionless, extension positive
  RowMatrix sigma_n_eff;  // MPa
  RowMatrix tau;          // MPa

  // Diagnostics, one entry per report time.
  std::vector<double> injected_volume;  // m^3, cumulative
  std::vector<double> storage_change;   // m^3, sum of s_i * dp_i
  std::size_t tensile_cells = 0;        // fault (cell, time) pairs with sigma_n_eff <= 0

  [[nodiscard]] std::size_t cell_count() const noexcept { return static_cast<std::size_t>(pressure.cols()); }
};

/// Storage (m^3/MPa) and two-point transmissibility Laplacian (m^3/(MPa day)).
struct PressureSystem {
  Eigen::VectorXd storage;
  Eigen::SparseMatrix<double> laplacian;
};

[[nodiscard]] PressureSystem build_pressure_system(const Grid& grid, std::span<const double> perm_md,
                                                   double kz_over_kx, std::span<const double> poro,
                                                   const FluidProperties& fluid);

/// Backward-Euler solver for (S/dt + L) dp_new = S/dt dp_old + q. Factorisations
/// are cached per step length.
class PressureSolver {
 public:
  explicit PressureSolver(PressureSystem system);
  ~PressureSolver();
  PressureSolver(PressureSolver&&) noexcept;
  PressureSolver& operator=(PressureSolver&&) noexcept;

  [[nodiscard]] Eigen::VectorXd step(const Eigen::VectorXd& dp, const Eigen::VectorXd& source_m3_per_day,
                                     double dt_days);
  [[nodiscard]] const PressureSystem& system() const noexcept { return system_; }

 private:
  struct Factorization;
  PressureSystem system_;
  std::unique_ptr<Factorization> factor_;
};

[[nodiscard]] Eigen::VectorXd solve_pressure_step(const PressureSystem& system, const Eigen::VectorXd& dp,
                                                  const Eigen::VectorXd& source_m3_per_day, double dt_days);

struct PoroelasticCoefficients {
  double uniaxial_compressibility = 0.0;  // strain_zz per MPa of pressure change
  double horizontal_stress_path = 0.0;    // d(sigma'_h)/dp
};

/// c_m = biot (1+nu)(1-2nu) / (E (1-nu)); d(sigma'_h)/dp = -biot (1-2nu)/(1-nu).
[[nodiscard]] PoroelasticCoefficients poroelastic_coefficients(double young_gpa, double nu, double biot);

struct PoroelasticResponse {
  std::vector<double> strain_zz;
  std::vector<double> dsigma_h_eff;
};
[[nodiscard]] PoroelasticResponse poroelastic_response(std::span<const double> dp, double young_gpa, double nu,
                                                       double biot);

struct FaultFields {
  RowMatrix sigma_n_eff;
  RowMatrix tau;
  std::size_t tensile_cells = 0;
};

/// Effective normal and shear traction on every fault cell at every row of
/// `pressure`. The total stress in a cell is the initial effective principal
/// state of its layer, shifted horizontally by `dsigma_h_eff`, plus biot*p on
/// the diagonal.
[[nodiscard]] FaultFields fault_stress_history(const Grid& grid, const RowMatrix& pressure,
                                               const RowMatrix& dsigma_h_eff,
                                               std::span<const faultgeom::FaultSpec> faults,
                                               const geostat::StressState& initial, double biot);

/// Vertical effective stress per layer from overburden minus biot * hydrostatic pressure.
[[nodiscard]] std::vector<double> vertical_effective_stress(const Grid& grid, const InitialConditions& initial,
                                                            const FluidProperties& fluid, double biot);

[[nodiscard]] std::vector<double> initial_pressure(const Grid& grid, const InitialConditions& initial,
                                                   const FluidProperties& fluid);

/// Sub-step lengths (years) covering [t0, t1] with a geometric ramp.
[[nodiscard]] std::vector<double> substeps(double t0, double t1, const TimeStepping& stepping);

[[nodiscard]] SimResult simulate(const geostat::GeoModel& model, const Scenario& scenario);

}  // namespace fdsi::forward
