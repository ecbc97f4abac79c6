#include "fdsi/forward.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/SparseCholesky>

namespace fdsi::forward {

void Grid::validate() const {
  require(nx > 0 && ny > 0 && nz > 0, "grid cell counts must be positive");
  require(dx > 0 && dy > 0 && dz > 0, "grid spacings must be positive");
  require(top_depth >= 0, "grid top depth must be non-negative");
}

void WellSpec::validate(const Grid& grid) const {
  require(i >= 0 && i < grid.nx && j >= 0 && j < grid.ny, "well " + name + " lies outside the grid");
  for (int k : layers) require(k >= 0 && k < grid.nz, "well " + name + " perforates a layer outside the grid");
  require(rate_m3_per_day >= 0, "well " + name + " has a negative rate");
  require(stop_year > start_year, "well " + name + " stops before it starts");
}

std::vector<int> WellSpec::perforated_layers(const Grid& grid) const {
  if (!layers.empty()) return layers;
  std::vector<int> all(static_cast<std::size_t>(grid.nz));
  for (int k = 0; k < grid.nz; ++k) all[static_cast<std::size_t>(k)] = k;
  return all;
}

double mass_rate_to_volume_rate(double megatonnes_per_year, double co2_density) noexcept {
  return megatonnes_per_year * 1.0e9 / co2_density / kDaysPerYear;
}

double InitialConditions::hydrostatic_pressure(double depth, const FluidProperties& fluid) const noexcept {
  return reference_pressure + fluid.brine_density * kGravity * (depth - reference_depth) * 1.0e-6;
}

double InitialConditions::overburden_stress(double depth) const noexcept {
  return bulk_density * kGravity * depth * 1.0e-6;
}

std::vector<std::size_t> select_fault_cells(const Grid& grid, const FaultPlane& plane) {
  grid.validate();
  require(plane.thickness > 0, "fault " + plane.name + ": thickness must be positive");
  const Eigen::Vector3d n = faultgeom::fault_normal(plane.strike_deg, plane.dip_deg);
  const Eigen::Vector3d origin(plane.x, plane.y, -plane.depth);
  std::vector<std::size_t> cells;
  const auto dims = grid.dims();
  for (int k = 0; k < grid.nz; ++k) {
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        const Eigen::Vector3d c((i + 0.5) * grid.dx, (j + 0.5) * grid.dy, -grid.center_depth(k));
        if (std::abs(n.dot(c - origin)) <= 0.5 * plane.thickness) cells.push_back(dims.index(i, j, k));
      }
    }
  }
  return cells;
}

faultgeom::FaultSpec make_fault_spec(const Grid& grid, const FaultPlane& plane) {
  faultgeom::FaultSpec spec{plane.name, plane.strike_deg, plane.dip_deg, select_fault_cells(grid, plane),
                            plane.friction};
  spec.validate();
  return spec;
}

void Scenario::validate() const {
  grid.validate();
  for (const auto& w : wells) w.validate(grid);
  require(faults.size() <= 2, "at most two faults carry permeability multipliers");
  const auto n = grid.cell_count();
  std::vector<bool> seen(n, false);
  for (const auto& f : faults) {
    f.validate();
    for (auto c : f.cells) {
      require(c < n, "fault " + f.name + " references a cell outside the grid");
      require(!seen[c], "fault cell sets overlap");
      seen[c] = true;
    }
  }
  require(fluid.total_compressibility > 0 && fluid.viscosity_mpas > 0, "fluid properties must be positive");
  require(kz_over_kx > 0 && kz_over_kx <= 1, "kz_over_kx must lie in (0, 1]");
  require(!report_times.empty(), "at least one report time is required");
  for (std::size_t t = 0; t < report_times.size(); ++t) {
    require(report_times[t] > (t == 0 ? 0.0 : report_times[t - 1]), "report times must be positive and increasing");
  }
  require(stepping.initial_dt_years > 0 && stepping.growth >= 1 && stepping.max_dt_years > 0,
          "invalid time-stepping controls");
}

std::vector<bool> Scenario::fault_mask() const {
  std::vector<bool> mask(grid.cell_count(), false);
  for (const auto& f : faults) {
    for (auto c : f.cells) mask[c] = true;
  }
  return mask;
}

PressureSystem build_pressure_system(const Grid& grid, std::span<const double> perm_md, double kz_over_kx,
                                     std::span<const double> poro, const FluidProperties& fluid) {
  const auto dims = grid.dims();
  const std::size_t n = dims.size();
  require(perm_md.size() == n && poro.size() == n, "property fields do not match the grid");
  // k [mD] * A / L -> m^3/(MPa day) after dividing by viscosity.
  const double unit = kMilliDarcy / (fluid.viscosity_mpas * 1.0e-3) * 1.0e6 * kSecondsPerDay;

  PressureSystem sys;
  sys.storage.resize(static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < n; ++c) {
    sys.storage[static_cast<Eigen::Index>(c)] = grid.cell_volume() * poro[c] * fluid.total_compressibility;
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(7 * n);
  std::vector<double> diag(n, 0.0);
  auto connect = [&](std::size_t a, std::size_t b, double ka, double kb, double area, double length) {
    const double t = unit * area / length * (2.0 * ka * kb / (ka + kb));
    triplets.emplace_back(static_cast<int>(a), static_cast<int>(b), -t);
    triplets.emplace_back(static_cast<int>(b), static_cast<int>(a), -t);
    diag[a] += t;
    diag[b] += t;
  };
  for (int k = 0; k < grid.nz; ++k) {
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        const auto c = dims.index(i, j, k);
        if (i + 1 < grid.nx) {
          const auto e = dims.index(i + 1, j, k);
          connect(c, e, perm_md[c], perm_md[e], grid.dy * grid.dz, grid.dx);
        }
        if (j + 1 < grid.ny) {
          const auto e = dims.index(i, j + 1, k);
          connect(c, e, perm_md[c], perm_md[e], grid.dx * grid.dz, grid.dy);
        }
        if (k + 1 < grid.nz) {
          const auto e = dims.index(i, j, k + 1);
          connect(c, e, kz_over_kx * perm_md[c], kz_over_kx * perm_md[e], grid.dx * grid.dy, grid.dz);
        }
      }
    }
  }
  for (std::size_t c = 0; c < n; ++c) triplets.emplace_back(static_cast<int>(c), static_cast<int>(c), diag[c]);
  sys.laplacian.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  sys.laplacian.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

// One numeric factorisation per distinct step length; the sub-step ramp
// restarts every report interval, so the same few lengths recur.
struct PressureSolver::Factorization {
  using Ldlt = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;
  std::map<double, std::pair<Eigen::SparseMatrix<double>, std::unique_ptr<Ldlt>>> by_dt;
};

PressureSolver::PressureSolver(PressureSystem system)
    : system_(std::move(system)), factor_(std::make_unique<Factorization>()) {}

PressureSolver::~PressureSolver() = default;
PressureSolver::PressureSolver(PressureSolver&&) noexcept = default;
PressureSolver& PressureSolver::operator=(PressureSolver&&) noexcept = default;

Eigen::VectorXd PressureSolver::step(const Eigen::VectorXd& dp, const Eigen::VectorXd& source, double dt_days) {
  require(dt_days > 0, "time step must be positive");
  const Eigen::VectorXd s_over_dt = system_.storage / dt_days;
  auto it = factor_->by_dt.find(dt_days);
  if (it == factor_->by_dt.end()) {
    Eigen::SparseMatrix<double> a = system_.laplacian;
    a.diagonal() += s_over_dt;
    auto ldlt = std::make_unique<Factorization::Ldlt>();
    ldlt->compute(a);
    if (ldlt->info() != Eigen::Success) throw RuntimeFailure("pressure factorisation failed");
    it = factor_->by_dt.emplace(dt_days, std::make_pair(std::move(a), std::move(ldlt))).first;
  }
  const auto& [a, ldlt] = it->second;
  const Eigen::VectorXd rhs = s_over_dt.cwiseProduct(dp) + source;
  Eigen::VectorXd next = ldlt->solve(rhs);
  // Normwise backward error |A x - b| / (|A| |x| + |b|) in the infinity norm.
  double a_norm = 0.0;
  for (Eigen::Index c = 0; c < a.outerSize(); ++c) {
    double col = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, c); it; ++it) col += std::abs(it.value());
    a_norm = std::max(a_norm, col);  // symmetric: column sums equal row sums
  }
  const auto backward_error = [&](const Eigen::VectorXd& v) {
    const double denom = a_norm * v.lpNorm<Eigen::Infinity>() + rhs.lpNorm<Eigen::Infinity>();
    return denom > 0 ? (a * v - rhs).lpNorm<Eigen::Infinity>() / denom : 0.0;
  };
  double residual = backward_error(next);
  for (int sweep = 0; sweep < 2 && residual >= 1e-14; ++sweep) {
    next += ldlt->solve(rhs - a * next);
    residual = backward_error(next);
  }
  if (!(residual < 1e-10)) {
    std::ostringstream msg;
    msg << "pressure solve did not converge: backward error " << residual;
    throw RuntimeFailure(msg.str());
  }
  return next;
}

Eigen::VectorXd solve_pressure_step(const PressureSystem& system, const Eigen::VectorXd& dp,
                                    const Eigen::VectorXd& source, double dt_days) {
  PressureSolver solver(system);
  return solver.step(dp, source, dt_days);
}

PoroelasticCoefficients poroelastic_coefficients(double young_gpa, double nu, double biot) {
  require(nu < 0.5 && nu > -1.0, "Poisson ratio must lie below 0.5");
  require(young_gpa > 0, "Young's modulus must be positive");
  const double e_mpa = young_gpa * 1.0e3;
  PoroelasticCoefficients c;
  c.uniaxial_compressibility = biot * (1.0 + nu) * (1.0 - 2.0 * nu) / (e_mpa * (1.0 - nu));
  c.horizontal_stress_path = -biot * (1.0 - 2.0 * nu) / (1.0 - nu);
  return c;
}

PoroelasticResponse poroelastic_response(std::span<const double> dp, double young_gpa, double nu, double biot) {
  const auto c = poroelastic_coefficients(young_gpa, nu, biot);
  PoroelasticResponse r;
  r.strain_zz.resize(dp.size());
  r.dsigma_h_eff.resize(dp.size());
  for (std::size_t i = 0; i < dp.size(); ++i) {
    r.strain_zz[i] = c.uniaxial_compressibility * dp[i];
    r.dsigma_h_eff[i] = c.horizontal_stress_path * dp[i];
  }
  return r;
}

std::vector<double> vertical_effective_stress(const Grid& grid, const InitialConditions& initial,
                                              const FluidProperties& fluid, double biot) {
  std::vector<double> out(static_cast<std::size_t>(grid.nz));
  for (int k = 0; k < grid.nz; ++k) {
    const double z = grid.center_depth(k);
    out[static_cast<std::size_t>(k)] = initial.overburden_stress(z) - biot * initial.hydrostatic_pressure(z, fluid);
  }
  return out;
}

std::vector<double> initial_pressure(const Grid& grid, const InitialConditions& initial,
                                     const FluidProperties& fluid) {
  const auto dims = grid.dims();
  std::vector<double> p(dims.size());
  const std::size_t layer = static_cast<std::size_t>(grid.nx) * static_cast<std::size_t>(grid.ny);
  for (int k = 0; k < grid.nz; ++k) {
    const double pk = initial.hydrostatic_pressure(grid.center_depth(k), fluid);
    std::fill_n(p.begin() + static_cast<std::ptrdiff_t>(layer * static_cast<std::size_t>(k)), layer, pk);
  }
  return p;
}

FaultFields fault_stress_history(const Grid& grid, const RowMatrix& pressure, const RowMatrix& dsigma_h_eff,
                                 std::span<const faultgeom::FaultSpec> faults, const geostat::StressState& initial,
                                 double biot) {
  require(pressure.rows() == dsigma_h_eff.rows() && pressure.cols() == dsigma_h_eff.cols(),
          "pressure and stress-change fields differ in shape");
  require(static_cast<int>(initial.layers.size()) == grid.nz, "initial stress profile needs one entry per layer");
  const auto n_times = pressure.rows();
  const auto n_cells = pressure.cols();
  FaultFields out;
  out.sigma_n_eff = RowMatrix::Zero(n_times, n_cells);
  out.tau = RowMatrix::Zero(n_times, n_cells);
  const std::size_t layer = static_cast<std::size_t>(grid.nx) * static_cast<std::size_t>(grid.ny);
  for (const auto& fault : faults) {
    const Eigen::Vector3d n = faultgeom::fault_normal(fault.strike_deg, fault.dip_deg);
    for (auto c : fault.cells) {
      const auto& s0 = initial.layers[c / layer];
      const auto col = static_cast<Eigen::Index>(c);
      for (Eigen::Index t = 0; t < n_times; ++t) {
        const double p = pressure(t, col);
        const double dh = dsigma_h_eff(t, col);
        const auto sigma =
            faultgeom::StressTensor::diagonal(s0.xx + dh + biot * p, s0.yy + dh + biot * p, s0.zz + biot * p);
        const auto state = faultgeom::evaluate_cell(sigma, n, p, biot, fault.friction_coeff);
        out.sigma_n_eff(t, col) = state.sigma_n_eff;
        out.tau(t, col) = state.tau;
        if (!state.ts.defined) ++out.tensile_cells;
      }
    }
  }
  return out;
}

std::vector<double> substeps(double t0, double t1, const TimeStepping& stepping) {
  require(t1 > t0, "sub-step interval must be non-empty");
  std::vector<double> steps;
  double t = t0;
  double dt = stepping.initial_dt_years;
  while (t < t1) {
    double h = std::min(dt, stepping.max_dt_years);
    // Avoid a sliver step at the end of the interval.
    if (t + 1.5 * h >= t1) h = t1 - t;
    steps.push_back(h);
    t += h;
    dt *= stepping.growth;
    if (t1 - t <= 1e-12 * std::max(1.0, t1)) break;
  }
  return steps;
}

SimResult simulate(const geostat::GeoModel& model, const Scenario& scenario) {
  scenario.validate();
  const auto& grid = scenario.grid;
  require(model.dims == grid.dims(), "geomodel dimensions do not match the scenario grid");
  const auto n = grid.cell_count();
  const auto& sc = model.scalars;

  const std::vector<std::size_t> none;
  const auto& f1 = scenario.faults.size() > 0 ? scenario.faults[0].cells : none;
  const auto& f2 = scenario.faults.size() > 1 ? scenario.faults[1].cells : none;
  const auto perm = geostat::apply_fault_multipliers(model, f1, f2);
  PressureSolver solver(build_pressure_system(grid, perm, scenario.kz_over_kx, model.poro, scenario.fluid));

  // Injection split across perforations in proportion to horizontal permeability.
  struct Perforation {
    std::size_t cell;
    double fraction;
    const WellSpec* well;
  };
  std::vector<Perforation> perfs;
  for (const auto& w : scenario.wells) {
    const auto layers = w.perforated_layers(grid);
    double total = 0.0;
    for (int k : layers) total += perm[grid.dims().index(w.i, w.j, k)];
    for (int k : layers) {
      const auto c = grid.dims().index(w.i, w.j, k);
      perfs.push_back({c, perm[c] / total, &w});
    }
  }
  auto source_over = [&](double ta, double tb) {
    // Average volume rate (m^3/day) over [ta, tb] years.
    Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (const auto& p : perfs) {
      const double on = std::max(0.0, std::min(tb, p.well->stop_year) - std::max(ta, p.well->start_year));
      q[static_cast<Eigen::Index>(p.cell)] += p.well->rate_m3_per_day * p.fraction * on / (tb - ta);
    }
    return q;
  };

  const auto p0 = initial_pressure(grid, scenario.initial, scenario.fluid);
  const auto& times = scenario.report_times;
  const auto n_times = static_cast<Eigen::Index>(times.size());
  SimResult result;
  result.times = times;
  result.pressure.resize(n_times, static_cast<Eigen::Index>(n));
  result.strain_zz.resize(n_times, static_cast<Eigen::Index>(n));
  RowMatrix dsigma_h(n_times, static_cast<Eigen::Index>(n));

  const auto coeff = poroelastic_coefficients(sc.young_gpa, sc.poisson, sc.biot);
  Eigen::VectorXd dp = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  double injected = 0.0;
  double t = 0.0;
  for (Eigen::Index r = 0; r < n_times; ++r) {
    for (double h : substeps(t, times[static_cast<std::size_t>(r)], scenario.stepping)) {
      const Eigen::VectorXd q = source_over(t, t + h);
      const double dt_days = h * kDaysPerYear;
      dp = solver.step(dp, q, dt_days);
      injected += q.sum() * dt_days;
      t += h;
    }
    t = times[static_cast<std::size_t>(r)];
    result.injected_volume.push_back(injected);
    result.storage_change.push_back(solver.system().storage.dot(dp));
    for (std::size_t c = 0; c < n; ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      result.pressure(r, col) = p0[c] + dp[col];
      result.strain_zz(r, col) = coeff.uniaxial_compressibility * dp[col];
      dsigma_h(r, col) = coeff.horizontal_stress_path * dp[col];
    }
  }

  const auto szz = vertical_effective_stress(grid, scenario.initial, scenario.fluid, sc.biot);
  const auto initial = geostat::initial_stress_profile(sc.poisson, sc.gamma, szz);
  auto faults = fault_stress_history(grid, result.pressure, dsigma_h, scenario.faults, initial, sc.biot);
  result.sigma_n_eff = std::move(faults.sigma_n_eff);
  result.tau = std::move(faults.tau);
  result.tensile_cells = faults.tensile_cells;
  return result;
}

}  // namespace fdsi::forward
