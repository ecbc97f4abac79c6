#include <benchmark/benchmark.h>

#include "fdsi/faultgeom.hpp"
#include "fdsi/forward.hpp"
#include "fdsi/geostat.hpp"

namespace {

using namespace fdsi;

forward::Scenario desk_scenario() {
  forward::Scenario s;
  for (int i : {6, 12, 18}) {
    forward::WellSpec w;
    w.name = "I";
    w.i = i;
    w.j = 12;
    w.rate_m3_per_day = forward::mass_rate_to_volume_rate(0.05);
    w.stop_year = 50;
    s.wells.push_back(w);
  }
  s.faults = {forward::make_fault_spec(s.grid, {"fault1", 10, 60, 12500, 6000, 1630, 1000}),
              forward::make_fault_spec(s.grid, {"fault2", 20, 60, 12500, 19000, 1630, 1000})};
  return s;
}

void BM_GaussianField(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const geostat::VariogramSpec spec;
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(geostat::generate_gaussian_field(spec, {n, n, 5}, seed++));
  state.SetItemsProcessed(state.iterations() * n * n * 5);
}
BENCHMARK(BM_GaussianField)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_Geomodel(benchmark::State& state) {
  std::uint64_t seed = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(geostat::generate_geomodel({}, {}, {25, 25, 5}, seed++));
}
BENCHMARK(BM_Geomodel)->Unit(benchmark::kMillisecond);

void BM_PressureStep(benchmark::State& state) {
  const auto s = desk_scenario();
  const auto m = geostat::generate_geomodel({}, {}, s.grid.dims(), 3);
  std::vector<double> perm(m.logk.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = std::exp(m.logk[i]);
  const auto sys = forward::build_pressure_system(s.grid, perm, s.kz_over_kx, m.poro, s.fluid);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.grid.cell_count()));
  q[s.grid.dims().index(12, 12, 2)] = 1000.0;
  const Eigen::VectorXd dp = Eigen::VectorXd::Zero(q.size());
  for (auto _ : state) benchmark::DoNotOptimize(forward::solve_pressure_step(sys, dp, q, 30.0));
}
BENCHMARK(BM_PressureStep)->Unit(benchmark::kMillisecond);

void BM_SimulateDesk(benchmark::State& state) {
  const auto s = desk_scenario();
  const auto m = geostat::generate_geomodel({}, {}, s.grid.dims(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(forward::simulate(m, s));
}
BENCHMARK(BM_SimulateDesk)->Unit(benchmark::kMillisecond);

void BM_TractionDecompose(benchmark::State& state) {
  const auto sigma = faultgeom::StressTensor::diagonal(20, 10, 30);
  const auto n = faultgeom::fault_normal(10, 60);
  double p = 0.0;
  for (auto _ : state) {
    const auto parts = faultgeom::decompose_traction(faultgeom::traction(sigma, n), n, p, 0.9);
    benchmark::DoNotOptimize(faultgeom::slip_tendency(parts.tau, parts.sigma_n_eff));
    p += 1e-9;
  }
}
BENCHMARK(BM_TractionDecompose);

}  // namespace
