#include <benchmark/benchmark.h>

#include "fdsi/analytics.hpp"
#include "fdsi/esmda.hpp"
#include "fdsi/latent.hpp"
#include "fdsi/vae.hpp"

namespace {

using namespace fdsi;

RowMatrix gaussian_rows(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> nd;
  RowMatrix m(rows, cols);
  for (auto& v : m.reshaped()) v = nd(rng);
  return m;
}

void BM_EsmdaUpdate(benchmark::State& state) {
  const auto ne = state.range(0), nobs = state.range(1);
  const RowMatrix x = gaussian_rows(ne, 70, 1);
  const RowMatrix d = x * gaussian_rows(70, nobs, 2);
  const Eigen::VectorXd dobs = Eigen::VectorXd::Zero(nobs), cd = Eigen::VectorXd::Ones(nobs);
  for (auto _ : state) benchmark::DoNotOptimize(esmda::esmda_update(x, d, dobs, cd, 4.0, 3));
}
BENCHMARK(BM_EsmdaUpdate)->Args({200, 80})->Args({400, 320})->Unit(benchmark::kMillisecond);

void BM_VaeLossGradient(benchmark::State& state) {
  // Desk shape: 4 frames of 6870 active entries.
  const latent::VaeShape shape{6870, 4, 64, 256, 64};
  const latent::VAEModel model(shape, 7);
  const Eigen::MatrixXd x = gaussian_rows(shape.input_dim(), 8, 1);
  const Eigen::MatrixXd eta = gaussian_rows(64, 8, 2);
  Eigen::VectorXd g;
  for (auto _ : state) benchmark::DoNotOptimize(model.loss(x, eta, 100.0, &g));
}
BENCHMARK(BM_VaeLossGradient)->Unit(benchmark::kMillisecond);

void BM_VaeDecode(benchmark::State& state) {
  const latent::VaeShape shape{6870, 5, 64, 256, 64};
  const latent::VAEModel model(shape, 7);
  const Eigen::MatrixXd xi = gaussian_rows(64, state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(model.decode(xi));
}
BENCHMARK(BM_VaeDecode)->Arg(1)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_FitPca(benchmark::State& state) {
  const Eigen::MatrixXd x = gaussian_rows(34350, 160, 4);
  for (auto _ : state) benchmark::DoNotOptimize(latent::fit_pca(x, 64));
}
BENCHMARK(BM_FitPca)->Unit(benchmark::kMillisecond);

void BM_Representatives(benchmark::State& state) {
  const RowMatrix pts = gaussian_rows(200, 2000, 5);
  for (auto _ : state) benchmark::DoNotOptimize(analytics::k_representatives(pts, 4, 5));
}
BENCHMARK(BM_Representatives)->Unit(benchmark::kMillisecond);

void BM_PercentileBand(benchmark::State& state) {
  const RowMatrix e = gaussian_rows(200, 4000, 6);
  for (auto _ : state) benchmark::DoNotOptimize(analytics::percentile_band(e));
}
BENCHMARK(BM_PercentileBand)->Unit(benchmark::kMillisecond);

}  // namespace
