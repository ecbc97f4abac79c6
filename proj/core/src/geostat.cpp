#include "fdsi/geostat.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <string>
#include <unordered_set>

#include <fftw3.h>

namespace fdsi::geostat {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// FFTW's planner is not re-entrant; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class FftPlan3d {
 public:
  FftPlan3d(int nz, int ny, int nx, std::vector<std::complex<double>>& data, int sign) {
    std::lock_guard lock(planner_mutex());
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    plan_ = fftw_plan_dft_3d(nz, ny, nx, ptr, ptr, sign, FFTW_ESTIMATE);
    if (plan_ == nullptr) throw RuntimeFailure("FFTW planning failed");
  }
  FftPlan3d(const FftPlan3d&) = delete;
  FftPlan3d& operator=(const FftPlan3d&) = delete;
  ~FftPlan3d() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_ = nullptr;
};

int embedding_size(int n) { return n == 1 ? 1 : 2 * n; }

// Signed periodic lag for index q of an m-point periodic axis.
int wrapped_lag(int q, int m) { return q <= m / 2 ? q : q - m; }

double draw_in(const Interval& iv, bool open_lo, bool open_hi, Rng& rng) {
  if (iv.lo == iv.hi) return iv.lo;
  std::uniform_real_distribution<double> dist(iv.lo, iv.hi);
  for (;;) {
    const double x = dist(rng);
    if (open_lo && x <= iv.lo) continue;
    if (open_hi && x >= iv.hi) continue;
    if (x > iv.hi) continue;
    return x;
  }
}

void check_interval(const Interval& iv, const char* name) {
  require(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo <= iv.hi,
          std::string("prior range ") + name + " must satisfy lo <= hi");
}

}  // namespace

void VariogramSpec::validate() const {
  require(corr_len_x > 0 && corr_len_y > 0 && corr_len_z > 0, "correlation lengths must be positive");
  require(std_logk >= 0, "std_logk must be non-negative");
  require(std_poro >= 0, "std_poro must be non-negative");
  require(mean_poro > 0 && mean_poro < 1, "mean_poro must lie in (0, 1)");
  require(kz_over_kx > 0 && kz_over_kx <= 1, "kz_over_kx must lie in (0, 1]");
  require(poro_logk_corr >= -1 && poro_logk_corr <= 1, "poro_logk_corr must lie in [-1, 1]");
}

void PriorRanges::validate() const {
  check_interval(young_gpa, "young_gpa");
  check_interval(poisson, "poisson");
  check_interval(biot, "biot");
  check_interval(gamma, "gamma");
  check_interval(logmult1, "logmult1");
  check_interval(logmult2, "logmult2");
  require(poisson.hi < 0.5 && poisson.lo > 0, "poisson range must lie inside (0, 0.5)");
  require(young_gpa.lo > 0, "young_gpa range must be positive");
}

std::array<Interval, 6> PriorRanges::ordered() const noexcept {
  return {logmult1, logmult2, young_gpa, poisson, biot, gamma};
}

std::array<double, 6> ScalarParams::as_array() const noexcept {
  return {logmult1, logmult2, young_gpa, poisson, biot, gamma};
}

ScalarParams ScalarParams::from_array(std::span<const double, 6> v) noexcept {
  return ScalarParams{v[0], v[1], v[2], v[3], v[4], v[5]};
}

AnisotropicExponential::AnisotropicExponential(double len_x, double len_y, double len_z, double azimuth_deg,
                                               double dip_deg) {
  require(len_x > 0 && len_y > 0 && len_z > 0, "correlation lengths must be positive");
  const double a = azimuth_deg * kDeg;
  const double d = dip_deg * kDeg;
  const Eigen::Vector3d major(std::cos(a) * std::cos(d), std::sin(a) * std::cos(d), -std::sin(d));
  const Eigen::Vector3d minor(-std::sin(a), std::cos(a), 0.0);
  const Eigen::Vector3d vertical = major.cross(minor);
  scaled_axes_.row(0) = major.transpose() / len_x;
  scaled_axes_.row(1) = minor.transpose() / len_y;
  scaled_axes_.row(2) = vertical.transpose() / len_z;
}

double AnisotropicExponential::correlation(double hx, double hy, double hz) const noexcept {
  return std::exp(-(scaled_axes_ * Eigen::Vector3d(hx, hy, hz)).norm());
}

StandardFieldPair standard_gaussian_fields(const AnisotropicExponential& cov, GridDims dims, std::uint64_t seed) {
  require(dims.valid(), "grid dimensions must be positive");
  const int mx = embedding_size(dims.nx);
  const int my = embedding_size(dims.ny);
  const int mz = embedding_size(dims.nz);
  const std::size_t m_total = static_cast<std::size_t>(mx) * my * mz;
  auto flat = [&](int i, int j, int k) {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(mx) * (j + static_cast<std::size_t>(my) * k);
  };

  // Eigenvalues of the block-circulant covariance = DFT of its first row.
  std::vector<std::complex<double>> spectrum(m_total);
  for (int k = 0; k < mz; ++k) {
    for (int j = 0; j < my; ++j) {
      for (int i = 0; i < mx; ++i) {
        spectrum[flat(i, j, k)] = cov.correlation(wrapped_lag(i, mx), wrapped_lag(j, my), wrapped_lag(k, mz));
      }
    }
  }
  {
    FftPlan3d forward(mz, my, mx, spectrum, FFTW_FORWARD);
    forward.execute();
  }

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::complex<double>> work(m_total);
  const double inv_m = 1.0 / static_cast<double>(m_total);
  for (std::size_t q = 0; q < m_total; ++q) {
    // Small negative eigenvalues come from truncating the covariance at the
    // embedding boundary; clipping them keeps the synthesis real-valued.
    const double lambda = std::max(spectrum[q].real(), 0.0);
    const double re = normal(rng);
    const double im = normal(rng);
    work[q] = std::sqrt(lambda * inv_m) * std::complex<double>(re, im);
  }
  {
    FftPlan3d backward(mz, my, mx, work, FFTW_BACKWARD);
    backward.execute();
  }

  StandardFieldPair out;
  out.first.resize(dims.size());
  out.second.resize(dims.size());
  for (int k = 0; k < dims.nz; ++k) {
    for (int j = 0; j < dims.ny; ++j) {
      for (int i = 0; i < dims.nx; ++i) {
        const auto& w = work[flat(i, j, k)];
        const auto c = dims.index(i, j, k);
        out.first[c] = w.real();
        out.second[c] = w.imag();
      }
    }
  }
  return out;
}

std::vector<double> generate_gaussian_field(const VariogramSpec& spec, GridDims dims, std::uint64_t seed) {
  spec.validate();
  require(dims.valid(), "grid dimensions must be positive");
  if (spec.std_logk == 0.0) return std::vector<double>(dims.size(), spec.mean_logk);
  auto pair = standard_gaussian_fields(AnisotropicExponential(spec), dims, seed);
  for (double& v : pair.first) v = spec.mean_logk + spec.std_logk * v;
  return std::move(pair.first);
}

PropertyFields generate_property_fields(const VariogramSpec& spec, GridDims dims, std::uint64_t seed) {
  spec.validate();
  require(dims.valid(), "grid dimensions must be positive");
  auto pair = standard_gaussian_fields(AnisotropicExponential(spec), dims, seed);
  const double rho = spec.poro_logk_corr;
  const double rho_c = std::sqrt(1.0 - rho * rho);
  PropertyFields out;
  out.logk.resize(dims.size());
  out.poro.resize(dims.size());
  for (std::size_t c = 0; c < dims.size(); ++c) {
    const double u = pair.first[c];
    const double w = rho * u + rho_c * pair.second[c];
    out.logk[c] = spec.mean_logk + spec.std_logk * u;
    out.poro[c] = std::clamp(spec.mean_poro + spec.std_poro * w, 0.01, 0.40);
  }
  return out;
}

ScalarParams sample_prior_scalars(const PriorRanges& ranges, std::uint64_t seed) {
  ranges.validate();
  Rng rng(seed);
  ScalarParams s;
  s.logmult1 = draw_in(ranges.logmult1, false, true, rng);
  s.logmult2 = draw_in(ranges.logmult2, false, true, rng);
  s.young_gpa = draw_in(ranges.young_gpa, false, false, rng);
  s.poisson = draw_in(ranges.poisson, false, false, rng);
  s.biot = draw_in(ranges.biot, false, false, rng);
  s.gamma = draw_in(ranges.gamma, true, true, rng);
  return s;
}

GeoModel generate_geomodel(const VariogramSpec& spec, const PriorRanges& ranges, GridDims dims,
                           std::uint64_t seed) {
  auto fields = generate_property_fields(spec, dims, derive_seed(seed, 0));
  GeoModel model;
  model.dims = dims;
  model.logk = std::move(fields.logk);
  model.poro = std::move(fields.poro);
  model.scalars = sample_prior_scalars(ranges, derive_seed(seed, 1));
  return model;
}

std::vector<double> apply_fault_multipliers(const GeoModel& model, std::span<const std::size_t> fault_cells_1,
                                            std::span<const std::size_t> fault_cells_2) {
  const std::size_t n = model.dims.size();
  require(model.logk.size() == n, "logk field length does not match grid");
  std::unordered_set<std::size_t> first(fault_cells_1.begin(), fault_cells_1.end());
  for (auto c : fault_cells_1) require(c < n, "fault-1 cell index outside grid");
  for (auto c : fault_cells_2) {
    require(c < n, "fault-2 cell index outside grid");
    require(!first.contains(c), "fault cell sets overlap at cell " + std::to_string(c));
  }
  std::vector<double> perm(n);
  std::transform(model.logk.begin(), model.logk.end(), perm.begin(), [](double lk) { return std::exp(lk); });
  const double m1 = std::pow(10.0, model.scalars.logmult1);
  const double m2 = std::pow(10.0, model.scalars.logmult2);
  for (auto c : fault_cells_1) perm[c] *= m1;
  for (auto c : fault_cells_2) perm[c] *= m2;
  return perm;
}

PrincipalStresses initial_stress_state(double nu, double gamma, double sigma_zz_eff) {
  require(nu > 0 && nu < 0.5, "Poisson ratio must lie in (0, 0.5)");
  require(gamma > 0 && gamma < 1, "initial stress coefficient must lie in (0, 1)");
  require(sigma_zz_eff > 0, "vertical effective stress must be positive");
  PrincipalStresses s;
  s.zz = sigma_zz_eff;
  s.yy = nu / (1.0 - nu) * sigma_zz_eff;
  s.xx = gamma * s.yy + (1.0 - gamma) * sigma_zz_eff;
  return s;
}

StressState initial_stress_profile(double nu, double gamma, std::span<const double> sigma_zz_eff_by_layer) {
  StressState state;
  state.layers.reserve(sigma_zz_eff_by_layer.size());
  for (double szz : sigma_zz_eff_by_layer) state.layers.push_back(initial_stress_state(nu, gamma, szz));
  return state;
}

}  // namespace fdsi::geostat
