#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fdsi/common.hpp"

namespace fdsi::geostat {

/// Variogram and scaling parameters for the storage-aquifer property fields.
/// Correlation lengths are in grid-cell units; angles in degrees.
struct VariogramSpec {
  double corr_len_x = 7.5;
  double corr_len_y = 6.75;
  double corr_len_z = 0.625;
  double azimuth_deg = 45.0;
  double dip_deg = 45.0;
  double mean_logk = 3.0;  // ln(k / mD)
  double std_logk = 1.5;
  double mean_poro = 0.12;
  double std_poro = 0.05;
  double kz_over_kx = 0.1;
  double poro_logk_corr = 0.7;

  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] double width() const noexcept { return hi - lo; }
  [[nodiscard]] double mid() const noexcept { return 0.5 * (lo + hi); }
  [[nodiscard]] bool contains(double x) const noexcept { return x >= lo && x <= hi; }
};

/// Uniform prior supports. logmult intervals are [lo, hi) and gamma is (lo, hi):
/// the sampler rejects the excluded endpoints.
struct PriorRanges {
  Interval young_gpa{10.0, 20.0};
  Interval poisson{0.25, 0.30};
  Interval biot{0.8, 1.0};
  Interval gamma{0.0, 1.0};
  Interval logmult1{-3.0, 0.0};
  Interval logmult2{-3.0, 0.0};

  void validate() const;
  /// Intervals in joint-vector order (see ScalarParams).
  [[nodiscard]] std::array<Interval, 6> ordered() const noexcept;
};

/// The six uncertain scalars. Joint-inversion ordering is
/// (logmult1, logmult2, E, nu, biot, gamma).
struct ScalarParams {
  double logmult1 = 0.0;
  double logmult2 = 0.0;
  double young_gpa = 15.0;
  double poisson = 0.275;
  double biot = 0.9;
  double gamma = 0.5;

  static constexpr std::array<std::string_view, 6> kNames = {"logmult1", "logmult2", "young_gpa",
                                                              "poisson",  "biot",     "gamma"};

  [[nodiscard]] std::array<double, 6> as_array() const noexcept;
  [[nodiscard]] static ScalarParams from_array(std::span<const double, 6> values) noexcept;
  friend bool operator==(const ScalarParams&, const ScalarParams&) = default;
};

struct GeoModel {
  GridDims dims;
  std::vector<double> logk;  // ln(k / mD), horizontal permeability
  std::vector<double> poro;
  ScalarParams scalars;
};

/// Effective principal stresses (MPa, compression positive).
struct PrincipalStresses {
  double zz = 0.0;
  double xx = 0.0;
  double yy = 0.0;
};

/// Initial effective stresses, one entry per depth layer.
struct StressState {
  std::vector<PrincipalStresses> layers;
};

/// Exponential correlation exp(-r) with r the lag measured in the rotated,
/// length-scaled frame. The major axis is rotated by azimuth counter-clockwise
/// from +x in the horizontal plane, then plunged by dip; lags are in grid units.
class AnisotropicExponential {
 public:
  AnisotropicExponential(double len_x, double len_y, double len_z, double azimuth_deg, double dip_deg);
  explicit AnisotropicExponential(const VariogramSpec& spec)
      : AnisotropicExponential(spec.corr_len_x, spec.corr_len_y, spec.corr_len_z, spec.azimuth_deg,
                               spec.dip_deg) {}

  [[nodiscard]] double correlation(double hx, double hy, double hz) const noexcept;

 private:
  // Rows are the principal axes divided by their correlation lengths.
  Eigen::Matrix3d scaled_axes_;
};

/// A pair of independent, standard-normal, stationary fields with the given
/// correlation, synthesised by circulant embedding on a doubled periodic grid.
struct StandardFieldPair {
  std::vector<double> first;
  std::vector<double> second;
};
[[nodiscard]] StandardFieldPair standard_gaussian_fields(const AnisotropicExponential& cov, GridDims dims,
                                                         std::uint64_t seed);

/// Log-permeability field with the spec's mean and standard deviation.
[[nodiscard]] std::vector<double> generate_gaussian_field(const VariogramSpec& spec, GridDims dims,
                                                          std::uint64_t seed);

struct PropertyFields {
  std::vector<double> logk;
  std::vector<double> poro;
};
/// Log-permeability plus porosity correlated with it through poro_logk_corr.
/// Porosity is clamped to [0.01, 0.40].
[[nodiscard]] PropertyFields generate_property_fields(const VariogramSpec& spec, GridDims dims,
                                                      std::uint64_t seed);

[[nodiscard]] ScalarParams sample_prior_scalars(const PriorRanges& ranges, std::uint64_t seed);

/// One prior realization: fields from stream 0 of `seed`, scalars from stream 1.
[[nodiscard]] GeoModel generate_geomodel(const VariogramSpec& spec, const PriorRanges& ranges, GridDims dims,
                                         std::uint64_t seed);

/// Horizontal permeability in mD after scaling fault-1 cells by 10^logmult1 and
/// fault-2 cells by 10^logmult2.
[[nodiscard]] std::vector<double> apply_fault_multipliers(const GeoModel& model,
                                                          std::span<const std::size_t> fault_cells_1,
                                                          std::span<const std::size_t> fault_cells_2);

/// sigma_yy = nu/(1-nu) sigma_zz; sigma_xx = gamma sigma_yy + (1-gamma) sigma_zz.
[[nodiscard]] PrincipalStresses initial_stress_state(double nu, double gamma, double sigma_zz_eff);

[[nodiscard]] StressState initial_stress_profile(double nu, double gamma,
                                                 std::span<const double> sigma_zz_eff_by_layer);

}  // namespace fdsi::geostat
