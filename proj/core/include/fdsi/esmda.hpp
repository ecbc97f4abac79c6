#pragma once

// Ensemble smoother with multiple data assimilation on latent ensembles.
// Ensembles are stored with one member per row.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fdsi/common.hpp"
#include "fdsi/datavec.hpp"
#include "fdsi/geostat.hpp"
#include "fdsi/latent.hpp"

namespace fdsi::esmda {

[[nodiscard]] double reciprocal_sum(std::span<const double> alphas);

/// With `normalize` the schedule is rescaled so that sum(1/alpha) = 1; otherwise
/// a schedule further than 1e-6 from the constraint is rejected.
[[nodiscard]] std::vector<double> validate_inflation(std::span<const double> alphas, bool normalize);

struct EsmdaConfig {
  std::size_t ensemble_size = 400;
  std::vector<double> alphas{9.33, 7.0, 7.0, 2.0};
  std::uint64_t seed = 11;
  bool normalize_inflation = true;

  void validate() const;
};

struct UpdateInfo {
  double jitter = 0.0;  // diagonal shift added before the factorisation succeeded
};

/// One update: ensemble + C_xd (C_d + alpha C_D)^-1 (d_obs + sqrt(alpha) e - pred)
/// with e ~ N(0, C_D) drawn from `seed`. Covariances use 1/(N_e - 1).
[[nodiscard]] RowMatrix esmda_update(const RowMatrix& ensemble, const RowMatrix& pred_obs,
                                     const Eigen::VectorXd& d_obs, const Eigen::VectorXd& cd_diag, double alpha,
                                     std::uint64_t seed, UpdateInfo* info = nullptr);

/// Maps the latent part of every member (rows) to predicted observations (rows).
using ForwardFn = std::function<RowMatrix(const RowMatrix&)>;

/// Scalars appended to the latent vector for joint inversion. They are
/// standardised against their uniform prior inside the update and reflected
/// back into [lo, hi] after every iteration.
struct JointScalars {
  RowMatrix values;  // N_e x k, physical units
  std::vector<geostat::Interval> support;
};

/// Reflects v into [lo, hi] (mirror at both ends, periodic for far excursions).
[[nodiscard]] double reflect_into(double v, const geostat::Interval& support) noexcept;

struct EsmdaResult {
  RowMatrix latents;                  // posterior, N_e x N_l
  RowMatrix scalars;                  // posterior joint scalars, N_e x k (empty without joint mode)
  RowMatrix prior_pred;               // N_e x N_obs before the first update
  RowMatrix posterior_pred;           // N_e x N_obs after the last update
  std::vector<double> alphas;         // schedule actually used
  std::vector<UpdateInfo> iterations;
};

/// N_a sequential updates. Iteration k draws its perturbations from
/// derive_seed(config.seed, k).
[[nodiscard]] EsmdaResult run_esmda(const RowMatrix& prior_latents, const ForwardFn& forward,
                                    const Eigen::VectorXd& d_obs, const Eigen::VectorXd& cd_diag,
                                    const EsmdaConfig& config, const std::optional<JointScalars>& joint = {});

/// Decode, denormalise and gather the monitored entries for every member.
[[nodiscard]] RowMatrix predicted_obs(const RowMatrix& latents, const latent::Parameterizer& model,
                                      const datavec::SelectionIndex& sel, const datavec::NormStats& stats,
                                      const datavec::DataLayout& layout);

/// Decoded, denormalised full data vectors, one per row.
[[nodiscard]] RowMatrix decode_full(const RowMatrix& latents, const latent::Parameterizer& model,
                                    const datavec::NormStats& stats, const datavec::DataLayout& layout);

struct DsiResult {
  EsmdaResult esmda;
  RowMatrix prior_full;      // N_e x N_full
  RowMatrix posterior_full;  // N_e x N_full
};

[[nodiscard]] DsiResult run_dsi(const RowMatrix& prior_latents, const latent::Parameterizer& model,
                                const datavec::ObservationSet& obs, const datavec::SelectionIndex& sel,
                                const datavec::NormStats& stats, const datavec::DataLayout& layout,
                                const EsmdaConfig& config, const std::optional<JointScalars>& joint = {});

}  // namespace fdsi::esmda
