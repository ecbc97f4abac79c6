#include "fdsi/esmda.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>

namespace fdsi::esmda {

double reciprocal_sum(std::span<const double> alphas) {
  double s = 0.0;
  for (double a : alphas) s += 1.0 / a;
  return s;
}

std::vector<double> validate_inflation(std::span<const double> alphas, bool normalize) {
  require(!alphas.empty(), "inflation schedule is empty");
  for (double a : alphas) require(a > 0 && std::isfinite(a), "inflation coefficients must be positive");
  const double s = reciprocal_sum(alphas);
  std::vector<double> out(alphas.begin(), alphas.end());
  if (normalize) {
    for (double& a : out) a *= s;
    return out;
  }
  if (std::abs(s - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "inflation coefficients give sum(1/alpha) = " << s << ", expected 1";
    throw ValidationError(msg.str());
  }
  return out;
}

void EsmdaConfig::validate() const {
  require(ensemble_size >= 2, "ensemble size must be at least 2");
  require(!alphas.empty(), "at least one assimilation is required");
  (void)validate_inflation(alphas, normalize_inflation);
}

RowMatrix esmda_update(const RowMatrix& ensemble, const RowMatrix& pred_obs, const Eigen::VectorXd& d_obs,
                       const Eigen::VectorXd& cd_diag, double alpha, std::uint64_t seed, UpdateInfo* info) {
  const auto ne = ensemble.rows();
  const auto nobs = pred_obs.cols();
  require(ne >= 2, "ensemble update needs at least two members");
  require(pred_obs.rows() == ne, "predictions and ensemble differ in member count");
  require(d_obs.size() == nobs && cd_diag.size() == nobs, "observation vectors do not match predictions");
  require(alpha > 0, "inflation coefficient must be positive");
  if (nobs == 0) return ensemble;

  const double inv = 1.0 / static_cast<double>(ne - 1);
  const RowMatrix dx = ensemble.rowwise() - ensemble.colwise().mean();
  const RowMatrix dd = pred_obs.rowwise() - pred_obs.colwise().mean();
  const Eigen::MatrixXd c_xd = inv * dx.transpose() * dd;
  Eigen::MatrixXd k = inv * dd.transpose() * dd;
  k.diagonal() += alpha * cd_diag;

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::VectorXd sd = (alpha * cd_diag).cwiseSqrt();
  Eigen::MatrixXd innov(nobs, ne);  // columns are members
  for (Eigen::Index j = 0; j < ne; ++j) {
    for (Eigen::Index i = 0; i < nobs; ++i) innov(i, j) = d_obs[i] + sd[i] * normal(rng) - pred_obs(j, i);
  }

  const double scale = k.trace() / static_cast<double>(nobs);
  double jitter = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  for (double rel = 1e-10; llt.info() != Eigen::Success; rel *= 10.0) {
    if (rel > 1e-6 * (1 + 1e-9)) {
      throw RuntimeFailure("ensemble update: (C_d + alpha C_D) is not positive definite even with jitter");
    }
    jitter = rel * scale;
    Eigen::MatrixXd shifted = k;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
  }
  if (info != nullptr) info->jitter = jitter;
  const Eigen::MatrixXd gain_applied = c_xd * llt.solve(innov);  // n_x x N_e
  return ensemble + gain_applied.transpose();
}

double reflect_into(double v, const geostat::Interval& s) noexcept {
  const double w = s.width();
  if (!(w > 0)) return s.lo;
  if (v >= s.lo && v <= s.hi) return v;
  double u = std::fmod(v - s.lo, 2.0 * w);
  if (u < 0) u += 2.0 * w;
  return u <= w ? s.lo + u : s.hi - (u - w);
}

namespace {

double standard_width(const geostat::Interval& s) { return s.width() / std::sqrt(12.0); }

}  // namespace

EsmdaResult run_esmda(const RowMatrix& prior_latents, const ForwardFn& forward, const Eigen::VectorXd& d_obs,
                      const Eigen::VectorXd& cd_diag, const EsmdaConfig& config,
                      const std::optional<JointScalars>& joint) {
  require(prior_latents.rows() >= 2, "ensemble needs at least two members");
  require((cd_diag.array() > 0).all(), "observation variances must be positive");
  EsmdaResult result;
  result.alphas = validate_inflation(config.alphas, config.normalize_inflation);
  const auto ne = prior_latents.rows();
  const auto nl = prior_latents.cols();
  Eigen::Index nj = 0;
  if (joint) {
    nj = joint->values.cols();
    require(joint->values.rows() == ne, "joint scalars and latents differ in member count");
    require(static_cast<Eigen::Index>(joint->support.size()) == nj, "each joint scalar needs a support interval");
    for (const auto& s : joint->support) require(s.width() > 0, "joint scalar support must be non-degenerate");
  }

  RowMatrix state(ne, nl + nj);
  state.leftCols(nl) = prior_latents;
  for (Eigen::Index c = 0; c < nj; ++c) {
    const auto& s = joint->support[static_cast<std::size_t>(c)];
    state.col(nl + c) = (joint->values.col(c).array() - s.mid()) / standard_width(s);
  }

  auto predict = [&](const RowMatrix& st) {
    RowMatrix pred = forward(st.leftCols(nl));
    require(pred.rows() == ne && pred.cols() == d_obs.size(), "forward map returned the wrong shape");
    if (!pred.allFinite()) {
      for (Eigen::Index j = 0; j < ne; ++j) {
        if (!pred.row(j).allFinite()) throw RuntimeFailure("non-finite prediction for member " + std::to_string(j));
      }
    }
    return pred;
  };

  RowMatrix pred = predict(state);
  result.prior_pred = pred;
  for (std::size_t k = 0; k < result.alphas.size(); ++k) {
    UpdateInfo info;
    state = esmda_update(state, pred, d_obs, cd_diag, result.alphas[k], derive_seed(config.seed, k), &info);
    for (Eigen::Index c = 0; c < nj; ++c) {
      const auto& s = joint->support[static_cast<std::size_t>(c)];
      const double w = standard_width(s);
      for (Eigen::Index j = 0; j < ne; ++j) {
        state(j, nl + c) = (reflect_into(state(j, nl + c) * w + s.mid(), s) - s.mid()) / w;
      }
    }
    result.iterations.push_back(info);
    pred = predict(state);
  }
  result.posterior_pred = pred;
  result.latents = state.leftCols(nl);
  if (nj > 0) {
    result.scalars.resize(ne, nj);
    for (Eigen::Index c = 0; c < nj; ++c) {
      const auto& s = joint->support[static_cast<std::size_t>(c)];
      result.scalars.col(c) = state.col(nl + c).array() * standard_width(s) + s.mid();
    }
  }
  return result;
}

RowMatrix decode_full(const RowMatrix& latents, const latent::Parameterizer& model, const datavec::NormStats& stats,
                      const datavec::DataLayout& layout) {
  const Eigen::MatrixXd decoded = model.decode(latents.transpose());
  RowMatrix out(latents.rows(), static_cast<Eigen::Index>(layout.full_size()));
  for (Eigen::Index j = 0; j < latents.rows(); ++j) {
    out.row(j) = datavec::denormalize(datavec::expand(decoded.col(j), layout), stats, layout).transpose();
  }
  return out;
}

RowMatrix predicted_obs(const RowMatrix& latents, const latent::Parameterizer& model, const datavec::SelectionIndex& sel,
                        const datavec::NormStats& stats, const datavec::DataLayout& layout) {
  const auto& active = layout.active_indices();
  require(model.data_dim() == active.size(), "parameterizer does not match the data layout");
  // Position of each monitored entry inside the compacted vector.
  std::vector<Eigen::Index> pos(sel.size());
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const auto flat = sel.entries()[i].flat;
    const auto it = std::lower_bound(active.begin(), active.end(), flat);
    require(it != active.end() && *it == flat, "monitored entry is a structural zero");
    pos[i] = static_cast<Eigen::Index>(it - active.begin());
  }
  RowMatrix out(latents.rows(), static_cast<Eigen::Index>(sel.size()));
  if (latents.rows() == 0 || sel.empty()) return out;
  const Eigen::MatrixXd decoded = model.decode(latents.transpose());
  for (Eigen::Index j = 0; j < latents.rows(); ++j) {
    for (std::size_t i = 0; i < sel.size(); ++i) {
      const auto f = static_cast<std::size_t>(sel.entries()[i].field);
      out(j, static_cast<Eigen::Index>(i)) = decoded(pos[i], j) * stats.std[f] + stats.mean[f];
    }
  }
  return out;
}

DsiResult run_dsi(const RowMatrix& prior_latents, const latent::Parameterizer& model,
                  const datavec::ObservationSet& obs, const datavec::SelectionIndex& sel,
                  const datavec::NormStats& stats, const datavec::DataLayout& layout, const EsmdaConfig& config,
                  const std::optional<JointScalars>& joint) {
  config.validate();
  require(static_cast<std::size_t>(prior_latents.rows()) == config.ensemble_size,
          "prior latent ensemble size differs from the configured N_e");
  require(static_cast<std::size_t>(prior_latents.cols()) == model.latent_dim(),
          "prior latents do not match the parameterizer");
  require(static_cast<std::size_t>(obs.d_obs.size()) == sel.size(), "observations do not match the selection");
  const ForwardFn forward = [&](const RowMatrix& lat) { return predicted_obs(lat, model, sel, stats, layout); };
  DsiResult out;
  out.esmda = run_esmda(prior_latents, forward, obs.d_obs, obs.cd_diag, config, joint);
  out.prior_full = decode_full(prior_latents, model, stats, layout);
  out.posterior_full = decode_full(out.esmda.latents, model, stats, layout);
  return out;
}

}  // namespace fdsi::esmda
