#include "fdsi/monitors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace fdsi::monitors {
namespace {

RowMatrix anomalies(const RowMatrix& m) { return m.rowwise() - m.colwise().mean(); }

RowMatrix standardised_target(const RowMatrix& target) {
  RowMatrix a = anomalies(target);
  const double inv = 1.0 / static_cast<double>(target.rows() - 1);
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double sd = std::sqrt(a.col(c).squaredNorm() * inv);
    require(sd > 0, "target quantity has no prior spread");
    a.col(c) /= sd;
  }
  return a;
}

void check_inputs(const RowMatrix& target, std::span<const Candidate> candidates) {
  require(static_cast<std::size_t>(target.rows()) >= kMinEnsemble, "monitor placement needs at least 50 prior members");
  require(target.cols() >= 1, "monitor placement needs a target quantity");
  for (const auto& c : candidates) {
    require(c.values.rows() == target.rows(), "candidate data and target differ in member count");
    require(c.noise_var.size() == c.values.cols(), "candidate noise does not match its data");
  }
}

double residual_from_anomalies(const RowMatrix& q, std::span<const Candidate> candidates,
                               std::span<const std::size_t> chosen) {
  const auto n = q.rows();
  const double inv = 1.0 / static_cast<double>(n - 1);
  const double prior = q.squaredNorm() * inv;
  Eigen::Index width = 0;
  for (auto c : chosen) width += candidates[c].values.cols();
  if (width == 0) return prior;
  RowMatrix d(n, width);
  Eigen::VectorXd noise(width);
  Eigen::Index at = 0;
  for (auto c : chosen) {
    const auto w = candidates[c].values.cols();
    d.middleCols(at, w) = anomalies(candidates[c].values);
    noise.segment(at, w) = candidates[c].noise_var;
    at += w;
  }
  Eigen::MatrixXd cdd = inv * d.transpose() * d;
  cdd.diagonal() += noise;
  const Eigen::MatrixXd cdq = inv * d.transpose() * q;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cdd);
  if (ldlt.info() != Eigen::Success) throw RuntimeFailure("monitor covariance factorisation failed");
  return prior - (cdq.transpose() * ldlt.solve(cdq)).trace();
}

}  // namespace

double residual_variance(const RowMatrix& target, std::span<const Candidate> candidates,
                         std::span<const std::size_t> chosen) {
  check_inputs(target, candidates);
  for (auto c : chosen) require(c < candidates.size(), "chosen candidate out of range");
  return residual_from_anomalies(standardised_target(target), candidates, chosen);
}

MonitorPlan place_monitors(const RowMatrix& target, std::span<const Candidate> candidates, std::size_t n_wells) {
  check_inputs(target, candidates);
  require(candidates.size() >= n_wells, "fewer candidate columns than requested monitor wells");
  const RowMatrix q = standardised_target(target);
  MonitorPlan plan;
  plan.residual_variance.push_back(residual_from_anomalies(q, candidates, {}));
  std::vector<bool> used(candidates.size(), false);
  for (std::size_t w = 0; w < n_wells; ++w) {
    std::size_t best = candidates.size();
    double best_value = std::numeric_limits<double>::infinity();
    auto trial = plan.candidate_index;
    trial.push_back(0);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      trial.back() = c;
      const double v = residual_from_anomalies(q, candidates, trial);
      if (v < best_value) {
        best_value = v;
        best = c;
      }
    }
    used[best] = true;
    plan.candidate_index.push_back(best);
    plan.wells.push_back(candidates[best].column);
    plan.residual_variance.push_back(best_value);
  }
  return plan;
}

std::vector<Candidate> build_candidates(const RowMatrix& prior_full, const datavec::DataLayout& layout, GridDims dims,
                                        std::span<const datavec::MonitorColumn> columns,
                                        std::span<const datavec::FieldKind> fields, const datavec::NoiseModel& noise) {
  require(static_cast<std::size_t>(prior_full.cols()) == layout.full_size(), "prior ensemble does not match layout");
  std::vector<datavec::SelectionIndex> sels;
  std::vector<double> strains;
  for (const auto& col : columns) {
    sels.push_back(datavec::build_selection(layout, dims, std::span(&col, 1), fields));
    for (const auto& e : sels.back().entries()) {
      if (e.field != datavec::FieldKind::strain_zz) continue;
      for (Eigen::Index r = 0; r < prior_full.rows(); ++r) {
        strains.push_back(prior_full(r, static_cast<Eigen::Index>(e.flat)));
      }
    }
  }
  std::vector<Candidate> out;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto& sel = sels[k];
    Candidate c;
    c.column = columns[k];
    c.values.resize(prior_full.rows(), static_cast<Eigen::Index>(sel.size()));
    for (std::size_t i = 0; i < sel.size(); ++i) {
      c.values.col(static_cast<Eigen::Index>(i)) = prior_full.col(static_cast<Eigen::Index>(sel.entries()[i].flat));
    }
    c.noise_var = datavec::build_noise_cov(sel, strains, noise).variances;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<datavec::MonitorColumn> strided_columns(GridDims dims, int stride,
                                                    std::span<const std::pair<int, int>> excluded) {
  require(dims.valid(), "grid dimensions must be positive");
  require(stride >= 1, "candidate stride must be positive");
  std::vector<datavec::MonitorColumn> out;
  const int offset = stride / 2;
  for (int j = offset; j < dims.ny; j += stride) {
    for (int i = offset; i < dims.nx; i += stride) {
      const bool skip = std::any_of(excluded.begin(), excluded.end(),
                                    [&](const auto& p) { return p.first == i && p.second == j; });
      if (!skip) out.push_back({i, j, {}});
    }
  }
  return out;
}

}  // namespace fdsi::monitors
