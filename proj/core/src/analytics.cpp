#include "fdsi/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fdsi::analytics {

double quantile_sorted(std::span<const double> sorted, double p) {
  require(!sorted.empty(), "quantile of an empty set");
  require(p >= 0.0 && p <= 1.0, "quantile level must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double p) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, p);
}

double interquartile_range(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
}

Eigen::MatrixXd column_quantiles(const RowMatrix& ensemble, std::span<const double> probs) {
  require(ensemble.rows() >= 1, "quantiles of an empty ensemble");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(probs.size()), ensemble.cols());
  std::vector<double> col(static_cast<std::size_t>(ensemble.rows()));
  for (Eigen::Index c = 0; c < ensemble.cols(); ++c) {
    for (Eigen::Index r = 0; r < ensemble.rows(); ++r) col[static_cast<std::size_t>(r)] = ensemble(r, c);
    std::sort(col.begin(), col.end());
    for (std::size_t q = 0; q < probs.size(); ++q) out(static_cast<Eigen::Index>(q), c) = quantile_sorted(col, probs[q]);
  }
  return out;
}

PercentileBand percentile_band(const RowMatrix& ensemble) {
  require(ensemble.rows() >= 2, "percentile bands need at least two members");
  static constexpr std::array<double, 3> kProbs = {0.1, 0.5, 0.9};
  const auto q = column_quantiles(ensemble, kProbs);
  return {q.row(0).transpose(), q.row(1).transpose(), q.row(2).transpose()};
}

FieldErrors relative_errors(const datavec::DataVector& reconstructed, const datavec::DataVector& reference,
                            const datavec::DataLayout& layout) {
  require(reconstructed.size() == reference.size() &&
              static_cast<std::size_t>(reference.size()) == layout.full_size(),
          "error metrics need vectors matching the layout");
  FieldErrors out;
  const auto fault = layout.fault_cells();
  std::vector<std::size_t> all(layout.n_cells());
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (int f = 0; f < datavec::kFieldCount; ++f) {
    const auto kind = static_cast<datavec::FieldKind>(f);
    const auto& cells = datavec::is_stress(kind) ? fault : all;
    if (cells.empty()) continue;
    double sum = 0.0;
    double value_sum = 0.0;
    std::size_t value_count = 0;
    std::size_t used_times = 0;
    for (std::size_t t = 0; t < layout.n_times(); ++t) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      double abs_err = 0.0;
      for (auto c : cells) {
        const auto i = static_cast<Eigen::Index>(layout.index(kind, c, t));
        lo = std::min(lo, reference[i]);
        hi = std::max(hi, reference[i]);
        const double e = std::abs(reconstructed[i] - reference[i]);
        abs_err += e;
        if (datavec::is_stress(kind) && reference[i] != 0.0) {
          value_sum += e / std::abs(reference[i]);
          ++value_count;
        }
      }
      if (!(hi > lo)) {
        ++out.excluded_times;
        continue;
      }
      sum += abs_err / (hi - lo);
      ++used_times;
    }
    out.delta[static_cast<std::size_t>(f)] =
        used_times > 0 ? sum / (static_cast<double>(cells.size()) * static_cast<double>(used_times)) : 0.0;
    if (datavec::is_stress(kind)) {
      out.stress_value_normalised[static_cast<std::size_t>(f - 2)] =
          value_count > 0 ? value_sum / static_cast<double>(value_count) : 0.0;
    }
  }
  return out;
}

BoxSummary box_summary(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return {quantile_sorted(v, 0.1), quantile_sorted(v, 0.25), quantile_sorted(v, 0.5), quantile_sorted(v, 0.75),
          quantile_sorted(v, 0.9)};
}

ErrorReport error_report(std::vector<FieldErrors> cases) {
  require(!cases.empty(), "error report needs at least one case");
  ErrorReport r;
  r.cases = std::move(cases);
  for (std::size_t f = 0; f < datavec::kFieldCount; ++f) {
    std::vector<double> v;
    v.reserve(r.cases.size());
    for (const auto& c : r.cases) v.push_back(c.delta[f]);
    r.summary[f] = box_summary(v);
  }
  return r;
}

std::size_t cluster_medoid(const RowMatrix& points, std::span<const std::size_t> cluster) {
  require(!cluster.empty(), "medoid of an empty cluster");
  std::size_t best = cluster.front();
  double best_cost = std::numeric_limits<double>::infinity();
  for (auto a : cluster) {
    double cost = 0.0;
    for (auto b : cluster) cost += (points.row(static_cast<Eigen::Index>(a)) - points.row(static_cast<Eigen::Index>(b))).norm();
    if (cost < best_cost) {
      best_cost = cost;
      best = a;
    }
  }
  return best;
}

namespace {

Eigen::MatrixXd kmeanspp_seeds(const RowMatrix& points, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  Eigen::MatrixXd centres(static_cast<Eigen::Index>(k), points.cols());
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  centres.row(0) = points.row(static_cast<Eigen::Index>(first(rng)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(static_cast<Eigen::Index>(i)) - centres.row(static_cast<Eigen::Index>(c - 1))).squaredNorm());
      total += d2[i];
    }
    std::size_t pick = n - 1;
    if (total > 0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target && d2[i] > 0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    centres.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
  }
  return centres;
}

}  // namespace

Representatives k_representatives(const RowMatrix& points, std::size_t k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  require(k >= 1, "need at least one cluster");
  require(n >= k, "ensemble is smaller than the number of clusters");
  constexpr int kMaxAttempts = 10;
  constexpr int kMaxIterations = 300;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(attempt));
    Eigen::MatrixXd centres = kmeanspp_seeds(points, k, rng);
    std::vector<int> labels(n, -1);
    bool empty_cluster = false;
    for (int it = 0; it < kMaxIterations; ++it) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
          const double d = (points.row(static_cast<Eigen::Index>(i)) - centres.row(static_cast<Eigen::Index>(c))).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
          }
        }
        if (labels[i] != best) {
          labels[i] = best;
          changed = true;
        }
      }
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), points.cols());
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        sums.row(labels[i]) += points.row(static_cast<Eigen::Index>(i));
        ++counts[static_cast<std::size_t>(labels[i])];
      }
      empty_cluster = std::find(counts.begin(), counts.end(), std::size_t{0}) != counts.end();
      if (empty_cluster) break;
      for (std::size_t c = 0; c < k; ++c) {
        centres.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
      }
      if (!changed) break;
    }
    if (empty_cluster) continue;
    Representatives r;
    r.labels = labels;
    r.centroids = centres;
    r.attempts = attempt + 1;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == static_cast<int>(c)) members.push_back(i);
      }
      r.medoids.push_back(cluster_medoid(points, members));
    }
    return r;
  }
  throw RuntimeFailure("k-means left a cluster empty after 10 seeding attempts");
}

faultgeom::FaultAverage average_fst(const datavec::DataVector& d, const datavec::DataLayout& layout,
                                    std::span<const std::size_t> fault_cells, std::size_t time_slot, double friction) {
  require(!fault_cells.empty(), "fault has no cells");
  std::vector<faultgeom::FaultCellState> cells;
  cells.reserve(fault_cells.size());
  for (auto c : fault_cells) {
    const double sn = d[static_cast<Eigen::Index>(layout.index(datavec::FieldKind::sigma_n_eff, c, time_slot))];
    const double tau = d[static_cast<Eigen::Index>(layout.index(datavec::FieldKind::tau, c, time_slot))];
    cells.push_back({sn, tau, faultgeom::slip_tendency(tau, sn, friction)});
  }
  return faultgeom::average_fst(cells);
}

Histogram histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  require(bins >= 1, "histogram needs at least one bin");
  require(hi >= lo, "histogram range is inverted");
  Histogram h;
  h.counts.assign(bins, 0);
  if (hi == lo) {
    // Degenerate range: a single occupied bin centred on the value.
    lo -= 0.5;
    hi += 0.5;
  }
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  for (double v : values) {
    if (!(v >= lo && v <= hi)) continue;
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

FstHistogram fst_histograms(std::span<const double> prior, std::span<const double> posterior, double truth,
                            std::size_t bins, double threshold) {
  auto defined = [](std::span<const double> v, std::size_t& excluded) {
    std::vector<double> out;
    for (double x : v) {
      if (std::isfinite(x)) {
        out.push_back(x);
      } else {
        ++excluded;
      }
    }
    return out;
  };
  FstHistogram r;
  r.truth = truth;
  r.threshold = threshold;
  const auto pr = defined(prior, r.prior_excluded);
  const auto po = defined(posterior, r.posterior_excluded);
  require(!pr.empty() && !po.empty(), "slip-tendency histograms need defined members");
  double lo = std::min(*std::min_element(pr.begin(), pr.end()), *std::min_element(po.begin(), po.end()));
  double hi = std::max(*std::max_element(pr.begin(), pr.end()), *std::max_element(po.begin(), po.end()));
  r.prior = histogram(pr, lo, hi, bins);
  r.posterior = histogram(po, lo, hi, bins);
  r.prior_iqr = interquartile_range(pr);
  r.posterior_iqr = interquartile_range(po);
  auto above = [threshold](const std::vector<double>& v) {
    return static_cast<double>(std::count_if(v.begin(), v.end(), [threshold](double x) { return x > threshold; })) /
           static_cast<double>(v.size());
  };
  r.prior_slip_fraction = above(pr);
  r.posterior_slip_fraction = above(po);
  return r;
}

}  // namespace fdsi::analytics
