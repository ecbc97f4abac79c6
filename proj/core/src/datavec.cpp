#include "fdsi/datavec.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace fdsi::datavec {

std::string_view field_name(FieldKind kind) noexcept {
  switch (kind) {
    case FieldKind::pressure:
      return "pressure";
    case FieldKind::strain_zz:
      return "strain_zz";
    case FieldKind::sigma_n_eff:
      return "sigma_n_eff";
    case FieldKind::tau:
      return "tau";
  }
  return "unknown";
}

FieldKind field_from_name(std::string_view name) {
  for (int f = 0; f < kFieldCount; ++f) {
    if (field_name(static_cast<FieldKind>(f)) == name) return static_cast<FieldKind>(f);
  }
  throw ValidationError("unknown field kind '" + std::string(name) + "'");
}

DataLayout::DataLayout(std::size_t n_cells, std::vector<double> hm_times, std::vector<double> pred_times,
                       std::vector<bool> fault_mask)
    : n_cells_(n_cells),
      hm_times_(std::move(hm_times)),
      pred_times_(std::move(pred_times)),
      fault_mask_(std::move(fault_mask)) {
  require(n_cells_ > 0, "layout needs at least one cell");
  require(n_times() > 0, "layout needs at least one time");
  require(fault_mask_.size() == n_cells_, "fault mask length must equal the cell count");
  const auto all = times();
  for (std::size_t t = 1; t < all.size(); ++t) require(all[t] > all[t - 1], "layout times must increase");
  active_.reserve(full_size());
  for (std::size_t i = 0; i < full_size(); ++i) {
    if (!structural_zero(i)) active_.push_back(i);
  }
}

std::vector<double> DataLayout::times() const {
  std::vector<double> all = hm_times_;
  all.insert(all.end(), pred_times_.begin(), pred_times_.end());
  return all;
}

std::vector<std::size_t> DataLayout::fault_cells() const {
  std::vector<std::size_t> cells;
  for (std::size_t c = 0; c < n_cells_; ++c) {
    if (fault_mask_[c]) cells.push_back(c);
  }
  return cells;
}

std::size_t DataLayout::index(FieldKind field, std::size_t cell, std::size_t time_slot) const {
  require(cell < n_cells_ && time_slot < n_times(), "layout index out of range");
  return time_slot * frame_size() + static_cast<std::size_t>(field) * n_cells_ + cell;
}

FieldKind DataLayout::field_of(std::size_t flat) const noexcept {
  return static_cast<FieldKind>((flat % frame_size()) / n_cells_);
}

bool DataLayout::structural_zero(std::size_t flat) const noexcept {
  return is_stress(field_of(flat)) && !fault_mask_[cell_of(flat)];
}

namespace {

Eigen::Index find_time(const std::vector<double>& times, double t) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return static_cast<Eigen::Index>(i);
  }
  return -1;
}

const RowMatrix& field_matrix(const forward::SimResult& sim, FieldKind f) {
  switch (f) {
    case FieldKind::pressure:
      return sim.pressure;
    case FieldKind::strain_zz:
      return sim.strain_zz;
    case FieldKind::sigma_n_eff:
      return sim.sigma_n_eff;
    case FieldKind::tau:
      break;
  }
  return sim.tau;
}

RowMatrix& field_matrix(forward::SimResult& sim, FieldKind f) {
  return const_cast<RowMatrix&>(field_matrix(static_cast<const forward::SimResult&>(sim), f));
}

}  // namespace

DataVector assemble_dfull(const forward::SimResult& sim, const DataLayout& layout) {
  require(sim.cell_count() == layout.n_cells(), "simulation and layout differ in cell count");
  const auto times = layout.times();
  DataVector d(static_cast<Eigen::Index>(layout.full_size()));
  for (std::size_t slot = 0; slot < times.size(); ++slot) {
    const auto row = find_time(sim.times, times[slot]);
    if (row < 0) throw ValidationError("simulation has no result at layout time " + std::to_string(times[slot]));
    for (int f = 0; f < kFieldCount; ++f) {
      const auto kind = static_cast<FieldKind>(f);
      const auto& m = field_matrix(sim, kind);
      const auto base = static_cast<Eigen::Index>(layout.index(kind, 0, slot));
      for (std::size_t c = 0; c < layout.n_cells(); ++c) {
        const bool zero = is_stress(kind) && !layout.fault_mask()[c];
        d[base + static_cast<Eigen::Index>(c)] = zero ? 0.0 : m(row, static_cast<Eigen::Index>(c));
      }
    }
  }
  return d;
}

forward::SimResult scatter_dfull(const DataVector& d, const DataLayout& layout) {
  require(static_cast<std::size_t>(d.size()) == layout.full_size(), "data vector length does not match layout");
  forward::SimResult sim;
  sim.times = layout.times();
  const auto nt = static_cast<Eigen::Index>(layout.n_times());
  const auto nc = static_cast<Eigen::Index>(layout.n_cells());
  for (int f = 0; f < kFieldCount; ++f) {
    auto& m = field_matrix(sim, static_cast<FieldKind>(f));
    m.resize(nt, nc);
    for (Eigen::Index t = 0; t < nt; ++t) {
      const auto base = static_cast<Eigen::Index>(layout.index(static_cast<FieldKind>(f), 0, static_cast<std::size_t>(t)));
      m.row(t) = d.segment(base, nc).transpose();
    }
  }
  return sim;
}

DataVector compact(const DataVector& d, const DataLayout& layout) {
  require(static_cast<std::size_t>(d.size()) == layout.full_size(), "data vector length does not match layout");
  const auto& idx = layout.active_indices();
  DataVector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = d[static_cast<Eigen::Index>(idx[i])];
  return out;
}

DataVector expand(const DataVector& active, const DataLayout& layout) {
  const auto& idx = layout.active_indices();
  require(static_cast<std::size_t>(active.size()) == idx.size(), "active vector length does not match layout");
  DataVector out = DataVector::Zero(static_cast<Eigen::Index>(layout.full_size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(idx[i])] = active[static_cast<Eigen::Index>(i)];
  return out;
}

SelectionIndex::SelectionIndex(std::vector<SelectionEntry> entries, const DataLayout& layout)
    : entries_(std::move(entries)) {
  std::unordered_set<std::size_t> seen;
  for (const auto& e : entries_) {
    require(e.flat < layout.full_size(), "selection index outside the data vector");
    require(layout.in_history(e.flat), "selection index outside the historical segment");
    require(layout.index(e.field, e.cell, e.time_slot) == e.flat, "selection entry is inconsistent with layout");
    require(seen.insert(e.flat).second, "selection indices must be unique");
  }
}

SelectionIndex build_selection(const DataLayout& layout, GridDims dims, std::span<const MonitorColumn> wells,
                               std::span<const FieldKind> fields) {
  require(dims.size() == layout.n_cells(), "grid does not match layout");
  std::vector<SelectionEntry> entries;
  for (std::size_t w = 0; w < wells.size(); ++w) {
    const auto& well = wells[w];
    require(well.i >= 0 && well.i < dims.nx && well.j >= 0 && well.j < dims.ny, "monitor column outside grid");
    std::vector<int> layers = well.layers;
    if (layers.empty()) {
      for (int k = 0; k < dims.nz; ++k) layers.push_back(k);
    }
    for (std::size_t t = 0; t < layout.n_hm_times(); ++t) {
      for (auto f : fields) {
        for (int k : layers) {
          require(k >= 0 && k < dims.nz, "monitor layer outside grid");
          const auto cell = dims.index(well.i, well.j, k);
          entries.push_back({static_cast<int>(w), f, cell, t, layout.index(f, cell, t)});
        }
      }
    }
  }
  return SelectionIndex(std::move(entries), layout);
}

Eigen::VectorXd extract_monitor(const DataVector& d, const SelectionIndex& sel) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(sel.size()));
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const auto flat = sel.entries()[i].flat;
    require(flat < static_cast<std::size_t>(d.size()), "selection index outside the data vector");
    out[static_cast<Eigen::Index>(i)] = d[static_cast<Eigen::Index>(flat)];
  }
  return out;
}

DataVector scatter_monitor(const Eigen::VectorXd& u, const SelectionIndex& sel, std::size_t full_size) {
  require(static_cast<std::size_t>(u.size()) == sel.size(), "vector length does not match selection");
  DataVector out = DataVector::Zero(static_cast<Eigen::Index>(full_size));
  for (std::size_t i = 0; i < sel.size(); ++i) {
    out[static_cast<Eigen::Index>(sel.entries()[i].flat)] += u[static_cast<Eigen::Index>(i)];
  }
  return out;
}

NoiseCovariance build_noise_cov(const SelectionIndex& sel, std::span<const double> monitored_strains,
                                const NoiseModel& model) {
  require(model.pressure_std > 0 && model.strain_fraction > 0 && model.strain_floor > 0,
          "noise model parameters must be positive");
  NoiseCovariance out;
  double mean_abs = 0.0;
  for (double s : monitored_strains) mean_abs += std::abs(s);
  if (!monitored_strains.empty()) mean_abs /= static_cast<double>(monitored_strains.size());
  out.strain_std = model.strain_fraction * mean_abs;
  if (!(out.strain_std >= model.strain_floor)) {
    out.strain_std = model.strain_floor;
    out.strain_floor_applied = true;
  }
  out.variances.resize(static_cast<Eigen::Index>(sel.size()));
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const auto kind = sel.entries()[i].field;
    double sd = 0.0;
    if (kind == FieldKind::pressure) {
      sd = model.pressure_std;
    } else if (kind == FieldKind::strain_zz) {
      sd = out.strain_std;
    } else {
      throw ValidationError("no noise model for monitored field " + std::string(field_name(kind)));
    }
    out.variances[static_cast<Eigen::Index>(i)] = sd * sd;
  }
  return out;
}

ObservationSet make_observations(const DataVector& d_true_full, const SelectionIndex& sel,
                                 const Eigen::VectorXd& cd_diag, std::uint64_t seed, std::string truth_id) {
  require(static_cast<std::size_t>(cd_diag.size()) == sel.size(), "noise variances do not match selection");
  ObservationSet obs;
  obs.d_true = extract_monitor(d_true_full, sel);
  obs.cd_diag = cd_diag;
  obs.selection = sel.entries();
  obs.seed = seed;
  obs.truth_id = std::move(truth_id);
  obs.d_obs = obs.d_true;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < obs.d_obs.size(); ++i) {
    require(cd_diag[i] >= 0, "noise variances must be non-negative");
    obs.d_obs[i] += std::sqrt(cd_diag[i]) * normal(rng);
  }
  return obs;
}

namespace {
std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

std::string ObservationSet::to_json_text() const {
  nlohmann::json j;
  j["format"] = "fdsi.observations";
  j["version"] = 1;
  j["provenance"] = {{"seed", seed}, {"truth_id", truth_id}};
  j["d_obs"] = to_std(d_obs);
  j["cd_diag"] = to_std(cd_diag);
  j["d_true"] = to_std(d_true);
  auto& sel = j["selection"] = nlohmann::json::array();
  for (const auto& e : selection) {
    sel.push_back({{"well", e.well},
                   {"field", std::string(field_name(e.field))},
                   {"cell", e.cell},
                   {"time_slot", e.time_slot},
                   {"flat", e.flat}});
  }
  return j.dump(1);
}

ObservationSet ObservationSet::from_json_text(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    require(j.at("format") == "fdsi.observations", "not an observation document");
    ObservationSet obs;
    obs.seed = j.at("provenance").at("seed").get<std::uint64_t>();
    obs.truth_id = j.at("provenance").at("truth_id").get<std::string>();
    obs.d_obs = from_std(j.at("d_obs").get<std::vector<double>>());
    obs.cd_diag = from_std(j.at("cd_diag").get<std::vector<double>>());
    obs.d_true = from_std(j.at("d_true").get<std::vector<double>>());
    for (const auto& e : j.at("selection")) {
      obs.selection.push_back({e.at("well").get<int>(), field_from_name(e.at("field").get<std::string>()),
                               e.at("cell").get<std::size_t>(), e.at("time_slot").get<std::size_t>(),
                               e.at("flat").get<std::size_t>()});
    }
    require(obs.d_obs.size() == obs.cd_diag.size() && obs.d_obs.size() == obs.d_true.size() &&
                static_cast<std::size_t>(obs.d_obs.size()) == obs.selection.size(),
            "observation arrays differ in length");
    return obs;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed observation document: ") + e.what());
  }
}

bool operator==(const ObservationSet& a, const ObservationSet& b) {
  auto same_entries = [](const SelectionEntry& x, const SelectionEntry& y) {
    return x.well == y.well && x.field == y.field && x.cell == y.cell && x.time_slot == y.time_slot &&
           x.flat == y.flat;
  };
  return a.seed == b.seed && a.truth_id == b.truth_id && a.d_obs == b.d_obs && a.cd_diag == b.cd_diag &&
         a.d_true == b.d_true &&
         std::equal(a.selection.begin(), a.selection.end(), b.selection.begin(), b.selection.end(), same_entries);
}

NormStats fit_norm_stats(const RowMatrix& training, const DataLayout& layout) {
  require(static_cast<std::size_t>(training.cols()) == layout.full_size(), "training matrix width does not match layout");
  require(training.rows() > 0, "cannot fit normalisation on an empty training set");
  std::array<double, kFieldCount> sum{};
  std::array<double, kFieldCount> count{};
  for (Eigen::Index r = 0; r < training.rows(); ++r) {
    for (auto idx : layout.active_indices()) {
      const auto f = static_cast<std::size_t>(layout.field_of(idx));
      sum[f] += training(r, static_cast<Eigen::Index>(idx));
      count[f] += 1.0;
    }
  }
  NormStats stats;
  for (int f = 0; f < kFieldCount; ++f) stats.mean[f] = count[f] > 0 ? sum[f] / count[f] : 0.0;
  std::array<double, kFieldCount> sq{};
  for (Eigen::Index r = 0; r < training.rows(); ++r) {
    for (auto idx : layout.active_indices()) {
      const auto f = static_cast<std::size_t>(layout.field_of(idx));
      const double dv = training(r, static_cast<Eigen::Index>(idx)) - stats.mean[f];
      sq[f] += dv * dv;
    }
  }
  for (int f = 0; f < kFieldCount; ++f) {
    if (count[f] == 0) {
      stats.std[f] = 1.0;
      continue;
    }
    stats.std[f] = std::sqrt(sq[f] / count[f]);
    if (!(stats.std[f] >= 1e-14)) {
      throw ValidationError("field " + std::string(field_name(static_cast<FieldKind>(f))) +
                            " has (near-)zero spread in the training set");
    }
  }
  return stats;
}

DataVector normalize(const DataVector& d, const NormStats& stats, const DataLayout& layout) {
  require(static_cast<std::size_t>(d.size()) == layout.full_size(), "data vector length does not match layout");
  DataVector z = DataVector::Zero(d.size());
  for (auto idx : layout.active_indices()) {
    const auto f = static_cast<std::size_t>(layout.field_of(idx));
    const auto i = static_cast<Eigen::Index>(idx);
    z[i] = (d[i] - stats.mean[f]) / stats.std[f];
  }
  return z;
}

DataVector denormalize(const DataVector& z, const NormStats& stats, const DataLayout& layout) {
  require(static_cast<std::size_t>(z.size()) == layout.full_size(), "data vector length does not match layout");
  DataVector d = DataVector::Zero(z.size());
  for (auto idx : layout.active_indices()) {
    const auto f = static_cast<std::size_t>(layout.field_of(idx));
    const auto i = static_cast<Eigen::Index>(idx);
    d[i] = z[i] * stats.std[f] + stats.mean[f];
  }
  return d;
}

}  // namespace fdsi::datavec
