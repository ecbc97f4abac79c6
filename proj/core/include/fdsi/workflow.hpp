#pragma once

// Pipeline stages over a run directory:
//   gen-prior -> simulate -> train -> run-dsi -> plot
//
// Layout under the output root:
//   priors/model_<r>/{logk,poro,scalars}.fdsi     truth/model/...
//   sims/model_<r>/*.fdsi                          truth/sim/...
//   train/                                          norm stats, checkpoint, history, held-out errors
//   dsi/                                            observations, plan, posterior arrays, manifest
//   dsi/analytics/                                  bands, histograms, representatives, summary
//   plots/                                          SVG and CSV figures

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fdsi/analytics.hpp"
#include "fdsi/config.hpp"
#include "fdsi/latent.hpp"
#include "fdsi/monitors.hpp"
#include "fdsi/vae.hpp"

namespace fdsi::workflow {

namespace fs = std::filesystem;

struct RunPaths {
  fs::path root;

  [[nodiscard]] fs::path prior_dir(std::size_t r) const;
  [[nodiscard]] fs::path sim_dir(std::size_t r) const;
  [[nodiscard]] fs::path truth_model_dir() const { return root / "truth" / "model"; }
  [[nodiscard]] fs::path truth_sim_dir() const { return root / "truth" / "sim"; }
  [[nodiscard]] fs::path train_dir() const { return root / "train"; }
  [[nodiscard]] fs::path dsi_dir() const { return root / "dsi"; }
  [[nodiscard]] fs::path analytics_dir() const { return root / "dsi" / "analytics"; }
  [[nodiscard]] fs::path plots_dir() const { return root / "plots"; }
};

struct CommandOptions {
  bool force = false;
  std::size_t workers = 1;
  std::function<void(const std::string&)> log;  // progress lines; may be empty
};

// Persistence. Every numeric artifact is an ArrayFile.
void save_geomodel(const fs::path& dir, const geostat::GeoModel& model);
[[nodiscard]] geostat::GeoModel load_geomodel(const fs::path& dir, GridDims dims);
[[nodiscard]] bool geomodel_valid(const fs::path& dir, GridDims dims) noexcept;

void save_sim(const fs::path& dir, const forward::SimResult& sim);
[[nodiscard]] forward::SimResult load_sim(const fs::path& dir);
[[nodiscard]] bool sim_valid(const fs::path& dir, std::size_t n_cells, std::size_t n_times) noexcept;

[[nodiscard]] std::string norm_stats_json(const datavec::NormStats& stats);
[[nodiscard]] datavec::NormStats norm_stats_from_json(const std::string& text);

/// Checkpoint arrays plus checkpoint.json (kind, shapes, activation, training
/// config hash, norm-stats hash).
void save_parameterizer(const fs::path& dir, const latent::Parameterizer& model, const std::string& config_hash,
                        const std::string& norm_stats_hash);
[[nodiscard]] std::unique_ptr<latent::Parameterizer> load_parameterizer(const fs::path& dir);

/// d_full of realizations [0, n), one per row.
[[nodiscard]] RowMatrix load_dfull_ensemble(const config::RunConfig& config, std::size_t n);
/// Normalised, compacted data vectors as columns.
[[nodiscard]] Eigen::MatrixXd to_latent_space_input(const RowMatrix& dfull, const datavec::NormStats& stats,
                                                   const datavec::DataLayout& layout);

struct GenPriorReport {
  std::size_t written = 0;
  std::size_t skipped = 0;
};
GenPriorReport cmd_gen_prior(const config::RunConfig& config, const CommandOptions& options = {});

struct SimulateReport {
  std::size_t written = 0;
  std::size_t skipped = 0;
  double max_mass_balance_error = 0.0;  // over everything simulated in this call
  std::size_t tensile_cells = 0;
};
SimulateReport cmd_simulate(const config::RunConfig& config, const CommandOptions& options = {});

struct TrainReport {
  std::string kind;
  bool skipped = false;
  double seconds = 0.0;
  latent::TrainHistory history;  // empty for pca
  analytics::ErrorReport heldout;
  latent::CovarianceBand training_band;
  double training_roundtrip_error = 0.0;  // max |x - decode(encode(x))| over the training set
};
TrainReport cmd_train(const config::RunConfig& config, const CommandOptions& options = {});

struct FaultFstReport {
  std::string name;
  analytics::FstHistogram histogram;
};

struct ScalarReport {
  std::string name;
  double prior_iqr = 0.0;
  double posterior_iqr = 0.0;
  double reduction = 0.0;  // 1 - posterior / prior
  bool inside_support = false;
};

struct FieldBand {
  datavec::FieldKind field = datavec::FieldKind::pressure;
  std::size_t entries = 0;
  double prior_width = 0.0;  // mean P10-P90 width over monitored entries
  double posterior_width = 0.0;
  double ratio = 0.0;        // prior / posterior
  double coverage = 0.0;     // fraction of entries with the noise-free truth inside the posterior band
};

struct DsiReport {
  monitors::MonitorPlan plan;
  std::size_t n_obs = 0;
  std::vector<FieldBand> bands;
  double truth_coverage = 0.0;  // over all monitored entries
  std::vector<FaultFstReport> fst;
  std::vector<ScalarReport> scalars;
  std::vector<std::size_t> representatives;
  std::vector<double> alphas;
  double seconds = 0.0;
};
DsiReport cmd_run_dsi(const config::RunConfig& config, const CommandOptions& options = {});

struct PlotReport {
  std::vector<fs::path> files;
};
/// Reads the analytics bundle and writes figures; an absent or empty bundle writes nothing.
PlotReport cmd_plot(const config::RunConfig& config, const CommandOptions& options = {});

/// Runs `fn(chunk_begin, chunk_end)` over fixed-size chunks of [0, n) on up to
/// `workers` threads. Chunk boundaries do not depend on the worker count.
void parallel_chunks(std::size_t n, std::size_t chunk, std::size_t workers,
                     const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace fdsi::workflow
