#pragma once

// Run configuration: one JSON document describing the scenario, the prior,
// the parameterizer, the inversion and every seed.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdsi/datavec.hpp"
#include "fdsi/esmda.hpp"
#include "fdsi/forward.hpp"
#include "fdsi/geostat.hpp"
#include "fdsi/vae.hpp"

namespace fdsi::config {

inline constexpr int kSchemaVersion = 1;

struct WellConfig {
  std::string name;
  int i = 0;
  int j = 0;
  std::vector<int> layers;  // empty: all layers
  double rate_mt_per_year = 0.0;
  double start_year = 0.0;
  double stop_year = 1.0e9;
};

struct Seeds {
  std::uint64_t prior = 0;    // realization r uses derive_seed(prior, r)
  std::uint64_t truth = 0;    // held out from the prior stream
  std::uint64_t noise = 0;    // observation noise
  std::uint64_t train = 0;    // parameterizer training
  std::uint64_t esmda = 0;    // update perturbations
  std::uint64_t cluster = 0;  // representative selection
};

struct Split {
  std::size_t train = 160;
  std::size_t validation = 20;
  std::size_t test = 20;

  [[nodiscard]] std::size_t total() const noexcept { return train + validation + test; }
};

struct ParameterizerConfig {
  std::string kind = "vae";  // "pca" or "vae"
  std::size_t latent_dim = 64;
  std::size_t hidden_frame = 64;
  std::size_t hidden_joint = 256;
  latent::TrainConfig train;  // seed is taken from Seeds::train
};

struct PlacementRequest {
  std::size_t n_wells = 4;
  int stride = 2;
  double target_time = 50.0;  // average slip tendency of every fault at this prediction time
};

struct MonitorConfig {
  std::vector<datavec::FieldKind> fields{datavec::FieldKind::pressure, datavec::FieldKind::strain_zz};
  std::vector<datavec::MonitorColumn> wells;  // used when no placement is requested
  std::optional<PlacementRequest> placement;
};

struct AnalyticsConfig {
  std::size_t representatives = 4;
  std::size_t histogram_bins = 30;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string output_root_text;          // as written
  std::filesystem::path output_root;     // resolved against the config file directory

  forward::Grid grid;
  geostat::VariogramSpec variogram;
  geostat::PriorRanges ranges;
  forward::FluidProperties fluid;
  forward::InitialConditions initial;
  forward::TimeStepping stepping;
  std::vector<WellConfig> wells;
  std::vector<forward::FaultPlane> faults;
  std::vector<double> report_times{2.0, 4.0, 6.0, 8.0, 20.0, 36.0, 50.0};
  std::vector<double> hm_times{2.0, 4.0, 6.0, 8.0};
  std::vector<double> pred_times{50.0};

  std::size_t n_realizations = 200;
  Split split;
  Seeds seeds;
  ParameterizerConfig parameterizer;
  esmda::EsmdaConfig esmda;  // seed is taken from Seeds::esmda
  bool joint_scalars = true;
  MonitorConfig monitors;
  datavec::NoiseModel noise;
  AnalyticsConfig analytics;

  void validate() const;
  [[nodiscard]] forward::Scenario scenario() const;
  [[nodiscard]] datavec::DataLayout layout() const;
  [[nodiscard]] latent::VaeShape vae_shape() const;
  [[nodiscard]] latent::TrainConfig train_config() const;
  [[nodiscard]] esmda::EsmdaConfig esmda_config() const;
  [[nodiscard]] std::uint64_t realization_seed(std::size_t r) const noexcept;
  [[nodiscard]] std::uint64_t truth_seed() const noexcept;
};

/// Parses and validates. Unknown keys are rejected; seeds have no defaults.
[[nodiscard]] RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of every resolved field, sorted keys. The output root is
/// left out so a relocated run hashes the same.
[[nodiscard]] std::string canonical_json(const RunConfig& config);
[[nodiscard]] std::string config_hash(const RunConfig& config);

/// Replaces every base seed with derive_seed(seed, k), k in declaration order.
void apply_seed_override(RunConfig& config, std::uint64_t seed);

[[nodiscard]] std::string sha256_hex(std::span<const std::uint8_t> bytes);
[[nodiscard]] std::string sha256_hex(const std::string& text);
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

}  // namespace fdsi::config
