#include "fdsi/workflow.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fdsi/array_io.hpp"
#include "workflow_detail.hpp"

namespace fdsi::workflow {

using json = nlohmann::json;

namespace {

std::string model_name(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "model_%04zu", r);
  return buf;
}

std::vector<std::uint32_t> grid_dims(GridDims d) {
  return {static_cast<std::uint32_t>(d.nz), static_cast<std::uint32_t>(d.ny), static_cast<std::uint32_t>(d.nx)};
}

bool array_has_dims(const fs::path& path, const std::vector<std::uint32_t>& dims) noexcept {
  try {
    if (!io::verify_array(path)) return false;
    return io::read_array(path).dims == dims;
  } catch (...) {
    return false;
  }
}

const char* const kSimFields[] = {"pressure", "strain_zz", "sigma_n_eff", "tau"};

RowMatrix& sim_field(forward::SimResult& s, int k) {
  switch (k) {
    case 0: return s.pressure;
    case 1: return s.strain_zz;
    case 2: return s.sigma_n_eff;
    default: return s.tau;
  }
}

}  // namespace

fs::path RunPaths::prior_dir(std::size_t r) const { return root / "priors" / model_name(r); }
fs::path RunPaths::sim_dir(std::size_t r) const { return root / "sims" / model_name(r); }

void parallel_chunks(std::size_t n, std::size_t chunk, std::size_t workers,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
  require(chunk >= 1, "chunk size must be positive");
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  if (n_chunks == 0) return;
  std::vector<std::exception_ptr> errors(n_chunks);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t c = next++; c < n_chunks; c = next++) {
      try {
        fn(c * chunk, std::min(n, (c + 1) * chunk));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), n_chunks);
  if (threads == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }
  // The first failing chunk wins, whatever the scheduling.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void save_geomodel(const fs::path& dir, const geostat::GeoModel& model) {
  fs::create_directories(dir);
  const auto dims = grid_dims(model.dims);
  io::write_array(dir / "logk.fdsi", dims, model.logk);
  io::write_array(dir / "poro.fdsi", dims, model.poro);
  const auto s = model.scalars.as_array();
  io::write_vector(dir / "scalars.fdsi", s);
}

geostat::GeoModel load_geomodel(const fs::path& dir, GridDims dims) {
  geostat::GeoModel m;
  m.dims = dims;
  const auto logk = io::read_array(dir / "logk.fdsi");
  const auto poro = io::read_array(dir / "poro.fdsi");
  require(logk.dims == grid_dims(dims) && poro.dims == grid_dims(dims), "prior model " + dir.string() +
                                                                           " does not match the grid");
  m.logk = logk.values;
  m.poro = poro.values;
  const auto s = io::read_vector(dir / "scalars.fdsi");
  require(s.size() == 6, "prior model " + dir.string() + " has a malformed scalars file");
  m.scalars = geostat::ScalarParams::from_array(std::span<const double, 6>(s.data(), 6));
  return m;
}

bool geomodel_valid(const fs::path& dir, GridDims dims) noexcept {
  return array_has_dims(dir / "logk.fdsi", grid_dims(dims)) && array_has_dims(dir / "poro.fdsi", grid_dims(dims)) &&
         array_has_dims(dir / "scalars.fdsi", {6});
}

void save_sim(const fs::path& dir, const forward::SimResult& sim) {
  fs::create_directories(dir);
  auto copy = sim;
  for (int k = 0; k < 4; ++k) io::write_matrix(dir / (std::string(kSimFields[k]) + ".fdsi"), sim_field(copy, k));
  io::write_vector(dir / "times.fdsi", sim.times);
  RowMatrix diag(2, static_cast<Eigen::Index>(sim.times.size()));
  for (std::size_t t = 0; t < sim.times.size(); ++t) {
    diag(0, static_cast<Eigen::Index>(t)) = sim.injected_volume.at(t);
    diag(1, static_cast<Eigen::Index>(t)) = sim.storage_change.at(t);
  }
  io::write_matrix(dir / "balance.fdsi", diag);
  const std::vector<double> tensile{static_cast<double>(sim.tensile_cells)};
  io::write_vector(dir / "tensile.fdsi", tensile);
}

forward::SimResult load_sim(const fs::path& dir) {
  forward::SimResult s;
  s.times = io::read_vector(dir / "times.fdsi");
  for (int k = 0; k < 4; ++k) {
    sim_field(s, k) = io::read_matrix(dir / (std::string(kSimFields[k]) + ".fdsi"));
    require(static_cast<std::size_t>(sim_field(s, k).rows()) == s.times.size(),
            "simulation " + dir.string() + " has inconsistent time counts");
  }
  const auto diag = io::read_matrix(dir / "balance.fdsi");
  require(diag.rows() == 2 && static_cast<std::size_t>(diag.cols()) == s.times.size(),
          "simulation " + dir.string() + " has a malformed balance file");
  for (Eigen::Index t = 0; t < diag.cols(); ++t) {
    s.injected_volume.push_back(diag(0, t));
    s.storage_change.push_back(diag(1, t));
  }
  s.tensile_cells = static_cast<std::size_t>(io::read_vector(dir / "tensile.fdsi").at(0));
  return s;
}

bool sim_valid(const fs::path& dir, std::size_t n_cells, std::size_t n_times) noexcept {
  const std::vector<std::uint32_t> field{static_cast<std::uint32_t>(n_times), static_cast<std::uint32_t>(n_cells)};
  for (const char* name : kSimFields) {
    if (!array_has_dims(dir / (std::string(name) + ".fdsi"), field)) return false;
  }
  return array_has_dims(dir / "times.fdsi", {static_cast<std::uint32_t>(n_times)}) &&
         array_has_dims(dir / "balance.fdsi", {2, static_cast<std::uint32_t>(n_times)}) &&
         array_has_dims(dir / "tensile.fdsi", {1});
}

std::string norm_stats_json(const datavec::NormStats& stats) {
  json j;
  j["format"] = "fdsi.norm-stats";
  j["fields"] = json::array();
  for (int f = 0; f < datavec::kFieldCount; ++f) {
    j["fields"].push_back({{"field", std::string(datavec::field_name(static_cast<datavec::FieldKind>(f)))},
                           {"mean", stats.mean[static_cast<std::size_t>(f)]},
                           {"std", stats.std[static_cast<std::size_t>(f)]}});
  }
  return j.dump(2);
}

datavec::NormStats norm_stats_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    require(j.at("format") == "fdsi.norm-stats", "not a norm-stats document");
    datavec::NormStats s;
    require(j.at("fields").size() == datavec::kFieldCount, "norm stats must list every field");
    for (const auto& e : j.at("fields")) {
      const auto f = static_cast<std::size_t>(datavec::field_from_name(e.at("field").get<std::string>()));
      s.mean[f] = e.at("mean").get<double>();
      s.std[f] = e.at("std").get<double>();
      require(s.std[f] > 0, "norm stats std must be positive");
    }
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed norm stats: ") + e.what());
  }
}

namespace {

json vae_layers(const latent::VaeShape& s) {
  const auto fr = s.frames;
  auto layer = [](const char* name, std::size_t out, std::size_t in, const char* act, bool shared) {
    return json{{"name", name}, {"out", out}, {"in", in}, {"activation", act}, {"shared_across_frames", shared}};
  };
  return json::array({layer("encoder_frame", s.hidden_frame, s.frame_size, "leaky_relu", true),
                      layer("encoder_joint", s.hidden_joint, fr * s.hidden_frame, "leaky_relu", false),
                      layer("encoder_mu", s.latent, s.hidden_joint, "linear", false),
                      layer("encoder_logvar", s.latent, s.hidden_joint, "linear", false),
                      layer("decoder_joint", s.hidden_joint, s.latent, "leaky_relu", false),
                      layer("decoder_frames", fr * s.hidden_frame, s.hidden_joint, "leaky_relu", false),
                      layer("decoder_frame", s.frame_size, s.hidden_frame, "linear", true)});
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << text;
    if (!out) throw RuntimeFailure("cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_parameterizer(const fs::path& dir, const latent::Parameterizer& model, const std::string& config_hash,
                        const std::string& norm_stats_hash) {
  fs::create_directories(dir);
  json j;
  j["format"] = "fdsi.checkpoint";
  j["kind"] = model.kind();
  j["data_dim"] = model.data_dim();
  j["latent_dim"] = model.latent_dim();
  j["training_config_hash"] = config_hash;
  j["norm_stats_sha256"] = norm_stats_hash;
  if (const auto* pca = dynamic_cast<const latent::PCAModel*>(&model)) {
    io::write_vector(dir / "mean.fdsi", std::span(pca->mean().data(), static_cast<std::size_t>(pca->mean().size())));
    io::write_matrix(dir / "basis.fdsi", RowMatrix(pca->basis()));
    io::write_vector(dir / "singular_values.fdsi",
                     std::span(pca->singular_values().data(), static_cast<std::size_t>(pca->singular_values().size())));
    j["n_train"] = pca->n_train();
    j["total_variance"] = pca->total_variance();
    j["arrays"] = {"mean.fdsi", "basis.fdsi", "singular_values.fdsi"};
  } else if (const auto* vae = dynamic_cast<const latent::VAEModel*>(&model)) {
    const auto& s = vae->shape();
    io::write_vector(dir / "parameters.fdsi",
                     std::span(vae->parameters().data(), static_cast<std::size_t>(vae->parameters().size())));
    io::write_vector(dir / "center.fdsi", std::span(vae->center().data(), static_cast<std::size_t>(vae->center().size())));
    j["shape"] = {{"frame_size", s.frame_size},
                  {"frames", s.frames},
                  {"hidden_frame", s.hidden_frame},
                  {"hidden_joint", s.hidden_joint},
                  {"latent", s.latent}};
    j["layers"] = vae_layers(s);
    j["leaky_slope"] = latent::kLeakySlope;
    j["parameter_count"] = s.parameter_count();
    j["arrays"] = {"parameters.fdsi", "center.fdsi"};
  } else {
    throw ValidationError("unknown parameterizer kind " + model.kind());
  }
  write_text(dir / "checkpoint.json", j.dump(2));
}

std::unique_ptr<latent::Parameterizer> load_parameterizer(const fs::path& dir) {
  json j;
  try {
    j = json::parse(read_text(dir / "checkpoint.json"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "pca") {
      const auto mean = io::read_vector(dir / "mean.fdsi");
      const RowMatrix basis = io::read_matrix(dir / "basis.fdsi");
      const auto sv = io::read_vector(dir / "singular_values.fdsi");
      return std::make_unique<latent::PCAModel>(
          Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())),
          Eigen::MatrixXd(basis), Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size())),
          j.at("n_train").get<std::size_t>(), j.at("total_variance").get<double>());
    }
    if (kind == "vae") {
      const auto& js = j.at("shape");
      latent::VaeShape shape{js.at("frame_size").get<std::size_t>(), js.at("frames").get<std::size_t>(),
                             js.at("hidden_frame").get<std::size_t>(), js.at("hidden_joint").get<std::size_t>(),
                             js.at("latent").get<std::size_t>()};
      const auto params = io::read_vector(dir / "parameters.fdsi");
      const auto center = io::read_vector(dir / "center.fdsi");
      return std::make_unique<latent::VAEModel>(
          shape, Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size())),
          Eigen::Map<const Eigen::VectorXd>(center.data(), static_cast<Eigen::Index>(center.size())));
    }
    throw ValidationError("unknown parameterizer kind " + kind);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint manifest: ") + e.what());
  }
}

RowMatrix load_dfull_ensemble(const config::RunConfig& config, std::size_t n) {
  const RunPaths paths{config.output_root};
  const auto layout = config.layout();
  RowMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(layout.full_size()));
  for (std::size_t r = 0; r < n; ++r) {
    const auto dir = paths.sim_dir(r);
    require(fs::exists(dir / "pressure.fdsi"), "simulation " + std::to_string(r) + " is missing; run simulate first");
    out.row(static_cast<Eigen::Index>(r)) = datavec::assemble_dfull(load_sim(dir), layout).transpose();
  }
  return out;
}

Eigen::MatrixXd to_latent_space_input(const RowMatrix& dfull, const datavec::NormStats& stats,
                                      const datavec::DataLayout& layout) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(layout.active_indices().size()), dfull.rows());
  for (Eigen::Index r = 0; r < dfull.rows(); ++r) {
    out.col(r) = datavec::compact(datavec::normalize(dfull.row(r).transpose(), stats, layout), layout);
  }
  return out;
}

namespace detail {

void log(const CommandOptions& o, const std::string& line) {
  if (o.log) o.log(line);
}

std::string training_hash(const config::RunConfig& config) {
  auto j = json::parse(config::canonical_json(config));
  for (const char* key : {"esmda", "monitors", "noise", "analytics"}) j.erase(key);
  auto& seeds = j["seeds"];
  for (const char* key : {"truth", "noise", "esmda", "cluster"}) seeds.erase(key);
  return config::sha256_hex(j.dump(2));
}

void write_text_file(const fs::path& path, const std::string& text) { write_text(path, text); }
std::string read_text_file(const fs::path& path) { return read_text(path); }

RowMatrix encode_rows(const latent::Parameterizer& model, const Eigen::MatrixXd& columns, std::size_t workers) {
  RowMatrix out(columns.cols(), static_cast<Eigen::Index>(model.latent_dim()));
  parallel_chunks(static_cast<std::size_t>(columns.cols()), kMemberChunk, workers, [&](std::size_t b, std::size_t e) {
    const auto n = static_cast<Eigen::Index>(e - b);
    const Eigen::MatrixXd z = model.encode(columns.middleCols(static_cast<Eigen::Index>(b), n));
    out.middleRows(static_cast<Eigen::Index>(b), n) = z.transpose();
  });
  return out;
}

RowMatrix decode_rows(const latent::Parameterizer& model, const RowMatrix& latents, const datavec::NormStats& stats,
                      const datavec::DataLayout& layout, std::size_t workers) {
  RowMatrix out(latents.rows(), static_cast<Eigen::Index>(layout.full_size()));
  parallel_chunks(static_cast<std::size_t>(latents.rows()), kMemberChunk, workers, [&](std::size_t b, std::size_t e) {
    const auto n = static_cast<Eigen::Index>(e - b);
    const Eigen::MatrixXd x = model.decode(latents.middleRows(static_cast<Eigen::Index>(b), n).transpose());
    for (Eigen::Index c = 0; c < n; ++c) {
      out.row(static_cast<Eigen::Index>(b) + c) =
          datavec::denormalize(datavec::expand(x.col(c), layout), stats, layout).transpose();
    }
  });
  return out;
}

bool checkpoint_current(const fs::path& dir, const std::string& hash, const std::string& norm_hash) noexcept {
  try {
    const auto j = json::parse(detail::read_text_file(dir / "checkpoint.json"));
    if (j.at("training_config_hash") != hash || j.at("norm_stats_sha256") != norm_hash) return false;
    for (const auto& a : j.at("arrays")) {
      if (!io::verify_array(dir / a.get<std::string>())) return false;
    }
    return true;
  } catch (...) {
    return false;
  }
}

}  // namespace detail

GenPriorReport cmd_gen_prior(const config::RunConfig& config, const CommandOptions& options) {
  config.validate();
  const RunPaths paths{config.output_root};
  const auto dims = config.grid.dims();
  GenPriorReport report;
  auto one = [&](const fs::path& dir, std::uint64_t seed) {
    if (!options.force && geomodel_valid(dir, dims)) {
      ++report.skipped;
      return;
    }
    save_geomodel(dir, geostat::generate_geomodel(config.variogram, config.ranges, dims, seed));
    ++report.written;
  };
  for (std::size_t r = 0; r < config.n_realizations; ++r) {
    one(paths.prior_dir(r), config.realization_seed(r));
    if ((r + 1) % 50 == 0) detail::log(options, "gen-prior: " + std::to_string(r + 1) + " realizations");
  }
  one(paths.truth_model_dir(), config.truth_seed());
  const auto truth = load_geomodel(paths.truth_model_dir(), dims);
  json j;
  j["seed"] = config.truth_seed();
  for (std::size_t k = 0; k < 6; ++k) {
    j["scalars"][std::string(geostat::ScalarParams::kNames[k])] = truth.scalars.as_array()[k];
  }
  const auto scalars_path = paths.root / "truth" / "scalars.json";
  const auto text = j.dump(2);
  if (options.force || !fs::exists(scalars_path) || detail::read_text_file(scalars_path) != text) {
    detail::write_text_file(scalars_path, text);
  }
  detail::log(options, "gen-prior: wrote " + std::to_string(report.written) + ", kept " +
                           std::to_string(report.skipped));
  return report;
}

SimulateReport cmd_simulate(const config::RunConfig& config, const CommandOptions& options) {
  config.validate();
  const RunPaths paths{config.output_root};
  const auto scenario = config.scenario();
  scenario.validate();
  const auto dims = config.grid.dims();
  const std::size_t n = config.n_realizations + 1;  // last job is the truth
  for (std::size_t r = 0; r < n; ++r) {
    const auto dir = r < config.n_realizations ? paths.prior_dir(r) : paths.truth_model_dir();
    require(geomodel_valid(dir, dims), "prior model " + dir.string() + " is missing or corrupt; run gen-prior first");
  }
  struct JobResult {
    bool written = false;
    double balance = 0.0;
    std::size_t tensile = 0;
  };
  std::vector<JobResult> results(n);
  std::mutex log_mutex;
  std::atomic<std::size_t> done{0};
  parallel_chunks(n, 1, options.workers, [&](std::size_t r, std::size_t) {
    const bool truth = r == config.n_realizations;
    const auto out_dir = truth ? paths.truth_sim_dir() : paths.sim_dir(r);
    if (!options.force && sim_valid(out_dir, scenario.grid.cell_count(), scenario.report_times.size())) return;
    const auto model = load_geomodel(truth ? paths.truth_model_dir() : paths.prior_dir(r), dims);
    const auto sim = forward::simulate(model, scenario);
    save_sim(out_dir, sim);
    auto& res = results[r];
    res.written = true;
    res.tensile = sim.tensile_cells;
    for (std::size_t t = 0; t < sim.times.size(); ++t) {
      const double inj = sim.injected_volume[t];
      if (inj > 0) res.balance = std::max(res.balance, std::abs(sim.storage_change[t] - inj) / inj);
    }
    const auto count = ++done;
    if (count % 25 == 0) {
      std::lock_guard lock(log_mutex);
      detail::log(options, "simulate: " + std::to_string(count) + " runs");
    }
  });
  SimulateReport report;
  for (const auto& res : results) {
    if (res.written) {
      ++report.written;
      report.max_mass_balance_error = std::max(report.max_mass_balance_error, res.balance);
      report.tensile_cells += res.tensile;
    } else {
      ++report.skipped;
    }
  }
  detail::log(options, "simulate: wrote " + std::to_string(report.written) + ", kept " +
                           std::to_string(report.skipped));
  return report;
}

namespace {

void write_history(const fs::path& path, const latent::TrainHistory& h) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,omega,train_total,train_recon,train_kl,val_total\n";
  for (std::size_t e = 0; e < h.train_total.size(); ++e) {
    out << e << ',' << h.omega[e] << ',' << h.train_total[e] << ',' << h.train_recon[e] << ',' << h.train_kl[e]
        << ',' << h.val_total[e] << '\n';
  }
  detail::write_text_file(path, out.str());
}


}  // namespace

TrainReport cmd_train(const config::RunConfig& config, const CommandOptions& options) {
  config.validate();
  const RunPaths paths{config.output_root};
  const auto layout = config.layout();
  const auto& split = config.split;
  const auto start = std::chrono::steady_clock::now();

  const RowMatrix all = load_dfull_ensemble(config, split.total());
  const RowMatrix train_rows = all.topRows(static_cast<Eigen::Index>(split.train));
  const auto stats = datavec::fit_norm_stats(train_rows, layout);
  const auto norm_text = norm_stats_json(stats);
  const auto norm_path = paths.train_dir() / "norm_stats.json";
  detail::write_text_file(norm_path, norm_text);
  const auto norm_hash = config::sha256_hex(norm_text);
  const auto hash = detail::training_hash(config);

  const Eigen::MatrixXd x_train = to_latent_space_input(train_rows, stats, layout);
  const Eigen::MatrixXd x_val = to_latent_space_input(
      all.middleRows(static_cast<Eigen::Index>(split.train), static_cast<Eigen::Index>(split.validation)), stats,
      layout);
  const RowMatrix test_rows =
      all.middleRows(static_cast<Eigen::Index>(split.train + split.validation), static_cast<Eigen::Index>(split.test));

  TrainReport report;
  report.kind = config.parameterizer.kind;
  const auto ckpt = paths.train_dir() / "checkpoint";
  std::unique_ptr<latent::Parameterizer> model;
  if (!options.force && detail::checkpoint_current(ckpt, hash, norm_hash)) {
    model = load_parameterizer(ckpt);
    report.skipped = true;
    detail::log(options, "train: checkpoint is current, kept");
  } else if (config.parameterizer.kind == "pca") {
    model = std::make_unique<latent::PCAModel>(latent::fit_pca(x_train, config.parameterizer.latent_dim));
  } else {
    const auto cfg = config.train_config();
    latent::EpochCallback cb = [&](std::size_t epoch, const latent::TrainHistory& h) {
      if ((epoch + 1) % 20 == 0) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "train: epoch %zu loss %.4g (recon %.4g, kl %.4g) val %.4g", epoch + 1,
                      h.train_total.back(), h.train_recon.back(), h.train_kl.back(), h.val_total.back());
        detail::log(options, buf);
      }
    };
    try {
      auto result = latent::vae_train(x_train, x_val, config.vae_shape(), cfg, cb);
      report.history = result.history;
      model = std::make_unique<latent::VAEModel>(std::move(result.model));
    } catch (const latent::TrainingDiverged& e) {
      save_parameterizer(paths.train_dir() / "diverged", e.last_good(), hash, norm_hash);
      write_history(paths.train_dir() / "history.csv", e.history());
      throw;
    }
    write_history(paths.train_dir() / "history.csv", report.history);
  }
  if (!report.skipped) save_parameterizer(ckpt, *model, hash, norm_hash);

  // Held-out reconstruction errors.
  const Eigen::MatrixXd x_test = to_latent_space_input(test_rows, stats, layout);
  const Eigen::MatrixXd recon = model->decode(model->encode(x_test));
  std::vector<analytics::FieldErrors> cases;
  for (Eigen::Index r = 0; r < test_rows.rows(); ++r) {
    const auto full = datavec::denormalize(datavec::expand(recon.col(r), layout), stats, layout);
    cases.push_back(analytics::relative_errors(full, test_rows.row(r).transpose(), layout));
  }
  report.heldout = analytics::error_report(cases);

  const Eigen::MatrixXd xi_train = model->encode(x_train);
  report.training_band = latent::latent_covariance_band(xi_train);
  report.training_roundtrip_error = (model->decode(xi_train) - x_train).cwiseAbs().maxCoeff();

  std::ostringstream csv;
  csv.precision(17);
  csv << "case,realization,delta_pressure,delta_strain_zz,delta_sigma_n_eff,delta_tau,value_sigma_n_eff,value_tau\n";
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& e = cases[c];
    csv << c << ',' << split.train + split.validation + c << ',' << e.delta[0] << ',' << e.delta[1] << ','
        << e.delta[2] << ',' << e.delta[3] << ',' << e.stress_value_normalised[0] << ','
        << e.stress_value_normalised[1] << '\n';
  }
  detail::write_text_file(paths.train_dir() / "heldout_errors.csv", csv.str());

  json summary;
  summary["kind"] = report.kind;
  summary["latent_dim"] = model->latent_dim();
  summary["split"] = {{"train", split.train}, {"validation", split.validation}, {"test", split.test}};
  for (int f = 0; f < datavec::kFieldCount; ++f) {
    const auto& b = report.heldout.summary[static_cast<std::size_t>(f)];
    summary["heldout_delta"][std::string(datavec::field_name(static_cast<datavec::FieldKind>(f)))] = {
        {"p10", b.p10}, {"p25", b.p25}, {"median", b.p50}, {"p75", b.p75}, {"p90", b.p90}};
  }
  summary["latent_covariance"] = {{"min_eigenvalue", report.training_band.eigenvalues.minCoeff()},
                                  {"max_eigenvalue", report.training_band.eigenvalues.maxCoeff()},
                                  {"within_band", report.training_band.within},
                                  {"band", {0.3, 3.0}}};
  summary["training_roundtrip_max_abs"] = report.training_roundtrip_error;
  summary["training_config_hash"] = hash;
  detail::write_text_file(paths.train_dir() / "summary.json", summary.dump(2));

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char buf[200];
  std::snprintf(buf, sizeof buf, "train: held-out median delta p %.4f strain %.4f sigma_n' %.4f tau %.4f",
                report.heldout.summary[0].p50, report.heldout.summary[1].p50, report.heldout.summary[2].p50,
                report.heldout.summary[3].p50);
  detail::log(options, buf);
  return report;
}

}  // namespace fdsi::workflow
