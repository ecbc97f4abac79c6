#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fdsi/array_io.hpp"
#include "fdsi/esmda.hpp"
#include "fdsi/workflow.hpp"
#include "workflow_detail.hpp"

namespace fdsi::workflow {
namespace {

using json = nlohmann::json;

std::size_t time_slot(const datavec::DataLayout& layout, double t) {
  const auto times = layout.times();
  for (std::size_t s = 0; s < times.size(); ++s) {
    if (std::abs(times[s] - t) <= 1e-9) return s;
  }
  throw ValidationError("time " + std::to_string(t) + " is not in the data layout");
}

std::vector<double> column(const RowMatrix& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m(r, c);
  return out;
}

RowMatrix gather(const RowMatrix& full, const datavec::SelectionIndex& sel) {
  RowMatrix out(full.rows(), static_cast<Eigen::Index>(sel.size()));
  for (std::size_t i = 0; i < sel.size(); ++i) {
    out.col(static_cast<Eigen::Index>(i)) = full.col(static_cast<Eigen::Index>(sel.entries()[i].flat));
  }
  return out;
}

// Year-t average slip tendency of every fault, one row per member.
RowMatrix fault_fst(const RowMatrix& full, const datavec::DataLayout& layout,
                    const std::vector<faultgeom::FaultSpec>& faults, std::size_t slot) {
  RowMatrix out(full.rows(), static_cast<Eigen::Index>(faults.size()));
  for (Eigen::Index r = 0; r < full.rows(); ++r) {
    const Eigen::VectorXd d = full.row(r).transpose();
    for (std::size_t f = 0; f < faults.size(); ++f) {
      out(r, static_cast<Eigen::Index>(f)) =
          analytics::average_fst(d, layout, faults[f].cells, slot, faults[f].friction_coeff).value;
    }
  }
  return out;
}

json plan_json(const monitors::MonitorPlan& plan, std::size_t n_candidates, bool placed) {
  json j;
  j["format"] = "fdsi.monitor-plan";
  j["placed"] = placed;
  j["candidates"] = n_candidates;
  j["wells"] = json::array();
  for (const auto& w : plan.wells) j["wells"].push_back({{"i", w.i}, {"j", w.j}, {"layers", w.layers}});
  j["residual_variance"] = plan.residual_variance;
  return j;
}

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Bundle {
  fs::path dir;
  std::map<std::string, std::string> hashes;  // relative path -> sha256

  void text(const std::string& name, const std::string& content) {
    detail::write_text_file(dir / name, content);
    hashes[name] = config::sha256_hex(content);
  }
  void matrix(const std::string& name, const RowMatrix& m) {
    io::write_matrix(dir / name, m);
    hashes[name] = config::sha256_file(dir / name);
  }
};

}  // namespace

DsiReport cmd_run_dsi(const config::RunConfig& config, const CommandOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const RunPaths paths{config.output_root};
  const auto layout = config.layout();
  const auto scenario = config.scenario();
  const auto dims = config.grid.dims();
  const auto ne = config.esmda.ensemble_size;
  const auto workers = options.workers;

  const auto ckpt_dir = paths.train_dir() / "checkpoint";
  const auto norm_path = paths.train_dir() / "norm_stats.json";
  require(fs::exists(ckpt_dir / "checkpoint.json") && fs::exists(norm_path), "no trained parameterizer; run train first");
  const auto norm_text = detail::read_text_file(norm_path);
  if (!detail::checkpoint_current(ckpt_dir, detail::training_hash(config), config::sha256_hex(norm_text))) {
    throw ValidationError("checkpoint is stale or damaged; run train");
  }
  const auto stats = norm_stats_from_json(norm_text);
  const auto model = load_parameterizer(ckpt_dir);
  require(model->data_dim() == layout.active_indices().size(), "checkpoint does not match the data layout");
  require(fs::exists(paths.truth_sim_dir() / "pressure.fdsi"), "truth simulation is missing; run simulate first");

  DsiReport report;
  detail::log(options, "run-dsi: encoding " + std::to_string(ne) + " prior members");
  const RowMatrix prior_full = load_dfull_ensemble(config, ne);
  const RowMatrix prior_latents = detail::encode_rows(*model, to_latent_space_input(prior_full, stats, layout), workers);
  const Eigen::VectorXd d_true_full = datavec::assemble_dfull(load_sim(paths.truth_sim_dir()), layout);

  const std::size_t fst_slot = time_slot(layout, config.pred_times.empty() ? config.hm_times.back()
                                                                           : config.pred_times.back());
  // Monitoring plan.
  std::size_t n_candidates = 0;
  if (config.monitors.placement) {
    const auto& req = *config.monitors.placement;
    std::vector<std::pair<int, int>> injectors;
    for (const auto& w : config.wells) injectors.emplace_back(w.i, w.j);
    const auto columns = monitors::strided_columns(dims, req.stride, injectors);
    const auto candidates =
        monitors::build_candidates(prior_full, layout, dims, columns, config.monitors.fields, config.noise);
    n_candidates = candidates.size();
    const RowMatrix target = fault_fst(prior_full, layout, scenario.faults, time_slot(layout, req.target_time));
    if (!target.allFinite()) throw RuntimeFailure("prior slip tendency is undefined for some member; cannot place monitors");
    report.plan = monitors::place_monitors(target, candidates, req.n_wells);
  } else {
    report.plan.wells = config.monitors.wells;
  }
  const auto sel = datavec::build_selection(layout, dims, report.plan.wells, config.monitors.fields);
  report.n_obs = sel.size();

  // Observations: noise level from the prior ensemble at the monitored strain entries.
  std::vector<double> monitored_strains;
  for (const auto& e : sel.entries()) {
    if (e.field != datavec::FieldKind::strain_zz) continue;
    for (Eigen::Index r = 0; r < prior_full.rows(); ++r) monitored_strains.push_back(prior_full(r, static_cast<Eigen::Index>(e.flat)));
  }
  const auto cd = datavec::build_noise_cov(sel, monitored_strains, config.noise);
  const auto obs = datavec::make_observations(d_true_full, sel, cd.variances, config.seeds.noise, "truth");

  std::optional<esmda::JointScalars> joint;
  RowMatrix prior_scalars;
  if (config.joint_scalars) {
    prior_scalars.resize(static_cast<Eigen::Index>(ne), 6);
    for (std::size_t r = 0; r < ne; ++r) {
      const auto m = load_geomodel(paths.prior_dir(r), dims);
      const auto s = m.scalars.as_array();
      for (std::size_t k = 0; k < 6; ++k) prior_scalars(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = s[k];
    }
    const auto support = config.ranges.ordered();
    joint = esmda::JointScalars{prior_scalars, std::vector<geostat::Interval>(support.begin(), support.end())};
  }

  // Predicted observations in fixed member chunks so any worker count gives the same bits.
  const esmda::ForwardFn forward = [&](const RowMatrix& lat) {
    RowMatrix out(lat.rows(), static_cast<Eigen::Index>(sel.size()));
    parallel_chunks(static_cast<std::size_t>(lat.rows()), detail::kMemberChunk, workers, [&](std::size_t b, std::size_t e) {
      const auto n = static_cast<Eigen::Index>(e - b);
      out.middleRows(static_cast<Eigen::Index>(b), n) =
          esmda::predicted_obs(lat.middleRows(static_cast<Eigen::Index>(b), n), *model, sel, stats, layout);
    });
    return out;
  };
  detail::log(options, "run-dsi: " + std::to_string(sel.size()) + " observations, " +
                           std::to_string(config.esmda.alphas.size()) + " assimilations");
  const auto result = esmda::run_esmda(prior_latents, forward, obs.d_obs, obs.cd_diag, config.esmda_config(), joint);
  report.alphas = result.alphas;
  const RowMatrix post_full = detail::decode_rows(*model, result.latents, stats, layout, workers);

  Bundle out{paths.dsi_dir(), {}};
  fs::create_directories(out.dir);
  out.text("monitor_plan.json", plan_json(report.plan, n_candidates, config.monitors.placement.has_value()).dump(2));
  out.text("observations.json", obs.to_json_text());
  out.matrix("prior_latents.fdsi", prior_latents);
  out.matrix("posterior_latents.fdsi", result.latents);
  out.matrix("prior_pred.fdsi", result.prior_pred);
  out.matrix("posterior_pred.fdsi", result.posterior_pred);
  if (joint) {
    out.matrix("prior_scalars.fdsi", prior_scalars);
    out.matrix("posterior_scalars.fdsi", result.scalars);
  }
  out.matrix("posterior_dpred.fdsi",
             post_full.rightCols(static_cast<Eigen::Index>(layout.pred_size())));

  // Monitored bands: prior from the simulated ensemble, posterior from the update.
  const RowMatrix prior_obs = gather(prior_full, sel);
  const auto prior_band = analytics::percentile_band(prior_obs);
  const auto post_band = analytics::percentile_band(result.posterior_pred);
  std::ostringstream bands;
  bands << "entry,well,i,j,layer,time,field,truth,observed,prior_p10,prior_p50,prior_p90,posterior_p10,"
           "posterior_p50,posterior_p90\n";
  std::map<int, FieldBand> per_field;
  std::size_t inside_total = 0;
  for (std::size_t k = 0; k < sel.size(); ++k) {
    const auto& e = sel.entries()[k];
    const auto kk = static_cast<Eigen::Index>(k);
    const auto& w = report.plan.wells[static_cast<std::size_t>(e.well)];
    const int layer = static_cast<int>(e.cell / (static_cast<std::size_t>(dims.nx) * static_cast<std::size_t>(dims.ny)));
    const double truth = obs.d_true[kk];
    const bool inside = truth >= post_band.p10[kk] && truth <= post_band.p90[kk];
    auto& fb = per_field[static_cast<int>(e.field)];
    fb.field = e.field;
    ++fb.entries;
    fb.prior_width += prior_band.p90[kk] - prior_band.p10[kk];
    fb.posterior_width += post_band.p90[kk] - post_band.p10[kk];
    fb.coverage += inside ? 1.0 : 0.0;
    inside_total += inside ? 1 : 0;
    bands << k << ',' << e.well << ',' << w.i << ',' << w.j << ',' << layer << ','
          << csv_number(layout.times()[e.time_slot]) << ',' << datavec::field_name(e.field) << ','
          << csv_number(truth) << ',' << csv_number(obs.d_obs[kk]) << ',' << csv_number(prior_band.p10[kk]) << ','
          << csv_number(prior_band.p50[kk]) << ',' << csv_number(prior_band.p90[kk]) << ','
          << csv_number(post_band.p10[kk]) << ',' << csv_number(post_band.p50[kk]) << ','
          << csv_number(post_band.p90[kk]) << '\n';
  }
  for (auto& [f, fb] : per_field) {
    const auto n = static_cast<double>(fb.entries);
    fb.prior_width /= n;
    fb.posterior_width /= n;
    fb.coverage /= n;
    fb.ratio = fb.posterior_width > 0 ? fb.prior_width / fb.posterior_width : std::numeric_limits<double>::infinity();
    report.bands.push_back(fb);
  }
  report.truth_coverage = sel.empty() ? 0.0 : static_cast<double>(inside_total) / static_cast<double>(sel.size());

  Bundle bundle{paths.analytics_dir(), {}};
  fs::create_directories(bundle.dir);
  bundle.text("bands.csv", bands.str());

  // Average slip tendency per fault at the last prediction time.
  const RowMatrix prior_fst = fault_fst(prior_full, layout, scenario.faults, fst_slot);
  const RowMatrix post_fst = fault_fst(post_full, layout, scenario.faults, fst_slot);
  const RowMatrix truth_fst = fault_fst(RowMatrix(d_true_full.transpose()), layout, scenario.faults, fst_slot);
  json fst_json = json::array();
  for (std::size_t f = 0; f < scenario.faults.size(); ++f) {
    const auto fc = static_cast<Eigen::Index>(f);
    const auto pr = column(prior_fst, fc);
    const auto po = column(post_fst, fc);
    FaultFstReport fr{scenario.faults[f].name,
                      analytics::fst_histograms(pr, po, truth_fst(0, fc), config.analytics.histogram_bins,
                                                scenario.faults[f].friction_coeff)};
    const auto& h = fr.histogram;
    std::ostringstream csv;
    csv << "bin_lo,bin_hi,prior_count,posterior_count\n";
    for (std::size_t b = 0; b < h.prior.counts.size(); ++b) {
      csv << csv_number(h.prior.edges[b]) << ',' << csv_number(h.prior.edges[b + 1]) << ',' << h.prior.counts[b]
          << ',' << h.posterior.counts[b] << '\n';
    }
    bundle.text("fst_" + fr.name + ".csv", csv.str());
    fst_json.push_back({{"fault", fr.name},
                        {"time", layout.times()[fst_slot]},
                        {"truth", h.truth},
                        {"truth_slip", h.truth > h.threshold},
                        {"threshold", h.threshold},
                        {"prior_iqr", h.prior_iqr},
                        {"posterior_iqr", h.posterior_iqr},
                        {"prior_slip_fraction", h.prior_slip_fraction},
                        {"posterior_slip_fraction", h.posterior_slip_fraction},
                        {"prior_excluded", h.prior_excluded},
                        {"posterior_excluded", h.posterior_excluded}});
    report.fst.push_back(std::move(fr));
  }
  bundle.text("fst_report.json", fst_json.dump(2));

  // Joint scalar posteriors.
  json scalars_json = json::array();
  if (joint) {
    const auto support = config.ranges.ordered();
    std::ostringstream csv;
    csv << "scalar,bin_lo,bin_hi,prior_count,posterior_count\n";
    for (std::size_t k = 0; k < 6; ++k) {
      const auto kc = static_cast<Eigen::Index>(k);
      const auto pr = column(prior_scalars, kc);
      const auto po = column(result.scalars, kc);
      ScalarReport sr;
      sr.name = std::string(geostat::ScalarParams::kNames[k]);
      sr.prior_iqr = analytics::interquartile_range(pr);
      sr.posterior_iqr = analytics::interquartile_range(po);
      sr.reduction = sr.prior_iqr > 0 ? 1.0 - sr.posterior_iqr / sr.prior_iqr : 0.0;
      sr.inside_support = std::all_of(po.begin(), po.end(), [&](double v) { return support[k].contains(v); });
      const auto hp = analytics::histogram(pr, support[k].lo, support[k].hi, config.analytics.histogram_bins);
      const auto hq = analytics::histogram(po, support[k].lo, support[k].hi, config.analytics.histogram_bins);
      for (std::size_t b = 0; b < hp.counts.size(); ++b) {
        csv << sr.name << ',' << csv_number(hp.edges[b]) << ',' << csv_number(hp.edges[b + 1]) << ','
            << hp.counts[b] << ',' << hq.counts[b] << '\n';
      }
      scalars_json.push_back({{"scalar", sr.name},
                              {"support", {support[k].lo, support[k].hi}},
                              {"prior_iqr", sr.prior_iqr},
                              {"posterior_iqr", sr.posterior_iqr},
                              {"iqr_reduction", sr.reduction},
                              {"posterior_inside_support", sr.inside_support},
                              {"posterior_median", analytics::quantile(po, 0.5)}});
      report.scalars.push_back(sr);
    }
    bundle.text("scalars.csv", csv.str());
  }

  // Representative posterior members, clustered on normalised fields.
  RowMatrix points(post_full.rows(), static_cast<Eigen::Index>(layout.active_indices().size()));
  for (Eigen::Index r = 0; r < post_full.rows(); ++r) {
    points.row(r) = datavec::compact(datavec::normalize(post_full.row(r).transpose(), stats, layout), layout).transpose();
  }
  const auto reps = analytics::k_representatives(points, config.analytics.representatives, config.seeds.cluster);
  report.representatives = reps.medoids;
  bundle.text("representatives.json",
              json{{"members", reps.medoids}, {"labels", reps.labels}, {"attempts", reps.attempts}}.dump(2));

  // Pressure maps at the last time: truth, posterior P50, representatives.
  const auto n_cells = layout.n_cells();
  RowMatrix maps(static_cast<Eigen::Index>(2 + reps.medoids.size()), static_cast<Eigen::Index>(n_cells));
  std::vector<double> member_values(static_cast<std::size_t>(post_full.rows()));
  for (std::size_t c = 0; c < n_cells; ++c) {
    const auto idx = static_cast<Eigen::Index>(layout.index(datavec::FieldKind::pressure, c, fst_slot));
    maps(0, static_cast<Eigen::Index>(c)) = d_true_full[idx];
    for (Eigen::Index r = 0; r < post_full.rows(); ++r) member_values[static_cast<std::size_t>(r)] = post_full(r, idx);
    maps(1, static_cast<Eigen::Index>(c)) = analytics::quantile(member_values, 0.5);
    for (std::size_t m = 0; m < reps.medoids.size(); ++m) {
      maps(static_cast<Eigen::Index>(2 + m), static_cast<Eigen::Index>(c)) =
          post_full(static_cast<Eigen::Index>(reps.medoids[m]), idx);
    }
  }
  bundle.matrix("pressure_maps.fdsi", maps);

  json summary;
  summary["format"] = "fdsi.dsi-summary";
  summary["ensemble_size"] = ne;
  summary["observations"] = sel.size();
  summary["alphas"] = result.alphas;
  summary["strain_noise_std"] = cd.strain_std;
  summary["strain_noise_floor_applied"] = cd.strain_floor_applied;
  summary["map_time"] = layout.times()[fst_slot];
  summary["grid"] = {{"nx", dims.nx}, {"ny", dims.ny}, {"nz", dims.nz}};
  summary["truth_coverage"] = report.truth_coverage;
  summary["bands"] = json::array();
  for (const auto& b : report.bands) {
    summary["bands"].push_back({{"field", std::string(datavec::field_name(b.field))},
                                {"entries", b.entries},
                                {"prior_mean_width", b.prior_width},
                                {"posterior_mean_width", b.posterior_width},
                                {"narrowing", b.ratio},
                                {"truth_coverage", b.coverage}});
  }
  summary["fst"] = fst_json;
  summary["scalars"] = scalars_json;
  summary["representatives"] = reps.medoids;
  bundle.text("summary.json", summary.dump(2));

  // Manifest: configuration, seeds and hashes of every input and output.
  json manifest;
  manifest["format"] = "fdsi.run-manifest";
  manifest["config_sha256"] = config::config_hash(config);
  manifest["training_config_sha256"] = detail::training_hash(config);
  manifest["config"] = json::parse(config::canonical_json(config));
  json seeds;
  seeds["prior_base"] = config.seeds.prior;
  seeds["prior_rule"] = "derive_seed(prior_base, realization)";
  seeds["truth"] = config.truth_seed();
  seeds["observation_noise"] = config.seeds.noise;
  seeds["training"] = config.seeds.train;
  seeds["cluster"] = config.seeds.cluster;
  seeds["esmda_base"] = config.seeds.esmda;
  seeds["esmda_iterations"] = json::array();
  for (std::size_t k = 0; k < result.alphas.size(); ++k) seeds["esmda_iterations"].push_back(derive_seed(config.seeds.esmda, k));
  manifest["seeds"] = seeds;
  manifest["alphas"] = result.alphas;
  json inputs;
  const auto rel = [&](const fs::path& p) { return fs::relative(p, paths.root).generic_string(); };
  for (const auto& entry : fs::directory_iterator(ckpt_dir)) inputs[rel(entry.path())] = config::sha256_file(entry.path());
  inputs[rel(norm_path)] = config::sha256_file(norm_path);
  for (const auto& entry : fs::directory_iterator(paths.truth_sim_dir())) {
    inputs[rel(entry.path())] = config::sha256_file(entry.path());
  }
  for (std::size_t r = 0; r < ne; ++r) {
    for (const auto& entry : fs::directory_iterator(paths.sim_dir(r))) inputs[rel(entry.path())] = config::sha256_file(entry.path());
    const auto scalars = paths.prior_dir(r) / "scalars.fdsi";
    inputs[rel(scalars)] = config::sha256_file(scalars);
  }
  manifest["inputs"] = inputs;
  json outputs;
  for (const auto& [name, hash] : out.hashes) outputs["dsi/" + name] = hash;
  for (const auto& [name, hash] : bundle.hashes) outputs["dsi/analytics/" + name] = hash;
  manifest["outputs"] = outputs;
  detail::write_text_file(paths.dsi_dir() / "manifest.json", manifest.dump(2));

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& b : report.bands) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "run-dsi: %s band narrowed %.2fx, truth coverage %.3f",
                  std::string(datavec::field_name(b.field)).c_str(), b.ratio, b.coverage);
    detail::log(options, buf);
  }
  return report;
}

}  // namespace fdsi::workflow
