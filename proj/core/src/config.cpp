#include "fdsi/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace fdsi::config {
namespace {

using json = nlohmann::json;

template <class T>
T convert(const json& v, const std::string& where);

template <>
double convert<double>(const json& v, const std::string& where) {
  require(v.is_number(), where + " must be a number");
  const double x = v.get<double>();
  require(std::isfinite(x), where + " must be finite");
  return x;
}
template <>
int convert<int>(const json& v, const std::string& where) {
  require(v.is_number_integer(), where + " must be an integer");
  const auto x = v.get<std::int64_t>();
  require(x >= std::numeric_limits<int>::min() && x <= std::numeric_limits<int>::max(), where + " is out of range");
  return static_cast<int>(x);
}
template <>
std::uint64_t convert<std::uint64_t>(const json& v, const std::string& where) {
  require(v.is_number_unsigned(), where + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}
template <>
bool convert<bool>(const json& v, const std::string& where) {
  require(v.is_boolean(), where + " must be true or false");
  return v.get<bool>();
}
template <>
std::string convert<std::string>(const json& v, const std::string& where) {
  require(v.is_string(), where + " must be a string");
  return v.get<std::string>();
}
template <>
std::vector<double> convert<std::vector<double>>(const json& v, const std::string& where) {
  require(v.is_array(), where + " must be an array");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(convert<double>(v[k], where + "[" + std::to_string(k) + "]"));
  return out;
}
template <>
std::vector<int> convert<std::vector<int>>(const json& v, const std::string& where) {
  require(v.is_array(), where + " must be an array");
  std::vector<int> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(convert<int>(v[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

// Object view that remembers which keys were read so leftovers can be rejected.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j_.is_object(), where_ + " must be an object");
  }

  template <class T>
  void opt(const char* key, T& target) {
    seen_.insert(key);
    if (const auto it = j_.find(key); it != j_.end()) target = convert<T>(*it, path(key));
  }
  template <class T>
  [[nodiscard]] T need(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    require(it != j_.end(), path(key) + " is required");
    return convert<T>(*it, path(key));
  }
  [[nodiscard]] const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  [[nodiscard]] const json& need_child(const char* key) {
    const json* c = child(key);
    require(c != nullptr, path(key) + " is required");
    return *c;
  }
  [[nodiscard]] std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      require(seen_.count(item.key()) > 0, "unknown key " + where_ + "." + item.key());
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_interval(Section& s, const char* key, geostat::Interval& target) {
  if (const json* v = s.child(key)) {
    const auto pair = convert<std::vector<double>>(*v, s.path(key));
    require(pair.size() == 2, s.path(key) + " must be [lo, hi]");
    target = {pair[0], pair[1]};
  }
}

void read_grid(const json& j, forward::Grid& g) {
  Section s(j, "grid");
  s.opt("nx", g.nx);
  s.opt("ny", g.ny);
  s.opt("nz", g.nz);
  s.opt("dx", g.dx);
  s.opt("dy", g.dy);
  s.opt("dz", g.dz);
  s.opt("top_depth", g.top_depth);
  s.finish();
}

void read_variogram(const json& j, geostat::VariogramSpec& v) {
  Section s(j, "variogram");
  s.opt("corr_len_x", v.corr_len_x);
  s.opt("corr_len_y", v.corr_len_y);
  s.opt("corr_len_z", v.corr_len_z);
  s.opt("azimuth_deg", v.azimuth_deg);
  s.opt("dip_deg", v.dip_deg);
  s.opt("mean_logk", v.mean_logk);
  s.opt("std_logk", v.std_logk);
  s.opt("mean_poro", v.mean_poro);
  s.opt("std_poro", v.std_poro);
  s.opt("kz_over_kx", v.kz_over_kx);
  s.opt("poro_logk_corr", v.poro_logk_corr);
  s.finish();
}

void read_ranges(const json& j, geostat::PriorRanges& r) {
  Section s(j, "prior_ranges");
  read_interval(s, "young_gpa", r.young_gpa);
  read_interval(s, "poisson", r.poisson);
  read_interval(s, "biot", r.biot);
  read_interval(s, "gamma", r.gamma);
  read_interval(s, "logmult1", r.logmult1);
  read_interval(s, "logmult2", r.logmult2);
  s.finish();
}

void read_fluid(const json& j, forward::FluidProperties& f) {
  Section s(j, "fluid");
  s.opt("total_compressibility", f.total_compressibility);
  s.opt("viscosity_mpas", f.viscosity_mpas);
  s.opt("brine_density", f.brine_density);
  s.finish();
}

void read_initial(const json& j, forward::InitialConditions& c) {
  Section s(j, "initial");
  s.opt("reference_pressure", c.reference_pressure);
  s.opt("reference_depth", c.reference_depth);
  s.opt("bulk_density", c.bulk_density);
  s.finish();
}

void read_stepping(const json& j, forward::TimeStepping& t) {
  Section s(j, "stepping");
  s.opt("initial_dt_years", t.initial_dt_years);
  s.opt("growth", t.growth);
  s.opt("max_dt_years", t.max_dt_years);
  s.finish();
}

std::vector<WellConfig> read_wells(const json& j) {
  require(j.is_array(), "wells must be an array");
  std::vector<WellConfig> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    Section s(j[k], "wells[" + std::to_string(k) + "]");
    WellConfig w;
    w.name = s.need<std::string>("name");
    w.i = s.need<int>("i");
    w.j = s.need<int>("j");
    s.opt("layers", w.layers);
    w.rate_mt_per_year = s.need<double>("rate_mt_per_year");
    s.opt("start_year", w.start_year);
    s.opt("stop_year", w.stop_year);
    s.finish();
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<forward::FaultPlane> read_faults(const json& j) {
  require(j.is_array(), "faults must be an array");
  std::vector<forward::FaultPlane> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    Section s(j[k], "faults[" + std::to_string(k) + "]");
    forward::FaultPlane f;
    f.name = s.need<std::string>("name");
    f.strike_deg = s.need<double>("strike_deg");
    f.dip_deg = s.need<double>("dip_deg");
    f.x = s.need<double>("x");
    f.y = s.need<double>("y");
    f.depth = s.need<double>("depth");
    s.opt("thickness", f.thickness);
    s.opt("friction", f.friction);
    s.finish();
    out.push_back(std::move(f));
  }
  return out;
}

void read_parameterizer(const json& j, ParameterizerConfig& p) {
  Section s(j, "parameterizer");
  s.opt("kind", p.kind);
  s.opt("latent_dim", p.latent_dim);
  s.opt("hidden_frame", p.hidden_frame);
  s.opt("hidden_joint", p.hidden_joint);
  if (const json* t = s.child("training")) {
    Section ts(*t, "parameterizer.training");
    auto& c = p.train;
    ts.opt("epochs", c.epochs);
    ts.opt("batch_size", c.batch_size);
    ts.opt("learning_rate", c.learning_rate);
    ts.opt("lr_decay", c.lr_decay);
    ts.opt("beta1", c.beta1);
    ts.opt("beta2", c.beta2);
    ts.opt("adam_eps", c.adam_eps);
    if (const json* sched = ts.child("omega_schedule")) {
      require(sched->is_array(), "parameterizer.training.omega_schedule must be an array");
      c.omega_schedule.clear();
      for (std::size_t k = 0; k < sched->size(); ++k) {
        Section st((*sched)[k], "parameterizer.training.omega_schedule[" + std::to_string(k) + "]");
        latent::OmegaStage stage;
        stage.begin = st.need<std::size_t>("begin");
        stage.end = st.need<std::size_t>("end");
        stage.omega = st.need<double>("omega");
        st.finish();
        c.omega_schedule.push_back(stage);
      }
    }
    ts.finish();
  }
  s.finish();
}

std::vector<datavec::MonitorColumn> read_columns(const json& j, const std::string& where) {
  require(j.is_array(), where + " must be an array");
  std::vector<datavec::MonitorColumn> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    Section s(j[k], where + "[" + std::to_string(k) + "]");
    datavec::MonitorColumn c;
    c.i = s.need<int>("i");
    c.j = s.need<int>("j");
    s.opt("layers", c.layers);
    s.finish();
    out.push_back(std::move(c));
  }
  return out;
}

void read_monitors(const json& j, MonitorConfig& m) {
  Section s(j, "monitors");
  if (const json* f = s.child("fields")) {
    require(f->is_array() && !f->empty(), "monitors.fields must be a non-empty array");
    m.fields.clear();
    for (const auto& name : *f) {
      require(name.is_string(), "monitors.fields entries must be field names");
      m.fields.push_back(datavec::field_from_name(name.get<std::string>()));
    }
  }
  if (const json* w = s.child("wells")) m.wells = read_columns(*w, "monitors.wells");
  if (const json* p = s.child("placement")) {
    Section ps(*p, "monitors.placement");
    PlacementRequest req;
    ps.opt("n_wells", req.n_wells);
    ps.opt("stride", req.stride);
    ps.opt("target_time", req.target_time);
    ps.finish();
    m.placement = req;
  }
  s.finish();
}

json interval_json(const geostat::Interval& i) { return json::array({i.lo, i.hi}); }

json columns_json(const std::vector<datavec::MonitorColumn>& cols) {
  json out = json::array();
  for (const auto& c : cols) out.push_back({{"i", c.i}, {"j", c.j}, {"layers", c.layers}});
  return out;
}

json to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  const auto& g = c.grid;
  j["grid"] = {{"nx", g.nx}, {"ny", g.ny}, {"nz", g.nz}, {"dx", g.dx}, {"dy", g.dy}, {"dz", g.dz},
               {"top_depth", g.top_depth}};
  const auto& v = c.variogram;
  j["variogram"] = {{"corr_len_x", v.corr_len_x},   {"corr_len_y", v.corr_len_y}, {"corr_len_z", v.corr_len_z},
                    {"azimuth_deg", v.azimuth_deg}, {"dip_deg", v.dip_deg},       {"mean_logk", v.mean_logk},
                    {"std_logk", v.std_logk},       {"mean_poro", v.mean_poro},   {"std_poro", v.std_poro},
                    {"kz_over_kx", v.kz_over_kx},   {"poro_logk_corr", v.poro_logk_corr}};
  const auto& r = c.ranges;
  j["prior_ranges"] = {{"young_gpa", interval_json(r.young_gpa)}, {"poisson", interval_json(r.poisson)},
                       {"biot", interval_json(r.biot)},           {"gamma", interval_json(r.gamma)},
                       {"logmult1", interval_json(r.logmult1)},   {"logmult2", interval_json(r.logmult2)}};
  j["fluid"] = {{"total_compressibility", c.fluid.total_compressibility},
                {"viscosity_mpas", c.fluid.viscosity_mpas},
                {"brine_density", c.fluid.brine_density}};
  j["initial"] = {{"reference_pressure", c.initial.reference_pressure},
                  {"reference_depth", c.initial.reference_depth},
                  {"bulk_density", c.initial.bulk_density}};
  j["stepping"] = {{"initial_dt_years", c.stepping.initial_dt_years},
                   {"growth", c.stepping.growth},
                   {"max_dt_years", c.stepping.max_dt_years}};
  j["wells"] = json::array();
  for (const auto& w : c.wells) {
    j["wells"].push_back({{"name", w.name},
                          {"i", w.i},
                          {"j", w.j},
                          {"layers", w.layers},
                          {"rate_mt_per_year", w.rate_mt_per_year},
                          {"start_year", w.start_year},
                          {"stop_year", w.stop_year}});
  }
  j["faults"] = json::array();
  for (const auto& f : c.faults) {
    j["faults"].push_back({{"name", f.name},
                           {"strike_deg", f.strike_deg},
                           {"dip_deg", f.dip_deg},
                           {"x", f.x},
                           {"y", f.y},
                           {"depth", f.depth},
                           {"thickness", f.thickness},
                           {"friction", f.friction}});
  }
  j["report_times"] = c.report_times;
  j["dsi"] = {{"hm_times", c.hm_times}, {"pred_times", c.pred_times}};
  j["ensemble"] = {{"n_realizations", c.n_realizations},
                   {"split", {{"train", c.split.train}, {"validation", c.split.validation}, {"test", c.split.test}}}};
  j["seeds"] = {{"prior", c.seeds.prior}, {"truth", c.seeds.truth},     {"noise", c.seeds.noise},
                {"train", c.seeds.train}, {"esmda", c.seeds.esmda},     {"cluster", c.seeds.cluster}};
  const auto& p = c.parameterizer;
  json sched = json::array();
  for (const auto& s : p.train.omega_schedule) sched.push_back({{"begin", s.begin}, {"end", s.end}, {"omega", s.omega}});
  j["parameterizer"] = {{"kind", p.kind},
                        {"latent_dim", p.latent_dim},
                        {"hidden_frame", p.hidden_frame},
                        {"hidden_joint", p.hidden_joint},
                        {"training",
                         {{"epochs", p.train.epochs},
                          {"batch_size", p.train.batch_size},
                          {"learning_rate", p.train.learning_rate},
                          {"lr_decay", p.train.lr_decay},
                          {"beta1", p.train.beta1},
                          {"beta2", p.train.beta2},
                          {"adam_eps", p.train.adam_eps},
                          {"omega_schedule", sched}}}};
  j["esmda"] = {{"ensemble_size", c.esmda.ensemble_size},
                {"alphas", c.esmda.alphas},
                {"normalize_inflation", c.esmda.normalize_inflation},
                {"joint_scalars", c.joint_scalars}};
  json fields = json::array();
  for (auto f : c.monitors.fields) fields.push_back(std::string(datavec::field_name(f)));
  j["monitors"] = {{"fields", fields}, {"wells", columns_json(c.monitors.wells)}};
  if (c.monitors.placement) {
    const auto& pl = *c.monitors.placement;
    j["monitors"]["placement"] = {{"n_wells", pl.n_wells}, {"stride", pl.stride}, {"target_time", pl.target_time}};
  }
  j["noise"] = {{"pressure_std", c.noise.pressure_std},
                {"strain_fraction", c.noise.strain_fraction},
                {"strain_floor", c.noise.strain_floor}};
  j["analytics"] = {{"representatives", c.analytics.representatives},
                    {"histogram_bins", c.analytics.histogram_bins}};
  return j;
}

bool contains_time(const std::vector<double>& times, double t) {
  return std::any_of(times.begin(), times.end(), [&](double x) { return std::abs(x - t) <= 1e-9; });
}

}  // namespace

void RunConfig::validate() const {
  require(schema_version == kSchemaVersion, "unsupported schema_version " + std::to_string(schema_version));
  require(!output_root.empty(), "output_root is required");
  variogram.validate();
  ranges.validate();
  const auto sc = scenario();
  sc.validate();
  require(!wells.empty(), "at least one injection well is required");
  require(!hm_times.empty(), "at least one historical time is required");
  for (std::size_t t = 1; t < hm_times.size(); ++t) require(hm_times[t] > hm_times[t - 1], "hm_times must increase");
  for (std::size_t t = 1; t < pred_times.size(); ++t) {
    require(pred_times[t] > pred_times[t - 1], "pred_times must increase");
  }
  require(pred_times.empty() || pred_times.front() > hm_times.back(), "prediction times must follow historical times");
  for (double t : hm_times) require(contains_time(report_times, t), "hm time is not a report time");
  for (double t : pred_times) require(contains_time(report_times, t), "prediction time is not a report time");

  require(n_realizations >= 1, "n_realizations must be positive");
  require(split.total() <= n_realizations, "train/validation/test split exceeds n_realizations");
  require(split.train >= 2, "the training split needs at least two realizations");
  require(seeds.truth != seeds.prior, "the truth seed must differ from the prior seed");

  require(parameterizer.kind == "pca" || parameterizer.kind == "vae", "parameterizer.kind must be pca or vae");
  require(parameterizer.latent_dim >= 1, "latent_dim must be positive");
  if (parameterizer.kind == "pca") {
    require(parameterizer.latent_dim <= split.train - 1, "pca latent_dim must not exceed the training size minus one");
  } else {
    vae_shape().validate();
    train_config().validate();
  }
  esmda_config().validate();
  require(esmda.ensemble_size <= n_realizations, "ensemble_size exceeds n_realizations");

  const auto dims = grid.dims();
  for (const auto& c : monitors.wells) {
    require(c.i >= 0 && c.i < dims.nx && c.j >= 0 && c.j < dims.ny, "monitor well lies outside the grid");
    for (int k : c.layers) require(k >= 0 && k < dims.nz, "monitor layer outside the grid");
  }
  if (monitors.placement) {
    require(monitors.wells.empty(), "give either monitors.wells or monitors.placement, not both");
    require(monitors.placement->stride >= 1, "placement stride must be positive");
    require(contains_time(pred_times, monitors.placement->target_time), "placement target_time is not a prediction time");
    require(!faults.empty(), "placement targets fault slip tendency and needs a fault");
  }
  require(noise.pressure_std > 0 && noise.strain_fraction > 0 && noise.strain_floor > 0,
          "noise parameters must be positive");
  require(analytics.representatives >= 1 && analytics.representatives <= esmda.ensemble_size,
          "representatives must lie in [1, ensemble_size]");
  require(analytics.histogram_bins >= 1, "histogram_bins must be positive");
}

forward::Scenario RunConfig::scenario() const {
  forward::Scenario sc;
  sc.grid = grid;
  for (const auto& w : wells) {
    forward::WellSpec spec;
    spec.name = w.name;
    spec.i = w.i;
    spec.j = w.j;
    spec.layers = w.layers;
    spec.rate_m3_per_day = forward::mass_rate_to_volume_rate(w.rate_mt_per_year);
    spec.start_year = w.start_year;
    spec.stop_year = w.stop_year;
    sc.wells.push_back(std::move(spec));
  }
  for (const auto& f : faults) sc.faults.push_back(forward::make_fault_spec(grid, f));
  sc.fluid = fluid;
  sc.initial = initial;
  sc.stepping = stepping;
  sc.kz_over_kx = variogram.kz_over_kx;
  sc.report_times = report_times;
  return sc;
}

datavec::DataLayout RunConfig::layout() const {
  return datavec::DataLayout(grid.cell_count(), hm_times, pred_times, scenario().fault_mask());
}

latent::VaeShape RunConfig::vae_shape() const {
  const auto lay = layout();
  return latent::VaeShape{lay.active_frame_size(), lay.n_times(), parameterizer.hidden_frame,
                          parameterizer.hidden_joint, parameterizer.latent_dim};
}

latent::TrainConfig RunConfig::train_config() const {
  auto c = parameterizer.train;
  c.seed = seeds.train;
  return c;
}

esmda::EsmdaConfig RunConfig::esmda_config() const {
  auto c = esmda;
  c.seed = seeds.esmda;
  return c;
}

std::uint64_t RunConfig::realization_seed(std::size_t r) const noexcept { return derive_seed(seeds.prior, r); }
std::uint64_t RunConfig::truth_seed() const noexcept { return derive_seed(seeds.truth, 0); }

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section s(j, "config");
  c.schema_version = s.need<int>("schema_version");
  require(c.schema_version == kSchemaVersion, "unsupported schema_version " + std::to_string(c.schema_version));
  c.output_root_text = s.need<std::string>("output_root");
  require(!c.output_root_text.empty(), "output_root must not be empty");
  const std::filesystem::path root(c.output_root_text);
  c.output_root = (root.is_absolute() ? root : base_dir / root).lexically_normal();

  if (const json* v = s.child("grid")) read_grid(*v, c.grid);
  if (const json* v = s.child("variogram")) read_variogram(*v, c.variogram);
  if (const json* v = s.child("prior_ranges")) read_ranges(*v, c.ranges);
  if (const json* v = s.child("fluid")) read_fluid(*v, c.fluid);
  if (const json* v = s.child("initial")) read_initial(*v, c.initial);
  if (const json* v = s.child("stepping")) read_stepping(*v, c.stepping);
  c.wells = read_wells(s.need_child("wells"));
  c.faults = read_faults(s.need_child("faults"));
  s.opt("report_times", c.report_times);
  if (const json* v = s.child("dsi")) {
    Section ds(*v, "dsi");
    ds.opt("hm_times", c.hm_times);
    ds.opt("pred_times", c.pred_times);
    ds.finish();
  }
  if (const json* v = s.child("ensemble")) {
    Section es(*v, "ensemble");
    es.opt("n_realizations", c.n_realizations);
    if (const json* sp = es.child("split")) {
      Section ss(*sp, "ensemble.split");
      ss.opt("train", c.split.train);
      ss.opt("validation", c.split.validation);
      ss.opt("test", c.split.test);
      ss.finish();
    }
    es.finish();
  }
  {
    Section ss(s.need_child("seeds"), "seeds");
    c.seeds.prior = ss.need<std::uint64_t>("prior");
    c.seeds.truth = ss.need<std::uint64_t>("truth");
    c.seeds.noise = ss.need<std::uint64_t>("noise");
    c.seeds.train = ss.need<std::uint64_t>("train");
    c.seeds.esmda = ss.need<std::uint64_t>("esmda");
    c.seeds.cluster = ss.need<std::uint64_t>("cluster");
    ss.finish();
  }
  if (const json* v = s.child("parameterizer")) read_parameterizer(*v, c.parameterizer);
  if (const json* v = s.child("esmda")) {
    Section es(*v, "esmda");
    es.opt("ensemble_size", c.esmda.ensemble_size);
    es.opt("alphas", c.esmda.alphas);
    es.opt("normalize_inflation", c.esmda.normalize_inflation);
    es.opt("joint_scalars", c.joint_scalars);
    es.finish();
  }
  if (const json* v = s.child("monitors")) read_monitors(*v, c.monitors);
  if (const json* v = s.child("noise")) {
    Section ns(*v, "noise");
    ns.opt("pressure_std", c.noise.pressure_std);
    ns.opt("strain_fraction", c.noise.strain_fraction);
    ns.opt("strain_floor", c.noise.strain_floor);
    ns.finish();
  }
  if (const json* v = s.child("analytics")) {
    Section as(*v, "analytics");
    as.opt("representatives", c.analytics.representatives);
    as.opt("histogram_bins", c.analytics.histogram_bins);
    as.finish();
  }
  s.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_config(ss.str(), base);
}

std::string canonical_json(const RunConfig& config) { return to_json(config).dump(2); }

std::string config_hash(const RunConfig& config) { return sha256_hex(canonical_json(config)); }

void apply_seed_override(RunConfig& config, std::uint64_t seed) {
  auto& s = config.seeds;
  std::array<std::uint64_t*, 6> slots{&s.prior, &s.truth, &s.noise, &s.train, &s.esmda, &s.cluster};
  for (std::size_t k = 0; k < slots.size(); ++k) *slots[k] = derive_seed(seed, k);
}

namespace {

struct MdCtx {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  ~MdCtx() { EVP_MD_CTX_free(ctx); }
};

std::string hex(const unsigned char* digest, unsigned int n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < n; ++i) {
    out.push_back(kDigits[digest[i] >> 4]);
    out.push_back(kDigits[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &n, EVP_sha256(), nullptr) != 1) {
    throw RuntimeFailure("sha256 failed");
  }
  return hex(digest, n);
}

std::string sha256_hex(const std::string& text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  MdCtx md;
  if (md.ctx == nullptr || EVP_DigestInit_ex(md.ctx, EVP_sha256(), nullptr) != 1) throw RuntimeFailure("sha256 failed");
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    if (got > 0 && EVP_DigestUpdate(md.ctx, buf.data(), static_cast<std::size_t>(got)) != 1) {
      throw RuntimeFailure("sha256 failed");
    }
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  if (EVP_DigestFinal_ex(md.ctx, digest, &n) != 1) throw RuntimeFailure("sha256 failed");
  return hex(digest, n);
}

}  // namespace fdsi::config
