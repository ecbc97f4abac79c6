#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fdsi/array_io.hpp"
#include "fdsi/workflow.hpp"
#include "workflow_detail.hpp"

namespace fdsi::workflow {
namespace {

using json = nlohmann::json;

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    require(it != header.end(), "csv column " + name + " is missing");
    return static_cast<std::size_t>(it - header.begin());
  }
  [[nodiscard]] double num(std::size_t r, const std::string& name) const { return std::stod(rows[r][col(name)]); }
  [[nodiscard]] const std::string& str(std::size_t r, const std::string& name) const { return rows[r][col(name)]; }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Csv read_csv(const fs::path& path) {
  std::istringstream in(detail::read_text_file(path));
  Csv csv;
  std::string line;
  if (std::getline(in, line)) csv.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    csv.rows.push_back(split(line));
    require(csv.rows.back().size() == csv.header.size(), "ragged row in " + path.string());
  }
  return csv;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

class Svg {
 public:
  Svg(double width, double height) : w_(width), h_(height) {}

  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& extra = "") {
    body_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w) << "\" height=\"" << fmt(h)
          << "\" fill=\"" << fill << "\"" << extra << "/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0,
            const std::string& extra = "") {
    body_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2) << "\" y2=\"" << fmt(y2)
          << "\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt(width) << "\"" << extra << "/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width = 1.5) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt(width) << "\" points=\"";
    for (const auto& [x, y] : pts) body_ << fmt(x) << ',' << fmt(y) << ' ';
    body_ << "\"/>\n";
  }
  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill, double opacity) {
    body_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"" << fmt(opacity) << "\" points=\"";
    for (const auto& [x, y] : pts) body_ << fmt(x) << ',' << fmt(y) << ' ';
    body_ << "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"" << fmt(r) << "\" fill=\"" << fill << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, double size = 11, const std::string& anchor = "start") {
    body_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << fmt(size)
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << escape(s) << "</text>\n";
  }

  [[nodiscard]] std::string str() const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w_) << "\" height=\"" << fmt(h_)
        << "\" viewBox=\"0 0 " << fmt(w_) << ' ' << fmt(h_) << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << fmt(w_) << "\" height=\"" << fmt(h_) << "\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  double w_;
  double h_;
  std::ostringstream body_;
};

// Maps data coordinates into one panel.
struct Panel {
  double x0, y0, w, h;
  double xlo, xhi, ylo, yhi;

  [[nodiscard]] double px(double x) const { return x0 + (xhi > xlo ? (x - xlo) / (xhi - xlo) : 0.5) * w; }
  [[nodiscard]] double py(double y) const { return y0 + h - (yhi > ylo ? (y - ylo) / (yhi - ylo) : 0.5) * h; }
  void frame(Svg& svg, const std::string& title) const {
    svg.rect(x0, y0, w, h, "none", " stroke=\"#444\" stroke-width=\"0.8\"");
    svg.text(x0 + w / 2, y0 - 4, title, 10, "middle");
    svg.text(x0 - 3, y0 + 9, fmt(yhi), 8, "end");
    svg.text(x0 - 3, y0 + h, fmt(ylo), 8, "end");
    svg.text(x0, y0 + h + 10, fmt(xlo), 8, "start");
    svg.text(x0 + w, y0 + h + 10, fmt(xhi), 8, "end");
  }
};

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {}
  void write(const std::string& name, const std::string& text) {
    detail::write_text_file(dir_ / name, text);
    files.push_back(dir_ / name);
  }
  std::vector<fs::path> files;

 private:
  fs::path dir_;
};

void plot_bands(const Csv& csv, Writer& out) {
  std::map<std::string, std::vector<std::size_t>> by_field;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) by_field[csv.str(r, "field")].push_back(r);
  for (const auto& [field, rows] : by_field) {
    // One panel per (well, layer); time along x.
    std::map<std::pair<int, int>, std::vector<std::size_t>> panels;
    for (auto r : rows) {
      panels[{static_cast<int>(csv.num(r, "well")), static_cast<int>(csv.num(r, "layer"))}].push_back(r);
    }
    int n_wells = 0, n_layers = 0;
    for (const auto& [key, v] : panels) {
      n_wells = std::max(n_wells, key.first + 1);
      n_layers = std::max(n_layers, key.second + 1);
    }
    const double pw = 170, ph = 110, mx = 60, my = 40;
    Svg svg(mx + n_layers * (pw + 30), my + n_wells * (ph + 40) + 30);
    svg.text(10, 18, field + ": prior P10-P90 (grey), posterior P10-P90 (blue), truth (red), observed (black)", 12);
    std::ostringstream data;
    data << "well,layer,time,truth,observed,prior_p10,prior_p90,posterior_p10,posterior_p50,posterior_p90\n";
    for (const auto& [key, v] : panels) {
      auto rs = v;
      std::sort(rs.begin(), rs.end(), [&](auto a, auto b) { return csv.num(a, "time") < csv.num(b, "time"); });
      double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
      for (auto r : rs) {
        for (const char* c : {"truth", "observed", "prior_p10", "prior_p90", "posterior_p10", "posterior_p90"}) {
          ylo = std::min(ylo, csv.num(r, c));
          yhi = std::max(yhi, csv.num(r, c));
        }
      }
      const Panel p{mx + key.second * (pw + 30), my + key.first * (ph + 40), pw, ph,
                    csv.num(rs.front(), "time"), csv.num(rs.back(), "time"), ylo, yhi};
      auto band = [&](const char* lo, const char* hi, const std::string& colour, double opacity) {
        std::vector<std::pair<double, double>> pts;
        for (auto r : rs) pts.emplace_back(p.px(csv.num(r, "time")), p.py(csv.num(r, hi)));
        for (auto it = rs.rbegin(); it != rs.rend(); ++it) pts.emplace_back(p.px(csv.num(*it, "time")), p.py(csv.num(*it, lo)));
        svg.polygon(pts, colour, opacity);
      };
      band("prior_p10", "prior_p90", "#999999", 0.4);
      band("posterior_p10", "posterior_p90", "#2b6cb0", 0.45);
      std::vector<std::pair<double, double>> truth, p50;
      for (auto r : rs) {
        truth.emplace_back(p.px(csv.num(r, "time")), p.py(csv.num(r, "truth")));
        p50.emplace_back(p.px(csv.num(r, "time")), p.py(csv.num(r, "posterior_p50")));
        svg.circle(p.px(csv.num(r, "time")), p.py(csv.num(r, "observed")), 2.0, "black");
        data << key.first << ',' << key.second << ',' << csv.str(r, "time") << ',' << csv.str(r, "truth") << ','
             << csv.str(r, "observed") << ',' << csv.str(r, "prior_p10") << ',' << csv.str(r, "prior_p90") << ','
             << csv.str(r, "posterior_p10") << ',' << csv.str(r, "posterior_p50") << ','
             << csv.str(r, "posterior_p90") << '\n';
      }
      svg.polyline(p50, "#2b6cb0", 1.0);
      svg.polyline(truth, "#c53030", 1.5);
      const auto& first = rs.front();
      p.frame(svg, "well " + std::to_string(key.first + 1) + " (" + csv.str(first, "i") + "," + csv.str(first, "j") +
                       ") layer " + std::to_string(key.second));
    }
    out.write("bands_" + field + ".svg", svg.str());
    out.write("bands_" + field + ".csv", data.str());
  }
}

// Prior (grey) and posterior (blue) bars as fractions of their member counts.
void histogram_panel(Svg& svg, const Panel& p, const std::vector<double>& edges, const std::vector<double>& prior,
                     const std::vector<double>& post) {
  const double bw = p.w / static_cast<double>(prior.size());
  for (std::size_t b = 0; b < prior.size(); ++b) {
    const double x = p.x0 + static_cast<double>(b) * bw;
    svg.rect(x, p.py(prior[b]), bw, p.y0 + p.h - p.py(prior[b]), "#999999", " fill-opacity=\"0.6\"");
    svg.rect(x, p.py(post[b]), bw, p.y0 + p.h - p.py(post[b]), "#2b6cb0", " fill-opacity=\"0.55\"");
  }
  (void)edges;
}

std::vector<double> fractions(const std::vector<double>& counts) {
  double total = 0;
  for (double c : counts) total += c;
  std::vector<double> out(counts);
  if (total > 0) {
    for (auto& c : out) c /= total;
  }
  return out;
}

void plot_fst(const fs::path& bundle, const std::string& fault, const json& info, Writer& out) {
  const auto csv = read_csv(bundle / ("fst_" + fault + ".csv"));
  if (csv.rows.empty()) return;
  std::vector<double> edges, prior, post;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    edges.push_back(csv.num(r, "bin_lo"));
    prior.push_back(csv.num(r, "prior_count"));
    post.push_back(csv.num(r, "posterior_count"));
  }
  edges.push_back(csv.num(csv.rows.size() - 1, "bin_hi"));
  prior = fractions(prior);
  post = fractions(post);
  double ymax = 0;
  for (std::size_t b = 0; b < prior.size(); ++b) ymax = std::max({ymax, prior[b], post[b]});
  const double truth = info.at("truth").get<double>();
  const double threshold = info.at("threshold").get<double>();
  const double xlo = std::min({edges.front(), truth, threshold});
  const double xhi = std::max({edges.back(), truth, threshold});
  Svg svg(520, 340);
  svg.text(10, 18, "average slip tendency, " + fault + ": prior (grey), posterior (blue), truth (red), threshold (dashed)", 11);
  // Bars are placed on the bin scale; the panel x range may extend to include truth and threshold.
  const Panel bins{60, 40, 420, 240, edges.front(), edges.back(), 0.0, ymax};
  const Panel axis{bins.x0, bins.y0, bins.w, bins.h, edges.front(), edges.back(), 0.0, ymax};
  histogram_panel(svg, bins, edges, prior, post);
  auto mark = [&](double v, const std::string& colour, const std::string& extra) {
    if (v >= axis.xlo && v <= axis.xhi) svg.line(axis.px(v), axis.y0, axis.px(v), axis.y0 + axis.h, colour, 1.5, extra);
  };
  mark(truth, "#c53030", "");
  mark(threshold, "#000000", " stroke-dasharray=\"4,3\"");
  axis.frame(svg, fault + " (truth " + fmt(truth) + ", range " + fmt(xlo) + " to " + fmt(xhi) + ")");
  out.write("fst_" + fault + ".svg", svg.str());
  std::ostringstream data;
  data << "bin_lo,bin_hi,prior_fraction,posterior_fraction\n";
  for (std::size_t b = 0; b < prior.size(); ++b) {
    data << fmt(edges[b]) << ',' << fmt(edges[b + 1]) << ',' << fmt(prior[b]) << ',' << fmt(post[b]) << '\n';
  }
  out.write("fst_" + fault + ".csv", data.str());
}

void plot_scalars(const Csv& csv, const json& truth, Writer& out) {
  std::vector<std::string> names;
  std::map<std::string, std::vector<std::size_t>> rows;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& n = csv.str(r, "scalar");
    if (!rows.count(n)) names.push_back(n);
    rows[n].push_back(r);
  }
  if (names.empty()) return;
  const double pw = 220, ph = 150;
  const int per_row = 3;
  const auto n_rows = static_cast<int>((names.size() + per_row - 1) / per_row);
  Svg svg(40 + per_row * (pw + 40), 40 + n_rows * (ph + 50));
  svg.text(10, 18, "joint scalars: prior (grey), posterior (blue), truth (red)", 12);
  std::ostringstream data;
  data << "scalar,bin_lo,bin_hi,prior_fraction,posterior_fraction\n";
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto& rs = rows[names[k]];
    std::vector<double> edges, prior, post;
    for (auto r : rs) {
      edges.push_back(csv.num(r, "bin_lo"));
      prior.push_back(csv.num(r, "prior_count"));
      post.push_back(csv.num(r, "posterior_count"));
    }
    edges.push_back(csv.num(rs.back(), "bin_hi"));
    prior = fractions(prior);
    post = fractions(post);
    double ymax = 0;
    for (std::size_t b = 0; b < prior.size(); ++b) ymax = std::max({ymax, prior[b], post[b]});
    const Panel p{50 + static_cast<double>(k % per_row) * (pw + 40), 50 + static_cast<double>(k / per_row) * (ph + 50),
                  pw, ph, edges.front(), edges.back(), 0.0, ymax};
    histogram_panel(svg, p, edges, prior, post);
    if (truth.contains(names[k])) {
      const double t = truth.at(names[k]).get<double>();
      if (t >= p.xlo && t <= p.xhi) svg.line(p.px(t), p.y0, p.px(t), p.y0 + p.h, "#c53030", 1.5);
    }
    p.frame(svg, names[k]);
    for (std::size_t b = 0; b < prior.size(); ++b) {
      data << names[k] << ',' << fmt(edges[b]) << ',' << fmt(edges[b + 1]) << ',' << fmt(prior[b]) << ','
           << fmt(post[b]) << '\n';
    }
  }
  out.write("scalars.svg", svg.str());
  out.write("scalars.csv", data.str());
}

std::string heat_colour(double t) {
  // Blue to yellow ramp.
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(40 + 215 * t));
  const int g = static_cast<int>(std::lround(60 + 170 * t));
  const int b = static_cast<int>(std::lround(150 - 110 * t));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

void plot_maps(const fs::path& path, const json& summary, Writer& out) {
  const RowMatrix maps = io::read_matrix(path);
  const auto& g = summary.at("grid");
  const int nx = g.at("nx").get<int>(), ny = g.at("ny").get<int>(), nz = g.at("nz").get<int>();
  require(maps.cols() == static_cast<Eigen::Index>(nx) * ny * nz, "pressure maps do not match the grid");
  const int layer = nz / 2;
  const double cell = 8;
  const double pw = nx * cell, ph = ny * cell;
  Svg svg(30 + maps.rows() * (pw + 30), ph + 90);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  const auto offset = static_cast<Eigen::Index>(layer) * nx * ny;
  for (Eigen::Index m = 0; m < maps.rows(); ++m) {
    lo = std::min(lo, maps.row(m).segment(offset, nx * ny).minCoeff());
    hi = std::max(hi, maps.row(m).segment(offset, nx * ny).maxCoeff());
  }
  svg.text(10, 18, "pressure (MPa), layer " + std::to_string(layer) + ", year " +
                       fmt(summary.at("map_time").get<double>()) + ", colour range " + fmt(lo) + " to " + fmt(hi),
           12);
  std::ostringstream data;
  data << "map,i,j,layer,pressure\n";
  for (Eigen::Index m = 0; m < maps.rows(); ++m) {
    const std::string title = m == 0 ? "truth" : m == 1 ? "posterior P50" : "representative " + std::to_string(m - 1);
    const double x0 = 30 + static_cast<double>(m) * (pw + 30), y0 = 50;
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const double v = maps(m, offset + j * nx + i);
        // North up: row j = 0 at the bottom.
        svg.rect(x0 + i * cell, y0 + (ny - 1 - j) * cell, cell, cell, heat_colour(hi > lo ? (v - lo) / (hi - lo) : 0.5));
        data << title << ',' << i << ',' << j << ',' << layer << ',' << fmt(v) << '\n';
      }
    }
    svg.text(x0 + pw / 2, y0 - 6, title, 10, "middle");
  }
  out.write("pressure_maps.svg", svg.str());
  out.write("pressure_maps.csv", data.str());
}

}  // namespace

PlotReport cmd_plot(const config::RunConfig& config, const CommandOptions& options) {
  const RunPaths paths{config.output_root};
  const auto bundle = paths.analytics_dir();
  PlotReport report;
  if (!fs::is_directory(bundle)) {
    detail::log(options, "plot: no analytics bundle, nothing to draw");
    return report;
  }
  Writer out(paths.plots_dir());
  if (fs::exists(bundle / "bands.csv")) {
    const auto csv = read_csv(bundle / "bands.csv");
    if (!csv.rows.empty()) plot_bands(csv, out);
  }
  if (fs::exists(bundle / "fst_report.json")) {
    const auto info = json::parse(detail::read_text_file(bundle / "fst_report.json"));
    for (const auto& f : info) {
      const auto name = f.at("fault").get<std::string>();
      if (fs::exists(bundle / ("fst_" + name + ".csv"))) plot_fst(bundle, name, f, out);
    }
  }
  if (fs::exists(bundle / "scalars.csv")) {
    json truth = json::object();
    const auto truth_path = paths.root / "truth" / "scalars.json";
    if (fs::exists(truth_path)) truth = json::parse(detail::read_text_file(truth_path)).at("scalars");
    plot_scalars(read_csv(bundle / "scalars.csv"), truth, out);
  }
  if (fs::exists(bundle / "pressure_maps.fdsi") && fs::exists(bundle / "summary.json")) {
    plot_maps(bundle / "pressure_maps.fdsi", json::parse(detail::read_text_file(bundle / "summary.json")), out);
  }
  report.files = out.files;
  detail::log(options, "plot: wrote " + std::to_string(report.files.size()) + " files");
  return report;
}

}  // namespace fdsi::workflow
