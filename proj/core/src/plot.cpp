#include "msna/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace msna {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  const double h = q * (static_cast<double>(values.size()) - 1.0);
  const auto lo = static_cast<size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

struct Tick {
  double value;
  std::string label;
};

std::vector<Tick> decade_ticks(double lo, double hi) {
  std::vector<Tick> ticks;
  const int first = static_cast<int>(std::ceil(std::log10(lo) - 1e-9));
  const int last = static_cast<int>(std::floor(std::log10(hi) + 1e-9));
  for (int e = first; e <= last; ++e) {
    std::ostringstream label;
    label << "1e" << e;
    ticks.push_back({std::pow(10.0, e), label.str()});
  }
  return ticks;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

PlotData compute_plot_data(const std::string& csv_path, const std::string& metric) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("compute_plot_data: cannot open " + csv_path);
  std::string header_line;
  if (!std::getline(in, header_line))
    throw std::runtime_error("compute_plot_data: empty CSV " + csv_path);
  const auto header = split_row(header_line);

  auto column = [&header](const std::string& name) -> int {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };

  const std::vector<std::string> required = {"optimizer", "replication", "samples_seen", metric};
  std::string missing;
  for (const auto& name : required)
    if (column(name) < 0) missing += (missing.empty() ? "" : ", ") + name;
  if (!missing.empty())
    throw std::runtime_error("compute_plot_data: CSV missing columns: " + missing);

  const int opt_col = column("optimizer");
  const int samples_col = column("samples_seen");
  const int metric_col = column(metric);

  // optimizer -> samples_seen -> values across replications
  std::map<std::string, std::map<long, std::vector<double>>> grouped;
  std::vector<std::string> order;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_row(line);
    if (static_cast<int>(fields.size()) <= std::max({opt_col, samples_col, metric_col})) continue;
    const std::string& raw = fields[static_cast<size_t>(metric_col)];
    if (raw.empty()) continue;
    double value = 0.0;
    long samples = 0;
    try {
      value = std::stod(raw);
      samples = std::stol(fields[static_cast<size_t>(samples_col)]);
    } catch (...) {
      continue;
    }
    if (!std::isfinite(value)) continue;
    const std::string& opt = fields[static_cast<size_t>(opt_col)];
    if (grouped.find(opt) == grouped.end()) order.push_back(opt);
    grouped[opt][samples].push_back(value);
  }
  if (grouped.empty())
    throw std::runtime_error("compute_plot_data: no finite values for metric '" + metric + "'");

  PlotData data;
  data.metric = metric;
  for (const auto& opt : order) {
    PlotSeries series;
    series.optimizer = opt;
    for (const auto& [samples, values] : grouped[opt]) {
      PlotPoint p;
      p.samples_seen = samples;
      p.q25 = quantile(values, 0.25);
      p.median = quantile(values, 0.5);
      p.q75 = quantile(values, 0.75);
      p.replications = static_cast<int>(values.size());
      series.points.push_back(p);
    }
    data.series.push_back(std::move(series));
  }
  return data;
}

void emit_plot_svg(const PlotData& data, const std::string& out_path) {
  if (data.series.empty()) throw std::invalid_argument("emit_plot_svg: no series");

  double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
  bool first = true;
  for (const auto& s : data.series)
    for (const auto& p : s.points) {
      const double lo = std::max(p.q25, 1e-300);
      const double hi = std::max(p.q75, 1e-300);
      const double x = std::max(static_cast<double>(p.samples_seen), 1.0);
      if (first) {
        x_lo = x_hi = x;
        y_lo = lo;
        y_hi = hi;
        first = false;
      } else {
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
        y_lo = std::min(y_lo, lo);
        y_hi = std::max(y_hi, hi);
      }
    }
  if (first) throw std::invalid_argument("emit_plot_svg: no points");
  if (y_lo == y_hi) {
    y_lo *= 0.5;
    y_hi *= 2.0;
  }
  if (x_lo == x_hi) x_hi *= 10.0;

  const double width = 760.0, height = 520.0;
  const double ml = 70.0, mr = 170.0, mt = 40.0, mb = 55.0;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;
  const double lx_lo = std::log10(x_lo), lx_hi = std::log10(x_hi);
  const double ly_lo = std::log10(y_lo), ly_hi = std::log10(y_hi);

  auto sx = [&](double x) {
    return ml + plot_w * (std::log10(std::max(x, 1e-300)) - lx_lo) / (lx_hi - lx_lo);
  };
  auto sy = [&](double y) {
    return mt + plot_h * (1.0 - (std::log10(std::max(y, 1e-300)) - ly_lo) / (ly_hi - ly_lo));
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << ml << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">"
      << data.metric << " vs samples (median, IQR band)</text>\n";

  for (const auto& t : decade_ticks(x_lo, x_hi)) {
    const double x = sx(t.value);
    svg << "<line x1=\"" << x << "\" y1=\"" << mt << "\" x2=\"" << x << "\" y2=\""
        << mt + plot_h << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << mt + plot_h + 20
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << t.label
        << "</text>\n";
  }
  for (const auto& t : decade_ticks(y_lo, y_hi)) {
    const double y = sy(t.value);
    svg << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + plot_w << "\" y2=\"" << y
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << t.label
        << "</text>\n";
  }
  svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  svg << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 12
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">samples seen"
      << "</text>\n";

  int color_index = 0;
  for (const auto& s : data.series) {
    const char* color = kPalette[color_index % 8];
    const bool has_band = std::any_of(s.points.begin(), s.points.end(),
                                      [](const PlotPoint& p) { return p.replications > 1; });
    if (has_band && s.points.size() > 1) {
      std::ostringstream band;
      band << "M";
      for (const auto& p : s.points) band << " " << sx(p.samples_seen) << " " << sy(p.q75);
      for (auto it = s.points.rbegin(); it != s.points.rend(); ++it)
        band << " L " << sx(it->samples_seen) << " " << sy(it->q25);
      band << " Z";
      svg << "<path d=\"" << band.str() << "\" fill=\"" << color
          << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (const auto& p : s.points) svg << sx(p.samples_seen) << "," << sy(p.median) << " ";
    svg << "\"/>\n";

    const double legend_y = mt + 16.0 * (color_index + 1);
    svg << "<line x1=\"" << ml + plot_w + 12 << "\" y1=\"" << legend_y << "\" x2=\""
        << ml + plot_w + 34 << "\" y2=\"" << legend_y << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << ml + plot_w + 40 << "\" y=\"" << legend_y + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.optimizer << "</text>\n";
    ++color_index;
  }
  svg << "</svg>\n";

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("emit_plot_svg: cannot open " + out_path);
  out << svg.str();
}

std::vector<std::string> emit_plots(const std::string& csv_path,
                                    const std::vector<std::string>& metrics,
                                    const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string stem = std::filesystem::path(csv_path).stem().string();
  std::vector<std::string> written;
  for (const auto& metric : metrics) {
    const PlotData data = compute_plot_data(csv_path, metric);
    const std::string path = out_dir + "/" + stem + "_" + metric + ".svg";
    emit_plot_svg(data, path);
    written.push_back(path);
  }
  return written;
}

}  // namespace msna
