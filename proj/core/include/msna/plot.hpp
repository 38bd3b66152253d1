#pragma once

#include <string>
#include <vector>

namespace msna {

// Median and interquartile band of one metric at one sample count, across
// replications of one optimizer.
struct PlotPoint {
  long samples_seen = 0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  int replications = 0;
};

struct PlotSeries {
  std::string optimizer;
  std::vector<PlotPoint> points;
};

struct PlotData {
  std::string metric;
  std::vector<PlotSeries> series;
};

// Type-7 (linear interpolation) quantile of a sample; q in [0, 1].
double quantile(std::vector<double> values, double q);

// Aggregates a metric column of a run CSV into per-optimizer median/IQR
// series. Throws when the CSV lacks required columns, listing the missing
// ones, or when no finite values exist for the metric.
PlotData compute_plot_data(const std::string& csv_path, const std::string& metric);

// Renders a log-log SVG: one median line per optimizer with a shaded
// interquartile band across replications.
void emit_plot_svg(const PlotData& data, const std::string& out_path);

// Convenience wrapper: one SVG per metric name, written as
// <out_dir>/<stem>_<metric>.svg. Returns the written paths.
std::vector<std::string> emit_plots(const std::string& csv_path,
                                    const std::vector<std::string>& metrics,
                                    const std::string& out_dir);

}  // namespace msna
