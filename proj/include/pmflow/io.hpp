#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmflow/analysis.hpp"
#include "pmflow/counterexample.hpp"
#include "pmflow/flow.hpp"

namespace pmflow::io {

using nlohmann::json;

/// "%.17g" formatting used for every float written to CSV.
std::string format_double(double x);

/// Long format, header `t,i,value`, one row per (sample time, cell).
std::string trajectory_csv(const Trajectory& traj);
/// Same layout restricted to the given sample indices.
std::string trajectory_csv(const Trajectory& traj, const std::vector<std::size_t>& sample_indices);

json diagnostics_json(const Trajectory& traj);
json params_json(const CounterexampleParams& params);
json check_report_json(const CheckReport& report);
json ordering_json(const OrderingReport& report);
json key_bounds_json(const KeyBoundsReport& report);
json gap_report_json(const GapReport& report);

/// Rows `n,t,sup,tv,sup_ref,tv_ref,gap_sup,gap_tv,l2` per grid and time.
std::string gap_report_csv(const GapReport& report);

/// Header `t,tv_n,sup_n,tv_ref,sup_ref,gap_tv,gap_sup` for one grid size.
std::string gap_table_csv(const GapReport& report, std::size_t grid_index);

/// Pretty-printed JSON with sorted keys and a trailing newline.
std::string dump(const json& j);

/// Writes `content` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

struct PlotSeries {
  std::string csv;    // long-format file, path relative to the script
  std::string label;
  std::size_t cells;  // grid size, for the x = i / cells axis
  double length = 1.0;
};

/// gnuplot commands drawing the series at the given sample times.
std::string plot_script(const std::vector<PlotSeries>& series, const std::vector<double>& times,
                        const std::string& output_image);

}  // namespace pmflow::io
