#include "pmflow/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pmflow::io {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

// JSON has no infinities; serialize non-finite margins as null.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void append_state(std::string& out, double t, const GridFunction& u) {
  const std::string ts = format_double(t);
  for (std::size_t i = 1; i <= u.size(); ++i) {
    out += ts;
    out += ',';
    out += std::to_string(i);
    out += ',';
    out += format_double(u(i));
    out += '\n';
  }
}

}  // namespace

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t,i,value\n";
  for (std::size_t k = 0; k < traj.states.size(); ++k) append_state(out, traj.times[k], traj.states[k]);
  return out;
}

std::string trajectory_csv(const Trajectory& traj, const std::vector<std::size_t>& sample_indices) {
  std::string out = "t,i,value\n";
  for (std::size_t k : sample_indices)
    if (k < traj.states.size()) append_state(out, traj.times[k], traj.states[k]);
  return out;
}

json diagnostics_json(const Trajectory& traj) {
  json records = json::array();
  for (const auto& r : traj.diagnostics.records) {
    records.push_back({{"t", r.t},
                       {"max", r.max},
                       {"min", r.min},
                       {"tv", r.tv},
                       {"tv_plus", r.tv_plus},
                       {"tv_minus", r.tv_minus},
                       {"energy", r.energy},
                       {"subcritical_count", r.subcritical_count}});
  }
  json violations = json::array();
  for (const auto& v : traj.diagnostics.violations)
    violations.push_back({{"quantity", v.quantity}, {"t", v.t}, {"amount", v.amount}});
  return {{"model", traj.model},
          {"bc", std::string(to_string(traj.bc))},
          {"n", traj.n},
          {"length", traj.length},
          {"dissipation", traj.dissipation},
          {"dissipation_at", traj.dissipation_at},
          {"initial_energy", traj.diagnostics.records.empty() ? 0.0 : traj.diagnostics.records.front().energy},
          {"stats",
           {{"accepted", traj.stats.accepted},
            {"rejected", traj.stats.rejected},
            {"rhs_evaluations", traj.stats.rhs_evaluations}}},
          {"records", records},
          {"violations", violations}};
}

json params_json(const CounterexampleParams& p) {
  return {{"n", p.n},
          {"sigma0", p.window.sigma0},
          {"lambda0", p.window.lambda0},
          {"Lambda0", p.window.Lambda0},
          {"T", p.T},
          {"h_n", p.h},
          {"g_nh", p.g},
          {"mu_n", p.mu},
          {"m_n", p.m},
          {"A_n", p.A},
          {"B_n", p.B},
          {"C_n", p.C},
          {"E_n", p.E},
          {"J_n", p.J},
          {"admissible", p.admissible},
          {"failed", p.failed}};
}

json check_report_json(const CheckReport& report) {
  json checks = json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"strict", c.strict},
                      {"passed", c.passed()},
                      {"degenerate", c.degenerate},
                      {"min_margin", num(c.min_margin)},
                      {"t_at_min", c.t_at_min},
                      {"i_at_min", c.i_at_min},
                      {"evaluations", c.evaluations}});
  }
  json failures = json::array();
  for (const auto& f : report.failures)
    failures.push_back({{"check", f.check}, {"t", f.t}, {"i", f.i}, {"margin", num(f.margin)}});
  return {{"passed", report.passed()}, {"checks", checks}, {"failures", failures}};
}

json ordering_json(const OrderingReport& r) {
  json j = {{"holds", r.holds},
            {"min_separation", num(r.min_separation)},
            {"t_at_min", r.t_at_min},
            {"i_at_min", r.i_at_min}};
  if (r.crossed) j["first_crossing"] = {{"t", r.first_crossing_t}, {"i", r.first_crossing_i}};
  return j;
}

json key_bounds_json(const KeyBoundsReport& rep) {
  json rows = json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"t", r.t},
                    {"x", r.x},
                    {"i", r.i},
                    {"u", r.u},
                    {"upper", r.upper},
                    {"upper_margin", r.upper_margin},
                    {"u_edge", r.u_edge},
                    {"lower", r.lower},
                    {"lower_margin", r.lower_margin}});
  }
  return {{"holds", rep.holds()},
          {"min_upper_margin", num(rep.min_upper_margin)},
          {"min_lower_margin", num(rep.min_lower_margin)},
          {"rows", rows}};
}

json gap_report_json(const GapReport& rep) {
  json runs = json::array();
  for (std::size_t k = 0; k < rep.ns.size(); ++k) {
    json sup = json::array(), tvs = json::array();
    for (const auto& st : rep.sup_tv[k]) {
      sup.push_back(st.sup);
      tvs.push_back(st.tv);
    }
    runs.push_back({{"n", rep.ns[k]}, {"sup", sup}, {"tv", tvs}, {"l2_to_ref", rep.l2_to_ref[k]}});
  }
  json ref_sup = json::array(), ref_tv = json::array(), gap_sup = json::array(),
       gap_tv = json::array();
  for (const auto& r : rep.ref) {
    ref_sup.push_back(r.sup);
    ref_tv.push_back(r.tv);
  }
  for (const auto& g : rep.gaps) {
    gap_sup.push_back(num(g.sup));
    gap_tv.push_back(num(g.tv));
  }
  return {{"ns", rep.ns},
          {"times", rep.times},
          {"runs", runs},
          {"reference", {{"sup", ref_sup}, {"tv", ref_tv}}},
          {"gaps", {{"sup", gap_sup}, {"tv", gap_tv}}},
          {"richardson_tv", rep.richardson_tv},
          {"failed_ns", rep.failed_ns},
          {"failure", rep.failure}};
}

std::string gap_report_csv(const GapReport& rep) {
  std::string out = "n,t,sup,tv,sup_ref,tv_ref,gap_sup,gap_tv,l2\n";
  for (std::size_t k = 0; k < rep.ns.size(); ++k) {
    for (std::size_t j = 0; j < rep.times.size(); ++j) {
      const auto& st = rep.sup_tv[k][j];
      const auto& rf = rep.ref[j];
      out += std::to_string(rep.ns[k]) + ',' + format_double(rep.times[j]) + ',' +
             format_double(st.sup) + ',' + format_double(st.tv) + ',' + format_double(rf.sup) +
             ',' + format_double(rf.tv) + ',' + format_double(st.sup - rf.sup) + ',' +
             format_double(st.tv - rf.tv) + ',' + format_double(rep.l2_to_ref[k][j]) + '\n';
    }
  }
  return out;
}

std::string gap_table_csv(const GapReport& rep, std::size_t k) {
  std::string out = "t,tv_n,sup_n,tv_ref,sup_ref,gap_tv,gap_sup\n";
  if (k >= rep.ns.size()) return out;
  for (std::size_t j = 0; j < rep.times.size(); ++j) {
    const auto& st = rep.sup_tv[k][j];
    const auto& rf = rep.ref[j];
    out += format_double(rep.times[j]) + ',' + format_double(st.tv) + ',' + format_double(st.sup) +
           ',' + format_double(rf.tv) + ',' + format_double(rf.sup) + ',' +
           format_double(st.tv - rf.tv) + ',' + format_double(st.sup - rf.sup) + '\n';
  }
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string plot_script(const std::vector<PlotSeries>& series, const std::vector<double>& times,
                        const std::string& output_image) {
  std::string s;
  s += "# gnuplot script; run from this directory: gnuplot plot.gp\n";
  s += "set datafile separator ','\n";
  s += "set terminal pngcairo size 1200," + std::to_string(300 * std::max<std::size_t>(times.size(), 1)) + "\n";
  s += "set output '" + output_image + "'\n";
  s += "set xlabel 'x'\nset ylabel 'u'\nset key left top\n";
  s += "set multiplot layout " + std::to_string(times.size()) + ",1\n";
  for (double t : times) {
    const std::string ts = format_double(t);
    s += "set title 't = " + ts + "'\n";
    s += "plot ";
    for (std::size_t f = 0; f < series.size(); ++f) {
      const auto& p = series[f];
      const std::string dx = format_double(p.length / static_cast<double>(p.cells));
      if (f) s += ", \\\n     ";
      s += "'" + p.csv + "' every ::1 using (abs($1-" + ts + ")<1e-12 ? $2*" + dx +
           " : 1/0):3 with steps title '" + p.label + "'";
    }
    s += "\n";
  }
  s += "unset multiplot\n";
  return s;
}

}  // namespace pmflow::io
