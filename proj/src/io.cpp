#include "pevccp/io.hpp"

#include "pevccp/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

namespace pevccp {

using nlohmann::json;

namespace {

constexpr int kScenarioVersion = 1;
constexpr int kTraceVersion = 1;
constexpr int kSolutionVersion = 1;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_json(const json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << doc.dump(2) << '\n';
}

// Strict field handling: every key must be known, so typos fail loudly.
void expect_keys(const json& obj, const std::string& ctx,
                 const std::set<std::string>& required,
                 const std::set<std::string>& optional = {}) {
  if (!obj.is_object()) throw ParseError(ctx + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!required.count(key) && !optional.count(key))
      throw ParseError(ctx + ": unknown field '" + key + "'");
  }
  for (const auto& key : required) {
    if (!obj.contains(key)) throw ParseError(ctx + ": missing field '" + key + "'");
  }
}

double get_number(const json& obj, const std::string& ctx, const std::string& key) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ParseError(ctx + "." + key + ": expected a number");
  return v.get<double>();
}

Vec get_vec(const json& obj, const std::string& ctx, const std::string& key) {
  const json& arr = obj.at(key);
  if (!arr.is_array()) throw ParseError(ctx + "." + key + ": expected an array");
  Vec out(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ParseError(ctx + "." + key + ": expected numbers");
    out(static_cast<int>(i)) = arr[i].get<double>();
  }
  return out;
}

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
  return rows;
}

Mat get_mat(const json& obj, const std::string& ctx, const std::string& key) {
  const json& arr = obj.at(key);
  if (!arr.is_array() || arr.empty())
    throw ParseError(ctx + "." + key + ": expected a non-empty array of rows");
  Mat out;
  for (size_t r = 0; r < arr.size(); ++r) {
    if (!arr[r].is_array()) throw ParseError(ctx + "." + key + ": expected rows");
    if (r == 0) out.resize(arr.size(), arr[r].size());
    if (static_cast<int>(arr[r].size()) != out.cols())
      throw ParseError(ctx + "." + key + ": ragged rows");
    for (size_t c = 0; c < arr[r].size(); ++c)
      out(static_cast<int>(r), static_cast<int>(c)) = arr[r][c].get<double>();
  }
  return out;
}

TuningSchedule schedule_from_json(const json& obj, const std::string& ctx) {
  expect_keys(obj, ctx, {"r", "o"});
  return {get_number(obj, ctx, "r"), get_number(obj, ctx, "o")};
}

json schedule_to_json(const TuningSchedule& ts) { return json{{"r", ts.r}, {"o", ts.o}}; }

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ScenarioDocument read_scenario_document(const std::string& path) {
  json doc = load_json(path);
  expect_keys(doc, "scenario",
              {"version", "grid", "tariff", "fleet", "p_max_kw", "baseline_load_kw"},
              {"schedules", "topology"});
  if (doc.at("version").get<int>() != kScenarioVersion)
    throw ParseError(path + ": unsupported scenario version");

  ScenarioDocument out;
  Scenario& s = out.scenario;

  const json& grid = doc.at("grid");
  expect_keys(grid, "grid", {"horizon_steps", "step_hours"});
  s.grid.horizon_steps = grid.at("horizon_steps").get<int>();
  s.grid.step_hours = get_number(grid, "grid", "step_hours");

  const json& tariff = doc.at("tariff");
  expect_keys(tariff, "tariff", {"c1", "c2"});
  s.tariff.c1 = get_number(tariff, "tariff", "c1");
  s.tariff.c2 = get_vec(tariff, "tariff", "c2");

  s.p_max_kw = get_vec(doc, "scenario", "p_max_kw");
  s.baseline_load_kw = get_vec(doc, "scenario", "baseline_load_kw");

  const json& fleet = doc.at("fleet");
  if (!fleet.is_array() || fleet.empty())
    throw ParseError("fleet: expected a non-empty array");
  for (size_t v = 0; v < fleet.size(); ++v) {
    std::string ctx = "fleet[" + std::to_string(v) + "]";
    const json& pj = fleet[v];
    expect_keys(pj, ctx,
                {"battery_capacity_kwh", "charge_efficiency", "initial_energy_kwh",
                 "min_soc", "max_charge_kw", "availability", "consumption_kwh"});
    PevModel pev;
    pev.battery_capacity_kwh = get_number(pj, ctx, "battery_capacity_kwh");
    pev.charge_efficiency = get_number(pj, ctx, "charge_efficiency");
    pev.initial_energy_kwh = get_number(pj, ctx, "initial_energy_kwh");
    pev.min_soc = get_number(pj, ctx, "min_soc");
    pev.max_charge_kw = get_number(pj, ctx, "max_charge_kw");
    const json& avail = pj.at("availability");
    if (!avail.is_array()) throw ParseError(ctx + ".availability: expected an array");
    for (const auto& a : avail) {
      if (!a.is_number_integer() && !a.is_boolean())
        throw ParseError(ctx + ".availability: expected 0/1 entries");
      pev.availability.push_back(a.is_boolean() ? a.get<bool>() : (a.get<int>() != 0));
    }
    pev.consumption_kwh = get_vec(pj, ctx, "consumption_kwh");
    s.fleet.push_back(std::move(pev));
  }

  if (doc.contains("schedules")) {
    const json& sj = doc.at("schedules");
    expect_keys(sj, "schedules", {"alpha", "beta", "delta", "eta"});
    out.schedules = ScheduleSet{
        schedule_from_json(sj.at("alpha"), "schedules.alpha"),
        schedule_from_json(sj.at("beta"), "schedules.beta"),
        schedule_from_json(sj.at("delta"), "schedules.delta"),
        schedule_from_json(sj.at("eta"), "schedules.eta"),
    };
  }
  if (doc.contains("topology")) out.topology = doc.at("topology").get<std::string>();

  ValidationReport report = validate_scenario(s);
  if (!report.ok()) throw ValidationError(path + ": " + report.to_string());
  return out;
}

Scenario read_scenario(const std::string& path) {
  return read_scenario_document(path).scenario;
}

void write_scenario_document(const ScenarioDocument& doc, const std::string& path) {
  const Scenario& s = doc.scenario;
  json out;
  out["version"] = kScenarioVersion;
  out["grid"] = {{"horizon_steps", s.grid.horizon_steps}, {"step_hours", s.grid.step_hours}};
  out["tariff"] = {{"c1", s.tariff.c1}, {"c2", vec_to_json(s.tariff.c2)}};
  out["p_max_kw"] = vec_to_json(s.p_max_kw);
  out["baseline_load_kw"] = vec_to_json(s.baseline_load_kw);
  json fleet = json::array();
  for (const auto& pev : s.fleet) {
    json pj;
    pj["battery_capacity_kwh"] = pev.battery_capacity_kwh;
    pj["charge_efficiency"] = pev.charge_efficiency;
    pj["initial_energy_kwh"] = pev.initial_energy_kwh;
    pj["min_soc"] = pev.min_soc;
    pj["max_charge_kw"] = pev.max_charge_kw;
    json avail = json::array();
    for (uint8_t a : pev.availability) avail.push_back(static_cast<int>(a));
    pj["availability"] = avail;
    pj["consumption_kwh"] = vec_to_json(pev.consumption_kwh);
    fleet.push_back(std::move(pj));
  }
  out["fleet"] = std::move(fleet);
  if (doc.schedules) {
    out["schedules"] = {{"alpha", schedule_to_json(doc.schedules->alpha)},
                        {"beta", schedule_to_json(doc.schedules->beta)},
                        {"delta", schedule_to_json(doc.schedules->delta)},
                        {"eta", schedule_to_json(doc.schedules->eta)}};
  }
  if (doc.topology) out["topology"] = *doc.topology;
  save_json(out, path);
}

void write_scenario(const Scenario& s, const std::string& path) {
  write_scenario_document({s, std::nullopt, std::nullopt}, path);
}

void write_trace(const RunTrace& t, const std::string& path, TraceFormat format) {
  if (format == TraceFormat::Csv) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    const int t_len = t.entries.empty() ? 0 : static_cast<int>(t.entries[0].agg_load_kw.size());
    out << "k,objective,rel_obj,max_disagreement,cap_violation,feas_residual";
    for (int i = 0; i < t_len; ++i) out << ",agg_kw_" << i;
    out << '\n';
    for (const auto& e : t.entries) {
      out << e.k << ',' << fmt17(e.objective) << ',' << fmt17(e.rel_obj) << ','
          << fmt17(e.max_disagreement) << ',' << fmt17(e.cap_violation) << ','
          << fmt17(e.feas_residual);
      for (int i = 0; i < t_len; ++i) out << ',' << fmt17(e.agg_load_kw(i));
      out << '\n';
    }
    return;
  }

  json doc;
  doc["version"] = kTraceVersion;
  char fp[20];
  std::snprintf(fp, sizeof(fp), "%016llx",
                static_cast<unsigned long long>(t.config_fingerprint));
  doc["config_fingerprint"] = fp;
  json entries = json::array();
  for (const auto& e : t.entries) {
    json ej;
    ej["k"] = e.k;
    ej["objective"] = e.objective;
    if (std::isnan(e.rel_obj)) ej["rel_obj"] = nullptr;
    else ej["rel_obj"] = e.rel_obj;
    ej["agg_load_kw"] = vec_to_json(e.agg_load_kw);
    ej["max_disagreement"] = e.max_disagreement;
    ej["cap_violation"] = e.cap_violation;
    ej["feas_residual"] = e.feas_residual;
    entries.push_back(std::move(ej));
  }
  doc["entries"] = std::move(entries);
  doc["final_x"] = mat_to_json(t.final_x);
  save_json(doc, path);
}

RunTrace read_trace_json(const std::string& path) {
  json doc = load_json(path);
  expect_keys(doc, "trace", {"version", "config_fingerprint", "entries", "final_x"});
  if (doc.at("version").get<int>() != kTraceVersion)
    throw ParseError(path + ": unsupported trace version");
  RunTrace t;
  t.config_fingerprint =
      std::stoull(doc.at("config_fingerprint").get<std::string>(), nullptr, 16);
  for (const auto& ej : doc.at("entries")) {
    expect_keys(ej, "trace.entry",
                {"k", "objective", "rel_obj", "agg_load_kw", "max_disagreement",
                 "cap_violation", "feas_residual"});
    TraceEntry e;
    e.k = ej.at("k").get<int>();
    e.objective = ej.at("objective").get<double>();
    e.rel_obj = ej.at("rel_obj").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                           : ej.at("rel_obj").get<double>();
    e.agg_load_kw = get_vec(ej, "trace.entry", "agg_load_kw");
    e.max_disagreement = ej.at("max_disagreement").get<double>();
    e.cap_violation = ej.at("cap_violation").get<double>();
    e.feas_residual = ej.at("feas_residual").get<double>();
    t.entries.push_back(std::move(e));
  }
  t.final_x = get_mat(doc, "trace", "final_x");
  return t;
}

void write_central_solution(const CentralSolution& sol, const std::string& path) {
  json doc;
  doc["version"] = kSolutionVersion;
  doc["objective"] = sol.objective;
  doc["l_agg"] = vec_to_json(sol.l_agg);
  doc["x_all"] = mat_to_json(sol.x_all);
  doc["kkt"] = {{"stationarity_x", sol.kkt.stationarity_x},
                {"stationarity_l", sol.kkt.stationarity_l},
                {"complementarity", sol.kkt.complementarity},
                {"dual_feasibility", sol.kkt.dual_feasibility}};
  save_json(doc, path);
}

CentralSolution read_central_solution(const std::string& path) {
  json doc = load_json(path);
  expect_keys(doc, "solution", {"version", "objective", "l_agg", "x_all", "kkt"});
  if (doc.at("version").get<int>() != kSolutionVersion)
    throw ParseError(path + ": unsupported solution version");
  CentralSolution sol;
  sol.objective = doc.at("objective").get<double>();
  sol.l_agg = get_vec(doc, "solution", "l_agg");
  sol.x_all = get_mat(doc, "solution", "x_all");
  const json& kkt = doc.at("kkt");
  expect_keys(kkt, "solution.kkt",
              {"stationarity_x", "stationarity_l", "complementarity", "dual_feasibility"});
  sol.kkt.stationarity_x = kkt.at("stationarity_x").get<double>();
  sol.kkt.stationarity_l = kkt.at("stationarity_l").get<double>();
  sol.kkt.complementarity = kkt.at("complementarity").get<double>();
  sol.kkt.dual_feasibility = kkt.at("dual_feasibility").get<double>();
  return sol;
}

}  // namespace pevccp
