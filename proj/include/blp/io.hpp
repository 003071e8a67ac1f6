#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blp/branching_measure.hpp"
#include "blp/cumulant.hpp"
#include "blp/numeric.hpp"
#include "blp/perpetual.hpp"
#include "blp/renewal.hpp"
#include "blp/spine_levy.hpp"
#include "blp/stats.hpp"

namespace blp::io {

using json = nlohmann::json;

inline json to_json(const PointSequence& x) {
  json a = json::array();
  for (double v : x.atoms()) a.push_back(v);
  return a;
}

inline PointSequence point_sequence_from_json(const json& j) {
  if (!j.is_array()) throw Error("point sequence: expected a JSON array");
  std::vector<double> v;
  for (const auto& e : j) {
    if (!e.is_number()) throw Error("point sequence: entries must be numbers");
    v.push_back(e.get<double>());
  }
  return PointSequence::canonicalize(v);
}

inline json to_json(const BranchingMeasure& m) {
  json atoms = json::array();
  for (const auto& a : m.atoms()) atoms.push_back({{"weight", a.weight}, {"seq", to_json(a.seq)}});
  json out{{"atoms", atoms}};
  if (m.family()) {
    const auto& f = *m.family();
    out["family"] = {{"kind", "cluster"},
                     {"params", {{"c", f.c}, {"log_power", f.log_power}, {"value", f.value}, {"n_min", f.n_min},
                                 {"sum_cutoff", f.sum_cutoff}, {"closed_form", f.closed_form}}},
                     {"cutoff", f.cutoff}};
  }
  return out;
}

/// {atoms: [{weight, seq}], family: {kind: "cluster", params: {...}, cutoff}}
inline BranchingMeasure measure_from_json(const json& j) {
  std::vector<WeightedAtom> atoms;
  if (j.contains("atoms")) {
    for (const auto& a : j.at("atoms")) {
      atoms.push_back({a.at("weight").get<double>(), point_sequence_from_json(a.at("seq"))});
    }
  }
  std::optional<ClusterFamily> fam;
  if (j.contains("family") && !j.at("family").is_null()) {
    const auto& f = j.at("family");
    const auto kind = f.value("kind", std::string("cluster"));
    if (kind != "cluster") throw Error("measure: unknown family kind '" + kind + "'");
    ClusterFamily c;
    const json p = f.value("params", json::object());
    c.c = p.value("c", c.c);
    c.log_power = p.value("log_power", c.log_power);
    c.value = p.value("value", c.value);
    c.n_min = p.value("n_min", c.n_min);
    c.cutoff = f.value("cutoff", c.cutoff);
    c.sum_cutoff = p.value("sum_cutoff", std::max(c.sum_cutoff, c.cutoff));
    c.closed_form = p.value("closed_form", c.closed_form);
    fam = c;
  }
  return BranchingMeasure(std::move(atoms), fam);
}

inline json to_json(const BranchingTriplet& t) {
  return {{"sigma2", t.sigma2}, {"a", t.a}, {"measure", to_json(t.measure)}};
}

inline BranchingTriplet triplet_from_json(const json& j) {
  BranchingTriplet t{j.at("sigma2").get<double>(), j.at("a").get<double>(),
                     measure_from_json(j.value("measure", json::object()))};
  t.validate();
  return t;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

inline json to_json(const ExtendedValue& v) {
  json j{{"value", v.value}, {"infinite", v.infinite}};
  if (v.infinite) {
    j["last_partial_sum"] = v.last_partial_sum;
    j["growth_rate"] = v.growth_rate;
    if (v.negative) j["negative"] = true;
  } else if (v.error_bound > 0.0) {
    j["error_bound"] = v.error_bound;
  }
  return j;
}

inline json to_json(const ConditionHReport& r) {
  json partial = json::array();
  for (const auto& p : r.partial_sums) partial.push_back({{"n", p.n}, {"value", p.value}});
  return {{"value_H", to_json(r.value_H)},
          {"value_H_Y_part", to_json(r.value_H_Y_part)},
          {"value_H_Ytilde_part", to_json(r.value_H_Ytilde_part)},
          {"value_Ybar_form", to_json(r.value_Ybar_form)},
          {"value_Pr_form", to_json(r.value_Pr_form)},
          {"verdict", r.holds ? "holds" : "fails"},
          {"mass_Ybar_ge_2", r.mass_Ybar_ge_2},
          {"integral_Ybar2", to_json(r.integral_Ybar2)},
          {"partial_sums_H", partial},
          {"tail_method", r.tail_method}};
}

inline json to_json(const StatReport& r) {
  json j{{"estimate", r.estimate}, {"se", r.se}, {"replicas", r.replicas}, {"partial_fraction", r.partial_fraction}};
  if (r.reference) j["reference"] = *r.reference;
  if (r.z) j["z"] = *r.z;
  return j;
}

inline json to_json(const TwoSampleReport& r) {
  return {{"left", to_json(r.left)}, {"right", to_json(r.right)}, {"combined_se", r.combined_se}, {"z", r.z}};
}

inline json to_json(const SpineLevyLaw& l) {
  json jumps = json::array();
  for (const auto& j : l.jumps) jumps.push_back({{"rate", j.rate}, {"size", j.size}});
  return {{"sigma2", l.sigma2}, {"a_hat", l.a_hat}, {"jumps", jumps}, {"total_rate", l.total_rate()},
          {"mean", l.mean()}, {"variance", l.variance()}};
}

inline json to_json(const RenewalModel& R) {
  json j{{"kind", R.kind == RenewalModel::Kind::exact_brownian ? "exact_brownian" : "empirical"},
         {"r0", R.r0}, {"c1", R.c1}, {"c2", R.c2}, {"c_star", R.c_star},
         {"monitoring", R.continuous_monitoring ? "continuous" : "skeleton"}};
  if (R.kind == RenewalModel::Kind::empirical) {
    j["x_max"] = R.x_max;
    j["spacing"] = R.spacing;
    j["skeleton_step"] = R.skeleton_step;
    j["ladder_samples"] = R.ladder_samples;
    j["truncated_fraction"] = R.truncated_fraction;
    json samples = json::array();
    for (double x = 0.0; x <= R.x_max + 1e-9; x += 1.0) samples.push_back({{"x", x}, {"R", R(x)}});
    j["samples"] = samples;
  }
  return j;
}

inline json to_json(const PerpetualVerdict& v) {
  json diag = json::array();
  for (const auto& d : v.mc_diagnostic) diag.push_back({{"T", d.T}, {"mean_increment", d.mean}, {"se", d.se}});
  return {{"criterion_value", to_json(v.criterion_value)},
          {"tail_exponent", v.tail_exponent},
          {"tail_contribution", v.tail_contribution},
          {"classification", to_string(v.classification)},
          {"mc_diagnostic", diag},
          {"mc_trend_agrees", v.mc_trend_agrees},
          {"fraction_growing", v.fraction_growing},
          {"zero_one_one_sided", v.zero_one_one_sided},
          {"exact_sampler", v.exact_sampler},
          {"ess", v.ess}};
}

}  // namespace blp::io
