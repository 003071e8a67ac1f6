#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "blp/branching_sim.hpp"
#include "blp/cumulant.hpp"
#include "blp/io.hpp"
#include "blp/renewal.hpp"
#include "blp/spine_levy.hpp"
#include "blp/spine_sim.hpp"
#include "blp/stats.hpp"

namespace blp {

inline constexpr int kSchemaVersion = 1;

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string triplet_source;  // file path or "preset:<name>"
  double T = 1.0;
  double dt = 1e-3;
  std::size_t reps = 2000;
  std::uint64_t seed = 1;
  std::vector<double> b_list{0.5, 1.0, 2.0};
  SimCaps caps;
  std::string out_dir;
  // Qualitative trend of the truncated derivative martingale.
  std::vector<double> trend_times{2.0, 4.0, 8.0};
  double trend_dt = 1e-2;
  std::size_t trend_reps = 500;
  double trend_b = 1.0;

  void validate() const {
    if (schema_version != kSchemaVersion) throw Error("config: unsupported schema_version");
    if (reps < 1) throw Error("config: reps must be >= 1");
    if (!(dt > 0.0)) throw Error("config: dt must be positive");
    if (!(T > 0.0)) throw Error("config: T must be positive");
    for (double b : b_list) {
      if (!(b > 0.0)) throw Error("config: b values must be positive");
    }
  }
};

inline io::json to_json(const ExperimentConfig& c) {
  return {{"schema_version", c.schema_version}, {"triplet", c.triplet_source}, {"T", c.T}, {"dt", c.dt},
          {"reps", c.reps}, {"seed", c.seed}, {"b", c.b_list},
          {"caps", {{"max_particles", c.caps.max_particles}, {"max_events", c.caps.max_events}}},
          {"out_dir", c.out_dir}, {"trend_times", c.trend_times}, {"trend_dt", c.trend_dt},
          {"trend_reps", c.trend_reps}, {"trend_b", c.trend_b}};
}

inline ExperimentConfig config_from_json(const io::json& j) {
  ExperimentConfig c;
  c.schema_version = j.value("schema_version", 0);
  c.triplet_source = j.value("triplet", c.triplet_source);
  c.T = j.value("T", c.T);
  c.dt = j.value("dt", c.dt);
  c.reps = j.value("reps", c.reps);
  c.seed = j.value("seed", c.seed);
  c.b_list = j.value("b", c.b_list);
  if (j.contains("caps")) {
    c.caps.max_particles = j.at("caps").value("max_particles", c.caps.max_particles);
    c.caps.max_events = j.at("caps").value("max_events", c.caps.max_events);
  }
  c.out_dir = j.value("out_dir", c.out_dir);
  c.trend_times = j.value("trend_times", c.trend_times);
  c.trend_dt = j.value("trend_dt", c.trend_dt);
  c.trend_reps = j.value("trend_reps", c.trend_reps);
  c.trend_b = j.value("trend_b", c.trend_b);
  c.validate();
  return c;
}

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"boundary_bbm", "bbm_supercritical", "heavy_offspring_H_fail",
                                              "heavy_offspring_H_hold", "compound_poisson_walk"};
  return names;
}

inline BranchingTriplet scenario_triplet(const std::string& name) {
  if (name == "boundary_bbm") return presets::boundary_bbm();
  if (name == "bbm_supercritical" || name == "bbm") return presets::bbm();
  if (name == "heavy_offspring_H_fail") return presets::heavy_offspring(2.0);
  if (name == "heavy_offspring_H_hold") return presets::heavy_offspring(4.0);
  if (name == "compound_poisson_walk") return presets::compound_poisson_walk();
  throw Error("unknown scenario '" + name + "'");
}

/// Triplet from a JSON file or "preset:<name>".
inline BranchingTriplet load_triplet(const std::string& source) {
  const std::string tag = "preset:";
  if (source.rfind(tag, 0) == 0) return scenario_triplet(source.substr(tag.size()));
  return io::triplet_from_json(io::read_json_file(source));
}

/// Exact R for a Brownian spine, otherwise the empirical table with its
/// skeleton step tied to the simulation step.
inline RenewalModel renewal_for(const BranchingTriplet& t, double dt, std::uint64_t seed) {
  const SpineLevyLaw law = derive_spine_law(t);
  RenewalConfig rc;
  rc.seed = seed;
  rc.step = std::max(dt, 1e-3);
  return renewal_model(law, rc);
}

// ---------------------------------------------------------------------------
// Martingale series over replicas.

struct MartingaleRow {
  std::size_t rep = 0;
  double t = 0.0;
  double W = 0.0;
  double Z = 0.0;
  std::vector<double> Zb;
  double M = 0.0;
  std::size_t n_particles = 0;
  bool partial = false;
};

/// One row per (replica, observation time). Rows of a partial run past its
/// truncation point are reported with partial = true and NaN values.
inline std::vector<MartingaleRow> simulate_martingales(const BranchingTriplet& t, const RenewalModel& R,
                                                       const std::vector<double>& b_list, double T, double dt,
                                                       const std::vector<double>& times, std::size_t reps,
                                                       std::uint64_t seed, const SimCaps& caps = {}) {
  SimOptions opt;
  opt.T = T;
  opt.dt = dt;
  opt.observe = times;
  opt.record_events = false;
  opt.caps = caps;
  opt.bridge_minimum = R.continuous_monitoring;
  auto per_rep = run_replicas<std::vector<MartingaleRow>>(reps, seed, [&](std::size_t rep, Rng& rng) {
    auto tr = simulate_population(t, opt, rng);
    const auto W = additive_martingale(tr, 1.0, 0.0);
    const auto Z = derivative_martingale(tr);
    const auto M = minimum_position(tr);
    const auto N = population_size(tr);
    std::vector<std::vector<double>> Zb;
    for (double b : b_list) Zb.push_back(truncated_martingale(tr, R, b));
    std::vector<MartingaleRow> rows;
    for (std::size_t k = 0; k < times.size(); ++k) {
      MartingaleRow r;
      r.rep = rep;
      r.t = times[k];
      if (k < tr.snapshots.size() && !tr.partial) {
        r.W = W[k];
        r.Z = Z[k];
        for (const auto& zb : Zb) r.Zb.push_back(zb[k]);
        r.M = M[k];
        r.n_particles = static_cast<std::size_t>(N[k]);
      } else {
        r.partial = true;
        r.W = r.Z = r.M = NAN;
        r.Zb.assign(b_list.size(), NAN);
        r.n_particles = k < tr.snapshots.size() ? tr.snapshots[k].x.size() : 0;
      }
      rows.push_back(std::move(r));
    }
    return rows;
  }, 0x53494d);
  std::vector<MartingaleRow> out;
  for (auto& v : per_rep) {
    for (auto& r : v) out.push_back(std::move(r));
  }
  return out;
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string martingale_csv(const std::vector<MartingaleRow>& rows, const std::vector<double>& b_list) {
  std::ostringstream os;
  os << "rep,t,W,Z";
  for (double b : b_list) os << ",Zb_" << format_number(b);
  os << ",M,n_particles,partial_flag\n";
  for (const auto& r : rows) {
    os << r.rep << ',' << format_number(r.t) << ',' << format_number(r.W) << ',' << format_number(r.Z);
    for (double z : r.Zb) os << ',' << format_number(z);
    os << ',' << format_number(r.M) << ',' << r.n_particles << ',' << (r.partial ? 1 : 0) << '\n';
  }
  return os.str();
}

/// Axis description for the CSV series, for external plotting.
inline io::json plot_manifest(const std::string& csv, const std::vector<double>& b_list) {
  io::json series = io::json::array({"W", "Z", "M", "n_particles"});
  for (double b : b_list) series.push_back("Zb_" + format_number(b));
  return {{"data", csv}, {"x", "t"}, {"group_by", "rep"}, {"series", series}, {"filter", "partial_flag == 0"}};
}

struct MartingaleMeans {
  double t = 0.0;
  StatReport W;
  StatReport Z;
  std::vector<StatReport> Zb;
  double partial_fraction = 0.0;
};

/// Sample means at each time over complete runs, with references 1, 0, R(b).
inline std::vector<MartingaleMeans> martingale_means(const std::vector<MartingaleRow>& rows,
                                                     const std::vector<double>& times,
                                                     const std::vector<double>& b_list, const RenewalModel& R,
                                                     double w_reference = 1.0,
                                                     std::optional<double> z_reference = 0.0) {
  std::vector<MartingaleMeans> out;
  for (double t : times) {
    std::vector<double> W, Z;
    std::vector<std::vector<double>> Zb(b_list.size());
    std::size_t total = 0, partial = 0;
    for (const auto& r : rows) {
      if (r.t != t) continue;
      ++total;
      if (r.partial) {
        ++partial;
        continue;
      }
      W.push_back(r.W);
      Z.push_back(r.Z);
      for (std::size_t k = 0; k < b_list.size(); ++k) Zb[k].push_back(r.Zb[k]);
    }
    MartingaleMeans m;
    m.t = t;
    m.partial_fraction = total ? static_cast<double>(partial) / static_cast<double>(total) : 0.0;
    m.W = summarize(W, w_reference);
    m.Z = summarize(Z, z_reference);
    for (std::size_t k = 0; k < b_list.size(); ++k) m.Zb.push_back(summarize(Zb[k], R(b_list[k])));
    m.W.partial_fraction = m.Z.partial_fraction = m.partial_fraction;
    for (auto& s : m.Zb) s.partial_fraction = m.partial_fraction;
    out.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Qualitative trend.

struct TrendReport {
  std::vector<double> times;
  std::vector<double> median;
  std::vector<double> q25;
  std::vector<double> q75;
  std::vector<double> fraction_zero;
  std::string trend;  // "non-vanishing", "vanishing" or "empty"
  bool qualitative = true;
};

/// Medians and quartiles of a series per time (values[time][rep]). The
/// trend is "vanishing" when the medians fall at every step and end below
/// a tenth of the first one (or at 0), "non-vanishing" otherwise.
inline TrendReport summarize_martingale_limit(const std::vector<std::vector<double>>& values,
                                              const std::vector<double>& times) {
  if (times.size() < 3) throw Error("summarize_martingale_limit: need at least 3 time points");
  TrendReport r;
  r.times = times;
  bool empty = true;
  for (const auto& v : values) empty = empty && v.empty();
  if (empty) {
    r.trend = "empty";
    return r;
  }
  for (const auto& v : values) {
    r.median.push_back(quantile(v, 0.5));
    r.q25.push_back(quantile(v, 0.25));
    r.q75.push_back(quantile(v, 0.75));
    double zeros = 0.0;
    for (double x : v) zeros += x == 0.0 ? 1.0 : 0.0;
    r.fraction_zero.push_back(v.empty() ? 0.0 : zeros / static_cast<double>(v.size()));
  }
  const double first = r.median.front(), last = r.median.back();
  bool falling = true;
  for (std::size_t k = 1; k < r.median.size(); ++k) falling = falling && r.median[k] < r.median[k - 1];
  r.trend = (falling && last < 0.1 * first) || !(last > 0.0) ? "vanishing" : "non-vanishing";
  return r;
}

inline io::json to_json(const TrendReport& r) {
  return {{"times", r.times}, {"median", r.median}, {"q25", r.q25}, {"q75", r.q75},
          {"fraction_zero", r.fraction_zero}, {"trend", r.trend}, {"qualitative", r.qualitative}};
}

// ---------------------------------------------------------------------------
// Scenario runner.

struct CheckResult {
  std::string name;
  bool strict = true;
  bool pass = false;
  io::json detail;
};

struct ScenarioReport {
  std::string name;
  std::vector<CheckResult> checks;
  io::json extras = io::json::object();
  bool all_strict_pass() const {
    for (const auto& c : checks) {
      if (c.strict && !c.pass) return false;
    }
    return true;
  }
  io::json to_json() const {
    io::json arr = io::json::array();
    for (const auto& c : checks) {
      arr.push_back({{"name", c.name}, {"strict", c.strict}, {"pass", c.pass}, {"detail", c.detail}});
    }
    return {{"scenario", name}, {"checks", arr}, {"extras", extras}, {"all_strict_pass", all_strict_pass()},
            {"threshold", "|z| <= 3 per check; with about 20 strict checks per scenario a Bonferroni "
                          "level would be |z| <= 3.5"}};
  }
};

inline bool z_ok(const StatReport& s) { return s.within(3.0); }

/// Runs the check suite of a preset: boundary-case and (H) verdicts,
/// martingale means, many-to-one, spine checks and the trend summary.
/// Writes martingales.csv, plot_manifest.json and report.json when out_dir
/// is set.
inline ScenarioReport run_scenario(const std::string& name, ExperimentConfig cfg) {
  cfg.validate();
  ScenarioReport rep;
  rep.name = name;
  BranchingTriplet t = scenario_triplet(name);
  if (name == "bbm_supercritical" || name == "bbm") {
    const double th = solve_theta_star(t);
    const double residual = th * kappa_derivatives(t, th).first - kappa(t, th);
    rep.checks.push_back({"theta_star", true, std::abs(th - std::sqrt(2.0)) <= 1e-10 && std::abs(residual) <= 1e-10,
                          {{"theta_star", th}, {"expected", std::sqrt(2.0)}, {"residual", residual}}});
    t = to_boundary_case(t);
    rep.extras["normalized_triplet"] = io::to_json(t);
  }
  const BoundaryReport br = is_boundary_case(t);
  rep.checks.push_back({"boundary_case", true, br.yes,
                        {{"kappa1", br.kappa1}, {"dkappa1", br.dkappa1}, {"d2kappa1", br.d2kappa1},
                         {"residual_sigma", br.residual_sigma}, {"residual_drift", br.residual_drift}}});
  const ConditionHReport H = condition_H(t.measure);
  const bool forms_agree = H.value_H.is_finite() == H.value_Ybar_form.is_finite() &&
                           (!H.value_H.is_finite() || H.value_Pr_form.is_finite());
  rep.checks.push_back({"condition_H_forms_agree", true, forms_agree, io::to_json(H)});
  rep.extras["condition_H_verdict"] = H.holds ? "holds" : "fails";

  const RenewalModel R = renewal_for(t, cfg.dt, cfg.seed ^ 0x52);
  rep.extras["renewal"] = io::to_json(R);

  const std::vector<double> times{0.5 * cfg.T, cfg.T};
  const auto rows = simulate_martingales(t, R, cfg.b_list, cfg.T, cfg.dt, times, cfg.reps, cfg.seed, cfg.caps);
  const auto means = martingale_means(rows, times, cfg.b_list, R);
  io::json mj = io::json::array();
  bool means_ok = true;
  for (const auto& m : means) {
    io::json zb = io::json::array();
    for (std::size_t k = 0; k < m.Zb.size(); ++k) {
      zb.push_back({{"b", cfg.b_list[k]}, {"report", io::to_json(m.Zb[k])}});
      means_ok = means_ok && z_ok(m.Zb[k]);
    }
    means_ok = means_ok && z_ok(m.W) && z_ok(m.Z);
    mj.push_back({{"t", m.t}, {"W", io::to_json(m.W)}, {"Z", io::to_json(m.Z)}, {"Zb", zb},
                  {"partial_fraction", m.partial_fraction}});
  }
  rep.checks.push_back({"martingale_means", true, means_ok, mj});

  const auto m2o = many_to_one_check(t, [](double, double) { return 1.0; }, cfg.T, cfg.reps, cfg.seed ^ 0x31,
                                     cfg.dt, std::nullopt, cfg.caps);
  rep.checks.push_back({"many_to_one_count", true, m2o.comparison.within(3.0), io::to_json(m2o.comparison)});

  const auto sb = size_biased_checks(t, cfg.T, cfg.reps, cfg.seed ^ 0x44, cfg.dt);
  for (const auto& c : sb) rep.checks.push_back({"size_biased_" + c.name, true, c.report.within(3.0), io::to_json(c.report)});

  {
    SimOptions o;
    o.T = cfg.T;
    o.dt = cfg.dt;
    o.record_events = false;
    o.caps = cfg.caps;
    auto runs = run_replicas<PopulationTrajectory>(cfg.reps, cfg.seed ^ 0x53, [&](std::size_t, Rng& rng) {
      return simulate_P_hat(t, o, rng);
    });
    Rng pit_rng = make_stream(cfg.seed, 0, 0x504954);
    const auto sel = spine_selection_check(runs, pit_rng);
    rep.checks.push_back({"spine_selection", true, sel.within(3.0),
                          {{"runs", sel.runs}, {"leftmost_observed", sel.leftmost_observed},
                           {"leftmost_expected", sel.leftmost_expected}, {"z_leftmost", sel.z_leftmost},
                           {"pit_mean", sel.pit_mean}, {"z_pit", sel.z_pit}}});
  }

  const double b = cfg.trend_b;
  if (!t.measure.family()) {
    const auto comp = compensator_check(t, R, b, [](double, const AtomView&, std::size_t) { return 1.0; }, cfg.T,
                                        cfg.reps, cfg.seed ^ 0x43, cfg.dt);
    rep.checks.push_back({"compensator", true, z_ok(comp.difference),
                          {{"lhs", io::to_json(comp.lhs)}, {"rhs", io::to_json(comp.rhs)},
                           {"difference", io::to_json(comp.difference)}, {"ess", comp.ess}}});
  } else {
    rep.extras["compensator"] = "not run: the size-biased measure of a cluster family is not expanded";
  }
  const auto q = q_hat_checks(t, R, b, cfg.T, cfg.reps, cfg.seed ^ 0x51, cfg.dt);
  rep.checks.push_back({"q_hat_weight_mean", true, z_ok(q.weight_mean), io::to_json(q.weight_mean)});
  rep.checks.push_back({"q_hat_capped_count", true, q.capped_count.report.within(3.0), io::to_json(q.capped_count.report)});
  rep.checks.push_back({"q_hat_spine_min", true, q.spine_min.report.within(3.0), io::to_json(q.spine_min.report)});
  rep.checks.push_back({"q_hat_spine_end", true, q.spine_end.report.within(3.0), io::to_json(q.spine_end.report)});
  rep.extras["q_hat_ess"] = q.ess;

  // Qualitative: truncated derivative martingale over longer horizons.
  const double Tmax = *std::max_element(cfg.trend_times.begin(), cfg.trend_times.end());
  const auto trows = simulate_martingales(t, R, {b}, Tmax, cfg.trend_dt, cfg.trend_times, cfg.trend_reps,
                                          cfg.seed ^ 0x54, cfg.caps);
  std::vector<std::vector<double>> zb(cfg.trend_times.size()), zz(cfg.trend_times.size());
  for (const auto& r : trows) {
    if (r.partial) continue;
    for (std::size_t k = 0; k < cfg.trend_times.size(); ++k) {
      if (r.t == cfg.trend_times[k]) {
        zb[k].push_back(r.Zb[0]);
        zz[k].push_back(r.Z);
      }
    }
  }
  const auto trend = summarize_martingale_limit(zb, cfg.trend_times);
  rep.checks.push_back({"trend_Zb", false, true, to_json(trend)});
  rep.extras["trend_Z"] = to_json(summarize_martingale_limit(zz, cfg.trend_times));

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    const auto dir = std::filesystem::path(cfg.out_dir);
    io::write_text_file((dir / "martingales.csv").string(), martingale_csv(rows, cfg.b_list));
    io::write_text_file((dir / "plot_manifest.json").string(),
                        plot_manifest("martingales.csv", cfg.b_list).dump(2) + "\n");
    io::json full = rep.to_json();
    full["config"] = to_json(cfg);
    io::write_text_file((dir / "report.json").string(), full.dump(2) + "\n");
  }
  return rep;
}

}  // namespace blp
