#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blp/harness.hpp"
#include "blp/io.hpp"
#include "blp/perpetual.hpp"

namespace {

using blp::io::json;

struct Globals {
  std::uint64_t seed = 1;
  std::size_t reps = 2000;
  std::string out_dir;
  std::string format = "json";
};

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

std::string out_path(const Globals& g, const std::string& file) {
  if (g.out_dir.empty()) return file;
  std::filesystem::create_directories(g.out_dir);
  return (std::filesystem::path(g.out_dir) / file).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branching Levy process laboratory"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--reps", g.reps, "Replicas")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for output files");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

  int status = 0;

  std::string measure_file;
  auto* check_h = app.add_subcommand("check-h", "Evaluate condition (H) and its equivalent forms");
  check_h->add_option("--measure", measure_file, "Branching measure JSON, or preset:<name>")->required();
  check_h->callback([&] {
    blp::BranchingMeasure m;
    if (measure_file.rfind("preset:", 0) == 0) m = blp::load_triplet(measure_file).measure;
    else m = blp::io::measure_from_json(blp::io::read_json_file(measure_file));
    const auto r = blp::condition_H(m);
    emit(blp::io::to_json(r));
    const bool agree = r.value_H.is_finite() == r.value_Ybar_form.is_finite() &&
                       (!r.value_H.is_finite() || r.value_Pr_form.is_finite());
    if (!agree) status = 1;
  });

  std::string triplet_file;
  auto add_triplet = [&](CLI::App* sub) {
    sub->add_option("--triplet", triplet_file, "Triplet JSON, or preset:<name>")->required();
  };

  auto* theta = app.add_subcommand("theta-star", "Solve theta kappa'(theta) = kappa(theta)");
  add_triplet(theta);
  theta->callback([&] {
    const auto t = blp::load_triplet(triplet_file);
    const double th = blp::solve_theta_star(t);
    const double k = blp::kappa(t, th);
    const double residual = th * blp::kappa_derivatives(t, th).first - k;
    emit({{"theta_star", th}, {"kappa", k}, {"residual", residual}});
    if (std::abs(residual) > 1e-10) status = 1;
  });

  std::string normalized_out;
  auto* normalize = app.add_subcommand("normalize", "Transform to the boundary case");
  add_triplet(normalize);
  normalize->add_option("-o,--output", normalized_out, "Output triplet JSON")->required();
  normalize->callback([&] {
    const auto t = blp::to_boundary_case(blp::load_triplet(triplet_file));
    blp::io::write_text_file(out_path(g, normalized_out), blp::io::to_json(t).dump(2) + "\n");
    const auto b = blp::is_boundary_case(t);
    emit({{"triplet", blp::io::to_json(t)}, {"boundary_case", b.yes}, {"kappa1", b.kappa1},
          {"dkappa1", b.dkappa1}, {"d2kappa1", b.d2kappa1}});
    if (!b.yes) status = 1;
  });

  double theta_value = 1.0;
  auto* kap = app.add_subcommand("kappa", "Cumulant and its derivatives");
  add_triplet(kap);
  kap->add_option("--theta", theta_value, "theta > 0")->required();
  kap->callback([&] {
    const auto t = blp::load_triplet(triplet_file);
    const auto k = blp::try_kappa(t, theta_value);
    json j{{"theta", theta_value}};
    if (!k) {
      j["kappa"] = {{"infinite", true}};
    } else {
      const auto d = blp::kappa_derivatives(t, theta_value);
      j["kappa"] = *k;
      j["dkappa"] = d.first;
      j["d2kappa"] = d.second;
    }
    const auto b = blp::is_boundary_case(t);
    j["boundary_case"] = b.yes;
    emit(j);
  });

  auto* spine = app.add_subcommand("spine-law", "Spine Levy law from the many-to-one formula");
  add_triplet(spine);
  spine->callback([&] {
    const auto t = blp::load_triplet(triplet_file);
    const auto law = blp::derive_spine_law(t);
    json j = blp::io::to_json(law);
    json psi = json::array();
    for (double r : {-3.0, -1.0, -0.1, 0.0, 0.1, 1.0, 3.0}) {
      const auto p = blp::psi(law, r);
      const auto k = blp::kappa_complex(t, {1.0, r});
      psi.push_back({{"r", r}, {"re", p.real()}, {"im", p.imag()}, {"kappa_gap", std::abs(p - k)}});
    }
    j["psi"] = psi;
    emit(j);
  });

  bool empirical = false;
  double harm_t = 1.0;
  auto* renewal = app.add_subcommand("renewal", "Renewal function of the spine and its harmonicity check");
  add_triplet(renewal);
  renewal->add_flag("--empirical", empirical, "Force the empirical ladder-height table");
  renewal->add_option("--t", harm_t, "Horizon of the harmonicity check")->capture_default_str();
  renewal->callback([&] {
    const auto t = blp::load_triplet(triplet_file);
    const auto law = blp::derive_spine_law(t);
    blp::RenewalConfig rc;
    rc.seed = g.seed;
    rc.force_empirical = empirical;
    const auto R = blp::renewal_model(law, rc);
    json j = blp::io::to_json(R);
    json checks = json::array();
    for (double x : {0.5, 1.0, 2.0}) {
      const auto h = blp::harmonicity_check(law, R, x, harm_t, g.reps, g.seed + 1);
      checks.push_back({{"x", x}, {"t", harm_t}, {"report", blp::io::to_json(h)}});
      if (!h.within(3.0)) status = 1;
    }
    j["harmonicity"] = checks;
    emit(j);
  });

  std::string f_spec = "(1+y)^-3";
  double x_start = 1.0;
  auto* perpetual = app.add_subcommand("perpetual", "Classify a perpetual integral under the conditioned law");
  add_triplet(perpetual);
  perpetual->add_option("--f", f_spec, "zero, exp or (1+y)^-p")->capture_default_str();
  perpetual->add_option("--x", x_start, "Starting point x > 0")->capture_default_str();
  perpetual->callback([&] {
    const auto t = blp::load_triplet(triplet_file);
    const auto law = blp::derive_spine_law(t);
    blp::RenewalConfig rc;
    rc.seed = g.seed;
    const auto R = blp::renewal_model(law, rc);
    blp::PerpetualConfig pc;
    pc.paths = g.reps;
    pc.seed = g.seed;
    const auto fn = blp::parse_perpetual_function(f_spec);
    const auto v = blp::perpetual_classify(law, R, fn.f, x_start, pc);
    json j = blp::io::to_json(v);
    j["f"] = fn.name;
    emit(j);
    if (v.classification == blp::PerpetualVerdict::Kind::inconclusive) status = 1;
  });

  double T = 1.0, dt = 1e-3;
  std::vector<double> b_list{0.5, 1.0, 2.0};
  std::string csv_out;
  auto* simulate = app.add_subcommand("simulate", "Simulate the population and its martingales");
  add_triplet(simulate);
  simulate->add_option("--T", T, "Horizon")->capture_default_str();
  simulate->add_option("--dt", dt, "Grid step")->capture_default_str();
  simulate->add_option("--b", b_list, "Truncation levels")->delimiter(',');
  simulate->add_option("--out", csv_out, "CSV output file");
  simulate->callback([&] {
    const auto t = blp::load_triplet(triplet_file);
    const auto R = blp::renewal_for(t, dt, g.seed ^ 0x52);
    const std::vector<double> times{T};
    const auto rows = blp::simulate_martingales(t, R, b_list, T, dt, times, g.reps, g.seed);
    const std::string csv = blp::martingale_csv(rows, b_list);
    if (!csv_out.empty()) {
      blp::io::write_text_file(out_path(g, csv_out), csv);
      blp::io::write_text_file(out_path(g, csv_out + ".manifest.json"),
                               blp::plot_manifest(csv_out, b_list).dump(2) + "\n");
    }
    if (g.format == "csv") {
      std::cout << csv;
      return;
    }
    const bool boundary = blp::is_boundary_case(t).yes;
    const auto means = blp::martingale_means(rows, times, b_list, R);
    json j = json::array();
    for (const auto& m : means) {
      json zb = json::array();
      for (std::size_t k = 0; k < m.Zb.size(); ++k) {
        zb.push_back({{"b", b_list[k]}, {"report", blp::io::to_json(m.Zb[k])}});
        if (boundary && !m.Zb[k].within(3.0)) status = 1;
      }
      if (boundary && (!m.W.within(3.0) || !m.Z.within(3.0))) status = 1;
      j.push_back({{"t", m.t}, {"W", blp::io::to_json(m.W)}, {"Z", blp::io::to_json(m.Z)}, {"Zb", zb},
                   {"partial_fraction", m.partial_fraction}});
    }
    emit({{"boundary_case", boundary}, {"means", j}});
  });

  double b_single = 1.0;
  auto* spine_check = app.add_subcommand("spine-check", "Spinal decomposition checks");
  add_triplet(spine_check);
  spine_check->add_option("--b", b_single, "Truncation level")->capture_default_str();
  spine_check->add_option("--T", T, "Horizon")->capture_default_str();
  spine_check->add_option("--dt", dt, "Grid step")->capture_default_str();
  spine_check->callback([&] {
    const auto t = blp::load_triplet(triplet_file);
    const auto R = blp::renewal_for(t, dt, g.seed ^ 0x52);
    json j;
    bool ok = true;
    json sb = json::array();
    for (const auto& c : blp::size_biased_checks(t, T, g.reps, g.seed, dt)) {
      sb.push_back({{"name", c.name}, {"report", blp::io::to_json(c.report)}});
      ok = ok && c.report.within(3.0);
    }
    j["size_biased"] = sb;
    const auto q = blp::q_hat_checks(t, R, b_single, T, g.reps, g.seed ^ 0x51, dt);
    j["q_hat"] = {{"weight_mean", blp::io::to_json(q.weight_mean)}, {"ess", q.ess},
                  {"capped_count", blp::io::to_json(q.capped_count.report)},
                  {"spine_min", blp::io::to_json(q.spine_min.report)},
                  {"spine_end", blp::io::to_json(q.spine_end.report)},
                  {"min_level", q.min_level}, {"infinite_horizon_min_law", q.exact_min_law}};
    ok = ok && q.weight_mean.within(3.0) && q.capped_count.report.within(3.0) && q.spine_min.report.within(3.0) &&
         q.spine_end.report.within(3.0) && q.ess >= 100.0;
    if (!t.measure.family()) {
      const auto c = blp::compensator_check(t, R, b_single, [](double, const blp::AtomView&, std::size_t) { return 1.0; },
                                            T, g.reps, g.seed ^ 0x43, dt);
      j["compensator"] = {{"lhs", blp::io::to_json(c.lhs)}, {"rhs", blp::io::to_json(c.rhs)},
                          {"difference", blp::io::to_json(c.difference)}, {"ess", c.ess}};
      ok = ok && c.difference.within(3.0);
    }
    emit(j);
    if (!ok) status = 1;
  });

  std::string scenario_name, config_file;
  auto* scenario = app.add_subcommand("scenario", "Run the full check suite of a preset");
  scenario->add_option("name", scenario_name, "Preset name")
      ->required()
      ->check(CLI::IsMember(blp::scenario_names()));
  scenario->add_option("--config", config_file, "Experiment config JSON");
  scenario->callback([&] {
    blp::ExperimentConfig cfg;
    if (!config_file.empty()) cfg = blp::config_from_json(blp::io::read_json_file(config_file));
    if (app.count("--seed")) cfg.seed = g.seed;
    if (app.count("--reps")) cfg.reps = g.reps;
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
    cfg.triplet_source = "preset:" + scenario_name;
    const auto r = blp::run_scenario(scenario_name, cfg);
    emit(r.to_json());
    if (!r.all_strict_pass()) status = 1;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const blp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return status;
}
