#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "blp/harness.hpp"

namespace {

struct CliResult {
  int status = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const char* exe = std::getenv("BLP_CLI");
  if (!exe) return {};
  const std::string cmd = std::string(exe) + " " + args + " 2>/dev/null";
  CliResult r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("blp_test_" + std::to_string(::getpid()));
  std::filesystem::create_directories(d);
  return d / name;
}

}  // namespace

TEST(Config, DefaultsValidate) {
  blp::ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  auto back = blp::config_from_json(blp::to_json(c));
  EXPECT_EQ(back.reps, c.reps);
  EXPECT_EQ(back.b_list, c.b_list);
  EXPECT_EQ(back.trend_times, c.trend_times);
}

TEST(Config, Rejections) {
  using blp::io::json;
  EXPECT_THROW(blp::config_from_json(json::parse(R"({"T":1})")), blp::Error);
  EXPECT_THROW(blp::config_from_json(json::parse(R"({"schema_version":2})")), blp::Error);
  EXPECT_THROW(blp::config_from_json(json::parse(R"({"schema_version":1,"reps":0})")), blp::Error);
  EXPECT_THROW(blp::config_from_json(json::parse(R"({"schema_version":1,"dt":-0.1})")), blp::Error);
  EXPECT_THROW(blp::config_from_json(json::parse(R"({"schema_version":1,"b":[1,0]})")), blp::Error);
  auto c = blp::config_from_json(json::parse(R"({"schema_version":1,"reps":7,"b":[3]})"));
  EXPECT_EQ(c.reps, 7u);
  EXPECT_EQ(c.b_list, std::vector<double>{3.0});
}

TEST(Triplets, Sources) {
  for (const auto& n : blp::scenario_names()) EXPECT_NO_THROW(blp::load_triplet("preset:" + n));
  EXPECT_THROW(blp::load_triplet("preset:nope"), blp::Error);
  EXPECT_THROW(blp::load_triplet("/nonexistent/triplet.json"), blp::Error);
  const auto path = scratch("cp.json");
  blp::io::write_text_file(path.string(), blp::io::to_json(blp::presets::compound_poisson_walk()).dump());
  auto t = blp::load_triplet(path.string());
  EXPECT_EQ(t.a, std::exp(1.0));
}

TEST(Trend, Guards) {
  EXPECT_THROW(blp::summarize_martingale_limit({{1.0}, {1.0}}, {1.0, 2.0}), blp::Error);
  auto e = blp::summarize_martingale_limit({{}, {}, {}}, {1.0, 2.0, 4.0});
  EXPECT_EQ(e.trend, "empty");
}

TEST(Trend, Labels) {
  const std::vector<double> times{2.0, 4.0, 8.0};
  auto v = blp::summarize_martingale_limit({{1.0, 1.0, 1.0}, {0.3, 0.3, 0.3}, {0.05, 0.05, 0.05}}, times);
  EXPECT_EQ(v.trend, "vanishing");
  auto z = blp::summarize_martingale_limit({{1.0, 2.0}, {0.5, 1.0}, {0.0, 0.0}}, times);
  EXPECT_EQ(z.trend, "vanishing");
  EXPECT_EQ(z.fraction_zero.back(), 1.0);
  auto s = blp::summarize_martingale_limit({{0.7, 0.8}, {0.6, 0.7}, {0.5, 0.6}}, times);
  EXPECT_EQ(s.trend, "non-vanishing");
  EXPECT_TRUE(s.qualitative);
}

TEST(Csv, Format) {
  EXPECT_EQ(blp::format_number(0.1), "0.10000000000000001");
  EXPECT_EQ(blp::format_number(2.0), "2");
  auto t = blp::presets::boundary_bbm();
  auto R = blp::RenewalModel::brownian();
  auto rows = blp::simulate_martingales(t, R, {0.5, 1.0}, 1.0, 0.01, {0.5, 1.0}, 3, 1);
  EXPECT_EQ(rows.size(), 6u);
  auto csv = blp::martingale_csv(rows, {0.5, 1.0});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "rep,t,W,Z,Zb_0.5,Zb_1,M,n_particles,partial_flag");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  auto m = blp::plot_manifest("m.csv", {0.5});
  EXPECT_EQ(m["data"], "m.csv");
}

TEST(Csv, Deterministic) {
  auto t = blp::presets::boundary_bbm();
  auto R = blp::RenewalModel::brownian();
  auto a = blp::martingale_csv(blp::simulate_martingales(t, R, {1.0}, 1.0, 0.01, {1.0}, 50, 9), {1.0});
  auto b = blp::martingale_csv(blp::simulate_martingales(t, R, {1.0}, 1.0, 0.01, {1.0}, 50, 9), {1.0});
  auto c = blp::martingale_csv(blp::simulate_martingales(t, R, {1.0}, 1.0, 0.01, {1.0}, 50, 10), {1.0});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Means, References) {
  auto t = blp::presets::boundary_bbm();
  auto R = blp::RenewalModel::brownian();
  auto rows = blp::simulate_martingales(t, R, {2.0}, 1.0, 0.01, {1.0}, 2000, 3);
  auto m = blp::martingale_means(rows, {1.0}, {2.0}, R);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(*m[0].W.reference, 1.0);
  EXPECT_EQ(*m[0].Zb[0].reference, 2.0);
  EXPECT_TRUE(m[0].W.within(3.0));
  EXPECT_TRUE(m[0].Zb[0].within(3.0));
}

TEST(Cli, ThetaStar) {
  if (!std::getenv("BLP_CLI")) GTEST_SKIP() << "BLP_CLI not set";
  auto r = run_cli("theta-star --triplet preset:bbm");
  EXPECT_EQ(r.status, 0);
  auto j = blp::io::json::parse(r.out);
  EXPECT_NEAR(j["theta_star"].get<double>(), std::sqrt(2.0), 1e-10);
}

TEST(Cli, SimulateIsByteIdentical) {
  if (!std::getenv("BLP_CLI")) GTEST_SKIP() << "BLP_CLI not set";
  const std::string args = "--seed 5 --reps 20 --format csv simulate --triplet preset:boundary_bbm --T 0.5 --dt 0.01 --b 0.5,1";
  auto a = run_cli(args), b = run_cli(args);
  EXPECT_EQ(a.status, 0);
  EXPECT_FALSE(a.out.empty());
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, Errors) {
  if (!std::getenv("BLP_CLI")) GTEST_SKIP() << "BLP_CLI not set";
  EXPECT_EQ(run_cli("theta-star --triplet preset:nope").status, 2);
  EXPECT_EQ(run_cli("kappa --triplet preset:bbm --theta abc").status, 2);
  EXPECT_EQ(run_cli("no-such-command").status, 2);
}
