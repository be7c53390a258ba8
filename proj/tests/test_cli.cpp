#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(CPSEG_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

// value of a "key<TAB>value" line in TSV output
std::string field(const std::string& out, const std::string& key) {
  std::istringstream in(out);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + "\t", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

fs::path scratch(const std::string& name, const std::string& body) {
  const auto dir = fs::temp_directory_path() / "cpseg_cli_test";
  fs::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p) << body;
  return p;
}

std::string step_file() {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N;
  std::ostringstream s;
  for (int t = 0; t < 200; ++t) s << (t < 100 ? 0.0 : 3.0) + N(rng) << "\n";
  return s.str();
}

}  // namespace

TEST(Cli, ThresholdExample) {
  const auto r = run("threshold --stat lr --m 500 --m0 1 --m1 50 --alpha 0.05");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NEAR(std::stod(field(r.out, "b")), 4.71, 0.02) << r.out;
}

TEST(Cli, JsonOutputParses) {
  const auto r = run("--json pvalue --stat lr --m 500 --b 4.83");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("command"), "pvalue");
  EXPECT_NEAR(j.at("results").at("p").get<double>(), 0.05, 0.003);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("threshold --stat bogus --m 100").code, 2);
}

TEST(Cli, ParseErrorOnBadLine) {
  const auto f = scratch("bad.txt", "1\n2\nabc\n4\n");
  EXPECT_EQ(run("segment " + f.string() + " --threshold 4").code, 3);
}

TEST(Cli, ValidationError) {
  EXPECT_EQ(run("threshold --stat lr --m 2").code, 4);
  EXPECT_EQ(run("pvalue --stat lr --m 100 --b -1").code, 4);
}

TEST(Cli, SegmentFindsStep) {
  const auto f = scratch("step.txt", step_file());
  const auto r = run("--json segment " + f.string() + " --alpha 0.05");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  const auto& det = j.at("results").at("detections");
  ASSERT_EQ(det.size(), 1u) << r.out;
  EXPECT_NEAR(det[0].at("tau").get<int>(), 100, 3);
}

TEST(Cli, ConstantInputWarnsWithoutDetections) {
  std::string body;
  for (int i = 0; i < 50; ++i) body += "2.5\n";
  const auto f = scratch("const.txt", body);
  const auto r = run("segment " + f.string() + " --threshold 4");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("warning"), std::string::npos);
  EXPECT_EQ(r.out.find("# detections"), std::string::npos);
}

TEST(Cli, ReplayReproducesResults) {
  const auto f = scratch("step2.txt", step_file());
  const auto first = run("--json --seed 5 segment " + f.string() + " --procedure wbs --threshold 4.4");
  ASSERT_EQ(first.code, 0);
  const auto saved = scratch("run.json", first.out);
  const auto again = run("--json replay " + saved.string());
  ASSERT_EQ(again.code, 0) << again.out;
  EXPECT_EQ(nlohmann::json::parse(first.out).at("results"), nlohmann::json::parse(again.out).at("results"));
}

TEST(Cli, SeedDeterminesSimulation) {
  const std::string a = "--json --seed 3 simulate --mode calibrate --procedures lr --m 100 --reps 20";
  const auto r1 = run(a), r2 = run(a);
  ASSERT_EQ(r1.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r1.out).at("results"), nlohmann::json::parse(r2.out).at("results"));
}

TEST(Cli, PowerAndConfidence) {
  const auto p = run("power --delta 0.75 --h1 138 --h2 61 --b 4.68");
  ASSERT_EQ(p.code, 0);
  EXPECT_NEAR(std::stod(field(p.out, "local")), 0.77, 0.03);
  const auto c = run("confidence --deltas 2,2");
  ASSERT_EQ(c.code, 0);
  EXPECT_NEAR(std::stod(field(c.out, "b")), 6.14, 0.05);
}
