#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "support.hpp"
#include "tlinfer/data/csv.hpp"

using namespace tlinfer;

namespace {

struct Outcome {
  int rc = 0;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "tlinfer");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.rc = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = testkit::temp_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    data = (dir / "step.csv").string();
    ASSERT_EQ(run({"gen-data", "step-threshold", "--n", "20", "--T", "6", "--seed", "1", "--out", data}).rc, 0);
  }
  std::filesystem::path dir;
  std::string data;
};

}  // namespace

TEST(CliUsage, MissingSubcommandOrSeed) {
  auto o = run({});
  EXPECT_EQ(o.rc, 2);
  EXPECT_EQ(o.err.rfind("error:", 0), 0u);
  o = run({"gen-data", "cct"});
  EXPECT_EQ(o.rc, 2);
  EXPECT_EQ(o.err.rfind("error:", 0), 0u);
  EXPECT_EQ(run({"--help"}).rc, 0);
}

TEST(CliUsage, UnknownKindIsRuntimeError) {
  const auto o = run({"gen-data", "sawtooth", "--seed", "1"});
  EXPECT_EQ(o.rc, 1);
  EXPECT_EQ(o.err.rfind("error: unknown dataset kind", 0), 0u);
  EXPECT_EQ(count_lines(o.err), 1u);
}

TEST(CliGen, IntervalTracesHaveSevenSteps) {
  const auto o = run({"gen-data", "interval", "--n", "10", "--seed", "4"});
  ASSERT_EQ(o.rc, 0);
  std::istringstream in(o.out);
  const auto ds = data::parse_csv(in);
  ASSERT_EQ(ds.size(), 10u);
  for (const auto& tr : ds.traces) EXPECT_EQ(tr.length(), 7u);
  EXPECT_EQ(run({"gen-data", "interval", "--T", "9", "--seed", "4"}).rc, 1);
}

TEST(CliGen, LengthOptionAndDeterminism) {
  const auto a = run({"gen-data", "cct", "--n", "4", "--T", "12", "--seed", "9"});
  const auto b = run({"gen-data", "cct", "--n", "4", "--length", "12", "--seed", "9"});
  ASSERT_EQ(a.rc, 0);
  EXPECT_EQ(a.out, b.out);
  std::istringstream in(a.out);
  EXPECT_EQ(data::parse_csv(in).traces.front().length(), 12u);
}

TEST_F(Cli, TrainEvalInspectPipeline) {
  const auto model = (dir / "model.json").string();
  const auto report = (dir / "report.json").string();
  const auto o = run({"train", "--data", data, "--length", "2", "--seed", "3", "--max-epochs", "200", "--out", report,
                      "--model-out", model});
  ASSERT_EQ(o.rc, 0) << o.err;
  const auto j = cli::Json::parse(slurp(report));
  const auto formula = j.at("formula").get<std::string>();
  EXPECT_EQ(o.out.substr(0, o.out.find('\n')), formula);
  EXPECT_EQ(j.at("test_mcr").get<double>(), 0.0);

  const auto ev = run({"eval", formula, data});
  ASSERT_EQ(ev.rc, 0) << ev.err;
  EXPECT_EQ(ev.out, "0.0\n");

  const auto ins = run({"inspect", model, "--json"});
  ASSERT_EQ(ins.rc, 0) << ins.err;
  const auto ij = cli::Json::parse(ins.out);
  EXPECT_EQ(ij.at("formula").get<std::string>(), formula);
  EXPECT_LE(ij.at("formula_length").get<std::size_t>(), 2u);
  EXPECT_EQ(ij.at("embedded_structures").get<std::size_t>(), 4u);
}

TEST_F(Cli, TrainReportsAreReproducible) {
  auto once = [&](const std::string& name) {
    const auto path = (dir / name).string();
    EXPECT_EQ(run({"train", "--data", data, "--length", "3", "--seed", "5", "--max-epochs", "80", "--out", path}).rc, 0);
    auto j = cli::Json::parse(slurp(path));
    j.erase("wall_seconds");
    return j.dump();
  };
  EXPECT_EQ(once("a.json"), once("b.json"));
}

TEST_F(Cli, TrainArgumentErrors) {
  auto o = run({"train", "--data", data, "--seed", "1"});
  EXPECT_EQ(o.rc, 1);
  EXPECT_NE(o.err.find("exactly one"), std::string::npos);
  o = run({"train", "--data", data, "--length", "2", "--seed", "1", "--head", "identity"});
  EXPECT_EQ(o.rc, 1);
  EXPECT_NE(o.err.find("conflicts"), std::string::npos);
  o = run({"train", "--data", (dir / "missing.csv").string(), "--length", "2", "--seed", "1"});
  EXPECT_EQ(o.rc, 1);
  o = run({"train", "--data", data, "--length", "9", "--seed", "1"});
  EXPECT_EQ(o.rc, 1);
  EXPECT_EQ(run({"train", "--data", data, "--length", "2"}).rc, 2);
}

TEST_F(Cli, MonitorRows) {
  const auto o = run({"monitor", "x0 >= 0.0", data});
  ASSERT_EQ(o.rc, 0) << o.err;
  std::istringstream in(o.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "trace_id,robustness,sign");
  std::size_t rows = 0, positive = 0;
  while (std::getline(in, line)) {
    ++rows;
    positive += line.ends_with(",+1") ? 1 : 0;
  }
  EXPECT_EQ(rows, 20u);
  EXPECT_EQ(positive, 10u);
  const auto bad = run({"monitor", "G (x0 <= ", data});
  EXPECT_EQ(bad.rc, 1);
  EXPECT_EQ(bad.err.rfind("error:", 0), 0u);
}

TEST_F(Cli, EnumerateExhaustive) {
  const auto o = run({"enumerate", "--data", data, "--no-early-exit", "--json"});
  ASSERT_EQ(o.rc, 0) << o.err;
  const auto j = cli::Json::parse(o.out);
  EXPECT_EQ(j.at("mcr").get<double>(), 0.0);
  EXPECT_EQ(j.at("structures_tried").get<std::size_t>(), 8u);
  EXPECT_FALSE(j.at("early_exit").get<bool>());
  const auto ev = run({"eval", j.at("formula").get<std::string>(), data});
  EXPECT_EQ(ev.out, "0.0\n");
}

TEST_F(Cli, ContinuousLabelsUseIdentityHead) {
  const auto o = run({"train", "--data", data, "--length", "2", "--seed", "2", "--max-epochs", "30",
                      "--continuous-labels", "G (x0 >= 0.0)", "--json"});
  ASSERT_EQ(o.rc, 0) << o.err;
  const auto j = cli::Json::parse(o.out);
  EXPECT_EQ(j.at("label_kind").get<std::string>(), "continuous");
  EXPECT_GT(j.at("label_scale").get<double>(), 0.0);
}
