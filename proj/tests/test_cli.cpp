#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "svp/cli.hpp"

namespace svp {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "svp");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("svp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, SolveWritesPolicy) {
  const CliRun r = run({"solve", "--env", "chain", "--k", "5", "--seed", "0", "--gamma", "0.9", "--zeta", "0.05", "--algo",
                     "near-greedy-vi", "--out", path("p.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json doc = Json::parse(read_text_file(path("p.json")));
  EXPECT_TRUE(doc["converged"].get<bool>());
  const SetValuedPolicy policy = policy_from_json(doc);
  EXPECT_EQ(policy.sets.size(), 5u);
  const TabularMdp mdp = build_chain(5, 0, 0.9);
  EXPECT_EQ(policy.sets, near_greedy_construct_dag(mdp, value_iteration(mdp).v, 0.05).sets);
}

TEST_F(CliTest, SolveThenEvaluate) {
  ASSERT_EQ(run({"solve", "--env", "chain", "--seed", "0", "--zeta", "0.05", "--out", path("p.json")}).code, 0);
  const CliRun r = run({"evaluate", "--env", "chain", "--seed", "0", "--policy", path("p.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json doc = Json::parse(r.out);
  EXPECT_TRUE(doc["zeta_optimal"].get<bool>());
  EXPECT_GE(doc["worst_ratio"].get<double>(), 0.95 - 1e-9);
}

TEST_F(CliTest, NonConvergenceWarns) {
  const CliRun r = run({"solve", "--env", "appendix-c", "--zeta", "0.2"});
  ASSERT_EQ(r.code, 0);
  EXPECT_FALSE(Json::parse(r.out)["converged"].get<bool>());
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, GridRowCount) {
  const CliRun r = run({"grid", "--env", "cyclic-chain", "--seed", "0", "--gammas", "0.5,0.9", "--zetas", "0.05,0.2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 5);
  const CliRun json = run({"grid", "--env", "chain", "--seed", "0", "--gammas", "0.9", "--zetas", "0,1", "--format", "json"});
  EXPECT_EQ(Json::parse(json.out)["cells"].size(), 2u);
}

TEST_F(CliTest, LearnRequiresSeed) {
  const CliRun r = run({"learn", "--env", "chain", "--episodes", "100"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--seed"), std::string::npos);
  EXPECT_EQ(run({"ope", "--episodes", "10"}).code, 1);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"solve", "--zeta", "2"}).code, 1);
  EXPECT_EQ(run({"solve", "--algo", "magic"}).code, 1);
  EXPECT_EQ(run({"solve", "--env", "maze"}).code, 1);
  EXPECT_EQ(run({"compare", "--zetas", "0.1", "--format", "xml"}).code, 1);
  EXPECT_EQ(run({"solve", "--format", "csv"}).code, 1);
  EXPECT_EQ(run({"grid", "--zetas", "0.1"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, RuntimeErrors) {
  EXPECT_EQ(run({"solve", "--env-file", path("missing.json")}).code, 2);
  write_text_file(path("bad.json"), "{\"states\": ");
  EXPECT_NE(run({"solve", "--env-file", path("bad.json")}).code, 0);
}

TEST_F(CliTest, EnvFileRoundTrip) {
  write_text_file(path("mdp.json"), mdp_to_json(build_appendix_c_mdp()).dump());
  const CliRun r = run({"solve", "--env-file", path("mdp.json"), "--algo", "value-iteration"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("0.9"), std::string::npos);
}

TEST_F(CliTest, OracleAndCompare) {
  const CliRun oracle = run({"oracle", "--env", "chain", "--seed", "0", "--zetas", "0,1"});
  ASSERT_EQ(oracle.code, 0) << oracle.err;
  const Json doc = Json::parse(oracle.out);
  ASSERT_EQ(doc.size(), 2u);
  EXPECT_EQ(doc[0]["oracle_size"].get<int>(), 4);
  EXPECT_EQ(doc[1]["oracle_size"].get<int>(), 16);
  const CliRun compare = run({"compare", "--env", "chain", "--seed", "0", "--zetas", "0,0.1"});
  ASSERT_EQ(compare.code, 0);
  EXPECT_EQ(std::count(compare.out.begin(), compare.out.end(), '\n'), 1 + 2 * 5);
}

TEST_F(CliTest, LearnOnlineAndOffline) {
  const CliRun online = run({"learn", "--env", "chain", "--seed", "0", "--episodes", "20000", "--zeta", "0.05"});
  ASSERT_EQ(online.code, 0) << online.err;
  EXPECT_EQ(policy_from_json(Json::parse(online.out)).sets.size(), 5u);

  const TabularMdp mdp = build_chain(5, 0, 0.9);
  const StochasticPolicy uniform(5, std::vector<double>(4, 0.25));
  write_text_file(path("data.jsonl"), episodes_to_jsonl(generate_episodes(MdpSimulator(mdp), uniform, 2000, 1)));
  const CliRun offline = run({"learn", "--env", "chain", "--seed", "0", "--algo", "offline", "--data", path("data.jsonl"),
                           "--episodes", "20000"});
  ASSERT_EQ(offline.code, 0) << offline.err;
  EXPECT_EQ(run({"learn", "--env", "chain", "--seed", "0", "--algo", "offline"}).code, 1);
}

TEST_F(CliTest, SameSeedSameBytes) {
  const std::vector<std::vector<std::string>> commands = {
      {"solve", "--env", "chain", "--seed", "3", "--zeta", "0.1"},
      {"learn", "--env", "chain", "--seed", "3", "--episodes", "5000"},
      {"learn", "--env", "frozen-lake", "--seed", "3", "--episodes", "2000", "--algo", "q-based-td"},
      {"grid", "--env", "cyclic-chain", "--seed", "3", "--gammas", "0.8,0.9", "--zetas", "0.05,0.2", "--workers", "2"},
      {"compare", "--env", "chain", "--seed", "3", "--zetas", "0.05", "--format", "json"},
      {"oracle", "--env", "cyclic-chain", "--seed", "3", "--zeta", "0.1"},
      {"ope", "--seed", "3", "--episodes", "2000", "--behavior-episodes", "500", "--draws", "20"},
  };
  for (const auto& args : commands) {
    const CliRun first = run(args);
    const CliRun second = run(args);
    ASSERT_EQ(first.code, 0) << args[0] << ": " << first.err;
    EXPECT_EQ(first.out, second.out) << args[0];
    EXPECT_FALSE(first.out.empty());
  }
}

}  // namespace
}  // namespace svp
