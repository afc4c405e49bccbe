#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "adtool/cli.hpp"

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun adtool(std::vector<std::string> args) {
  args.insert(args.begin(), "adtool");
  std::ostringstream out, err;
  const int code = adtool::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string program(const char* name) { return std::string(INVAD_PROGRAMS_DIR) + "/" + name; }
std::string golden(const char* name) { return std::string(INVAD_GOLDEN_DIR) + "/" + name; }

TEST(Cli, JvpInverseGolden) {
  const CliRun r = adtool({"jvp-inv", golden("prog.adp"), "--at", "3,2", "--vec", "1,0"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "{\"result\":[0.5,0.0]}\n");
}

TEST(Cli, CheckGoldenIsDeterministic) {
  const std::vector<std::string> args{"check", golden("prog.adp"), "--trials", "100", "--seed",
                                      "42"};
  const CliRun a = adtool(args), b = adtool(args);
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  const auto j = nlohmann::json::parse(a.out);
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_EQ(j["seed"], 42);
  EXPECT_EQ(j["trials"], 100);
  for (const auto& [mode, err] : j["max_error"].items()) EXPECT_LE(err.get<double>(), 1e-8) << mode;
}

TEST(Cli, OdeGolden) {
  const std::vector<std::string> args{"ode", "--field", golden("decay.adp"), "--t0", "0", "--t1",
                                      "1", "--dt", "0.0001", "--mode", "vjp-inv", "--vec", "1"};
  const CliRun a = adtool(args), b = adtool(args);
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  const double value = nlohmann::json::parse(a.out)["result"][0].get<double>();
  EXPECT_NEAR(value, std::exp(1.0), 10 * 1e-4);
}

TEST(Cli, AllModesOnMul) {
  const auto result = [](const char* mode, const char* vec) {
    const CliRun r = adtool({mode, program("mul.adp"), "--at", "3,2", "--vec", vec});
    EXPECT_EQ(r.code, 0) << r.out;
    return r.out;
  };
  EXPECT_EQ(result("jvp", "0,1"), "{\"result\":[3.0,1.0]}\n");
  EXPECT_EQ(result("vjp", "1,0"), "{\"result\":[2.0,3.0]}\n");
  EXPECT_EQ(result("jvp-inv", "0,1"), "{\"result\":[-1.5,1.0]}\n");
  EXPECT_EQ(result("vjp-inv", "1,0"), "{\"result\":[0.5,-1.5]}\n");
}

TEST(Cli, Eval) {
  const CliRun r = adtool({"eval", program("sqrt2.adp"), "--at", "1.5"});
  EXPECT_EQ(r.out, "{\"result\":[0.25]}\n");
}

TEST(Cli, Newton) {
  const CliRun r = adtool({"newton", program("sqrt2.adp"), "--at", "1.5"});
  EXPECT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["root"][0].get<double>(), std::sqrt(2.0));
  EXPECT_LE(j["iterations"].get<int>(), 6);
}

TEST(Cli, LumpReportsGreedyAndBruteForce) {
  for (const char* objective : {"size", "width", "lk"}) {
    const CliRun r = adtool({"lump", program("diamond.adp"), "--objective", objective});
    EXPECT_EQ(r.code, 0) << r.out;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["objective"], objective);
    EXPECT_TRUE(j["greedy"].contains("cuts"));
    EXPECT_FALSE(j["brute_force"].is_null());
  }
}

TEST(Cli, DagModes) {
  const CliRun r = adtool({"jvp-inv", program("diamond.adp"), "--at", "1,2", "--vec", "1,0"});
  EXPECT_EQ(r.code, 0) << r.out;
  const CliRun c = adtool({"check", program("diamond.adp")});
  EXPECT_EQ(c.code, 0) << c.out;
}

TEST(Cli, OdeCsv) {
  const CliRun r = adtool({"ode", "--field", program("decay.adp"), "--at", "1", "--mode", "primal",
                        "--dts", "0.01,0.005", "--reference", "0.36787944117144233", "--csv"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("dt,error,order\n0.01,", 0), 0u) << r.out;
}

TEST(Cli, ErrorsAreJson) {
  const CliRun missing = adtool({"eval", "no-such-file.adp", "--at", "1"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(nlohmann::json::parse(missing.out)["error"]["kind"], "ValidationError");

  const CliRun singular = adtool({"jvp-inv", program("mul.adp"), "--at", "3,0", "--vec", "1,0"});
  EXPECT_EQ(singular.code, 1);
  const auto j = nlohmann::json::parse(singular.out);
  EXPECT_EQ(j["error"]["kind"], "SingularStepError");
  EXPECT_EQ(j["error"]["step"], 0);

  const CliRun size = adtool({"jvp", program("mul.adp"), "--at", "3", "--vec", "1,0"});
  EXPECT_EQ(size.code, 1);
}

TEST(Cli, SeedFromEnvironment) {
  ::setenv("ADTOOL_SEED", "7", 1);
  const CliRun r = adtool({"check", program("tutorial.adp")});
  ::unsetenv("ADTOOL_SEED");
  EXPECT_EQ(nlohmann::json::parse(r.out)["seed"], 7);
  const CliRun explicit_seed = adtool({"check", program("tutorial.adp"), "--seed", "7"});
  EXPECT_EQ(r.out, explicit_seed.out);
}

TEST(Cli, UsageErrorsAreNonzero) {
  EXPECT_NE(adtool({}).code, 0);
  EXPECT_NE(adtool({"frobnicate"}).code, 0);
}

}  // namespace
