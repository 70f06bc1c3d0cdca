#include "lmdiv/cli.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace lmdiv::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "lmdiv");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lmdiv_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& body) {
    const auto p = (dir_ / name).string();
    std::ofstream(p) << body;
    return p;
  }

  /// GPD(3, 0.3) sample rounded to multiples of 2^-10 so that shifts by 2^k are exact.
  std::string gpd_csv(const std::string& name, double shift, std::size_t n = 300) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::ostringstream os;
    os.precision(17);
    os << "id,value\n";
    for (std::size_t i = 0; i < n; ++i) {
      const double x = 3.0 * (std::pow(1.0 - u(rng), -0.3) - 1.0) / 0.3;
      os << i << ',' << std::ldexp(std::round(std::ldexp(x, 10)), -10) + shift << "\n";
    }
    return write(name, os.str());
  }

  fs::path dir_;
};

TEST_F(CliTest, LmomentsExample) {
  const auto f = write("a.csv", "1\n2\n4\n");
  const auto r = call({"lmoments", f, "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["v"][1].get<double>(), 2.0 / 3.0);
  EXPECT_EQ(j["u"][1].get<double>(), 1.0);
  EXPECT_EQ(j["u"].size(), 3u);
  EXPECT_EQ(j["v"].size(), 4u);
  const auto t = call({"lmoments", f});
  EXPECT_NE(t.out.find("0.666667"), std::string::npos);
}

TEST_F(CliTest, LmomentsColumnSelection) {
  const auto f = write("h.csv", "a,b\n10,1\n20,2\n30,4\n");
  const auto by_name = call({"lmoments", f, "--col", "b", "--format", "json"});
  const auto by_index = call({"lmoments", f, "--col", "2", "--format", "json"});
  ASSERT_EQ(by_name.code, 0) << by_name.err;
  EXPECT_EQ(by_name.out, by_index.out);
  EXPECT_EQ(json::parse(by_name.out)["v"][1].get<double>(), 2.0 / 3.0);
  EXPECT_EQ(call({"lmoments", f, "--col", "c"}).code, kUsage);
}

TEST_F(CliTest, InputErrors) {
  EXPECT_EQ(call({"lmoments", write("e.csv", "")}).code, kUsage);
  EXPECT_EQ(call({"lmoments", write("h.csv", "value\n")}).code, kUsage);
  const auto bad = call({"lmoments", write("b.csv", "1\nfoo\n3\n\nnan\n")});
  EXPECT_EQ(bad.code, kUsage);
  EXPECT_NE(bad.err.find("lines 2, 5"), std::string::npos) << bad.err;
  const auto ord = call({"lmoments", write("a.csv", "1\n2\n4\n"), "--order", "25"});
  EXPECT_EQ(ord.code, kUsage);
  EXPECT_NE(ord.err.find("order"), std::string::npos);
  EXPECT_EQ(call({"lmoments", (dir_ / "missing.csv").string()}).code, kUsage);
  EXPECT_EQ(call({}).code, kUsage);
  EXPECT_EQ(call({"frobnicate"}).code, kUsage);
  EXPECT_EQ(call({"fit", write("a.csv", "1\n2\n4\n"), "--div", "hellinger"}).code, kUsage);
}

TEST_F(CliTest, FitJsonRoundTrip) {
  const auto f = gpd_csv("g.csv", 0.0);
  const auto r = call({"fit", f, "--col", "value", "--format", "json", "--asymptotics"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(json::parse(j.dump()), j);
  EXPECT_EQ(j["status"], "converged");
  EXPECT_FALSE(j["failed"].get<bool>());
  EXPECT_NEAR(j["theta"]["sigma"].get<double>(), 3.0, 0.8);
  EXPECT_NEAR(j["theta"]["nu"].get<double>(), 0.3, 0.2);
  EXPECT_EQ(j["asymptotics"]["cov_theta"].size(), 2u);
  EXPECT_EQ(j["test"]["rank"], 1);
  EXPECT_EQ(j["test"]["nominal_df"], 3);

  // the JSON value equals the library result bit for bit
  const auto rep = fit_divergence(SortedSample(read_column_file(f, "value")), make_model("gpd-l234"),
                                  Divergence::chi2());
  EXPECT_EQ(j["theta"]["sigma"].get<double>(), rep.theta[0]);
  EXPECT_EQ(j["theta"]["nu"].get<double>(), rep.theta[1]);
}

TEST_F(CliTest, FitShiftGivesIdenticalTheta) {
  const auto a = call({"fit", gpd_csv("a.csv", 0.0), "--col", "value", "--format", "json"});
  const auto b = call({"fit", gpd_csv("b.csv", 1024.0), "--col", "value", "--format", "json"});
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(json::parse(a.out)["theta"].dump(), json::parse(b.out)["theta"].dump());
}

TEST_F(CliTest, FitOtherMethods) {
  const auto f = gpd_csv("g.csv", 0.0);
  for (const char* m : {"lmom", "moment", "mle", "wasserstein"}) {
    const auto r = call({"fit", f, "--col", "value", "--method", m, "--format", "json"});
    ASSERT_EQ(r.code, 0) << m << ": " << r.err;
    EXPECT_NEAR(json::parse(r.out)["theta"]["nu"].get<double>(), 0.3, 0.25) << m;
  }
  EXPECT_EQ(call({"fit", f, "--method", "gmm"}).code, kUsage);
  EXPECT_EQ(call({"fit", write("neg.csv", "-1\n2\n3\n5\n9\n"), "--method", "mle"}).code, kUsage);
}

TEST_F(CliTest, KlmTerminatesWithStatus) {
  // heavy right outlier: many parameter values put the target outside the klm domain
  std::string body;
  for (int i = 1; i <= 12; ++i) body += std::to_string(i) + "\n";
  body += "1e6\n";
  const auto r = call({"fit", write("o.csv", body), "--div", "klm", "--format", "json"});
  ASSERT_TRUE(r.code == kOk || r.code == kNumeric) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_TRUE(j.contains("status"));
  EXPECT_TRUE(j.contains("failed"));
}

TEST_F(CliTest, TestSubcommand) {
  const auto r = call({"test", gpd_csv("g.csv", 0.0), "--col", "value", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_GE(j["statistic"].get<double>(), 0.0);
  EXPECT_EQ(j["df"], 1);
  EXPECT_GT(j["p_value"].get<double>(), 0.0);
  EXPECT_LE(j["p_value"].get<double>(), 1.0);
  const auto e = call({"test", gpd_csv("g.csv", 0.0), "--col", "value", "--plugin", "empirical"});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("S_n = "), std::string::npos);
}

TEST_F(CliTest, Dist) {
  const auto r = call({"dist", "gpd:3:0.7", "gpd:3.8:0.55", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const double d = json::parse(r.out)["l1"].get<double>();
  EXPECT_EQ(d, l1_density_distance(ParametricFamily::gpd(3, 0.7), ParametricFamily::gpd(3.8, 0.55)));
  EXPECT_EQ(call({"dist", "gpd:3", "gpd:1:0"}).code, kUsage);
  EXPECT_EQ(call({"dist", "cauchy:3:0.1", "gpd:1:0"}).code, kUsage);
  EXPECT_EQ(call({"dist", "gpd:-3:0.1", "gpd:1:0"}).code, kUsage);
}

TEST_F(CliTest, SimulateWritesOutputs) {
  const auto prefix = (dir_ / "run").string();
  const auto cfg = write("c.json", R"({"scenario": 1, "n": 40, "replicates": 6, "seed": 9, "threads": 2})");
  const auto r = call({"simulate", cfg, "--out", prefix});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = json::parse(std::ifstream(prefix + "_summary.json"));
  EXPECT_EQ(s["rows"].size(), 10u);
  EXPECT_EQ(s["config"]["n"], 40);
  for (const auto& row : s["rows"]) {
    for (const char* k : {"estimator", "parameter", "mean", "median", "std", "count"}) EXPECT_TRUE(row.contains(k));
  }
  std::ifstream csv(prefix + "_replicates.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 1 + 6 * 5);
  EXPECT_TRUE(fs::exists(prefix + "_density.csv"));

  // same seed, different thread count: identical summary
  const auto again = (dir_ / "again").string();
  ASSERT_EQ(call({"simulate", cfg, "--out", again, "--threads", "1"}).code, 0);
  EXPECT_EQ(json::parse(std::ifstream(again + "_summary.json")), s);
}

TEST_F(CliTest, SimulateConfigErrors) {
  EXPECT_EQ(call({"simulate", write("a.json", R"({"scenari": 1})")}).code, kUsage);
  EXPECT_EQ(call({"simulate", write("b.json", R"({"n": "ten"})")}).code, kUsage);
  EXPECT_EQ(call({"simulate", write("c.json", R"({"estimators": ["gmm"]})")}).code, kUsage);
  EXPECT_EQ(call({"simulate", write("d.json", "{not json")}).code, kUsage);
  EXPECT_EQ(call({"simulate", write("e.json", R"({"scenario": 9})")}).code, kUsage);
  EXPECT_EQ(call({"simulate", write("f.json", R"({"contamination": 1.5})")}).code, kUsage);
}

TEST(CsvReader, HeaderDetection) {
  std::istringstream a("x\n1\n2\n");
  EXPECT_EQ(read_column(a), (std::vector<double>{1, 2}));
  std::istringstream b("1e3\n-2.5\n");
  EXPECT_EQ(read_column(b), (std::vector<double>{1000, -2.5}));
  std::istringstream c("\"v\"\r\n3\r\n4\r\n");
  EXPECT_EQ(read_column(c, "v"), (std::vector<double>{3, 4}));
}

#ifdef LMDIV_CLI_PATH
std::string run_binary(const std::string& args, int& code) {
  const std::string cmd = std::string(LMDIV_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  char buf[512];
  while (p && std::fgets(buf, sizeof buf, p)) out += buf;
  const int status = p ? pclose(p) : -1;
  code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

TEST_F(CliTest, BinaryExitCodes) {
  int code = -1;
  const auto out = run_binary("lmoments " + write("a.csv", "1\n2\n4\n"), code);
  EXPECT_EQ(code, 0);
  EXPECT_NE(out.find("0.666667"), std::string::npos);
  run_binary("lmoments " + write("e.csv", ""), code);
  EXPECT_EQ(code, 2);
  run_binary("", code);
  EXPECT_EQ(code, 2);
  run_binary("--help", code);
  EXPECT_EQ(code, 0);
  const auto d = run_binary("dist gpd:3:0.7 gpd:3:0.7", code);
  EXPECT_EQ(code, 0);
  EXPECT_NE(d.find("L1 = 0"), std::string::npos);
}
#endif

}  // namespace
}  // namespace lmdiv::cli
