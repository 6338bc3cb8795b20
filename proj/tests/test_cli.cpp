#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "scert/cli.hpp"
#include "scert/io.hpp"
#include "json.hpp"

using namespace scert;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "schatten-cert");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("scert_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  // One dense layer 2→2 with separable data.
  void write_linear_fixture() {
    NetworkSpec net;
    net.layers.emplace_back(DenseLayer{Matrix(2, 2, {2.0, 0.0, 0.0, 0.5}), Matrix(2, 2), Activation::identity, 1.0});
    net.class_count = 2;
    save_network(net, dir_ / "net.json");
    Dataset d;
    d.inputs = Matrix(4, 2, {1.0, 0.0, 0.8, 0.1, 0.0, 1.0, 0.1, 0.9});
    d.labels = {0, 0, 1, 1};
    save_dataset(d, dir_ / "data.json");
  }
  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, CompareOneLayerListsLinearBounds) {
  write_linear_fixture();
  ASSERT_EQ(run({"compare", "--net", p("net.json"), "--data", p("data.json"), "--out", p("out.json"), "--no-meta"}), exit_ok);
  const auto j = nlohmann::json::parse(slurp(dir_ / "out.json"));
  std::set<std::string> names;
  for (const auto& b : j["bounds"]) names.insert(b["name"].get<std::string>());
  EXPECT_TRUE(names.count("lei_linear"));
  EXPECT_TRUE(names.count("bound_linear"));
  EXPECT_TRUE(names.count("dnn"));
  EXPECT_TRUE(names.count("graf"));
}

TEST_F(CliTest, LargeMarginGivesFullFraction) {
  write_linear_fixture();
  ASSERT_EQ(run({"analyze", "--net", p("net.json"), "--data", p("data.json"), "--margin", "1000", "--out", p("a.json")}),
            exit_ok);
  const auto j = nlohmann::json::parse(slurp(dir_ / "a.json"));
  EXPECT_EQ(j["margin_fraction"].get<double>(), 1.0);
}

TEST_F(CliTest, NoMetaIsDeterministic) {
  write_linear_fixture();
  for (const char* out : {"a.json", "b.json"})
    ASSERT_EQ(run({"analyze", "--net", p("net.json"), "--data", p("data.json"), "--no-meta", "--out", p(out)}), exit_ok);
  EXPECT_EQ(slurp(dir_ / "a.json"), slurp(dir_ / "b.json"));
  ASSERT_EQ(run({"analyze", "--net", p("net.json"), "--data", p("data.json"), "--csv", p("a.csv"), "--out", p("c.json")}), exit_ok);
  EXPECT_EQ(slurp(dir_ / "a.csv").rfind("name,value,chosen_p,vacuous\n", 0), 0u);
}

TEST_F(CliTest, ExitCodes) {
  write_linear_fixture();
  EXPECT_EQ(run({"analyze", "--net", p("net.json")}), exit_usage);
  EXPECT_EQ(run({"analyze", "--net", p("net.json"), "--data", p("data.json"), "--mode", "loose"}), exit_usage);
  EXPECT_EQ(run({"analyze", "--net", p("missing.json"), "--data", p("data.json")}), exit_data);
  fs::remove(dir_ / "net_w0.bin");
  EXPECT_EQ(run({"analyze", "--net", p("net.json"), "--data", p("data.json")}), exit_data);
}

TEST_F(CliTest, TrainThenAnalyze) {
  std::ofstream(dir_ / "cfg.json") << R"({"seed": 2, "classes": 2, "features": 3, "train_samples": 60,
    "test_samples": 20, "hidden": [6], "epochs": 5, "center_radius": 3, "min_separation": 3})";
  ASSERT_EQ(run({"train", "--config", p("cfg.json"), "--out-net", p("t.json"), "--out-train", p("tr.json"), "--out-test",
                 p("te.json")}),
            exit_ok);
  EXPECT_EQ(run({"analyze", "--net", p("t.json"), "--data", p("tr.json"), "--out", p("r.json")}), exit_ok);
  std::ofstream(dir_ / "bad.json") << R"({"sed": 2})";
  EXPECT_EQ(run({"train", "--config", p("bad.json"), "--out-net", p("x.json")}), exit_data);
}

TEST_F(CliTest, VerifyQuickSuites) {
  EXPECT_EQ(run({"verify", "--suite", "conv", "--suite", "gradient", "--quick"}), exit_ok);
}
