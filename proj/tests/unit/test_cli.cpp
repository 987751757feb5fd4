#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fluent/cli.hpp"
#include "fluent/dsl.hpp"
#include "fluent/models.hpp"
#include "generators.hpp"

using namespace fluent;
namespace fs = std::filesystem;
namespace ft = fluent::testing;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::execute(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string repo(const std::string& rel) { return (ft::source_root() / rel).string(); }

// Golden files hold `@PATH@` where the model path appears in the output.
std::string golden(const std::string& name, const std::string& path) {
  std::string text = read_file(repo("tests/golden/" + name));
  const std::string key = "@PATH@";
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + path.size()))
    text.replace(pos, key.size(), path);
  return text;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fluent_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string tmp(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, ValidateMultiplierGolden) {
  const std::string path = repo("models/multiplier.fc");
  const Result r = invoke({"validate", path});
  EXPECT_EQ(r.code, cli::kOk);
  EXPECT_EQ(r.out, golden("validate_multiplier.txt", path));
}

TEST_F(CliTest, ValidateCyclicGolden) {
  const std::string path = repo("tests/data/cyclic.fc");
  const Result r = invoke({"validate", path});
  EXPECT_EQ(r.code, cli::kValidationError);
  EXPECT_EQ(r.out, golden("validate_cyclic.txt", path));
}

TEST_F(CliTest, RunWithZeroDurationWritesHeaderOnly) {
  const std::string trace = tmp("t.csv");
  const Result r = invoke({"run", repo("models/governor.fc"), "--duration", "0", "--trace", trace});
  EXPECT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(read_file(trace), golden("governor_duration0.csv", ""));
}

TEST_F(CliTest, RunsAreByteIdentical) {
  // a model with noise, written to disk so the CLI parses it
  const std::string model = tmp("noisy.fc");
  write_file_atomic(model,
                    "hierarchy noisy\n"
                    "pm u = sine(amplitude=0.5, freq=0.1, phase=0, offset=1)\n"
                    "level L mode discrete {\n"
                    "  observer u role=input mod=none\n"
                    "  observer n state=noise(sigma=0.4, clamp=true) components=[u] mod=none\n"
                    "  observer f state=ema(beta=0.3) components=[n] mod=none\n"
                    "}\n");
  for (const std::string& m : {model, repo("models/multiplier.fc"), repo("models/governor.fc")}) {
    const std::vector<std::string> base = {"run", m, "--steps", "300", "--seed", "17"};
    auto a = base, b = base;
    a.insert(a.end(), {"--trace", tmp("a.csv"), "--states", tmp("a.states"), "--meta", tmp("a.json")});
    b.insert(b.end(), {"--trace", tmp("b.csv"), "--states", tmp("b.states"), "--meta", tmp("b.json")});
    ASSERT_EQ(invoke(a).code, cli::kOk);
    ASSERT_EQ(invoke(b).code, cli::kOk);
    EXPECT_EQ(read_file(tmp("a.csv")), read_file(tmp("b.csv"))) << m;
    EXPECT_EQ(read_file(tmp("a.states")), read_file(tmp("b.states"))) << m;
    // metadata records wall-clock time; everything else must match
    auto ma = nlohmann::json::parse(read_file(tmp("a.json")));
    auto mb = nlohmann::json::parse(read_file(tmp("b.json")));
    ma.erase("wall_seconds");
    mb.erase("wall_seconds");
    EXPECT_EQ(ma, mb) << m;
  }
  const Result other = invoke({"run", model, "--steps", "300", "--seed", "18"});
  const Result same = invoke({"run", model, "--steps", "300", "--seed", "17"});
  EXPECT_NE(other.out, same.out);
  EXPECT_EQ(same.out, invoke({"run", model, "--steps", "300", "--seed", "17"}).out);
}

TEST_F(CliTest, RunMetadataAndJson) {
  const Result r = invoke({"run", repo("models/adder.fc"), "--steps", "10", "--json", "--meta", tmp("m.json")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto trace = nlohmann::json::parse(r.out);
  EXPECT_TRUE(trace.is_object() || trace.is_array());
  const auto meta = nlohmann::json::parse(read_file(tmp("m.json")));
  EXPECT_EQ(meta.at("horizon_steps"), 10);
  EXPECT_EQ(meta.at("model_hash").get<std::string>().rfind("fnv1a64:", 0), 0u);
}

TEST_F(CliTest, MutuallyExclusiveHorizons) {
  const Result r = invoke({"run", repo("models/governor.fc"), "--steps", "3", "--duration", "1"});
  EXPECT_EQ(r.code, cli::kInputError);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, InputErrors) {
  EXPECT_EQ(invoke({"validate", tmp("missing.fc")}).code, cli::kInputError);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kInputError);
  EXPECT_EQ(invoke({}).code, cli::kInputError);
  write_file_atomic(tmp("bad.fc"), "level a mode discrete {\n  observer b components=[a\n}\n");
  const Result r = invoke({"validate", tmp("bad.fc")});
  EXPECT_EQ(r.code, cli::kInputError);
  EXPECT_NE(r.err.find("bad.fc:"), std::string::npos);
}

TEST_F(CliTest, RunRefusesInvalidModels) {
  EXPECT_EQ(invoke({"run", repo("tests/data/cyclic.fc"), "--steps", "3"}).code, cli::kValidationError);
}

TEST_F(CliTest, RuntimeFaultsExitThree) {
  write_file_atomic(tmp("neg.fc"),
                    "hierarchy neg\n"
                    "pm u = const(value=1)\n"
                    "level L mode discrete {\n"
                    "  observer u role=input mod=none\n"
                    "  observer a state=wsum(w=[-1], bias=0) components=[u] mod=none\n"
                    "}\n");
  const Result r = invoke({"run", tmp("neg.fc"), "--steps", "5"});
  EXPECT_EQ(r.code, cli::kRuntimeError);
  EXPECT_NE(r.err.find("a"), std::string::npos);
}

TEST_F(CliTest, CheckCommute) {
  Result r = invoke({"check-commute", repo("models/multiplier.fc")});
  EXPECT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);

  Hierarchy h = build_multiplier();
  std::get<op::Table>(h.groundings.at("decimal").at("TENS.d3").state_op).rows.at(158) = 0.0;
  write_file_atomic(tmp("broken.fc"), render_model(h));
  r = invoke({"check-commute", tmp("broken.fc"), "--json"});
  EXPECT_EQ(r.code, cli::kCommuteFailure);
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_FALSE(report.at("pass").get<bool>());
  EXPECT_GE(report.at("max_discrepancy").get<double>(), 1.0);

  r = invoke({"check-commute", repo("models/adder.fc")});
  EXPECT_EQ(r.code, cli::kValidationError);
}

TEST_F(CliTest, CoupleReports) {
  const Result r = invoke({"couple", repo("models/adder.fc"), "--transitive", "--json"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_FALSE(j.at("pairs").empty());
  EXPECT_TRUE(j.contains("groups"));
}

TEST_F(CliTest, EncodeDecodeRoundTrip) {
  const std::string grammar = repo("models/arith.fc");
  Result enc = invoke({"encode", "--grammar", grammar, "--term", "6*2"});
  ASSERT_EQ(enc.code, cli::kOk) << enc.err;
  write_file_atomic(tmp("a.json"), enc.out);
  Result dec = invoke({"decode", "--grammar", grammar, tmp("a.json")});
  ASSERT_EQ(dec.code, cli::kOk) << dec.err;
  EXPECT_EQ(dec.out, "6*2\n");

  auto bad = nlohmann::json::parse(enc.out);
  bad["ARG1.d3"] = 1.0;
  write_file_atomic(tmp("bad.json"), bad.dump());
  EXPECT_EQ(invoke({"decode", "--grammar", grammar, tmp("bad.json")}).code, cli::kValidationError);
  EXPECT_EQ(invoke({"encode", "--grammar", grammar, "--term", "6**2"}).code, cli::kInputError);
}

TEST_F(CliTest, FmtIsCanonical) {
  const std::string messy = tmp("messy.fc");
  write_file_atomic(messy,
                    "# comment\nhierarchy   m\nlevel L mode discrete {\n observer u role=input kind=free mod=none\n"
                    " observer a components=[u]   state=wsum(w=[1],bias=0) mod=none }\n");
  const Result r = invoke({"fmt", messy});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(r.out, render_model(parse_model(read_file(messy))));
  ASSERT_EQ(invoke({"fmt", messy, "--write"}).code, cli::kOk);
  EXPECT_EQ(read_file(messy), r.out);
}

TEST_F(CliTest, ExamplesMatchShippedFiles) {
  const Result list = invoke({"example", "--list"});
  ASSERT_EQ(list.code, cli::kOk);
  for (const auto& name : example_names()) {
    EXPECT_NE(list.out.find(name), std::string::npos);
    const Result r = invoke({"example", name});
    ASSERT_EQ(r.code, cli::kOk);
    EXPECT_EQ(r.out, read_file(repo("models/" + name + ".fc"))) << name;
  }
  EXPECT_EQ(invoke({"example", "nonsense"}).code, cli::kInputError);
}
