#include "rieszlab/cli.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rieszlab;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("rieszlab_cli_test_" + std::to_string(++counter) + "_" +
                                        std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

int run(std::initializer_list<std::string> args) {
  return run_cli(std::vector<std::string>(args));
}

// run_cli reports errors as one JSON line on stderr; capture it.
struct CerrCapture {
  std::ostringstream sink;
  std::streambuf* saved;
  CerrCapture() : saved(std::cerr.rdbuf(sink.rdbuf())) {}
  ~CerrCapture() { std::cerr.rdbuf(saved); }
  std::string text() const { return sink.str(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

json load_json(const fs::path& p) {
  std::ifstream is(p);
  return json::parse(is);
}

}  // namespace

TEST(CliParsing, HelpIsSuccess) { EXPECT_EQ(run({"--help"}), 0); }

TEST(CliParsing, MissingSubcommandFails) { EXPECT_EQ(run({}), 2); }

TEST(CliParsing, UnknownSubcommandFails) { EXPECT_EQ(run({"frobnicate"}), 2); }

TEST(CliParsing, UnknownFlagFails) {
  TempDir tmp;
  EXPECT_EQ(run({"regularize", "--no-such-flag", "1", "--out", tmp.sub("o")}), 2);
}

TEST(CliRegularize, WritesLadderAndMeta) {
  TempDir tmp;
  ASSERT_EQ(run({"regularize", "--n", "3", "--out", tmp.sub("o")}), 0);
  std::ifstream is(tmp.path / "o" / "ladder.txt");
  ASSERT_TRUE(is.good());
  LadderFile lf = read_ladder(is);
  EXPECT_EQ(lf.d, 2);
  EXPECT_EQ(lf.ladder.n(), 3);
  EXPECT_DOUBLE_EQ(lf.ladder.ell[0], 0.25);

  json meta = load_json(tmp.path / "o" / "meta.json");
  EXPECT_EQ(meta["command"], "regularize");
  EXPECT_EQ(meta["config"]["d"], 2);
  EXPECT_EQ(meta["config"]["sequence"]["kind"], "geometric");
  EXPECT_TRUE(meta.contains("timestamp"));
}

TEST(CliErrors, ConfigErrorIsExitTwoWithJsonLine) {
  TempDir tmp;
  CerrCapture cap;
  EXPECT_EQ(run({"regularize", "--d", "0", "--out", tmp.sub("o")}), 2);
  json err = json::parse(cap.text());
  EXPECT_EQ(err["error"]["type"], "config");
  EXPECT_FALSE(err["error"]["message"].get<std::string>().empty());
}

TEST(CliErrors, BadTransformCombinations) {
  TempDir tmp;
  CerrCapture cap;
  EXPECT_EQ(run({"transform", "--backend", "tree", "--exclude", "own_node", "--n", "1", "--out",
                 tmp.sub("a")}),
            2);
  EXPECT_EQ(run({"transform", "--eps", "0", "--exclude", "none", "--n", "1", "--out",
                 tmp.sub("b")}),
            2);
  EXPECT_EQ(run({"verify-norm", "--q", "4", "--out", tmp.sub("c")}), 2);
}

TEST(CliConfigFile, FlagsOverrideFileFields) {
  TempDir tmp;
  json file_cfg = {{"d", 1}, {"n", 2}, {"sequence", {{"kind", "geometric"}, {"ratio", 8.0}}},
                   {"out", tmp.sub("from_file")}};
  std::string cfg_path = tmp.sub("cfg.json");
  {
    std::ofstream os(cfg_path);
    os << file_cfg.dump(2);
  }
  ASSERT_EQ(run({"regularize", "--config", cfg_path, "--n", "1", "--out", tmp.sub("cli")}), 0);
  EXPECT_FALSE(fs::exists(tmp.path / "from_file"));
  json meta = load_json(tmp.path / "cli" / "meta.json");
  EXPECT_EQ(meta["config"]["d"], 1);                         // from the file
  EXPECT_EQ(meta["config"]["n"], 1);                         // flag wins
  EXPECT_DOUBLE_EQ(meta["config"]["sequence"]["ratio"], 8.0);

  std::ifstream is(tmp.path / "cli" / "ladder.txt");
  LadderFile lf = read_ladder(is);
  EXPECT_EQ(lf.d, 1);
  EXPECT_EQ(lf.ladder.n(), 1);
  EXPECT_DOUBLE_EQ(lf.ladder.sigma[0], 0.125);
}

TEST(CliConfigFile, MissingFileFails) {
  TempDir tmp;
  CerrCapture cap;
  EXPECT_EQ(run({"regularize", "--config", tmp.sub("absent.json"), "--out", tmp.sub("o")}), 2);
  EXPECT_EQ(json::parse(cap.text())["error"]["type"], "config");
}

TEST(CliSigmaFile, SetsExplicitSequenceAndDepth) {
  TempDir tmp;
  std::string sf = tmp.sub("sigma.txt");
  {
    std::ofstream os(sf);
    os << "0.25\n0.0625\n";
  }
  ASSERT_EQ(run({"regularize", "--sigma-file", sf, "--out", tmp.sub("o")}), 0);
  json meta = load_json(tmp.path / "o" / "meta.json");
  EXPECT_EQ(meta["config"]["sequence"]["kind"], "explicit");
  EXPECT_EQ(meta["config"]["n"], 2);
  std::ifstream is(tmp.path / "o" / "ladder.txt");
  LadderFile lf = read_ladder(is);
  EXPECT_EQ(lf.ladder.n(), 2);
  EXPECT_DOUBLE_EQ(lf.ladder.sigma[1], 0.0625);
}

TEST(CliVerifyNorm, SweepArtifacts) {
  TempDir tmp;
  ASSERT_EQ(run({"verify-norm", "--n", "2", "--out", tmp.sub("o")}), 0);
  json rep = load_json(tmp.path / "o" / "report.json");
  EXPECT_EQ(rep["kind"], "norm_sweep");
  EXPECT_EQ(rep["schema_version"], 1);
  ASSERT_EQ(rep["rows"].size(), 2u);
  EXPECT_GE(rep["band_factor"].get<double>(), 1.0);
  EXPECT_FALSE(rep.contains("timestamp"));  // timestamps live in meta.json only

  std::istringstream csv(slurp(tmp.path / "o" / "sweep.csv"));
  std::string line;
  ASSERT_TRUE(std::getline(csv, line));
  EXPECT_EQ(line, "n,norm2,sum_theta2,ratio");
  int data_lines = 0;
  while (std::getline(csv, line))
    if (!line.empty()) data_lines++;
  EXPECT_EQ(data_lines, 2);
}

TEST(CliTransform, WritesFieldFile) {
  TempDir tmp;
  ASSERT_EQ(run({"transform", "--n", "1", "--eps", "0.5", "--out", tmp.sub("o")}), 0);
  std::string text = slurp(tmp.path / "o" / "field.txt");
  EXPECT_NE(text.find("\"count\":4"), std::string::npos);
  EXPECT_NE(text.find("\"eps\":0.5"), std::string::npos);
}

TEST(CliBuild, WritesSetAndLadder) {
  TempDir tmp;
  ASSERT_EQ(run({"build", "--n", "2", "--out", tmp.sub("o")}), 0);
  EXPECT_TRUE(fs::exists(tmp.path / "o" / "ladder.txt"));
  std::string text = slurp(tmp.path / "o" / "set.txt");
  EXPECT_NE(text.find("\"cube_count\":16"), std::string::npos);
}

TEST(CliLemmas, ReportBytesAreDeterministic) {
  TempDir tmp;
  std::initializer_list<std::string> base = {"lemmas",        "--trials",       "10000",
                                             "--lemma-cases", "50",             "--flip-samples",
                                             "50",            "--seed",         "42"};
  std::vector<std::string> a(base), b(base);
  a.push_back("--out");
  a.push_back(tmp.sub("a"));
  b.push_back("--out");
  b.push_back(tmp.sub("b"));
  ASSERT_EQ(run_cli(a), 0);
  ASSERT_EQ(run_cli(b), 0);
  std::string ra = slurp(tmp.path / "a" / "report.json");
  std::string rb = slurp(tmp.path / "b" / "report.json");
  ASSERT_FALSE(ra.empty());
  EXPECT_EQ(ra, rb);
  json rep = json::parse(ra);
  EXPECT_EQ(rep["kind"], "lemma_checks");
  EXPECT_TRUE(rep["verdict"].get<bool>());
}

TEST(CliCapacity, SweepRangeFlags) {
  TempDir tmp;
  ASSERT_EQ(run({"capacity", "--n-lo", "2", "--n-hi", "2", "--out", tmp.sub("o")}), 0);
  json rep = load_json(tmp.path / "o" / "report.json");
  EXPECT_EQ(rep["kind"], "capacity_sweep");
  ASSERT_EQ(rep["rows"].size(), 1u);
  EXPECT_NEAR(rep["rows"][0]["ratios"]["proxy_over_band"]["ratio"].get<double>(),
              0.57415138804995403, 1e-9);
}
