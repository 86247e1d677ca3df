#include "test_support.hpp"

#include "cli.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

namespace lad {
namespace {

using io::json;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json last_line(const std::string& text) {
  auto trimmed = text;
  while (!trimmed.empty() && trimmed.back() == '\n') trimmed.pop_back();
  return json::parse(trimmed.substr(trimmed.rfind('\n') == std::string::npos ? 0 : trimmed.rfind('\n') + 1));
}

std::string slurp(const std::string& path) { return io::detail::read_file(path); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto r = run({"gmrf", "--dims", "40x40", "--bands", "6", "--rho", "0.5", "--shift", "6", "--mean-base", "100",
                        "--mean-step", "5", "--max-side", "3", "--rotation", "0", "--seed", "7", "--out", dir.file("scene.json"),
                        "--truth-out", dir.file("truth.pgm")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = last_line(r.out);
    ASSERT_EQ(j["anomalous"], 28);
  }

  test::TempDir dir;
};

TEST_F(CliTest, DetectorsWriteScoresAndInstrumentation) {
  for (std::string d : {"rxd", "rxd-p", "lad", "lad-p", "lad-s"}) {
    const auto r = run({"detect", "-i", dir.file("scene.json"), "-o", dir.file(d + ".json"), "-d", d});
    ASSERT_EQ(r.code, 0) << d << r.err;
    const auto j = last_line(r.out);
    EXPECT_EQ(j["detector"], d);
    EXPECT_EQ(io::read_scores(dir.file(d + ".json")).size(), 1600u);
    const auto& inst = j["instrumentation"];
    if (d == "rxd") EXPECT_EQ(inst["covariance_inversions"], 1);
    if (d == "lad" || d == "lad-s") {
      EXPECT_EQ(inst["covariance_inversions"], 0) << d;
      EXPECT_EQ(inst["eigendecompositions"], 0) << d;
    }
    if (d == "lad-p" || d == "rxd-p") EXPECT_TRUE(j.contains("retained_p"));
    if (d == "lad-s") EXPECT_EQ(j["order"], 30);
  }
}

TEST_F(CliTest, ThresholdAndEvalPipeline) {
  ASSERT_EQ(run({"detect", "-i", dir.file("scene.json"), "-o", dir.file("s.json"), "-d", "lad"}).code, 0);
  auto r = run({"threshold", "-s", dir.file("s.json"), "--t", "0.5", "-o", dir.file("pred.pgm")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(last_line(r.out)["flagged"].get<std::size_t>(), io::read_mask(dir.file("pred.pgm")).count());

  r = run({"eval", "--pred", dir.file("truth.pgm"), "--truth", dir.file("truth.pgm")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(last_line(r.out)["soi"], 1.0);
  EXPECT_EQ(last_line(r.out)["f1"], 1.0);

  r = run({"eval", "-s", dir.file("s.json"), "--truth", dir.file("truth.pgm"), "-o", dir.file("report.json"),
           "--roc-out", dir.file("roc.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(slurp(dir.file("report.json")));
  EXPECT_EQ(report["roc_points"], 51);
  EXPECT_GE(report["soi"].get<double>(), 0.0);
  EXPECT_EQ(report["t"], report["best"]["t"]);
  const auto csv = slurp(dir.file("roc.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 52);

  r = run({"roc", "-s", dir.file("s.json"), "--truth", dir.file("truth.pgm"), "--grid-step", "0.25"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, 10), "fpr,tpr,t\n");
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 6);
}

TEST_F(CliTest, EnergyTableIsMonotone) {
  for (std::string basis : {"klt", "gft"}) {
    const auto r = run({"energy", "-i", dir.file("scene.json"), "--basis", basis});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "j,energy,cumulative,ratio,weight");
    double previous = 0.0, ratio = 0.0;
    int rows = 0;
    while (std::getline(lines, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      ASSERT_EQ(cells.size(), 5u);
      const double cumulative = std::stod(cells[2]);
      EXPECT_GE(cumulative, previous);
      previous = cumulative;
      ratio = std::stod(cells[3]);
      ++rows;
    }
    EXPECT_EQ(rows, 6);
    EXPECT_DOUBLE_EQ(ratio, 1.0);
  }
}

TEST_F(CliTest, StoredModelsMatchInlineBuild) {
  auto r = run({"model", "-i", dir.file("scene.json"), "-o", dir.file("g.json"), "--eigen"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"model", "-i", dir.file("scene.json"), "-o", dir.file("b.json"), "--kind", "background"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(last_line(r.out)["instrumentation"]["covariance_inversions"], 1);

  ASSERT_EQ(run({"detect", "-i", dir.file("scene.json"), "-o", dir.file("a.json"), "-d", "lad-p", "--p", "3"}).code, 0);
  r = run({"detect", "-i", dir.file("scene.json"), "-o", dir.file("b_scores.json"), "-d", "lad-p", "--p", "3", "-m", dir.file("g.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(last_line(r.out)["instrumentation"]["eigendecompositions"], 0);
  EXPECT_EQ(io::read_scores(dir.file("a.json")).scores(), io::read_scores(dir.file("b_scores.json")).scores());

  ASSERT_EQ(run({"detect", "-i", dir.file("scene.json"), "-o", dir.file("r1.json"), "-d", "rxd"}).code, 0);
  r = run({"detect", "-i", dir.file("scene.json"), "-o", dir.file("r2.json"), "-d", "rxd", "-m", dir.file("b.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(last_line(r.out)["instrumentation"]["covariance_inversions"], 0);
  EXPECT_EQ(io::read_scores(dir.file("r1.json")).scores(), io::read_scores(dir.file("r2.json")).scores());
}

TEST_F(CliTest, OutputsAreReproducible) {
  test::TempDir other;
  for (auto* d : {&dir, &other}) {
    ASSERT_EQ(run({"detect", "-i", dir.file("scene.json"), "-o", d->file("s.json"), "-d", "lad-p"}).code, 0);
  }
  EXPECT_EQ(slurp(dir.file("s.json")), slurp(other.file("s.json")));
  EXPECT_EQ(slurp(dir.file("s.raw")), slurp(other.file("s.raw")));
}

TEST_F(CliTest, ConfigFile) {
  std::ofstream(dir.file("run.ini")) << "[detect]\ndetector = \"lad\"\nlaplacian = \"comb\"\n";
  const auto r = run({"--config", dir.file("run.ini"), "detect", "-i", dir.file("scene.json"), "-o", dir.file("c.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(last_line(r.out)["detector"], "lad");
  EXPECT_EQ(io::read_cube_header(dir.file("c.json")).provenance["laplacian"], "comb");
}

TEST_F(CliTest, ImplantFromLabeledSource) {
  std::vector<double> labels(1600);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<double>(i % 3);
  io::write_cube(ImageCube({40, 40}, 1, labels), dir.file("labels.json"));
  const auto r = run({"implant", "--target", dir.file("scene.json"), "--labels", dir.file("labels.json"), "-k", "2",
                      "--max-side", "3", "--rotation", "0", "--seed", "4", "-o", dir.file("imp.json"), "--truth-out",
                      dir.file("imp.pgm")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(last_line(r.out)["implanted"], 28);
  const auto target = io::read_cube(dir.file("scene.json"));
  const auto out = io::read_cube(dir.file("imp.json"));
  const auto mask = io::read_mask(dir.file("imp.pgm"));
  for (std::size_t i = 0; i < out.pixels(); ++i) {
    if (!mask[i]) EXPECT_EQ(out.pixel(i), target.pixel(i));
  }
}

TEST(Cli, ConfigErrorsAreReportedTogether) {
  const auto r = run({"detect", "-d", "bogus", "--psi", "2", "--laplacian", "x", "--ridge", "-1"});
  EXPECT_EQ(r.code, 2);
  const auto j = json::parse(r.err);
  EXPECT_EQ(j["error"]["code"], "invalid_config");
  const auto& details = j["error"]["details"];
  EXPECT_EQ(details.size(), 6u) << details.dump();  // 4 values + --input + --out
}

TEST(Cli, UnknownOptionIsUsageError) {
  const auto r = run({"detect", "--nope"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["error"]["code"], "invalid_config");
  EXPECT_EQ(run({}).code, 2);
}

TEST(Cli, MissingInputIsIoError) {
  test::TempDir dir;
  const auto r = run({"detect", "-i", dir.file("absent.json"), "-o", dir.file("s.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.err)["error"]["code"], "io");
  EXPECT_FALSE(std::filesystem::exists(dir.file("s.json")));
}

TEST(Cli, Help) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("detect"), std::string::npos);
}

}  // namespace
}  // namespace lad
