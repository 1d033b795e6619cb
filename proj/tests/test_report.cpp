#include <doctest.h>

#include <sstream>

#include "ssacnn/report.hpp"
#include "ssacnn/ssa.hpp"
#include "test_util.hpp"

using namespace ssacnn;

namespace {

EvalReport sample_report() {
  EvalReport r;
  r.folds.resize(2);
  r.folds[0].fold = 0;
  r.folds[0].confusion = {2, 3, 1, 0};
  r.folds[0].test_subjects = {"a", "b"};
  r.folds[1].fold = 1;
  r.folds[1].confusion = {1, 2, 0, 1};
  r.folds[1].test_subjects = {"c"};
  r.total = {3, 5, 1, 1};
  r.accuracy = r.total.accuracy();
  r.sensitivity = r.total.sensitivity();
  r.specificity = r.total.specificity();
  return r;
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("eval report JSON carries the metrics and is deterministic") {
  const EvalReport r = sample_report();
  const std::string a = eval_report_to_json(r, 4, "cafebabe");
  const std::string b = eval_report_to_json(r, 4, "cafebabe");
  CHECK(a == b);
  CHECK(a.find("\"accuracy\": 0.8") != std::string::npos);
  CHECK(a.find("\"config_hash\": \"cafebabe\"") != std::string::npos);
  CHECK(a.find("\"ensemble_size\": 4") != std::string::npos);
}

TEST_CASE("fold CSV has one row per fold") {
  const std::string csv = folds_to_csv(sample_report());
  CHECK(count_lines(csv) == 3);  // header + 2 folds
  CHECK(csv.rfind("fold,tp,tn,fp,fn,accuracy,sensitivity,specificity\n", 0) == 0);
}

TEST_CASE("sweep CSV has one row per point per fold") {
  std::vector<SweepPoint> points(3);
  for (int g = 0; g < 3; ++g) {
    points[static_cast<std::size_t>(g)].ensemble_size = g + 1;
    points[static_cast<std::size_t>(g)].report = sample_report();
  }
  const std::string csv = sweep_to_csv(points);
  CHECK(count_lines(csv) == 1 + 3 * 2);
  const std::string json = sweep_to_json(points, "hash");
  CHECK(json.find("\"points\"") != std::string::npos);
}

TEST_CASE("variance CSV is nonincreasing and sums to one") {
  const Eigen::VectorXd x = test::random_series(400, 3);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{16, 16});
  const std::string csv = variance_to_csv(d);

  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  double sum = 0.0, prev = 1e300, last_cum = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    double eig, frac, cum;
    int idx;
    REQUIRE(std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &idx, &eig, &frac, &cum) == 4);
    CHECK(frac <= prev);
    prev = frac;
    sum += frac;
    last_cum = cum;
    ++rows;
  }
  CHECK(rows == 16);
  CHECK(std::abs(sum - 1.0) < 1e-12);
  CHECK(std::abs(last_cum - 1.0) < 1e-12);
}

TEST_CASE("grouped variance CSV sums member fractions") {
  const Eigen::VectorXd x = test::random_series(300, 4);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{12, 12});
  const ComponentGrouping g = group_components(w_correlation(d), d, 4);
  const std::string csv = grouped_variance_to_csv(d, g);
  CHECK(count_lines(csv) == 5);

  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  double sum = 0.0;
  while (std::getline(in, line)) {
    const auto last_comma = line.rfind(',');
    sum += std::stod(line.substr(last_comma + 1));
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("svg renderers emit well-formed documents") {
  std::vector<double> xs = {1, 2, 3, 4, 5};
  std::vector<SvgSeries> series = {{"accuracy", {0.5, 0.6, 0.9, 0.95, 0.9}},
                                   {"sensitivity", {0.4, 0.7, 0.8, 0.9, 0.85}}};
  const std::string plot = svg_line_plot("performance", xs, series);
  CHECK(plot.rfind("<svg", 0) == 0);
  CHECK(plot.find("polyline") != std::string::npos);
  CHECK(plot.find("</svg>") != std::string::npos);

  const std::string heat = svg_heatmap("matrix", Eigen::MatrixXd::Identity(4, 4));
  CHECK(heat.rfind("<svg", 0) == 0);
  CHECK(heat.find("rect") != std::string::npos);
}

TEST_CASE("text write/read round-trip") {
  test::TempDir dir("report_io");
  const std::string payload = "line1\nline2\n";
  write_text(dir.path() / "t.txt", payload);
  CHECK(read_text(dir.path() / "t.txt") == payload);
}
