#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "switchdiff/errors.hpp"
#include "switchdiff/export.hpp"

using namespace switchdiff;
namespace fs = std::filesystem;

TEST_CASE("formatted doubles round-trip exactly", "[export]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-300, 300);
  for (int k = 0; k < 2000; ++k) {
    const double v = std::ldexp(mant(rng), expo(rng));
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-3) == "0.001");
}

TEST_CASE("trajectory CSV layout", "[export]") {
  Trajectory p;
  p.dim = 2;
  p.times = {0.0, 0.5};
  p.states = {1.0, -0.25, 0.5, 0.125};
  p.regimes = {1, 3};
  std::ostringstream os;
  write_trajectory_csv(os, p);
  CHECK(os.str() == "t,x1,x2,regime\n0,1,-0.25,1\n0.5,0.5,0.125,3\n");
}

TEST_CASE("measure CSV labels the lumped tail", "[export]") {
  InvariantMeasure nu;
  nu.nu = Vector(3);
  nu.nu << 0.5, 0.25, 0.25;
  nu.lumped_tail = true;
  std::ostringstream os;
  write_measure_csv(os, nu);
  CHECK(os.str() == "regime,nu\n1,0.5\n2,0.25\n3+,0.25\n");
}

TEST_CASE("matrix and quantile curve CSVs", "[export]") {
  Matrix m(2, 2);
  m << -1, 1, 2, -2;
  std::ostringstream os;
  write_matrix_csv(os, m);
  CHECK(os.str() == "-1,1\n2,-2\n");

  PathwiseRateEstimate est;
  est.curve = {{0.5, 0.25, 10}, {1.0, 2.0, 10}};
  std::ostringstream qs;
  write_quantile_curve_csv(qs, est);
  CHECK(qs.str() == "lambda,quantile,n_surviving\n0.5,0.25,10\n1,2,10\n");
}

TEST_CASE("JSON reports carry verdicts and stringify infinities", "[export]") {
  CriterionReport r;
  r.theorem = Theorem::T3_3;
  r.hypotheses = {{"drift_condition", HypothesisStatus::holds}, {"mg_bounded", HypothesisStatus::fails}};
  r.mean_drift.tail_bound = std::numeric_limits<double>::infinity();
  const auto j = to_json(r);
  CHECK(j.at("theorem") == "T3_3");
  CHECK(j.at("verdict") == "inconclusive");
  CHECK(j.at("tail_bound") == "inf");
  CHECK(j.at("hypotheses").at("mg_bounded") == "fails");

  FunctionalEstimate e;
  e.functional = "stay_in_ball(h=0.5)";
  e.estimate = 0.97;
  const auto je = to_json(e);
  CHECK(je.at("functional") == "stay_in_ball(h=0.5)");
  CHECK(je.at("estimate") == 0.97);
}

TEST_CASE("text files are written with parent directories", "[export]") {
  const fs::path dir = fs::temp_directory_path() / "switchdiff_export_test";
  fs::remove_all(dir);
  write_text_file(dir / "a" / "b.txt", "hello\n");
  std::ifstream in(dir / "a" / "b.txt");
  std::string line;
  std::getline(in, line);
  CHECK(line == "hello");
  fs::remove_all(dir);
}
