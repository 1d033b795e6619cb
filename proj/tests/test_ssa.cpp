#include <doctest.h>

#include <Eigen/SVD>

#include "ssacnn/errors.hpp"
#include "ssacnn/ssa.hpp"
#include "ssacnn/welch.hpp"
#include "test_util.hpp"

using namespace ssacnn;

namespace {

// Reference decomposition: thin SVD of the K x L trajectory matrix, one
// elementary matrix per singular triple, hankelized by anti-diagonal
// averaging. Independent of the eigendecomposition route in ssa_decompose.
Eigen::MatrixXd ssa_svd_reference(const Eigen::VectorXd& x, int l) {
  const Eigen::Index n = x.size();
  const Eigen::Index k = n - l + 1;
  Eigen::MatrixXd traj(k, l);
  for (Eigen::Index j = 0; j < l; ++j) traj.col(j) = x.segment(j, k);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(traj, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd u = svd.matrixU();
  const Eigen::MatrixXd v = svd.matrixV();
  const Eigen::VectorXd s = svd.singularValues();

  Eigen::MatrixXd components = Eigen::MatrixXd::Zero(l, n);
  for (Eigen::Index c = 0; c < s.size(); ++c) {
    const Eigen::MatrixXd elem = s[c] * u.col(c) * v.col(c).transpose();  // K x L
    for (Eigen::Index t = 0; t < n; ++t) {
      double acc = 0.0;
      int count = 0;
      for (Eigen::Index j = std::max<Eigen::Index>(0, t - k + 1);
           j <= std::min<Eigen::Index>(l - 1, t); ++j) {
        acc += elem(t - j, j);
        ++count;
      }
      components(c, t) = acc / count;
    }
  }
  return components;
}

// All partitions of {0..n-1} into exactly g nonempty blocks; returns the one
// minimizing the mean within-cluster pairwise distance.
void enumerate_partitions(int n, int g, std::vector<int>& assign, int next, int used,
                          const std::function<void(const std::vector<int>&)>& visit) {
  if (next == n) {
    if (used == g) visit(assign);
    return;
  }
  const int remaining = n - next;
  if (used + remaining < g) return;
  for (int b = 0; b < std::min(used + 1, g); ++b) {
    assign[static_cast<std::size_t>(next)] = b;
    enumerate_partitions(n, g, assign, next + 1, std::max(used, b + 1), visit);
  }
}

std::vector<std::vector<int>> best_partition_oracle(const Eigen::MatrixXd& dist, int g) {
  const int n = static_cast<int>(dist.rows());
  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_assign;
  enumerate_partitions(n, g, assign, 0, 0, [&](const std::vector<int>& a) {
    double sum = 0.0;
    int pairs = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (a[static_cast<std::size_t>(i)] == a[static_cast<std::size_t>(j)]) {
          sum += dist(i, j);
          ++pairs;
        }
    const double mean = pairs == 0 ? 0.0 : sum / pairs;
    if (mean < best) {
      best = mean;
      best_assign = a;
    }
  });
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(g));
  for (int i = 0; i < n; ++i)
    groups[static_cast<std::size_t>(best_assign[static_cast<std::size_t>(i)])].push_back(i);
  return groups;
}

bool same_group(const ComponentGrouping& grouping, int a, int b) {
  for (const auto& g : grouping.groups) {
    const bool has_a = std::find(g.begin(), g.end(), a) != g.end();
    const bool has_b = std::find(g.begin(), g.end(), b) != g.end();
    if (has_a || has_b) return has_a && has_b;
  }
  return false;
}

SsaDecomposition fake_decomposition(const Eigen::VectorXd& eigenvalues, int retained,
                                    Eigen::Index n = 16) {
  SsaDecomposition d;
  d.eigenvalues = eigenvalues;
  d.window_length = static_cast<int>(eigenvalues.size());
  d.original_length = n;
  d.components = Eigen::MatrixXd::Zero(retained, n);
  return d;
}

}  // namespace

TEST_CASE("ssa matches the dense SVD-of-trajectory reference") {
  for (auto [n, l, seed] : std::vector<std::tuple<int, int, int>>{
           {64, 8, 1}, {40, 5, 2}, {17, 3, 3}, {64, 2, 4}, {33, 8, 5}}) {
    const Eigen::VectorXd x = test::random_series(n, static_cast<std::uint64_t>(seed));
    const Eigen::MatrixXd ref = ssa_svd_reference(x, l);
    const SsaDecomposition d = ssa_decompose(x, SsaConfig{l, l});
    const double err = (d.components - ref).cwiseAbs().maxCoeff();
    CAPTURE(n);
    CAPTURE(l);
    CHECK(err < 1e-8);
  }
}

TEST_CASE("full component set reconstructs the input") {
  const Eigen::VectorXd x = test::random_series(500, 99);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{20, 20});
  const Eigen::VectorXd sum = d.components.colwise().sum().transpose();
  CHECK((sum - x).norm() / x.norm() < 1e-8);
}

TEST_CASE("noiseless sine: leading pair carries the variance and rebuilds the tone") {
  const Eigen::VectorXd x = test::sine(2000, 5.0, 100.0);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{40, 40});
  const Eigen::VectorXd fractions = variance_explained(d);
  CHECK(fractions[0] + fractions[1] >= 0.99);
  const Eigen::VectorXd pair = (d.components.row(0) + d.components.row(1)).transpose();
  CHECK((pair - x).norm() / x.norm() < 1e-6);
}

TEST_CASE("constant series is rank one") {
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(200, 3.25);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{10, 10});
  const Eigen::VectorXd fractions = variance_explained(d);
  CHECK(fractions[0] > 1.0 - 1e-12);
  CHECK((d.components.row(0).transpose() - x).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ssa input validation") {
  CHECK_THROWS_AS(ssa_decompose(test::random_series(100, 1), SsaConfig{51, 51}),
                  WindowTooLarge);
  Eigen::VectorXd bad = test::random_series(100, 2);
  bad[50] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ssa_decompose(bad, SsaConfig{10, 10}), NumericError);
  CHECK_THROWS_AS(ssa_decompose(test::random_series(100, 3), SsaConfig{10, 11}), SpecError);
}

TEST_CASE("eigenvalues are nonincreasing, nonnegative, orthonormal EOFs") {
  const Eigen::VectorXd x = test::random_series(600, 42);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{24, 24});
  for (Eigen::Index i = 0; i + 1 < d.eigenvalues.size(); ++i)
    CHECK(d.eigenvalues[i] >= d.eigenvalues[i + 1]);
  CHECK(d.eigenvalues.minCoeff() >= -1e-10);
  const Eigen::MatrixXd gram = d.eofs.transpose() * d.eofs;
  CHECK((gram - Eigen::MatrixXd::Identity(24, 24)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("variance_explained arithmetic") {
  Eigen::VectorXd ev(2);
  ev << 3.0, 1.0;
  const Eigen::VectorXd f = variance_explained(fake_decomposition(ev, 2));
  CHECK(f[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(0.25).epsilon(1e-14));

  const Eigen::VectorXd flat = variance_explained(
      fake_decomposition(Eigen::VectorXd::Constant(4, 0.5), 4));
  for (int i = 0; i < 4; ++i) CHECK(flat[i] == doctest::Approx(0.25).epsilon(1e-14));

  CHECK_THROWS_AS(variance_explained(fake_decomposition(Eigen::VectorXd::Zero(3), 3)),
                  DegenerateSpectrum);
}

TEST_CASE("variance_explained sums to one over all L components") {
  const Eigen::VectorXd x = test::random_series(512, 5);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{16, 16});
  const Eigen::VectorXd f = variance_explained(d);
  CHECK(std::abs(f.sum() - 1.0) < 1e-12);
  for (Eigen::Index i = 0; i + 1 < f.size(); ++i) CHECK(f[i] >= f[i + 1]);
}

TEST_CASE("w-correlation: unit diagonal, symmetry, tone structure") {
  // distinct amplitudes keep the two tone subspaces from mixing
  Eigen::VectorXd x = test::sine(2000, 5.0, 100.0) + test::sine(2000, 17.0, 100.0, 0.6);
  x += 0.01 * test::random_series(2000, 8);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{40, 8});
  const WCorrelationMatrix w = w_correlation(d);

  for (int i = 0; i < 8; ++i) {
    CHECK(w.values(i, i) == 1.0);
    for (int j = 0; j < 8; ++j) {
      CHECK(w.values(i, j) == w.values(j, i));
      CHECK(std::abs(w.values(i, j)) <= 1.0);
    }
  }
  // components 0,1 are the 5 Hz pair and 2,3 the 17 Hz pair: cross-frequency
  // correlations stay low
  for (int i : {0, 1})
    for (int j : {2, 3}) CHECK(std::abs(w.values(i, j)) < 0.1);
  // quadrature pairs correlate strongly relative to their cross terms
  CHECK(std::abs(w.values(0, 1)) > 0.5);
  CHECK(std::abs(w.values(2, 3)) > 0.5);
  CHECK(std::abs(w.values(0, 1)) > 5.0 * std::abs(w.values(0, 2)));
}

TEST_CASE("w-correlation flags zero-norm components") {
  SsaDecomposition d;
  d.window_length = 4;
  d.original_length = 32;
  d.eigenvalues = Eigen::VectorXd::Ones(4);
  d.components = Eigen::MatrixXd::Zero(3, 32);
  d.components.row(0) = test::random_series(32, 1).transpose();
  d.components.row(2) = test::random_series(32, 2).transpose();
  const WCorrelationMatrix w = w_correlation(d);
  CHECK(w.has_zero_norm_component);
  CHECK(w.values(0, 1) == 0.0);
  CHECK(w.values(1, 2) == 0.0);
  CHECK(w.values(1, 1) == 1.0);
}

TEST_CASE("grouping: trivial cuts") {
  const Eigen::VectorXd x = test::random_series(300, 6);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{12, 6});
  const WCorrelationMatrix w = w_correlation(d);

  const ComponentGrouping singles = group_components(w, d, 6);
  REQUIRE(singles.group_count() == 6);
  for (int k = 0; k < 6; ++k) {
    CHECK(singles.groups[static_cast<std::size_t>(k)].size() == 1);
    CHECK(singles.groups[static_cast<std::size_t>(k)][0] == k);  // eigenvalue order
  }

  const ComponentGrouping one = group_components(w, d, 1);
  REQUIRE(one.group_count() == 1);
  CHECK(one.groups[0].size() == 6);

  CHECK_THROWS_AS(group_components(w, d, 7), InvalidGroupCount);
  CHECK_THROWS_AS(group_components(w, d, 0), InvalidGroupCount);
}

TEST_CASE("grouping pairs the tones and agrees with the exhaustive oracle") {
  Eigen::VectorXd x = test::sine(2000, 5.0, 100.0) + test::sine(2000, 17.0, 100.0, 0.6);
  x += 0.01 * test::random_series(2000, 9);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{40, 6});
  const WCorrelationMatrix w = w_correlation(d);
  const ComponentGrouping grouping = group_components(w, d, 3);

  CHECK(same_group(grouping, 0, 1));
  CHECK(same_group(grouping, 2, 3));
  CHECK_FALSE(same_group(grouping, 0, 2));

  Eigen::MatrixXd dist = Eigen::MatrixXd::Ones(6, 6) - w.values.cwiseAbs();
  const auto oracle = best_partition_oracle(dist, 3);
  auto oracle_same = [&](int a, int b) {
    for (const auto& g : oracle) {
      const bool has_a = std::find(g.begin(), g.end(), a) != g.end();
      const bool has_b = std::find(g.begin(), g.end(), b) != g.end();
      if (has_a || has_b) return has_a && has_b;
    }
    return false;
  };
  CHECK(oracle_same(0, 1));
  CHECK(oracle_same(2, 3));
  CHECK_FALSE(oracle_same(0, 2));
}

TEST_CASE("merge_groups: identity, additivity, grouped fractions") {
  const Eigen::VectorXd x = test::random_series(400, 10);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{16, 16});
  const WCorrelationMatrix w = w_correlation(d);

  // singleton groups reproduce component rows
  const ComponentGrouping singles = group_components(w, d, 16);
  const auto series = merge_groups(d, singles);
  for (int k = 0; k < 16; ++k) {
    const int idx = singles.groups[static_cast<std::size_t>(k)][0];
    CHECK((series[static_cast<std::size_t>(k)] - d.components.row(idx).transpose())
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  // one group over the full decomposition reconstructs the input
  const ComponentGrouping one = group_components(w, d, 1);
  const auto full = merge_groups(d, one);
  CHECK((full[0] - x).norm() / x.norm() < 1e-8);

  // exact additivity for an arbitrary cut: sum over groups == sum over rows
  const ComponentGrouping mid = group_components(w, d, 5);
  const auto grouped = merge_groups(d, mid);
  Eigen::VectorXd group_sum = Eigen::VectorXd::Zero(400);
  for (const auto& s : grouped) group_sum += s;
  const Eigen::VectorXd comp_sum = d.components.colwise().sum().transpose();
  CHECK((group_sum - comp_sum).cwiseAbs().maxCoeff() < 1e-12 * comp_sum.cwiseAbs().maxCoeff() + 1e-15);

  // grouped variance fractions add up from member fractions
  const Eigen::VectorXd fractions = variance_explained(d);
  double total = 0.0;
  for (const auto& g : mid.groups)
    for (int idx : g) total += fractions[idx];
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tone separation: leading groups peak at 5 and 17 Hz") {
  Eigen::VectorXd x = test::sine(4000, 5.0, 100.0) + test::sine(4000, 17.0, 100.0, 0.6);
  x += 0.01 * test::random_series(4000, 11);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{40, 10});
  const WCorrelationMatrix w = w_correlation(d);
  const ComponentGrouping grouping = group_components(w, d, 4);
  const auto merged = merge_groups(d, grouping);

  std::vector<double> peaks;
  for (int g = 0; g < 2; ++g) {
    const std::vector<Eigen::VectorXd> segs = {merged[static_cast<std::size_t>(g)]};
    const PsdEstimate psd = welch_psd(segs, 100.0, 4096);
    Eigen::Index arg = 0;
    psd.power.maxCoeff(&arg);
    peaks.push_back(psd.freqs[arg]);
  }
  const double bin = 100.0 / 4096.0;
  CHECK(std::abs(peaks[0] - 5.0) <= bin + 1e-9);
  CHECK(std::abs(peaks[1] - 17.0) <= bin + 1e-9);
}

TEST_CASE("batch decomposition: parallel equals serial bit for bit") {
  std::vector<Eigen::VectorXd> xs;
  for (int i = 0; i < 6; ++i) xs.push_back(test::random_series(300, 50 + i));
  const SsaConfig cfg{20, 10};
  const auto par = ssa_decompose_batch(xs, cfg);
  const auto ser = ssa_decompose_batch_serial(xs, cfg);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK((par[i].components - ser[i].components).cwiseAbs().maxCoeff() == 0.0);
    CHECK((par[i].eigenvalues - ser[i].eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("decomposition serialization round-trip") {
  test::TempDir dir("ssa_io");
  const Eigen::VectorXd x = test::random_series(256, 77);
  const SsaDecomposition d = ssa_decompose(x, SsaConfig{16, 8});
  const ComponentGrouping grouping = group_components(w_correlation(d), d, 3);

  const auto data = dir.path() / "comp.f64";
  const auto sidecar = dir.path() / "comp.json";
  save_decomposition(d, grouping, data, sidecar);
  const auto [back, g2] = load_decomposition(data, sidecar);
  CHECK((back.components - d.components).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.eigenvalues - d.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.window_length == d.window_length);
  CHECK(g2.groups == grouping.groups);
}
