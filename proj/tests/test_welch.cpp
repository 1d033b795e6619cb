#include <doctest.h>

#include <complex>

#include "ssacnn/errors.hpp"
#include "ssacnn/welch.hpp"
#include "test_util.hpp"

using namespace ssacnn;

TEST_CASE("radix-2 fft against the direct DFT") {
  const int n = 32;
  std::vector<std::complex<double>> a(n);
  Rng rng(3);
  for (auto& v : a) v = {rng.normal(), rng.normal()};
  const auto input = a;
  detail::fft_radix2(a);
  for (int k = 0; k < n; ++k) {
    std::complex<double> ref{0.0, 0.0};
    for (int t = 0; t < n; ++t)
      ref += input[static_cast<std::size_t>(t)] *
             std::polar(1.0, -2.0 * M_PI * k * t / n);
    CHECK(std::abs(a[static_cast<std::size_t>(k)] - ref) < 1e-9);
  }
  std::vector<std::complex<double>> bad(12);
  CHECK_THROWS_AS(detail::fft_radix2(bad), SpecError);
}

TEST_CASE("8 Hz sine peaks at 8 Hz") {
  const std::vector<Eigen::VectorXd> segs = {test::sine(20000, 8.0, 500.0)};
  const PsdEstimate psd = welch_psd(segs, 500.0, 32768);
  Eigen::Index arg = 0;
  psd.power.maxCoeff(&arg);
  CHECK(std::abs(psd.freqs[arg] - 8.0) <= 500.0 / 32768.0 + 1e-12);
}

TEST_CASE("frequency grid runs from 0 to fs/2, strictly increasing") {
  const std::vector<Eigen::VectorXd> segs = {test::random_series(1000, 4)};
  const PsdEstimate psd = welch_psd(segs, 250.0, 1024);
  REQUIRE(psd.freqs.size() == 513);
  CHECK(psd.freqs[0] == 0.0);
  CHECK(psd.freqs[512] == 125.0);
  for (Eigen::Index i = 0; i + 1 < psd.freqs.size(); ++i)
    CHECK(psd.freqs[i] < psd.freqs[i + 1]);
  CHECK(psd.power.minCoeff() >= 0.0);
}

TEST_CASE("averaging two identical segments equals the single-segment PSD") {
  const Eigen::VectorXd x = test::random_series(2000, 5);
  const std::vector<Eigen::VectorXd> one = {x};
  const std::vector<Eigen::VectorXd> two = {x, x};
  const PsdEstimate p1 = welch_psd(one, 500.0, 2048);
  const PsdEstimate p2 = welch_psd(two, 500.0, 2048);
  CHECK((p1.power - p2.power).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("white-noise PSD integrates to the signal variance within 15%") {
  for (int draw = 0; draw < 50; ++draw) {
    const Eigen::VectorXd x = test::random_series(4096, 100 + static_cast<std::uint64_t>(draw));
    const double var = (x.array() - x.mean()).square().sum() / 4096.0;
    const std::vector<Eigen::VectorXd> segs = {x};
    const PsdEstimate psd = welch_psd(segs, 500.0, 4096);
    const double df = 500.0 / 4096.0;
    const double integral = psd.power.sum() * df;
    CAPTURE(draw);
    CHECK(integral > 0.85 * var);
    CHECK(integral < 1.15 * var);
  }
}

TEST_CASE("welch input validation") {
  const std::vector<Eigen::VectorXd> none;
  CHECK_THROWS_AS(welch_psd(none, 500.0, 1024), NoDataError);
  const std::vector<Eigen::VectorXd> segs = {test::random_series(3000, 6)};
  CHECK_THROWS_AS(welch_psd(segs, 500.0, 2048), SpecError);  // segment > nfft
  CHECK_THROWS_AS(welch_psd(segs, 500.0, 4090), SpecError);  // not a power of two
  CHECK_THROWS_AS(welch_psd(segs, 0.0, 4096), SpecError);
}

TEST_CASE("next_pow2") {
  CHECK(next_pow2(1) == 1);
  CHECK(next_pow2(2) == 2);
  CHECK(next_pow2(3) == 4);
  CHECK(next_pow2(20000) == 32768);
}

TEST_CASE("batch welch: parallel equals serial bit for bit") {
  std::vector<std::vector<Eigen::VectorXd>> jobs;
  for (int i = 0; i < 5; ++i)
    jobs.push_back({test::random_series(900, 200 + static_cast<std::uint64_t>(i)),
                    test::random_series(900, 300 + static_cast<std::uint64_t>(i))});
  const auto par = welch_psd_batch(jobs, 250.0, 1024);
  const auto ser = welch_psd_batch_serial(jobs, 250.0, 1024);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i)
    CHECK((par[i].power - ser[i].power).cwiseAbs().maxCoeff() == 0.0);
}
