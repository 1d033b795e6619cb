#include <doctest.h>

#include <fstream>

#include "ssacnn/errors.hpp"
#include "ssacnn/recording.hpp"
#include "test_util.hpp"

using namespace ssacnn;
using ssacnn::test::TempDir;

TEST_CASE("csv load: shape passthrough") {
  TempDir dir("csv");
  const auto path = dir.path() / "two.csv";
  std::ofstream(path) << "Fp1,Fp2\n1.0,2.0\n3.0,4.0\n5.5,6.5\n-1,0.25\n";

  const Recording rec = load_recording(path, RecordingFormat::Csv);
  CHECK(rec.channel_count() == 2);
  CHECK(rec.sample_count() == 4);
  CHECK(rec.channel_names == std::vector<std::string>{"Fp1", "Fp2"});
  CHECK(rec.channels(0, 0) == 1.0);
  CHECK(rec.channels(1, 3) == 0.25);
  CHECK(rec.label == ClassLabel::Unknown);
}

TEST_CASE("csv load: ragged row is a ShapeError") {
  TempDir dir("csv_ragged");
  const auto path = dir.path() / "bad.csv";
  std::ofstream(path) << "a,b\n1,2\n1,2,3\n";
  CHECK_THROWS_AS(load_recording(path, RecordingFormat::Csv), ShapeError);
}

TEST_CASE("csv load: bad header / bad number") {
  TempDir dir("csv_bad");
  {
    const auto path = dir.path() / "empty.csv";
    std::ofstream(path) << "";
    CHECK_THROWS_AS(load_recording(path, RecordingFormat::Csv), ParseError);
  }
  {
    const auto path = dir.path() / "nan.csv";
    std::ofstream(path) << "a\n1.0\noops\n";
    CHECK_THROWS_AS(load_recording(path, RecordingFormat::Csv), ParseError);
  }
}

TEST_CASE("csv round-trips values exactly") {
  TempDir dir("csv_rt");
  Recording rec = test::random_recording(3, 17, 500.0, 11);
  rec.channel_names = {"C3", "C4", "Cz"};
  const auto path = dir.path() / "r.csv";
  save_recording(rec, path, RecordingFormat::Csv);
  const Recording back = load_recording(path, RecordingFormat::Csv);
  REQUIRE(back.channels.rows() == rec.channels.rows());
  REQUIRE(back.channels.cols() == rec.channels.cols());
  CHECK((back.channels - rec.channels).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.channel_names == rec.channel_names);
}

TEST_CASE("raw-f64 round-trips bit-exactly and keeps fs") {
  TempDir dir("raw");
  const Recording rec = test::random_recording(4, 100, 512.5, 77);
  const auto path = dir.path() / "r.f64";
  save_recording(rec, path, RecordingFormat::RawF64);

  // header is exactly 32 bytes + payload
  CHECK(std::filesystem::file_size(path) == 32 + 4 * 100 * sizeof(double));

  const Recording back = load_recording(path, RecordingFormat::RawF64);
  CHECK(back.fs == rec.fs);
  REQUIRE(back.channels.rows() == 4);
  REQUIRE(back.channels.cols() == 100);
  CHECK((back.channels - rec.channels).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("raw-f64: bad magic and truncation are ParseErrors") {
  TempDir dir("raw_bad");
  {
    const auto path = dir.path() / "magic.f64";
    std::ofstream(path, std::ios::binary) << "NOTMAGIC" << std::string(40, '\0');
    CHECK_THROWS_AS(load_recording(path, RecordingFormat::RawF64), ParseError);
  }
  {
    const Recording rec = test::random_recording(2, 50, 500.0, 3);
    const auto good = dir.path() / "good.f64";
    save_recording(rec, good, RecordingFormat::RawF64);
    std::filesystem::resize_file(good, 32 + 13);
    CHECK_THROWS_AS(load_recording(good, RecordingFormat::RawF64), ParseError);
  }
  CHECK_THROWS_AS(load_recording(dir.path() / "missing.f64", RecordingFormat::RawF64),
                  IoError);
}

TEST_CASE("matrix container round-trip") {
  TempDir dir("mat");
  Eigen::MatrixXd m(3, 5);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i / 5, i % 5) = 0.1 * static_cast<double>(i) - 0.7;
  const auto path = dir.path() / "m.f64";
  save_matrix_f64(m, path);
  CHECK((load_matrix_f64(path) - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("labels map to strings and back") {
  for (ClassLabel l : {ClassLabel::Unknown, ClassLabel::Control, ClassLabel::Dyslexic})
    CHECK(label_from_string(to_string(l)) == l);
  CHECK_THROWS_AS(label_from_string("martian"), ParseError);
}

TEST_CASE("recording validation") {
  Recording rec = test::random_recording(1, 2, 500.0, 5);
  CHECK_NOTHROW(rec.validate());
  rec.fs = 0.0;
  CHECK_THROWS_AS(rec.validate(), SpecError);
  rec.fs = 500.0;
  rec.channels.resize(1, 1);
  CHECK_THROWS_AS(rec.validate(), ShapeError);
}
