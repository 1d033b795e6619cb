#include <doctest.h>

#include "ssacnn/config.hpp"
#include "ssacnn/errors.hpp"
#include "test_util.hpp"

using namespace ssacnn;

TEST_CASE("defaults validate and parse back from their own rendering") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  test::TempDir dir("cfg");
  const auto path = dir.path() / "pipeline.toml";
  save_config(cfg, path);
  const PipelineConfig back = load_config(path);
  CHECK(back.canonical() == cfg.canonical());
  CHECK(back.hash() == cfg.hash());
}

TEST_CASE("parsing sections, comments and overrides") {
  const std::string text = R"(# pipeline settings
[signal]
fs = 250
segment_seconds = 20   # shorter segments

[ssa]
window = 40
components = 30
groups = 5

[eval]
ensemble_size = 4
sweep_max = 5

[run]
seed = 777
)";
  const PipelineConfig cfg = parse_config(text);
  CHECK(cfg.fs == 250.0);
  CHECK(cfg.segment_seconds == 20.0);
  CHECK(cfg.ssa_window == 40);
  CHECK(cfg.ssa_components == 30);
  CHECK(cfg.seed == 777);
  // untouched fields keep defaults
  CHECK(cfg.band_low_hz == 0.5);
}

TEST_CASE("unknown keys and malformed lines fail loudly") {
  CHECK_THROWS_AS(parse_config("[signal]\nfss = 500\n"), SpecError);
  CHECK_THROWS_AS(parse_config("[nope]\nfs = 500\n"), SpecError);
  CHECK_THROWS_AS(parse_config("[signal]\nfs 500\n"), SpecError);
  CHECK_THROWS_AS(parse_config("[signal\nfs = 500\n"), SpecError);
  CHECK_THROWS_AS(parse_config("[signal]\nfs = abc\n"), SpecError);
}

TEST_CASE("cross-field validation") {
  // 2L must fit in a segment
  CHECK_THROWS_AS(parse_config("[ssa]\nwindow = 70\n[signal]\nsegment_seconds = 0.2\n"),
                  SpecError);
  // G <= n_components
  CHECK_THROWS_AS(parse_config("[ssa]\ncomponents = 4\ngroups = 5\n"), SpecError);
  // band above Nyquist
  CHECK_THROWS_AS(parse_config("[signal]\nfs = 60\n"), SpecError);
  // nfft must cover the segment
  CHECK_THROWS_AS(parse_config("[welch]\nnfft = 1024\n"), SpecError);
  // ensemble larger than G
  CHECK_THROWS_AS(parse_config("[eval]\nensemble_size = 9\n"), SpecError);
}

TEST_CASE("hash is sensitive to every field and stable otherwise") {
  const PipelineConfig base;
  PipelineConfig tweaked = base;
  tweaked.epochs += 1;
  CHECK(base.hash() != tweaked.hash());
  PipelineConfig same = base;
  CHECK(base.hash() == same.hash());
  CHECK(base.hash_hex().size() == 16);
}
