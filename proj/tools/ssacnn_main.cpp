// Subcommand front end wiring the pipeline stages together. Every stage
// reads the previous stage's persisted artifacts and writes its own under
// --out, stamped with the config hash, so reruns with the same config and
// seed reproduce identical bytes.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <nlohmann/json.hpp>

#include "ssacnn/config.hpp"
#include "ssacnn/ensemble.hpp"
#include "ssacnn/errors.hpp"
#include "ssacnn/features.hpp"
#include "ssacnn/parallel.hpp"
#include "ssacnn/preprocess.hpp"
#include "ssacnn/report.hpp"
#include "ssacnn/ssa.hpp"
#include "ssacnn/synth.hpp"
#include "ssacnn/welch.hpp"

namespace fs = std::filesystem;
using namespace ssacnn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitMissingInput = 2;
constexpr int kExitConfig = 3;
constexpr int kExitNumeric = 4;

struct LabeledDir {
  std::vector<Recording> recordings;
  RecordingFormat format = RecordingFormat::RawF64;
};

void write_labeled_dir(const std::vector<Recording>& recs, const fs::path& dir,
                       RecordingFormat format, const std::string& config_hash,
                       const nlohmann::json& extra = {}) {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["config_hash"] = config_hash;
  manifest["format"] = format == RecordingFormat::Csv ? "csv" : "raw-f64";
  if (!extra.is_null()) manifest["generator"] = extra;
  nlohmann::json subjects = nlohmann::json::array();
  for (const Recording& rec : recs) {
    const std::string file =
        rec.subject_id + (format == RecordingFormat::Csv ? ".csv" : ".f64");
    save_recording(rec, dir / file, format);
    nlohmann::json entry;
    entry["subject_id"] = rec.subject_id;
    entry["label"] = to_string(rec.label);
    entry["file"] = file;
    entry["fs"] = rec.fs;
    subjects.push_back(entry);
  }
  manifest["subjects"] = subjects;
  write_text(dir / "labels.json", manifest.dump(2) + "\n");
}

LabeledDir load_labeled_dir(const fs::path& dir) {
  const fs::path manifest_path = dir / "labels.json";
  if (!fs::exists(manifest_path)) throw IoError("no labels.json under " + dir.string());
  nlohmann::json manifest;
  try {
    std::ifstream in(manifest_path);
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad labels.json: " + std::string(e.what()));
  }

  LabeledDir out;
  out.format = manifest.at("format").get<std::string>() == "csv" ? RecordingFormat::Csv
                                                                 : RecordingFormat::RawF64;
  for (const auto& entry : manifest.at("subjects")) {
    Recording rec = load_recording(dir / entry.at("file").get<std::string>(), out.format);
    rec.subject_id = entry.at("subject_id").get<std::string>();
    rec.label = label_from_string(entry.at("label").get<std::string>());
    if (entry.contains("fs") && out.format == RecordingFormat::Csv)
      rec.fs = entry.at("fs").get<double>();
    out.recordings.push_back(std::move(rec));
  }
  if (out.recordings.empty()) throw NoDataError("labels.json lists no subjects");
  return out;
}

nn::TrainConfig hyper_from(const PipelineConfig& cfg) {
  nn::TrainConfig h;
  h.learning_rate = cfg.learning_rate;
  h.epochs = cfg.epochs;
  h.batch_size = cfg.batch_size;
  h.seed = cfg.seed;
  return h;
}

// Aggregated confusion per ensemble size, straight from per-fold sweep rows.
std::map<int, Confusion> aggregate_sweep_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  std::map<int, Confusion> agg;
  while (std::getline(in, line)) {
    int g, fold, tp, tn, fp, fn;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%d,%d,%d", &g, &fold, &tp, &tn, &fp, &fn) != 6)
      throw ParseError("bad sweep CSV row: " + line);
    agg[g].tp += tp;
    agg[g].tn += tn;
    agg[g].fp += fp;
    agg[g].fn += fn;
  }
  if (agg.empty()) throw NoDataError("sweep CSV has no rows");
  return agg;
}

struct CliOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::string in_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = -1;

  // synth
  std::string preset = "easy";
  std::string format = "raw";
  int subjects_override = 0;
  int channels_override = 0;
  double duration_override = 0.0;

  // ssa / report
  std::string subject;
  int channel = 0;
  int segment_index = 0;
  std::string kind = "variance";
  bool svg = false;
};

PipelineConfig resolve_config(const CliOptions& opt) {
  PipelineConfig cfg;
  if (!opt.config_path.empty()) cfg = load_config(opt.config_path);
  if (opt.seed_given) cfg.seed = opt.seed;
  if (opt.threads >= 0) cfg.threads = opt.threads;
  cfg.validate();
  set_worker_threads(cfg.threads);
  return cfg;
}

int cmd_synth(const CliOptions& opt, const PipelineConfig& cfg) {
  SynthSpec spec = preset_by_name(opt.preset);
  spec.seed = cfg.seed;
  if (opt.subjects_override > 0) spec.subjects_per_class = opt.subjects_override;
  if (opt.channels_override > 0) {
    spec.channels = opt.channels_override;
    for (int cls = 0; cls < 2; ++cls)
      for (auto& m : spec.coupling[static_cast<std::size_t>(cls)]) {
        const double rho = m.cols() > 1 ? m(0, 1) : 0.0;
        m = equicorrelation(spec.channels, rho);
      }
  }
  if (opt.duration_override > 0.0) spec.duration_s = opt.duration_override;
  spec.validate();

  const auto recs = generate(spec);
  nlohmann::json extra;
  extra["preset"] = opt.preset;
  extra["seed"] = spec.seed;
  extra["subjects_per_class"] = spec.subjects_per_class;
  extra["channels"] = spec.channels;
  extra["duration_s"] = spec.duration_s;
  write_labeled_dir(recs, opt.out_dir,
                    opt.format == "csv" ? RecordingFormat::Csv : RecordingFormat::RawF64,
                    cfg.hash_hex(), extra);
  std::cout << "wrote " << recs.size() << " recordings to " << opt.out_dir << "\n";
  return 0;
}

int cmd_preprocess(const CliOptions& opt, const PipelineConfig& cfg) {
  const LabeledDir in = load_labeled_dir(opt.in_dir);
  const BandPassSpec band{cfg.band_low_hz, cfg.band_high_hz, cfg.filter_order};
  std::vector<Recording> processed;
  for (const Recording& rec : in.recordings)
    processed.push_back(bandpass(normalize_channels(rec), band));
  write_labeled_dir(processed, opt.out_dir, RecordingFormat::RawF64, cfg.hash_hex());
  std::cout << "preprocessed " << processed.size() << " recordings into " << opt.out_dir
            << "\n";
  return 0;
}

int cmd_ssa(const CliOptions& opt, const PipelineConfig& cfg) {
  const LabeledDir in = load_labeled_dir(opt.in_dir);
  const Recording* rec = &in.recordings.front();
  if (!opt.subject.empty()) {
    rec = nullptr;
    for (const Recording& r : in.recordings)
      if (r.subject_id == opt.subject) rec = &r;
    if (!rec) throw IoError("subject '" + opt.subject + "' not in " + opt.in_dir);
  }
  const auto segments = segment(*rec, cfg.segment_seconds, cfg.segment_overlap);
  if (opt.segment_index < 0 ||
      static_cast<std::size_t>(opt.segment_index) >= segments.size())
    throw SpecError("segment index out of range");
  if (opt.channel < 0 || opt.channel >= rec->channel_count())
    throw SpecError("channel index out of range");

  const Eigen::VectorXd series = segments[static_cast<std::size_t>(opt.segment_index)]
                                     .data.row(opt.channel)
                                     .transpose();
  const SsaDecomposition d =
      ssa_decompose(series, SsaConfig{cfg.ssa_window, cfg.ssa_components});
  const WCorrelationMatrix w = w_correlation(d);
  const ComponentGrouping grouping = group_components(w, d, cfg.groups);

  fs::create_directories(opt.out_dir);
  const fs::path dir(opt.out_dir);
  save_decomposition(d, grouping, dir / "components.f64", dir / "decomposition.json");
  write_text(dir / "wcorr.csv", matrix_to_csv(w.values));
  write_text(dir / "variance.csv", variance_to_csv(d));
  write_text(dir / "grouped_variance.csv", grouped_variance_to_csv(d, grouping));
  std::cout << "decomposed " << rec->subject_id << " channel " << opt.channel << " into "
            << d.retained() << " components under " << opt.out_dir << "\n";
  return 0;
}

int cmd_features(const CliOptions& opt, const PipelineConfig& cfg) {
  const LabeledDir in = load_labeled_dir(opt.in_dir);
  const FeatureDataset ds = build_features(in.recordings, cfg);
  save_features(ds, opt.out_dir);
  std::cout << "built " << ds.samples.size() << " feature samples (G=" << ds.groups
            << ", C=" << ds.channels << ") in " << opt.out_dir << "\n";
  return 0;
}

int cmd_train(const CliOptions& opt, const PipelineConfig& cfg) {
  const FeatureDataset ds = load_features(opt.in_dir);
  std::vector<std::size_t> ids(ds.samples.size());
  std::iota(ids.begin(), ids.end(), 0);
  EnsembleModel model =
      train_ensemble(ds, ids, cfg.ensemble_size, hyper_from(cfg), cfg.seed);
  save_ensemble(model, opt.out_dir);

  nlohmann::json summary;
  summary["config_hash"] = cfg.hash_hex();
  summary["members"] = model.size();
  summary["training_samples"] = ds.samples.size();
  write_text(fs::path(opt.out_dir) / "train_summary.json", summary.dump(2) + "\n");
  std::cout << "trained " << model.size() << " members on " << ds.samples.size()
            << " samples into " << opt.out_dir << "\n";
  return 0;
}

int cmd_eval(const CliOptions& opt, const PipelineConfig& cfg) {
  const FeatureDataset ds = load_features(opt.in_dir);
  const EvalReport report =
      cross_validate(ds, cfg.folds, cfg.ensemble_size, hyper_from(cfg), cfg.seed);
  fs::create_directories(opt.out_dir);
  write_text(fs::path(opt.out_dir) / "report.json",
             eval_report_to_json(report, cfg.ensemble_size, cfg.hash_hex()));
  write_text(fs::path(opt.out_dir) / "folds.csv", folds_to_csv(report));
  std::printf("accuracy %.4f  sensitivity %.4f  specificity %.4f\n", report.accuracy,
              report.sensitivity, report.specificity);
  return 0;
}

int cmd_sweep(const CliOptions& opt, const PipelineConfig& cfg) {
  const FeatureDataset ds = load_features(opt.in_dir);
  const auto points =
      sweep_groups(ds, cfg.sweep_min, cfg.sweep_max, cfg.folds, hyper_from(cfg), cfg.seed);
  fs::create_directories(opt.out_dir);
  write_text(fs::path(opt.out_dir) / "sweep.csv", sweep_to_csv(points));
  write_text(fs::path(opt.out_dir) / "sweep.json", sweep_to_json(points, cfg.hash_hex()));
  for (const SweepPoint& p : points)
    std::printf("G'=%d  accuracy %.4f  sensitivity %.4f  specificity %.4f\n",
                p.ensemble_size, p.report.accuracy, p.report.sensitivity,
                p.report.specificity);
  return 0;
}

int cmd_report(const CliOptions& opt, const PipelineConfig& cfg) {
  (void)cfg;
  fs::create_directories(opt.out_dir);
  const fs::path out(opt.out_dir);
  const fs::path in(opt.in_dir);

  if (opt.kind == "variance" || opt.kind == "grouped-variance") {
    const auto [d, grouping] =
        load_decomposition(in / "components.f64", in / "decomposition.json");
    if (opt.kind == "variance") {
      write_text(out / "variance.csv", variance_to_csv(d));
      if (opt.svg) {
        const Eigen::VectorXd fractions = variance_explained(d);
        std::vector<double> xs(static_cast<std::size_t>(fractions.size()));
        std::vector<SvgSeries> series(1);
        series[0].name = "fraction";
        for (Eigen::Index i = 0; i < fractions.size(); ++i) {
          xs[static_cast<std::size_t>(i)] = static_cast<double>(i + 1);
          series[0].y.push_back(fractions[i]);
        }
        write_text(out / "variance.svg", svg_line_plot("variance explained", xs, series));
      }
    } else {
      write_text(out / "grouped_variance.csv", grouped_variance_to_csv(d, grouping));
      if (opt.svg) {
        const Eigen::VectorXd fractions = variance_explained(d);
        std::vector<double> xs;
        std::vector<SvgSeries> series(1);
        series[0].name = "group fraction";
        for (std::size_t g = 0; g < grouping.groups.size(); ++g) {
          xs.push_back(static_cast<double>(g + 1));
          double sum = 0.0;
          for (int idx : grouping.groups[g]) sum += fractions[idx];
          series[0].y.push_back(sum);
        }
        write_text(out / "grouped_variance.svg",
                   svg_line_plot("variance explained by group", xs, series));
      }
    }
    return 0;
  }

  if (opt.kind == "heatmap") {
    const FeatureDataset ds = load_features(in);
    const SubjectFeatures* sample = &ds.samples.front();
    if (!opt.subject.empty()) {
      sample = nullptr;
      for (const auto& s : ds.samples)
        if (s.subject_id == opt.subject) {
          sample = &s;
          break;
        }
      if (!sample) throw IoError("subject '" + opt.subject + "' not in " + opt.in_dir);
    }
    for (int g = 0; g < ds.groups; ++g) {
      const auto& m = sample->matrices[static_cast<std::size_t>(g)].values;
      const std::string stem =
          "features_" + sample->subject_id + "_g" + std::to_string(g + 1);
      write_text(out / (stem + ".csv"), matrix_to_csv(m));
      if (opt.svg)
        write_text(out / (stem + ".svg"),
                   svg_heatmap(sample->subject_id + " group " + std::to_string(g + 1), m));
    }
    return 0;
  }

  if (opt.kind == "sweep-plot") {
    const auto agg = aggregate_sweep_csv(read_text(in));
    std::vector<double> xs;
    std::vector<SvgSeries> series = {
        {"accuracy", {}}, {"sensitivity", {}}, {"specificity", {}}};
    for (const auto& [g, c] : agg) {
      xs.push_back(g);
      series[0].y.push_back(c.accuracy());
      series[1].y.push_back(c.sensitivity());
      series[2].y.push_back(c.specificity());
    }
    write_text(out / "sweep.svg",
               svg_line_plot("performance vs grouped components", xs, series));
    return 0;
  }

  throw SpecError("unknown report kind '" + opt.kind + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SSA + CNN ensemble pipeline for multichannel EEG-style recordings"};
  app.require_subcommand(1);

  CliOptions opt;
  app.add_option("--config", opt.config_path, "pipeline config file (TOML-style)")
      ->envname("SSACNN_CONFIG");
  auto* seed_opt =
      app.add_option("--seed", opt.seed, "override run.seed")->envname("SSACNN_SEED");
  app.add_option("--threads", opt.threads, "worker threads (0 = runtime default)")
      ->envname("SSACNN_THREADS");

  auto* synth = app.add_subcommand("synth", "generate a synthetic two-class dataset");
  synth->add_option("--preset", opt.preset, "easy | hard | group1")
      ->check(CLI::IsMember({"easy", "hard", "group1"}));
  synth->add_option("--out", opt.out_dir, "output directory")->required();
  synth->add_option("--format", opt.format, "raw | csv")
      ->check(CLI::IsMember({"raw", "csv"}));
  synth->add_option("--subjects", opt.subjects_override, "subjects per class override");
  synth->add_option("--channels", opt.channels_override, "channel count override");
  synth->add_option("--duration", opt.duration_override, "duration seconds override");

  auto* preprocess =
      app.add_subcommand("preprocess", "normalize and band-pass recordings");
  preprocess->add_option("--in", opt.in_dir, "recordings directory")->required();
  preprocess->add_option("--out", opt.out_dir, "output directory")->required();

  auto* ssa = app.add_subcommand("ssa", "decompose one channel for inspection");
  ssa->add_option("--in", opt.in_dir, "preprocessed recordings directory")->required();
  ssa->add_option("--out", opt.out_dir, "output directory")->required();
  ssa->add_option("--subject", opt.subject, "subject id (default: first)");
  ssa->add_option("--channel", opt.channel, "channel index");
  ssa->add_option("--segment", opt.segment_index, "segment index");

  auto* features =
      app.add_subcommand("features", "build per-subject correlation matrices");
  features->add_option("--in", opt.in_dir, "preprocessed recordings directory")->required();
  features->add_option("--out", opt.out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "train the voting ensemble on all samples");
  train->add_option("--in", opt.in_dir, "feature dataset directory")->required();
  train->add_option("--out", opt.out_dir, "checkpoint directory")->required();

  auto* eval = app.add_subcommand("eval", "subject-level cross-validation");
  eval->add_option("--in", opt.in_dir, "feature dataset directory")->required();
  eval->add_option("--out", opt.out_dir, "report directory")->required();

  auto* sweep = app.add_subcommand("sweep", "evaluate across ensemble sizes");
  sweep->add_option("--in", opt.in_dir, "feature dataset directory")->required();
  sweep->add_option("--out", opt.out_dir, "report directory")->required();

  auto* report = app.add_subcommand("report", "emit figure-style CSV/SVG artifacts");
  report->add_option("--kind", opt.kind,
                     "variance | grouped-variance | heatmap | sweep-plot")
      ->check(CLI::IsMember({"variance", "grouped-variance", "heatmap", "sweep-plot"}));
  report->add_option("--in", opt.in_dir, "input artifact (stage-dependent)")->required();
  report->add_option("--out", opt.out_dir, "output directory")->required();
  report->add_option("--subject", opt.subject, "subject id for heatmaps");
  report->add_flag("--svg", opt.svg, "also render SVG plots");

  CLI11_PARSE(app, argc, argv);
  opt.seed_given = seed_opt->count() > 0;

  try {
    const PipelineConfig cfg = resolve_config(opt);
    if (app.got_subcommand(synth)) return cmd_synth(opt, cfg);
    if (app.got_subcommand(preprocess)) return cmd_preprocess(opt, cfg);
    if (app.got_subcommand(ssa)) return cmd_ssa(opt, cfg);
    if (app.got_subcommand(features)) return cmd_features(opt, cfg);
    if (app.got_subcommand(train)) return cmd_train(opt, cfg);
    if (app.got_subcommand(eval)) return cmd_eval(opt, cfg);
    if (app.got_subcommand(sweep)) return cmd_sweep(opt, cfg);
    if (app.got_subcommand(report)) return cmd_report(opt, cfg);
    std::cerr << "no subcommand\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DegenerateChannelError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DegenerateSpectrum& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const WindowTooLarge& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const SpecError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
