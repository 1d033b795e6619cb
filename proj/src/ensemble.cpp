#include "ssacnn/ensemble.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "ssacnn/errors.hpp"
#include "ssacnn/parallel.hpp"
#include "ssacnn/rng.hpp"

namespace ssacnn {

namespace {

double ratio(int num, int denom) { return denom == 0 ? 0.0 : static_cast<double>(num) / denom; }

nn::Tensor4 group_tensor(const FeatureDataset& features,
                         std::span<const std::size_t> sample_ids, int group) {
  const Eigen::Index c = features.channels;
  nn::Tensor4 x(static_cast<Eigen::Index>(sample_ids.size()), 1, c, c);
  for (std::size_t r = 0; r < sample_ids.size(); ++r) {
    const auto& m =
        features.samples[sample_ids[r]].matrices[static_cast<std::size_t>(group)].values;
    for (Eigen::Index i = 0; i < c; ++i)
      for (Eigen::Index j = 0; j < c; ++j)
        x(static_cast<Eigen::Index>(r), 0, i, j) = m(i, j);
  }
  return x;
}

int label_to_int(ClassLabel label, const std::string& subject) {
  if (label == ClassLabel::Unknown)
    throw SpecError("subject " + subject + " has no class label");
  return static_cast<int>(label);
}

}  // namespace

double Confusion::accuracy() const { return ratio(tp + tn, total()); }
double Confusion::sensitivity() const { return ratio(tp, tp + fn); }
double Confusion::specificity() const { return ratio(tn, tn + fp); }

int vote(std::span<const VoteInput> predictions) {
  if (predictions.empty()) throw SpecError("vote needs at least one prediction");
  int count1 = 0;
  double p0 = 0.0, p1 = 0.0;
  for (const VoteInput& v : predictions) {
    if (v.cls != 0 && v.cls != 1) throw SpecError("vote expects binary classes");
    count1 += v.cls;
    if (v.probs.size() >= 2) {
      p0 += v.probs[0];
      p1 += v.probs[1];
    }
  }
  const int count0 = static_cast<int>(predictions.size()) - count1;
  if (count0 != count1) return count1 > count0 ? 1 : 0;
  return p1 > p0 ? 1 : 0;  // summed-probability tie-break, residual tie -> 0
}

EnsembleModel train_ensemble(const FeatureDataset& features,
                             std::span<const std::size_t> sample_ids, int ensemble_size,
                             const nn::TrainConfig& hyper, std::uint64_t master_seed) {
  if (ensemble_size < 1 || ensemble_size > features.groups)
    throw SpecError("ensemble size must lie in [1, G]");
  if (sample_ids.empty()) throw NoDataError("train_ensemble: empty training set");

  // Subject-level class balance check (samples may be per-segment).
  std::map<std::string, int> subject_label;
  for (std::size_t id : sample_ids) {
    const auto& s = features.samples[id];
    subject_label[s.subject_id] = label_to_int(s.label, s.subject_id);
  }
  std::array<int, 2> subject_counts{0, 0};
  for (const auto& [subject, label] : subject_label)
    ++subject_counts[static_cast<std::size_t>(label)];
  if (subject_counts[0] < 2 || subject_counts[1] < 2)
    throw ClassImbalanceError("need at least 2 training subjects per class");

  std::vector<int> labels(sample_ids.size());
  for (std::size_t r = 0; r < sample_ids.size(); ++r) {
    const auto& s = features.samples[sample_ids[r]];
    labels[r] = label_to_int(s.label, s.subject_id);
  }

  const Eigen::Index c = features.channels;
  EnsembleModel model;
  model.members.reserve(static_cast<std::size_t>(ensemble_size));
  for (int g = 0; g < ensemble_size; ++g)
    model.members.emplace_back(nn::default_architecture(), std::array<Eigen::Index, 3>{1, c, c},
                               substream_seed(master_seed, static_cast<std::uint64_t>(g)));

  // Members are independent; each trains on its own group's matrices.
  parallel_for(ensemble_size, [&](std::int64_t g) {
    const nn::Tensor4 x = group_tensor(features, sample_ids, static_cast<int>(g));
    nn::TrainConfig cfg = hyper;
    cfg.seed = substream_seed(master_seed, 0x1000ull + static_cast<std::uint64_t>(g));
    nn::train(model.members[static_cast<std::size_t>(g)], x, labels, cfg);
  });
  return model;
}

VoteInput predict_sample(EnsembleModel& model, const SubjectFeatures& sample) {
  if (model.members.empty()) throw SpecError("empty ensemble");
  const Eigen::Index c = sample.matrices.front().values.rows();
  std::vector<VoteInput> member_votes(static_cast<std::size_t>(model.size()));
  for (int g = 0; g < model.size(); ++g) {
    nn::Tensor4 x(1, 1, c, c);
    const auto& m = sample.matrices[static_cast<std::size_t>(g)].values;
    for (Eigen::Index i = 0; i < c; ++i)
      for (Eigen::Index j = 0; j < c; ++j) x(0, 0, i, j) = m(i, j);
    const auto pred = nn::predict(model.members[static_cast<std::size_t>(g)], x);
    member_votes[static_cast<std::size_t>(g)] = {pred[0].cls, pred[0].probs};
  }

  VoteInput out;
  out.cls = vote(member_votes);
  out.probs = Eigen::VectorXd::Zero(2);
  for (const auto& v : member_votes) out.probs += v.probs;
  out.probs /= static_cast<double>(member_votes.size());
  return out;
}

EvalReport cross_validate(const FeatureDataset& features, int folds, int ensemble_size,
                          const nn::TrainConfig& hyper, std::uint64_t seed) {
  if (folds < 2) throw InvalidFolds("need at least 2 folds");

  // Subjects in first-appearance order with their sample rows.
  std::vector<std::string> subjects;
  std::map<std::string, std::vector<std::size_t>> rows;
  std::map<std::string, int> label_of;
  for (std::size_t i = 0; i < features.samples.size(); ++i) {
    const auto& s = features.samples[i];
    if (rows.find(s.subject_id) == rows.end()) subjects.push_back(s.subject_id);
    rows[s.subject_id].push_back(i);
    label_of[s.subject_id] = label_to_int(s.label, s.subject_id);
  }

  std::array<std::vector<std::string>, 2> by_class;
  for (const auto& subject : subjects)
    by_class[static_cast<std::size_t>(label_of[subject])].push_back(subject);
  const std::size_t minority = std::min(by_class[0].size(), by_class[1].size());
  if (static_cast<std::size_t>(folds) > minority)
    throw InvalidFolds("folds exceed the minority-class subject count");

  // Stratified assignment: shuffle inside each class, deal round-robin.
  std::vector<int> fold_of_subject(subjects.size(), -1);
  std::map<std::string, std::size_t> subject_pos;
  for (std::size_t i = 0; i < subjects.size(); ++i) subject_pos[subjects[i]] = i;
  for (int cls = 0; cls < 2; ++cls) {
    auto list = by_class[static_cast<std::size_t>(cls)];
    Rng rng(substream_seed(seed, 0xF01Dull + static_cast<std::uint64_t>(cls)));
    for (std::size_t i = list.size(); i > 1; --i)
      std::swap(list[i - 1], list[static_cast<std::size_t>(rng.below(i))]);
    for (std::size_t i = 0; i < list.size(); ++i)
      fold_of_subject[subject_pos[list[i]]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }

  EvalReport report;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_ids;
    std::vector<std::string> test_subjects;
    for (std::size_t si = 0; si < subjects.size(); ++si) {
      const auto& ids = rows[subjects[si]];
      if (fold_of_subject[si] == f)
        test_subjects.push_back(subjects[si]);
      else
        train_ids.insert(train_ids.end(), ids.begin(), ids.end());
    }

    EnsembleModel model = train_ensemble(features, train_ids, ensemble_size, hyper,
                                         substream_seed(seed, 0xAB0ull + static_cast<std::uint64_t>(f)));

    FoldResult fold;
    fold.fold = f;
    fold.test_subjects = test_subjects;
    for (const auto& subject : test_subjects) {
      // Subject prediction: vote across the subject's samples (one sample in
      // per-subject mode, every segment in per-segment mode).
      std::vector<VoteInput> sample_votes;
      for (std::size_t id : rows[subject])
        sample_votes.push_back(predict_sample(model, features.samples[id]));
      const int predicted = vote(sample_votes);
      const int truth = label_of[subject];
      if (truth == 1)
        (predicted == 1 ? fold.confusion.tp : fold.confusion.fn)++;
      else
        (predicted == 0 ? fold.confusion.tn : fold.confusion.fp)++;
    }
    report.total.tp += fold.confusion.tp;
    report.total.tn += fold.confusion.tn;
    report.total.fp += fold.confusion.fp;
    report.total.fn += fold.confusion.fn;
    report.folds.push_back(std::move(fold));
  }

  report.accuracy = report.total.accuracy();
  report.sensitivity = report.total.sensitivity();
  report.specificity = report.total.specificity();
  return report;
}

std::vector<SweepPoint> sweep_groups(const FeatureDataset& features, int g_min, int g_max,
                                     int folds, const nn::TrainConfig& hyper,
                                     std::uint64_t seed) {
  if (g_min < 1 || g_max < g_min || g_max > features.groups)
    throw SpecError("sweep range must lie within [1, G]");
  std::vector<SweepPoint> points;
  for (int g = g_min; g <= g_max; ++g) {
    SweepPoint p;
    p.ensemble_size = g;
    p.report = cross_validate(features, folds, g, hyper, seed);
    points.push_back(std::move(p));
  }
  return points;
}

void save_ensemble(const EnsembleModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["members"] = model.size();
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write ensemble manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
  for (int g = 0; g < model.size(); ++g) {
    const std::string stem = "member_" + std::to_string(g);
    nn::save_model(model.members[static_cast<std::size_t>(g)], dir / (stem + ".json"),
                   dir / (stem + ".f64"));
  }
}

EnsembleModel load_ensemble(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open ensemble manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad ensemble manifest: " + std::string(e.what()));
  }
  EnsembleModel model;
  const int n = manifest.at("members").get<int>();
  for (int g = 0; g < n; ++g) {
    const std::string stem = "member_" + std::to_string(g);
    model.members.push_back(nn::load_model(dir / (stem + ".json"), dir / (stem + ".f64")));
  }
  return model;
}

}  // namespace ssacnn
