#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ssacnn/features.hpp"
#include "ssacnn/nn.hpp"

namespace ssacnn {

// One trained CNN per grouped component, combined by majority voting.
struct EnsembleModel {
  std::vector<nn::CnnModel> members;  // member g classifies group g

  int size() const { return static_cast<int>(members.size()); }
};

struct VoteInput {
  int cls = 0;
  Eigen::VectorXd probs;  // per-class probabilities, index = class
};

// Majority class. Vote ties fall back to the class with the larger summed
// probability across members; a residual tie picks class 0.
int vote(std::span<const VoteInput> predictions);

struct Confusion {
  // positive class = dyslexic
  int tp = 0, tn = 0, fp = 0, fn = 0;

  int total() const { return tp + tn + fp + fn; }
  double accuracy() const;
  double sensitivity() const;
  double specificity() const;
};

struct FoldResult {
  int fold = 0;
  Confusion confusion;
  std::vector<std::string> test_subjects;
};

struct EvalReport {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  Confusion total;
  std::vector<FoldResult> folds;
};

// Trains ensemble_size members on the first groups (ordered by explained
// variance upstream); member seeds derive from the master seed. Sample order
// follows the dataset.
EnsembleModel train_ensemble(const FeatureDataset& features,
                             std::span<const std::size_t> sample_ids, int ensemble_size,
                             const nn::TrainConfig& hyper, std::uint64_t master_seed);

// Ensemble prediction for one sample's matrices.
VoteInput predict_sample(EnsembleModel& model, const SubjectFeatures& sample);

// Stratified subject-level k-fold cross-validation; no subject appears in
// both sides of a fold. In per-segment datasets every segment of a test
// subject votes on the subject's class.
EvalReport cross_validate(const FeatureDataset& features, int folds, int ensemble_size,
                          const nn::TrainConfig& hyper, std::uint64_t seed);

struct SweepPoint {
  int ensemble_size = 0;
  EvalReport report;
};

std::vector<SweepPoint> sweep_groups(const FeatureDataset& features, int g_min, int g_max,
                                     int folds, const nn::TrainConfig& hyper,
                                     std::uint64_t seed);

// Checkpoint directory: manifest.json plus member_<g>.{json,f64}.
void save_ensemble(const EnsembleModel& model, const std::filesystem::path& dir);
EnsembleModel load_ensemble(const std::filesystem::path& dir);

}  // namespace ssacnn
