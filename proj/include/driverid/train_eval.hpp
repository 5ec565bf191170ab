#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "driverid/model.hpp"

namespace driverid {

struct Dataset {
  std::vector<PatternSequence> samples; // unscaled unless noted
  int classes = 0;
  PatternMode mode = PatternMode::FUSED;
  std::vector<std::string> label_map;

  void validate() const;
};

struct TrainConfig {
  int batch = 256;
  int max_iterations = 1500;
  double val_fraction = 0.15;
  int patience = 100;   // iterations without validation improvement
  int eval_every = 10;  // iterations between validation evaluations
  std::uint64_t seed = 42;
  AdamConfig adam;
  double clip_norm = 5.0;
};

struct EvalPoint {
  int iteration = 0;
  double train_total = 0, train_classification = 0, train_reconstruction = 0;
  double val_total = 0, val_top1 = 0, val_top3 = 0;
};

struct TrainResult {
  ModelParams params; // best-validation parameters
  std::vector<EvalPoint> history;
  int best_iteration = 0;
  int iterations_run = 0;
};

// Stratified 85/15 train/validation split, shuffled mini-batches, early
// stopping on validation L_u. Expects samples already scaled.
TrainResult train(const ModelConfig& mcfg, const Dataset& scaled,
                  const TrainConfig& tcfg);

struct FoldResult {
  int repeat = 0, fold = 0;
  double top1 = 0, top3 = 0;
  double seconds = 0;
};

struct MetricsReport {
  std::vector<FoldResult> folds;
  double top1_mean = 0, top1_ci = 0; // 95% CI half-width
  double top3_mean = 0, top3_ci = 0;
  double wall_clock_seconds = 0;
  std::string config_echo;
};

// Repeated stratified k-fold CV. The scaler is refitted on each training
// fold; per-repeat shuffles derive from the master seed. jobs > 1 runs
// folds in parallel (results are aggregated in deterministic order).
MetricsReport kfold_cv(const Dataset& dataset, const ModelConfig& mcfg,
                       const TrainConfig& tcfg, int folds = 5,
                       int repeats = 5, int jobs = 1,
                       const PatternOptions& opts = {});

double topk_accuracy(const std::vector<Prediction>& preds,
                     const std::vector<int>& labels, int k);

// Stratified fold assignment: returns fold index per sample; per-class
// counts across folds differ by at most one.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds,
                                  std::uint64_t seed);

struct SweepRow {
  std::string grid_point;
  MetricsReport report;
};

// Grid values are applied onto copies of the base configs by key:
// "lambda", "lf", "mode", "cell", "ablation" (plain|res|resarnet).
// For "lf" the dataset is re-encoded from the supplied trips.
struct SweepInput {
  std::vector<Trip> trips;
  WindowConfig window;
  PatternOptions pattern_opts;
  PatternMode mode = PatternMode::FUSED;
};

std::vector<SweepRow> sweep(const std::string& key,
                            const std::vector<std::string>& values,
                            const SweepInput& input, ModelConfig mcfg,
                            const TrainConfig& tcfg, int folds, int repeats,
                            int jobs);

}  // namespace driverid
