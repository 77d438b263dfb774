// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "med3d/manifest.hpp"
#include "med3d/model.hpp"
#include "med3d/normalize.hpp"
#include "med3d/volume.hpp"

namespace med3d::training {

enum class Mode { kPretrain, kTransferSeg, kTransferCls, kScratchSeg, kScratchCls };

std::string_view mode_name(Mode m) noexcept;
std::optional<Mode> parse_mode(std::string_view s) noexcept;

struct OptimizerSpec {
  enum class Kind { kSgd, kAdam };
  Kind kind = Kind::kSgd;
  double lr = 0.1;
  double momentum = 0.9;       // SGD
  double weight_decay = 0.001;
  double beta1 = 0.9;          // Adam
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptimizerSpec sgd(double lr = 0.1, double momentum = 0.9, double weight_decay = 0.001);
  static OptimizerSpec adam(double lr);
};

struct TrainPlan {
  Mode mode = Mode::kPretrain;
  int epochs = 1;
  /// Items whose gradients are accumulated (mean) before one optimizer step.
  int batch_size = 1;
  OptimizerSpec optimizer;
  double data_fraction = 1.0;
  std::vector<int> domain_subset;  // empty: every domain
  std::uint64_t seed = 0;
  /// Transfer runs evaluate every eval_every optimizer steps (and at step
  /// 0); pretraining evaluates once per epoch.
  int eval_every = 10;
  double holdout_fraction = 0.2;
  bool crop = true;
  normalize::AugmentParams augment;
  bool freeze_encoder = false;
  /// 0 prepares items on the training thread; more run that many
  /// preparation threads ahead of the optimizer through a bounded queue.
  int workers = 0;

  /// Optimizer regime for a mode: SGD 0.1/0.9/0.001 for pretraining, Adam
  /// 0.001 from a checkpoint and Adam 0.01 from scratch.
  static TrainPlan defaults(Mode mode);
  void validate() const;
};

// ---------------------------------------------------------------------------
// Data

struct SegCase {
  std::string case_id;
  Volume volume;
  LabelGrid labels;
};

struct DomainData {
  DomainSpec spec;
  std::vector<SegCase> cases;
};

/// Reads every volume and label file named by a manifest.
std::vector<DomainData> load_dataset(const std::filesystem::path& manifest);
std::vector<DomainData> load_dataset(const std::vector<DomainSpec>& domains);

struct ClsSample {
  std::string case_id;
  Volume volume;
  int label = 0;
};

/// Seeded split of case indices 0..n-1: max(1, round(fraction * n)) held
/// out (none when n < 2). Both lists come back sorted.
struct Split {
  std::vector<int> train;
  std::vector<int> holdout;
};
Split holdout_split(int n, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Scheduling

struct DomainPool {
  int domain_id = 0;
  std::vector<int> cases;  // indices into the domain's case list
};

struct ScheduleItem {
  int domain_id = 0;
  int case_index = 0;
  std::uint64_t aug_seed = 0;
  bool augmented = false;
  bool operator==(const ScheduleItem&) const = default;
};

struct EpochSchedule {
  std::vector<ScheduleItem> items;
};

/// Keeps the domains named in subset (all when empty) and subsamples each to
/// ceil(fraction * N) cases without replacement. Fixed for a whole run.
/// EmptyAfterFraction when a kept domain ends up with no cases;
/// UnknownDomain when subset names a missing domain.
std::vector<DomainPool> apply_fraction(const std::vector<DomainPool>& pools, double fraction,
                                       const std::vector<int>& subset, std::uint64_t seed);

/// Every domain contributes max_j N_j items: all originals plus augmented
/// duplicates cycling through a seeded permutation of the originals, each
/// with a fresh augmentation seed. Items are then shuffled together.
EpochSchedule balanced_schedule(const std::vector<DomainPool>& pools, std::uint64_t seed, int epoch);

/// apply_fraction followed by balanced_schedule.
EpochSchedule balanced_schedule(const std::vector<DomainPool>& pools, double fraction,
                                const std::vector<int>& subset, std::uint64_t seed, int epoch = 0);

// ---------------------------------------------------------------------------
// Logs

struct LogRow {
  long step = 0;
  int epoch = 0;
  int domain_id = -1;  // -1: not domain specific
  std::optional<double> loss;
  std::optional<double> dice;
  std::optional<double> accuracy;
};

/// `step,epoch,domain_id,loss,dice,accuracy`; absent values are empty cells.
std::string format_log(const std::vector<LogRow>& rows);
void write_log(const std::vector<LogRow>& rows, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Runs

struct DomainScore {
  double dice = 0.0;      // mean over held-out cases of the mean foreground-class Dice
  double accuracy = 0.0;  // voxel accuracy
};

struct PretrainResult {
  model::Checkpoint checkpoint;
  std::vector<LogRow> log;
  std::map<int, DomainScore> final_scores;  // last evaluation, per scheduled domain
  long steps = 0;
};

using ProgressFn = std::function<void(const std::string&)>;

/// SGD pre-training with per-domain routing. The model needs a branch for
/// every scheduled domain; held-out cases (plan.holdout_fraction per
/// domain) are never trained on and are scored after every epoch.
PretrainResult pretrain(model::Model& model, const std::vector<DomainData>& data, const TrainPlan& plan,
                        const ProgressFn& progress = {});

/// Model with one branch per domain of the dataset.
model::ModelConfig pretrain_config(const std::vector<DomainData>& data, int depth, int base_width,
                                   std::uint64_t seed);

struct TransferResult {
  std::vector<LogRow> log;
  std::optional<model::TransferReport> report;
  double final_metric = 0.0;  // Dice for segmentation, accuracy for classification
  long steps = 0;
};

/// Trains a model that carries the head matching plan.mode. Transfer modes
/// first copy the encoder from ckpt (ArchMismatch on disagreement); scratch
/// modes keep the fresh initialization. Test items are scored at step 0
/// and every plan.eval_every steps.
TransferResult transfer_seg(model::Model& model, const TrainPlan& plan, const std::vector<SegCase>& train,
                            const std::vector<SegCase>& test, const model::Checkpoint* ckpt,
                            const ProgressFn& progress = {});
TransferResult transfer_cls(model::Model& model, const TrainPlan& plan, const std::vector<ClsSample>& train,
                            const std::vector<ClsSample>& test, const model::Checkpoint* ckpt,
                            const ProgressFn& progress = {});

/// Mean foreground Dice and voxel accuracy of a segmentation path on cases.
DomainScore score_pretrain(model::Model& model, const std::vector<SegCase>& cases, int domain_id);

struct VarietyTable {
  std::vector<int> sizes;
  std::vector<int> domain_ids;
  std::vector<std::vector<double>> dice;  // [domain][size]
};

/// For every subset size s, partitions the domains into consecutive groups of
/// s and trains one model per group with the same plan. Every domain gets
/// one Dice per size.
VarietyTable variety_experiment(const std::vector<DomainData>& data, const std::vector<int>& sizes,
                                const TrainPlan& plan, int depth, int base_width, const ProgressFn& progress = {});
void write_variety_csv(const VarietyTable& t, const std::filesystem::path& path);

struct FractionRow {
  double fraction = 1.0;
  int domain_id = 0;
  double dice = 0.0;
};

std::vector<FractionRow> fraction_experiment(const std::vector<DomainData>& data, const std::vector<double>& fractions,
                                             const TrainPlan& plan, int depth, int base_width,
                                             const ProgressFn& progress = {});
void write_fraction_csv(const std::vector<FractionRow>& rows, const std::filesystem::path& path);

}  // namespace med3d::training
