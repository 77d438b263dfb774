// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <set>
#include <variant>

#include "med3d/error.hpp"
#include "med3d/metrics.hpp"
#include "med3d/nifti.hpp"
#include "med3d/optim.hpp"
#include "med3d/seed.hpp"

namespace med3d::training {

using model::FTape;
using model::FTensor;
using ops::NormMode;

namespace {

constexpr std::uint64_t kTagHoldout = 1, kTagFraction = 2, kTagPad = 3, kTagShuffle = 4, kTagAug = 5,
                        kTagCrop = 6, kTagOrder = 7;

class Optimizer {
 public:
  Optimizer(const OptimizerSpec& s, std::vector<FTensor> params) {
    if (s.kind == OptimizerSpec::Kind::kSgd) {
      opt_.emplace<optim::Sgd<float>>(std::move(params), optim::SgdOptions{s.lr, s.momentum, s.weight_decay});
    } else {
      opt_.emplace<optim::Adam<float>>(std::move(params),
                                       optim::AdamOptions{s.lr, s.beta1, s.beta2, s.eps, s.weight_decay});
    }
  }
  void step() {
    std::visit(
        [](auto& o) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(o)>, std::monostate>) o.step();
        },
        opt_);
  }
  void zero_grad() {
    std::visit(
        [](auto& o) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(o)>, std::monostate>) o.zero_grad();
        },
        opt_);
  }

 private:
  std::variant<std::monostate, optim::Sgd<float>, optim::Adam<float>> opt_;
};

// Averages gradients accumulated over several items.
void scale_grads(const std::vector<FTensor>& params, float factor) {
  if (factor == 1.0f) return;
  for (auto p : params)
    if (p.has_grad())
      for (float& g : p.grad()) g *= factor;
}

struct Prepared {
  FTensor input;
  std::vector<std::int32_t> targets;
};

Prepared to_item(const Volume& v, const LabelGrid& l) {
  return {model::volume_tensor(v), model::label_targets(l)};
}

// Runs prepare(i) for i in [0, n) and hands results to consume in order.
// With workers > 0 up to `workers` items are prepared ahead on their own
// threads; every item is seeded independently, so the results are the same
// as with workers == 0.
template <typename T, typename Prepare, typename Consume>
void pipeline(std::size_t n, int workers, Prepare prepare, Consume consume) {
  if (workers <= 0) {
    for (std::size_t i = 0; i < n; ++i) consume(i, prepare(i));
    return;
  }
  std::deque<std::future<T>> ahead;
  std::size_t next = 0;
  auto launch = [&] {
    while (next < n && ahead.size() < static_cast<std::size_t>(workers))
      ahead.push_back(std::async(std::launch::async, prepare, next++));
  };
  launch();
  for (std::size_t i = 0; i < n; ++i) {
    T item = ahead.front().get();
    ahead.pop_front();
    launch();
    consume(i, std::move(item));
  }
}

std::vector<int> permutation(int n, std::uint64_t seed) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

double mean_foreground_dice(const LabelGrid& pred, const LabelGrid& truth) {
  const auto d = metrics::dice_per_class(pred, truth);
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string_view mode_name(Mode m) noexcept {
  switch (m) {
    case Mode::kPretrain: return "pretrain";
    case Mode::kTransferSeg: return "transfer_seg";
    case Mode::kTransferCls: return "transfer_cls";
    case Mode::kScratchSeg: return "scratch_seg";
    case Mode::kScratchCls: return "scratch_cls";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view s) noexcept {
  for (Mode m : {Mode::kPretrain, Mode::kTransferSeg, Mode::kTransferCls, Mode::kScratchSeg, Mode::kScratchCls})
    if (mode_name(m) == s) return m;
  return std::nullopt;
}

OptimizerSpec OptimizerSpec::sgd(double lr, double momentum, double weight_decay) {
  OptimizerSpec s;
  s.kind = Kind::kSgd;
  s.lr = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  return s;
}

OptimizerSpec OptimizerSpec::adam(double lr) {
  OptimizerSpec s;
  s.kind = Kind::kAdam;
  s.lr = lr;
  s.weight_decay = 0.0;
  return s;
}

TrainPlan TrainPlan::defaults(Mode mode) {
  TrainPlan p;
  p.mode = mode;
  switch (mode) {
    case Mode::kPretrain: p.optimizer = OptimizerSpec::sgd(); break;
    case Mode::kTransferSeg:
    case Mode::kTransferCls: p.optimizer = OptimizerSpec::adam(0.001); break;
    case Mode::kScratchSeg:
    case Mode::kScratchCls: p.optimizer = OptimizerSpec::adam(0.01); break;
  }
  return p;
}

void TrainPlan::validate() const {
  require(epochs >= 0, ErrorCode::kInvalidArgument, "epochs must be >= 0");
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  require(data_fraction > 0.0 && data_fraction <= 1.0, ErrorCode::kInvalidArgument,
          "data_fraction must be in (0, 1]");
  require(eval_every >= 1, ErrorCode::kInvalidArgument, "eval_every must be >= 1");
  require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, ErrorCode::kInvalidArgument,
          "holdout_fraction must be in [0, 1)");
  require(workers >= 0, ErrorCode::kInvalidArgument, "workers must be >= 0");
  require(optimizer.lr > 0.0 && std::isfinite(optimizer.lr), ErrorCode::kInvalidArgument,
          "learning rate must be positive");
  augment.validate();
}

// ---------------------------------------------------------------------------

std::vector<DomainData> load_dataset(const std::vector<DomainSpec>& domains) {
  std::vector<DomainData> out;
  for (const auto& d : domains) {
    DomainData dd{d, {}};
    for (const auto& c : d.cases) {
      Volume vol = nifti::read(c.volume).volume;
      LabelGrid lab = to_label_grid(nifti::read(c.labels).volume, d.class_count);
      require(lab.extent() == vol.extent(), ErrorCode::kShapeMismatch,
              c.volume.string() + " and its labels differ in extent");
      dd.cases.push_back({c.volume.stem().stem().string(), std::move(vol), std::move(lab)});
    }
    out.push_back(std::move(dd));
  }
  return out;
}

std::vector<DomainData> load_dataset(const std::filesystem::path& manifest) {
  return load_dataset(load_manifest(manifest));
}

Split holdout_split(int n, double fraction, std::uint64_t seed) {
  Split s;
  int k = n < 2 || fraction <= 0.0 ? 0 : std::max(1, static_cast<int>(std::lround(fraction * n)));
  k = std::min(k, n - 1);
  const auto p = permutation(n, mix_seed(seed, kTagHoldout));
  s.holdout.assign(p.begin(), p.begin() + std::max(k, 0));
  s.train.assign(p.begin() + std::max(k, 0), p.end());
  std::sort(s.holdout.begin(), s.holdout.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::vector<DomainPool> apply_fraction(const std::vector<DomainPool>& pools, double fraction,
                                       const std::vector<int>& subset, std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, ErrorCode::kInvalidArgument, "fraction must be in (0, 1]");
  for (int id : subset)
    require(std::any_of(pools.begin(), pools.end(), [&](const DomainPool& p) { return p.domain_id == id; }),
            ErrorCode::kUnknownDomain, "domain " + std::to_string(id) + " is not in the dataset");
  std::vector<DomainPool> out;
  for (const auto& p : pools) {
    if (!subset.empty() && std::find(subset.begin(), subset.end(), p.domain_id) == subset.end()) continue;
    const int n = static_cast<int>(p.cases.size());
    // the small tolerance keeps products such as 0.1 * 30 from rounding up
    const int k = static_cast<int>(std::ceil(fraction * n - 1e-9));
    require(k >= 1, ErrorCode::kEmptyAfterFraction,
            "domain " + std::to_string(p.domain_id) + " has no cases after applying the data fraction");
    const auto perm = permutation(n, mix_seed(seed, {kTagFraction, static_cast<std::uint64_t>(p.domain_id)}));
    DomainPool q{p.domain_id, {}};
    for (int i = 0; i < k; ++i) q.cases.push_back(p.cases[perm[i]]);
    std::sort(q.cases.begin(), q.cases.end());
    out.push_back(std::move(q));
  }
  require(!out.empty(), ErrorCode::kEmptyAfterFraction, "no domain left to schedule");
  return out;
}

EpochSchedule balanced_schedule(const std::vector<DomainPool>& pools, std::uint64_t seed, int epoch) {
  std::size_t target = 0;
  for (const auto& p : pools) {
    require(!p.cases.empty(), ErrorCode::kEmptyAfterFraction,
            "domain " + std::to_string(p.domain_id) + " has no cases");
    target = std::max(target, p.cases.size());
  }
  const auto ep = static_cast<std::uint64_t>(epoch);
  EpochSchedule s;
  for (const auto& p : pools) {
    const auto dom = static_cast<std::uint64_t>(p.domain_id);
    for (int c : p.cases) s.items.push_back({p.domain_id, c, 0, false});
    const int n = static_cast<int>(p.cases.size());
    const auto order = permutation(n, mix_seed(seed, {kTagPad, ep, dom}));
    for (std::size_t k = 0; k + p.cases.size() < target; ++k) {
      s.items.push_back({p.domain_id, p.cases[order[k % n]], mix_seed(seed, {kTagAug, ep, dom, k}), true});
    }
  }
  std::mt19937_64 rng(mix_seed(seed, {kTagShuffle, ep}));
  std::shuffle(s.items.begin(), s.items.end(), rng);
  return s;
}

EpochSchedule balanced_schedule(const std::vector<DomainPool>& pools, double fraction, const std::vector<int>& subset,
                                std::uint64_t seed, int epoch) {
  return balanced_schedule(apply_fraction(pools, fraction, subset, seed), seed, epoch);
}

// ---------------------------------------------------------------------------

std::string format_log(const std::vector<LogRow>& rows) {
  std::string out = "step,epoch,domain_id,loss,dice,accuracy\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + ',' + std::to_string(r.epoch) + ',';
    if (r.domain_id >= 0) out += std::to_string(r.domain_id);
    out += ',';
    if (r.loss) out += fmt(*r.loss);
    out += ',';
    if (r.dice) out += fmt(*r.dice);
    out += ',';
    if (r.accuracy) out += fmt(*r.accuracy);
    out += '\n';
  }
  return out;
}

void write_log(const std::vector<LogRow>& rows, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIoFailure, "cannot create " + path.string());
  const std::string text = format_log(rows);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) fail(ErrorCode::kIoFailure, "short write to " + path.string());
}

// ---------------------------------------------------------------------------

model::ModelConfig pretrain_config(const std::vector<DomainData>& data, int depth, int base_width,
                                   std::uint64_t seed) {
  model::ModelConfig c;
  c.depth = depth;
  c.base_width = base_width;
  c.seed = seed;
  for (const auto& d : data) c.branches.push_back({d.spec.domain_id, d.spec.class_count});
  return c;
}

DomainScore score_pretrain(model::Model& model, const std::vector<SegCase>& cases, int domain_id) {
  DomainScore s;
  if (cases.empty()) return s;
  for (const auto& c : cases) {
    FTape tape(false);
    const FTensor logits = model.forward_pretrain(tape, model::volume_tensor(c.volume), domain_id, NormMode::kEval);
    const LabelGrid pred = model::predict_labels(logits, c.volume.extent(), c.labels.class_count());
    s.dice += mean_foreground_dice(pred, c.labels);
    s.accuracy += metrics::accuracy(model::label_targets(pred), model::label_targets(c.labels));
  }
  s.dice /= static_cast<double>(cases.size());
  s.accuracy /= static_cast<double>(cases.size());
  return s;
}

PretrainResult pretrain(model::Model& model, const std::vector<DomainData>& data, const TrainPlan& plan,
                        const ProgressFn& progress) {
  plan.validate();
  std::map<int, const DomainData*> by_id;
  std::vector<DomainPool> pools;
  std::map<int, std::vector<SegCase>> holdout;
  for (const auto& d : data) {
    by_id[d.spec.domain_id] = &d;
    const Split sp = holdout_split(static_cast<int>(d.cases.size()), plan.holdout_fraction,
                                   mix_seed(plan.seed, static_cast<std::uint64_t>(d.spec.domain_id)));
    pools.push_back({d.spec.domain_id, sp.train});
    for (int i : sp.holdout) holdout[d.spec.domain_id].push_back(d.cases[i]);
  }
  const auto run_pools = apply_fraction(pools, plan.data_fraction, plan.domain_subset, plan.seed);
  for (const auto& p : run_pools) {
    const auto& br = model.config().branches;
    require(std::any_of(br.begin(), br.end(), [&](const model::BranchSpec& b) { return b.domain_id == p.domain_id; }),
            ErrorCode::kUnknownDomain, "model has no branch for domain " + std::to_string(p.domain_id));
  }

  PretrainResult res;
  const auto params = model.trainable();
  Optimizer opt(plan.optimizer, params);
  long step = 0;
  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    const EpochSchedule sched = balanced_schedule(run_pools, plan.seed, epoch);
    const auto ep = static_cast<std::uint64_t>(epoch);
    auto prepare = [&](std::size_t i) {
      const ScheduleItem& it = sched.items[i];
      const SegCase& c = by_id.at(it.domain_id)->cases[it.case_index];
      if (!it.augmented && !plan.crop) return to_item(c.volume, c.labels);
      Volume vol = c.volume;
      LabelGrid lab = c.labels;
      if (it.augmented) {
        normalize::AugmentParams ap = plan.augment;
        ap.seed = it.aug_seed;
        std::tie(vol, lab) = normalize::augment(vol, lab, ap);
      }
      if (plan.crop && foreground_bbox(lab)) {
        const auto cr = normalize::sample_training_crop(vol, lab, mix_seed(plan.seed, {kTagCrop, ep, i}));
        return to_item(cr.volume, cr.labels);
      }
      return to_item(vol, lab);
    };
    int pending = 0;
    auto consume = [&](std::size_t i, Prepared item) {
      const ScheduleItem& it = sched.items[i];
      FTape tape;
      const FTensor logits = model.forward_pretrain(tape, item.input, it.domain_id, NormMode::kTrain);
      const FTensor loss = ops::softmax_cross_entropy(tape, logits, item.targets);
      tape.backward(loss);
      res.log.push_back({step, epoch, it.domain_id, static_cast<double>(loss.item()), {}, {}});
      if (++pending == plan.batch_size || i + 1 == sched.items.size()) {
        scale_grads(params, 1.0f / static_cast<float>(pending));
        opt.step();
        opt.zero_grad();
        pending = 0;
      }
      ++step;
    };
    pipeline<Prepared>(sched.items.size(), plan.workers, prepare, consume);

    for (const auto& p : run_pools) {
      const DomainScore sc = score_pretrain(model, holdout[p.domain_id], p.domain_id);
      res.final_scores[p.domain_id] = sc;
      res.log.push_back({step, epoch, p.domain_id, {}, sc.dice, sc.accuracy});
      if (progress)
        progress("epoch " + std::to_string(epoch) + " domain " + std::to_string(p.domain_id) + " dice " +
                 fmt(sc.dice));
    }
  }
  res.steps = step;
  res.checkpoint = model::to_checkpoint(model);
  return res;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Case, typename Forward, typename Score>
TransferResult transfer_loop(model::Model& model, const TrainPlan& plan, const std::vector<Case>& train,
                             const model::Checkpoint* ckpt, bool from_checkpoint, Forward forward, Score score,
                             const ProgressFn& progress) {
  plan.validate();
  require(!train.empty(), ErrorCode::kEmptyInput, "no training cases");
  TransferResult res;
  if (from_checkpoint) {
    require(ckpt != nullptr, ErrorCode::kInvalidArgument, "transfer mode needs a checkpoint");
    res.report = model::transfer_weights(*ckpt, model, true);
  }
  if (plan.freeze_encoder) model.set_trainable("encoder.", false);
  const auto params = model.trainable();
  Optimizer opt(plan.optimizer, params);

  auto evaluate = [&](long step, int epoch) {
    const auto [dice, acc] = score();
    res.final_metric = dice ? *dice : acc;
    res.log.push_back({step, epoch, -1, {}, dice, acc});
    if (progress) progress("step " + std::to_string(step) + " metric " + fmt(res.final_metric));
  };
  long step = 0;
  evaluate(0, 0);
  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    const auto order = permutation(static_cast<int>(train.size()),
                                   mix_seed(plan.seed, {kTagOrder, static_cast<std::uint64_t>(epoch)}));
    int pending = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      FTape tape;
      const FTensor loss = forward(tape, train[order[k]], mix_seed(plan.seed, {kTagCrop, (std::uint64_t)epoch, k}));
      tape.backward(loss);
      res.log.push_back({step + 1, epoch, -1, static_cast<double>(loss.item()), {}, {}});
      if (++pending == plan.batch_size || k + 1 == order.size()) {
        scale_grads(params, 1.0f / static_cast<float>(pending));
        opt.step();
        opt.zero_grad();
        pending = 0;
        ++step;
        if (step % plan.eval_every == 0) evaluate(step, epoch);
      }
    }
  }
  if (step % plan.eval_every != 0) evaluate(step, std::max(0, plan.epochs - 1));
  res.steps = step;
  return res;
}

}  // namespace

TransferResult transfer_seg(model::Model& model, const TrainPlan& plan, const std::vector<SegCase>& train,
                            const std::vector<SegCase>& test, const model::Checkpoint* ckpt,
                            const ProgressFn& progress) {
  require(plan.mode == Mode::kTransferSeg || plan.mode == Mode::kScratchSeg, ErrorCode::kInvalidArgument,
          "segmentation transfer needs mode transfer_seg or scratch_seg");
  require(model.config().head == model::HeadKind::kSeg, ErrorCode::kInvalidArgument,
          "model has no segmentation head");
  const bool freeze = plan.freeze_encoder;
  auto forward = [&](FTape& tape, const SegCase& c, std::uint64_t crop_seed) {
    Prepared item = to_item(c.volume, c.labels);
    if (plan.crop && foreground_bbox(c.labels)) {
      const auto cr = normalize::sample_training_crop(c.volume, c.labels, crop_seed);
      item = to_item(cr.volume, cr.labels);
    }
    const FTensor logits = model.forward_seg(tape, item.input, NormMode::kTrain, freeze);
    return ops::softmax_cross_entropy(tape, logits, item.targets);
  };
  auto score = [&]() -> std::pair<std::optional<double>, double> {
    double dice = 0.0, acc = 0.0;
    for (const auto& c : test) {
      FTape tape(false);
      const FTensor logits = model.forward_seg(tape, model::volume_tensor(c.volume), NormMode::kEval);
      const LabelGrid pred = model::predict_labels(logits, c.volume.extent(), c.labels.class_count());
      dice += mean_foreground_dice(pred, c.labels);
      acc += metrics::accuracy(model::label_targets(pred), model::label_targets(c.labels));
    }
    const double n = std::max<std::size_t>(test.size(), 1);
    return {dice / n, acc / n};
  };
  return transfer_loop(model, plan, train, ckpt, plan.mode == Mode::kTransferSeg, forward, score, progress);
}

TransferResult transfer_cls(model::Model& model, const TrainPlan& plan, const std::vector<ClsSample>& train,
                            const std::vector<ClsSample>& test, const model::Checkpoint* ckpt,
                            const ProgressFn& progress) {
  require(plan.mode == Mode::kTransferCls || plan.mode == Mode::kScratchCls, ErrorCode::kInvalidArgument,
          "classification transfer needs mode transfer_cls or scratch_cls");
  require(model.config().head == model::HeadKind::kCls, ErrorCode::kInvalidArgument,
          "model has no classification head");
  const bool freeze = plan.freeze_encoder;
  auto forward = [&](FTape& tape, const ClsSample& c, std::uint64_t) {
    const FTensor logits = model.forward_cls(tape, model::volume_tensor(c.volume), NormMode::kTrain, freeze);
    const std::vector<std::int32_t> t{c.label};
    return ops::softmax_cross_entropy(tape, logits, t);
  };
  auto score = [&]() -> std::pair<std::optional<double>, double> {
    std::vector<std::int32_t> pred, truth;
    for (const auto& c : test) {
      FTape tape(false);
      const FTensor logits = model.forward_cls(tape, model::volume_tensor(c.volume), NormMode::kEval);
      pred.push_back(ops::argmax_channels(logits).front());
      truth.push_back(c.label);
    }
    return {std::nullopt, test.empty() ? 0.0 : metrics::accuracy(pred, truth)};
  };
  return transfer_loop(model, plan, train, ckpt, plan.mode == Mode::kTransferCls, forward, score, progress);
}

// ---------------------------------------------------------------------------

VarietyTable variety_experiment(const std::vector<DomainData>& data, const std::vector<int>& sizes,
                                const TrainPlan& plan, int depth, int base_width, const ProgressFn& progress) {
  VarietyTable t;
  t.sizes = sizes;
  for (const auto& d : data) t.domain_ids.push_back(d.spec.domain_id);
  std::vector<int> ids = plan.domain_subset.empty() ? t.domain_ids : plan.domain_subset;
  std::sort(ids.begin(), ids.end());
  t.domain_ids = ids;
  t.dice.assign(ids.size(), std::vector<double>(sizes.size(), 0.0));
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    const int s = sizes[si];
    require(s >= 1, ErrorCode::kInvalidArgument, "subset sizes must be >= 1");
    for (std::size_t g = 0; g < ids.size(); g += s) {
      TrainPlan p = plan;
      p.domain_subset.assign(ids.begin() + g, ids.begin() + std::min(ids.size(), g + s));
      model::Model m(pretrain_config(data, depth, base_width, plan.seed));
      if (progress) progress("variety: size " + std::to_string(s) + " group starting at domain " +
                             std::to_string(p.domain_subset.front()));
      const auto r = pretrain(m, data, p, progress);
      for (std::size_t k = g; k < std::min(ids.size(), g + s); ++k) t.dice[k][si] = r.final_scores.at(ids[k]).dice;
    }
  }
  return t;
}

void write_variety_csv(const VarietyTable& t, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIoFailure, "cannot create " + path.string());
  f << "domain_id";
  for (int s : t.sizes) f << ",dice_" << s;
  f << '\n';
  for (std::size_t i = 0; i < t.domain_ids.size(); ++i) {
    f << t.domain_ids[i];
    for (double d : t.dice[i]) f << ',' << fmt(d);
    f << '\n';
  }
  if (!f) fail(ErrorCode::kIoFailure, "short write to " + path.string());
}

std::vector<FractionRow> fraction_experiment(const std::vector<DomainData>& data, const std::vector<double>& fractions,
                                             const TrainPlan& plan, int depth, int base_width,
                                             const ProgressFn& progress) {
  std::vector<FractionRow> rows;
  for (double fr : fractions) {
    require(fr > 0.0 && fr <= 1.0, ErrorCode::kInvalidArgument, "fractions must lie in (0, 1]");
    TrainPlan p = plan;
    p.data_fraction = fr;
    model::Model m(pretrain_config(data, depth, base_width, plan.seed));
    if (progress) progress("fraction " + fmt(fr));
    const auto r = pretrain(m, data, p, progress);
    for (const auto& [id, sc] : r.final_scores) rows.push_back({fr, id, sc.dice});
  }
  return rows;
}

void write_fraction_csv(const std::vector<FractionRow>& rows, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIoFailure, "cannot create " + path.string());
  f << "fraction,domain_id,dice\n";
  for (const auto& r : rows) f << fmt(r.fraction) << ',' << r.domain_id << ',' << fmt(r.dice) << '\n';
  if (!f) fail(ErrorCode::kIoFailure, "short write to " + path.string());
}

}  // namespace med3d::training
