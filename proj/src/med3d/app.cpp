// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/app.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "med3d/error.hpp"
#include "med3d/manifest.hpp"
#include "med3d/metrics.hpp"
#include "med3d/model.hpp"
#include "med3d/nifti.hpp"
#include "med3d/normalize.hpp"
#include "med3d/synthetic.hpp"
#include "med3d/training.hpp"

namespace med3d::app {
namespace fs = std::filesystem;
using training::Mode;
using training::TrainPlan;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

fs::path prepare_outdir(const RunConfig& cfg) {
  const fs::path out = cfg.str("outdir");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorCode::kIoFailure, "cannot create " + out.string() + ": " + ec.message());
  cfg.write_resolved(out / "resolved_config");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIoFailure, "cannot create " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) fail(ErrorCode::kIoFailure, "short write to " + path.string());
}

int to_int(const RunConfig& cfg, std::string_view key) { return static_cast<int>(cfg.integer(key)); }

// Mode-dependent optimizer defaults go in before anything reads them.
void mode_defaults(RunConfig& cfg, Mode mode) {
  const auto p = TrainPlan::defaults(mode);
  cfg.set_command_default("lr", fmt(p.optimizer.lr));
  cfg.set_command_default("weight_decay", fmt(p.optimizer.weight_decay));
}

TrainPlan plan_from(const RunConfig& cfg, Mode mode) {
  TrainPlan p = TrainPlan::defaults(mode);
  p.epochs = to_int(cfg, "epochs");
  p.batch_size = to_int(cfg, "batch_size");
  p.optimizer.lr = cfg.real("lr");
  p.optimizer.weight_decay = cfg.real("weight_decay");
  if (p.optimizer.kind == training::OptimizerSpec::Kind::kSgd) p.optimizer.momentum = cfg.real("momentum");
  p.data_fraction = cfg.real("fraction");
  p.domain_subset = cfg.int_list("domains");
  p.seed = cfg.u64("seed");
  p.eval_every = to_int(cfg, "eval_every");
  p.holdout_fraction = cfg.real("holdout_fraction");
  p.crop = cfg.boolean("crop");
  p.workers = to_int(cfg, "workers");
  p.freeze_encoder = cfg.boolean("freeze_encoder");
  p.augment.max_translate_frac = cfg.real("aug_translate");
  p.augment.rotate_lo_deg = cfg.real("aug_rotate_lo");
  p.augment.rotate_hi_deg = cfg.real("aug_rotate_hi");
  p.augment.scale_lo = cfg.real("aug_scale_lo");
  p.augment.scale_hi = cfg.real("aug_scale_hi");
  p.validate();
  return p;
}

model::ModelConfig model_from(const RunConfig& cfg) {
  model::ModelConfig c;
  c.depth = to_int(cfg, "depth");
  c.base_width = to_int(cfg, "base_width");
  c.dilation_rate = to_int(cfg, "dilation_rate");
  c.seed = cfg.u64("seed");
  return c;
}

training::ProgressFn progress_of(const LogFn& log) {
  return [log](const std::string& s) {
    if (log) log(1, s);
  };
}

Outcome gen_synthetic(RunConfig& cfg, const LogFn& log) {
  const std::string kind = cfg.str("gen_kind");
  if (kind == "seg-task") cfg.set_command_default("cases", "12");
  if (kind == "nodules") cfg.set_command_default("cases", "60");
  const fs::path out = prepare_outdir(cfg);
  const auto seed = cfg.u64("seed");
  if (kind == "suite") {
    const auto domains = synthetic::generate_suite(seed, out, to_int(cfg, "suite_size"));
    if (log) log(1, "wrote " + std::to_string(domains.size()) + " domains to " + out.string());
  } else if (kind == "seg-task") {
    const auto d = synthetic::generate_domain(synthetic::seg_task_spec(seed, to_int(cfg, "cases")), out / "domain0");
    write_manifest({d}, out / "manifest.txt");
    if (log) log(1, "wrote " + std::to_string(d.cases.size()) + " segmentation cases");
  } else if (kind == "nodules") {
    const auto cases = synthetic::generate_nodules(seed, to_int(cfg, "cases"));
    synthetic::write_nodules(cases, out);
    if (log) log(1, "wrote " + std::to_string(cases.size()) + " nodules");
  } else {
    fail(ErrorCode::kInvalidArgument, "gen_kind must be suite, seg-task or nodules");
  }
  return Outcome::kComplete;
}

Outcome normalize_cmd(RunConfig& cfg, const LogFn& log) {
  const fs::path out = prepare_outdir(cfg);
  const auto domains = load_manifest(cfg.str("manifest"));
  const auto done = normalize::preprocess_dataset(domains, out, cfg.real("clip_lo"), cfg.real("clip_hi"));
  if (log)
    for (const auto& d : done) {
      const auto& s = *d.median_spacing;
      log(1, "domain " + std::to_string(d.domain_id) + " median spacing " + fmt(s[0]) + " " + fmt(s[1]) + " " +
                 fmt(s[2]));
    }
  return Outcome::kComplete;
}

void write_scores(const std::map<int, training::DomainScore>& scores, const fs::path& path) {
  std::string text = "domain_id,dice,accuracy\n";
  for (const auto& [id, s] : scores) text += std::to_string(id) + ',' + fmt(s.dice) + ',' + fmt(s.accuracy) + '\n';
  write_text(path, text);
}

Outcome pretrain_cmd(RunConfig& cfg, const LogFn& log) {
  mode_defaults(cfg, Mode::kPretrain);
  const fs::path out = prepare_outdir(cfg);
  const TrainPlan plan = plan_from(cfg, Mode::kPretrain);
  const auto data = training::load_dataset(fs::path(cfg.str("manifest")));
  model::ModelConfig mc = model_from(cfg);
  for (const auto& d : data) mc.branches.push_back({d.spec.domain_id, d.spec.class_count});
  model::Model m(mc);
  const auto r = training::pretrain(m, data, plan, progress_of(log));
  model::save_checkpoint(r.checkpoint, out / "checkpoint.m3dc");
  training::write_log(r.log, out / "metrics.csv");
  write_scores(r.final_scores, out / "scores.csv");
  return Outcome::kComplete;
}

struct Init {
  bool pretrained = false;
  fs::path checkpoint;
};

Init parse_init(const std::string& s) {
  if (s == "scratch") return {};
  if (s.starts_with("med3d:") && s.size() > 6) return {true, s.substr(6)};
  fail(ErrorCode::kInvalidArgument, "init must be 'scratch' or 'med3d:<checkpoint>'");
}

template <typename Sample>
std::pair<std::vector<Sample>, std::vector<Sample>> split_items(const std::vector<Sample>& all, const TrainPlan& plan) {
  const auto sp = training::holdout_split(static_cast<int>(all.size()), plan.holdout_fraction, plan.seed);
  std::vector<Sample> train, test;
  for (int i : sp.train) train.push_back(all[i]);
  for (int i : sp.holdout) test.push_back(all[i]);
  return {train, test};
}

void write_transfer_outputs(const training::TransferResult& r, Mode mode, const fs::path& out) {
  training::write_log(r.log, out / "metrics.csv");
  std::string text = "mode = " + std::string(training::mode_name(mode)) + "\n";
  text += "steps = " + std::to_string(r.steps) + "\n";
  text += "final_metric = " + fmt(r.final_metric) + "\n";
  if (r.report) {
    text += "copied = " + std::to_string(r.report->copied.size()) + "\n";
    text += "initialized = " + std::to_string(r.report->initialized.size()) + "\n";
    text += "skipped = " + std::to_string(r.report->skipped.size()) + "\n";
  }
  write_text(out / "summary.txt", text);
}

Outcome transfer_cmd(RunConfig& cfg, const LogFn& log, bool seg) {
  const Init init = parse_init(cfg.str("init"));
  const Mode mode = seg ? (init.pretrained ? Mode::kTransferSeg : Mode::kScratchSeg)
                        : (init.pretrained ? Mode::kTransferCls : Mode::kScratchCls);
  mode_defaults(cfg, mode);
  const fs::path out = prepare_outdir(cfg);
  const TrainPlan plan = plan_from(cfg, mode);
  std::optional<model::Checkpoint> ckpt;
  if (init.pretrained) {
    require(fs::exists(init.checkpoint), ErrorCode::kIoFailure, "checkpoint " + init.checkpoint.string() + " not found");
    ckpt = model::load_checkpoint(init.checkpoint);
  }
  model::ModelConfig mc = model_from(cfg);
  training::TransferResult r;
  if (seg) {
    const auto data = training::load_dataset(fs::path(cfg.str("task")));
    require(!data.empty(), ErrorCode::kEmptyInput, "task manifest has no domain");
    mc.head = model::HeadKind::kSeg;
    mc.head_classes = data.front().spec.class_count;
    model::Model m(mc);
    const auto [train, test] = split_items(data.front().cases, plan);
    r = training::transfer_seg(m, plan, train, test, ckpt ? &*ckpt : nullptr, progress_of(log));
  } else {
    std::vector<training::ClsSample> all;
    for (const auto& c : synthetic::load_nodules(cfg.str("task"))) {
      auto vol = normalize::normalize_intensity(nifti::read(c.volume).volume).first;
      all.push_back({c.case_id, std::move(vol), c.label});
    }
    require(all.size() >= 2, ErrorCode::kEmptyInput, "classification task needs at least 2 usable cases");
    mc.head = model::HeadKind::kCls;
    mc.head_classes = 2;
    model::Model m(mc);
    const auto [train, test] = split_items(all, plan);
    r = training::transfer_cls(m, plan, train, test, ckpt ? &*ckpt : nullptr, progress_of(log));
  }
  write_transfer_outputs(r, mode, out);
  return Outcome::kComplete;
}

std::vector<fs::path> volume_files(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::kIoFailure, dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string n = e.path().filename().string();
    if (e.is_regular_file() && (n.ends_with(".nii") || n.ends_with(".nii.gz"))) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string case_id_of(const fs::path& p) {
  std::string n = p.filename().string();
  for (std::string_view ext : {".nii.gz", ".nii"})
    if (n.ends_with(ext)) return n.substr(0, n.size() - ext.size());
  return n;
}

int label_classes(const Volume& v) {
  float mx = 0.0f;
  for (float x : v.voxels()) mx = std::max(mx, x);
  return std::max(2, static_cast<int>(mx) + 1);
}

Outcome eval_cmd(RunConfig& cfg, const LogFn& log) {
  const fs::path out = prepare_outdir(cfg);
  const fs::path pred_dir = cfg.str("pred");
  std::vector<metrics::EvalRow> rows;
  int skipped = 0, total = 0;
  for (const auto& truth_path : volume_files(cfg.str("truth"))) {
    ++total;
    const std::string id = case_id_of(truth_path);
    try {
      const fs::path pred_path = pred_dir / truth_path.filename();
      require(fs::exists(pred_path), ErrorCode::kIoFailure, "no prediction " + pred_path.string());
      const Volume tv = nifti::read(truth_path).volume;
      const Volume pv = nifti::read(pred_path).volume;
      require(tv.extent() == pv.extent(), ErrorCode::kShapeMismatch,
              "prediction and truth extents differ for " + id);
      const int classes = std::max(label_classes(tv), label_classes(pv));
      const auto r = metrics::evaluate_case(id, to_label_grid(pv, classes), to_label_grid(tv, classes), tv.spacing());
      rows.insert(rows.end(), r.begin(), r.end());
    } catch (const Error& e) {
      ++skipped;
      if (log) log(0, "skipping " + id + ": " + e.what());
    }
  }
  require(total > 0, ErrorCode::kEmptyInput, "no label volumes in " + cfg.str("truth"));
  require(skipped < total, ErrorCode::kEmptyInput, "every case was skipped");
  metrics::write_eval_csv(rows, out / "eval.csv");
  return skipped ? Outcome::kPartial : Outcome::kComplete;
}

// Results land in `<name>.partial` after every run and are renamed when the
// whole experiment finished, so an interrupted run is recognisable.
Outcome experiment_cmd(RunConfig& cfg, const LogFn& log) {
  mode_defaults(cfg, Mode::kPretrain);
  const fs::path out = prepare_outdir(cfg);
  const TrainPlan plan = plan_from(cfg, Mode::kPretrain);
  const auto data = training::load_dataset(fs::path(cfg.str("manifest")));
  const int depth = to_int(cfg, "depth"), width = to_int(cfg, "base_width");
  const std::string kind = cfg.str("kind");
  fs::path final_path;
  fs::path partial;
  if (kind == "fraction") {
    final_path = out / "fraction.csv";
    partial = out / "fraction.csv.partial";
    std::vector<training::FractionRow> rows;
    const auto fractions = cfg.real_list("fractions");
    require(!fractions.empty(), ErrorCode::kInvalidArgument, "no fractions given");
    for (double f : fractions) {
      const auto r = training::fraction_experiment(data, {f}, plan, depth, width, progress_of(log));
      rows.insert(rows.end(), r.begin(), r.end());
      training::write_fraction_csv(rows, partial);
    }
  } else if (kind == "variety") {
    final_path = out / "variety.csv";
    partial = out / "variety.csv.partial";
    const auto sizes = cfg.int_list("sizes");
    require(!sizes.empty(), ErrorCode::kInvalidArgument, "no subset sizes given");
    training::VarietyTable table;
    table.sizes.clear();
    for (int s : sizes) {
      const auto t = training::variety_experiment(data, {s}, plan, depth, width, progress_of(log));
      if (table.domain_ids.empty()) {
        table.domain_ids = t.domain_ids;
        table.dice.assign(t.domain_ids.size(), {});
      }
      table.sizes.push_back(s);
      for (std::size_t i = 0; i < t.dice.size(); ++i) table.dice[i].push_back(t.dice[i][0]);
      training::write_variety_csv(table, partial);
    }
  } else {
    fail(ErrorCode::kInvalidArgument, "kind must be fraction or variety");
  }
  std::error_code ec;
  fs::rename(partial, final_path, ec);
  if (ec) fail(ErrorCode::kIoFailure, "cannot finalize " + final_path.string() + ": " + ec.message());
  return Outcome::kComplete;
}

}  // namespace

const std::vector<std::string_view>& commands() {
  static const std::vector<std::string_view> c = {"gen-synthetic", "normalize", "pretrain",  "transfer-seg",
                                                  "transfer-cls",  "eval",      "experiment"};
  return c;
}

Outcome run(std::string_view command, RunConfig& cfg, const LogFn& log) {
  if (command == "gen-synthetic") return gen_synthetic(cfg, log);
  if (command == "normalize") return normalize_cmd(cfg, log);
  if (command == "pretrain") return pretrain_cmd(cfg, log);
  if (command == "transfer-seg") return transfer_cmd(cfg, log, true);
  if (command == "transfer-cls") return transfer_cmd(cfg, log, false);
  if (command == "eval") return eval_cmd(cfg, log);
  if (command == "experiment") return experiment_cmd(cfg, log);
  fail(ErrorCode::kInvalidArgument, "unknown command '" + std::string(command) + "'");
}

}  // namespace med3d::app
