// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the library only through the C API.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "med3d/med3d.h"

namespace {

enum Exit { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitPartial = 3 };

struct Flag {
  const char* name;  // CLI11 option spec
  const char* key;   // configuration key
  const char* help;
};

struct Command {
  const char* name;
  const char* summary;
  std::vector<Flag> flags;
  std::vector<Flag> switches;  // boolean, set to true when present
};

const std::vector<Flag> kCommon = {
    {"--config", "", "key = value file; flags override it"},
    {"--seed", "seed", "base seed (env MED3D_SEED when neither flag nor config sets it)"},
    {"--outdir", "outdir", "output directory"},
    {"--verbosity", "verbosity", "0 quiet, 1 progress, 2 detail"},
};

const std::vector<Flag> kPlan = {
    {"--manifest", "manifest", "dataset manifest"},
    {"--depth", "depth", "encoder depth"},
    {"--width", "base_width", "first-stage channels (64 = canonical)"},
    {"--dilation", "dilation_rate", "dilation of stages 3 and 4"},
    {"--epochs", "epochs", "training epochs"},
    {"--batch-size", "batch_size", "items per optimizer step"},
    {"--lr", "lr", "learning rate"},
    {"--momentum", "momentum", "SGD momentum"},
    {"--weight-decay", "weight_decay", "weight decay"},
    {"--fraction", "fraction", "fraction of each domain's training cases"},
    {"--domains", "domains", "comma-separated domain ids"},
    {"--holdout", "holdout_fraction", "held-out share per domain"},
    {"--crop", "crop", "train on sampled crops (true/false)"},
    {"--workers", "workers", "preparation threads; 0 = deterministic single thread"},
    {"--aug-translate", "aug_translate", "max translation (fraction of the foreground box)"},
    {"--aug-rotate-lo", "aug_rotate_lo", "rotation low (degrees)"},
    {"--aug-rotate-hi", "aug_rotate_hi", "rotation high (degrees)"},
    {"--aug-scale-lo", "aug_scale_lo", "scale low"},
    {"--aug-scale-hi", "aug_scale_hi", "scale high"},
};

std::vector<Flag> join(std::vector<Flag> a, const std::vector<Flag>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<Flag> transfer_flags() {
  std::vector<Flag> f = {
      {"--init", "init", "med3d:<checkpoint> or scratch"},
      {"--task", "task", "task data: manifest (seg) or nodules.csv (cls)"},
      {"--eval-every", "eval_every", "optimizer steps between evaluations"},
  };
  for (const auto& p : kPlan)
    if (std::string(p.key) != "manifest" && std::string(p.key) != "fraction" && std::string(p.key) != "domains")
      f.push_back(p);
  return f;
}

const std::vector<Command>& command_table() {
  static const std::vector<Command> t = {
      {"gen-synthetic",
       "write the seeded synthetic suite (or a transfer task dataset)",
       {{"--domains", "suite_size", "number of suite domains (1-8)"},
        {"--kind", "gen_kind", "suite | seg-task | nodules"},
        {"--cases", "cases", "case count of a task dataset"}},
       {}},
      {"normalize",
       "resample to per-domain median spacing, clip and z-score",
       {{"--manifest", "manifest", "dataset manifest"},
        {"--clip-lo", "clip_lo", "lower clipping percentile"},
        {"--clip-hi", "clip_hi", "upper clipping percentile"}},
       {}},
      {"pretrain", "multi-domain pretraining of the shared encoder", kPlan, {}},
      {"transfer-seg", "segmentation training from a checkpoint or from scratch", transfer_flags(),
       {{"--freeze-encoder", "freeze_encoder", "keep encoder weights fixed"}}},
      {"transfer-cls", "classification training from a checkpoint or from scratch", transfer_flags(),
       {{"--freeze-encoder", "freeze_encoder", "keep encoder weights fixed"}}},
      {"eval",
       "Dice / ASSD / accuracy of predicted label volumes",
       {{"--pred", "pred", "directory of predicted label volumes"},
        {"--truth", "truth", "directory of reference label volumes"}},
       {}},
      {"experiment", "data-fraction or domain-variety experiment",
       join({{"--kind", "kind", "fraction | variety"},
             {"--fractions", "fractions", "comma-separated data fractions"},
             {"--sizes", "sizes", "comma-separated domain subset sizes"}},
            kPlan),
       {}},
  };
  return t;
}

void log_to_stderr(int level, const char* message, void*) {
  std::fprintf(stderr, level == 0 ? "med3d: warning: %s\n" : "med3d: %s\n", message);
}

int fail_with(med3d_status s) {
  std::fprintf(stderr, "med3d: error: %s\n", med3d_last_error());
  return s == MED3D_PARTIAL ? kExitPartial : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"med3d: 3D medical volume pretraining and transfer toolkit", "med3d"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(med3d_version()));

  struct Bound {
    CLI::App* sub;
    std::map<std::string, std::string> values;
    std::map<std::string, bool> switches;
    std::string config;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& c : command_table()) {
    auto b = std::make_unique<Bound>();
    b->sub = app.add_subcommand(c.name, c.summary);
    for (const auto& f : join(kCommon, c.flags)) {
      if (std::string(f.key).empty()) {
        b->sub->add_option(f.name, b->config, f.help);
      } else {
        b->sub->add_option(f.name, b->values[f.key], f.help);
      }
    }
    for (const auto& s : c.switches) b->sub->add_flag(s.name, b->switches[s.key], s.help);
    bound.push_back(std::move(b));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  med3d_set_log_callback(log_to_stderr, nullptr);
  for (std::size_t i = 0; i < bound.size(); ++i) {
    Bound& b = *bound[i];
    if (!b.sub->parsed()) continue;
    const Command& c = command_table()[i];

    med3d_config* raw = nullptr;
    if (med3d_config_create(&raw) != MED3D_OK) return fail_with(MED3D_ERR_INTERNAL);
    std::unique_ptr<med3d_config, decltype(&med3d_config_destroy)> cfg(raw, med3d_config_destroy);

    if (const char* env = std::getenv("MED3D_SEED"); env && *env) {
      if (auto s = med3d_config_set_env(cfg.get(), "seed", env); s != MED3D_OK) return fail_with(s);
    }
    if (!b.config.empty()) {
      if (auto s = med3d_config_load_file(cfg.get(), b.config.c_str()); s != MED3D_OK) return fail_with(s);
    }
    for (const auto& f : join(kCommon, c.flags)) {
      const std::string key = f.key;
      if (key.empty() || b.sub->count(f.name) == 0) continue;
      if (auto s = med3d_config_set(cfg.get(), key.c_str(), b.values[key].c_str()); s != MED3D_OK) return fail_with(s);
    }
    for (const auto& sw : c.switches) {
      if (b.switches[sw.key]) {
        if (auto s = med3d_config_set(cfg.get(), sw.key, "true"); s != MED3D_OK) return fail_with(s);
      }
    }
    const med3d_status s = med3d_run(c.name, cfg.get());
    return s == MED3D_OK ? kExitOk : fail_with(s);
  }
  return kExitUsage;
}
