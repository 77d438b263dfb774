// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <utility>

#include "med3d/error.hpp"
#include "med3d/keyvalue.hpp"

namespace med3d::model {
namespace {

using ops::ConvAlgo;
using ops::ConvParams;
using ops::ConvTransposeParams;

constexpr ConvAlgo kAlgo = ConvAlgo::kGemm;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Registers tensors in a fixed order. Each weight draws from its own
// generator keyed by (seed, name), so adding or removing a head never
// changes how the encoder is initialized.
class Registry {
 public:
  Registry(std::vector<NamedParam>& out, std::uint64_t seed) : out_(out), seed_(seed) {}

  FTensor he_normal(const std::string& name, tensor::Shape shape, std::size_t fan_in) {
    FTensor t(std::move(shape), true);
    std::mt19937_64 rng(seed_ ^ fnv1a(name));
    std::normal_distribution<float> n(0.0f, static_cast<float>(std::sqrt(2.0 / static_cast<double>(fan_in))));
    for (float& v : t.values()) v = n(rng);
    out_.push_back({name, t, false});
    return t;
  }
  FTensor constant(const std::string& name, tensor::Shape shape, float value, bool buffer) {
    FTensor t(std::move(shape), !buffer);
    std::fill(t.values().begin(), t.values().end(), value);
    out_.push_back({name, t, buffer});
    return t;
  }

 private:
  std::vector<NamedParam>& out_;
  std::uint64_t seed_;
};

struct ConvBn {
  FTensor weight, gamma, beta;
  ops::RunningStats<float> stats;
  ConvParams params;

  ConvBn() = default;
  ConvBn(Registry& reg, const std::string& name, int cin, int cout, int k, ConvParams p) : params(p) {
    weight = reg.he_normal(name + ".conv.weight", {cout, cin, k, k, k}, static_cast<std::size_t>(cin) * k * k * k);
    gamma = reg.constant(name + ".bn.weight", {cout}, 1.0f, false);
    beta = reg.constant(name + ".bn.bias", {cout}, 0.0f, false);
    stats.mean = reg.constant(name + ".bn.running_mean", {cout}, 0.0f, true);
    stats.var = reg.constant(name + ".bn.running_var", {cout}, 1.0f, true);
  }

  FTensor forward(FTape& tape, const FTensor& x, NormMode mode, bool with_relu) {
    FTensor y = ops::conv3d(tape, x, weight, params, kAlgo);
    y = ops::batchnorm3d(tape, y, gamma, beta, stats, mode);
    return with_relu ? ops::relu(tape, y) : y;
  }
};

struct Block {
  std::vector<ConvBn> convs;  // 2 (basic) or 3 (bottleneck)
  std::optional<ConvBn> shortcut;

  FTensor forward(FTape& tape, const FTensor& x, NormMode mode) {
    FTensor y = x;
    for (std::size_t i = 0; i < convs.size(); ++i) y = convs[i].forward(tape, y, mode, i + 1 < convs.size());
    const FTensor skip = shortcut ? shortcut->forward(tape, x, mode, false) : x;
    return ops::relu(tape, ops::add(tape, y, skip));
  }
};

struct Branch {
  int domain_id = 0;
  int classes = 0;
  FTensor weight, bias;
};

struct SegGroup {
  FTensor up_weight;  // Cin x Cmid x 3 x 3 x 3
  FTensor up_gamma, up_beta;
  ops::RunningStats<float> up_stats;
  ConvBn conv;
};

}  // namespace

struct Model::Impl {
  ConvBn stem;
  std::vector<std::vector<Block>> stages;
  std::vector<Branch> branches;
  std::vector<SegGroup> seg_groups;
  FTensor seg_weight, seg_bias;
  FTensor cls_weight, cls_bias;
};

BlockKind ModelConfig::block() const { return depth <= 34 ? BlockKind::kBasic : BlockKind::kBottleneck; }

std::array<int, 4> stage_blocks(int depth) {
  switch (depth) {
    case 10: return {1, 1, 1, 1};
    case 18: return {2, 2, 2, 2};
    case 34: return {3, 4, 6, 3};
    case 50: return {3, 4, 6, 3};
    case 101: return {3, 4, 23, 3};
    case 152: return {3, 8, 36, 3};
    case 200: return {3, 24, 36, 3};
  }
  fail(ErrorCode::kInvalidDepth, "unsupported depth " + std::to_string(depth) +
                                     " (expected 10, 18, 34, 50, 101, 152 or 200)");
}

void ModelConfig::validate() const {
  stage_blocks(depth);
  require(in_channels == 1, ErrorCode::kInvalidArgument, "in_channels must be 1");
  require(base_width >= 1 && base_width <= 1024, ErrorCode::kInvalidArgument, "base_width out of range");
  require(dilation_rate >= 1, ErrorCode::kInvalidArgument, "dilation_rate must be >= 1");
  std::set<int> ids;
  for (const auto& b : branches) {
    require(ids.insert(b.domain_id).second, ErrorCode::kDuplicateBranch,
            "two decoder branches for domain " + std::to_string(b.domain_id));
    require(b.class_count >= 2 && b.class_count <= 255, ErrorCode::kInvalidArgument,
            "branch class_count must be in [2, 255]");
  }
  if (head != HeadKind::kNone) {
    require(head_classes >= 2, ErrorCode::kInvalidArgument, "head needs at least 2 classes");
  }
}

int encoder_channels(const ModelConfig& cfg) {
  return 8 * cfg.base_width * (cfg.block() == BlockKind::kBottleneck ? 4 : 1);
}

int encoder_stride(const ModelConfig& cfg) { return cfg.variant == EncoderVariant::kDilated ? 8 : 32; }

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>()) {
  cfg_.validate();
  Registry reg(params_, cfg_.seed);
  Impl& m = *impl_;
  const int w = cfg_.base_width;
  const bool bottleneck = cfg_.block() == BlockKind::kBottleneck;
  const int expansion = bottleneck ? 4 : 1;

  m.stem = ConvBn(reg, "encoder.stem", cfg_.in_channels, w, 7, {2, 3, 1});

  const auto blocks = stage_blocks(cfg_.depth);
  const bool dilated = cfg_.variant == EncoderVariant::kDilated;
  int in = w;
  for (int s = 0; s < 4; ++s) {
    const int planes = w << s;
    const int out = planes * expansion;
    int stride = s == 0 ? 1 : 2;
    int dilation = 1;
    if (dilated && s >= 2) {
      stride = 1;
      dilation = cfg_.dilation_rate;
    }
    std::vector<Block> stage;
    for (int b = 0; b < blocks[s]; ++b) {
      const std::string name = "encoder.layer" + std::to_string(s + 1) + "." + std::to_string(b);
      const int st = b == 0 ? stride : 1;
      Block blk;
      if (bottleneck) {
        blk.convs.emplace_back(reg, name + ".c1", in, planes, 1, ConvParams{1, 0, 1});
        blk.convs.emplace_back(reg, name + ".c2", planes, planes, 3, ConvParams{st, dilation, dilation});
        blk.convs.emplace_back(reg, name + ".c3", planes, out, 1, ConvParams{1, 0, 1});
      } else {
        blk.convs.emplace_back(reg, name + ".c1", in, planes, 3, ConvParams{st, dilation, dilation});
        blk.convs.emplace_back(reg, name + ".c2", planes, planes, 3, ConvParams{1, dilation, dilation});
      }
      if (st != 1 || in != out) blk.shortcut.emplace(reg, name + ".down", in, out, 1, ConvParams{st, 0, 1});
      stage.push_back(std::move(blk));
      in = out;
    }
    m.stages.push_back(std::move(stage));
  }

  const int enc = encoder_channels(cfg_);
  auto sorted = cfg_.branches;
  std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.domain_id < b.domain_id; });
  for (const auto& b : sorted) {
    const std::string name = "decoder.branch" + std::to_string(b.domain_id);
    Branch br;
    br.domain_id = b.domain_id;
    br.classes = b.class_count;
    br.weight = reg.he_normal(name + ".weight", {b.class_count, enc, 1, 1, 1}, static_cast<std::size_t>(enc));
    br.bias = reg.constant(name + ".bias", {b.class_count}, 0.0f, false);
    m.branches.push_back(std::move(br));
  }

  if (cfg_.head == HeadKind::kSeg) {
    // Transposed-conv / conv channel pairs scale with base_width; at the
    // canonical width they are 256/128, 128/64, 64/32.
    const int unit = std::max(1, 32 * w / 64);
    const int plan[3][2] = {{8 * unit, 4 * unit}, {4 * unit, 2 * unit}, {2 * unit, unit}};
    int cin = enc;
    for (int g = 0; g < 3; ++g) {
      const std::string name = "head.seg.group" + std::to_string(g + 1);
      SegGroup sg;
      const int up = plan[g][0], mid = plan[g][1];
      sg.up_weight = reg.he_normal(name + ".up.weight", {cin, up, 3, 3, 3}, static_cast<std::size_t>(up) * 27);
      sg.up_gamma = reg.constant(name + ".up_bn.weight", {up}, 1.0f, false);
      sg.up_beta = reg.constant(name + ".up_bn.bias", {up}, 0.0f, false);
      sg.up_stats.mean = reg.constant(name + ".up_bn.running_mean", {up}, 0.0f, true);
      sg.up_stats.var = reg.constant(name + ".up_bn.running_var", {up}, 1.0f, true);
      sg.conv = ConvBn(reg, name + ".refine", up, mid, 3, {1, 1, 1});
      m.seg_groups.push_back(std::move(sg));
      cin = mid;
    }
    m.seg_weight = reg.he_normal("head.seg.out.weight", {cfg_.head_classes, cin, 1, 1, 1}, static_cast<std::size_t>(cin));
    m.seg_bias = reg.constant("head.seg.out.bias", {cfg_.head_classes}, 0.0f, false);
  } else if (cfg_.head == HeadKind::kCls) {
    m.cls_weight = reg.he_normal("head.cls.weight", {enc, cfg_.head_classes}, static_cast<std::size_t>(enc));
    m.cls_bias = reg.constant("head.cls.bias", {cfg_.head_classes}, 0.0f, false);
  }
}

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

FTensor Model::encode(FTape& tape, const FTensor& input, NormMode mode) {
  require(input.rank() == 5 && input.dim(1) == cfg_.in_channels, ErrorCode::kShapeMismatch,
          "encoder input must be N x 1 x D x H x W");
  Impl& m = *impl_;
  FTensor x = m.stem.forward(tape, input, mode, true);
  x = ops::maxpool3d(tape, x, 3, 2, 1);
  for (auto& stage : m.stages)
    for (auto& blk : stage) x = blk.forward(tape, x, mode);
  return x;
}

FTensor Model::forward_pretrain(FTape& tape, const FTensor& input, int domain_id, NormMode mode) {
  Impl& m = *impl_;
  const auto it = std::find_if(m.branches.begin(), m.branches.end(),
                               [&](const Branch& b) { return b.domain_id == domain_id; });
  require(it != m.branches.end(), ErrorCode::kUnknownDomain,
          "no decoder branch for domain " + std::to_string(domain_id));
  const FTensor feat = encode(tape, input, mode);
  FTensor y = ops::conv3d(tape, feat, it->weight, {}, kAlgo);
  y = ops::add_channel_bias(tape, y, it->bias);
  return ops::trilinear_upsample(tape, y, {input.dim(2), input.dim(3), input.dim(4)});
}

FTensor Model::forward_seg(FTape& tape, const FTensor& input, NormMode mode, bool freeze_encoder) {
  require(cfg_.head == HeadKind::kSeg, ErrorCode::kInvalidArgument, "model has no segmentation head");
  Impl& m = *impl_;
  FTensor x = encode(tape, input, freeze_encoder ? NormMode::kEval : mode);
  for (auto& g : m.seg_groups) {
    x = ops::conv_transpose3d(tape, x, g.up_weight, ConvTransposeParams{2, 1, 1, 1}, kAlgo);
    x = ops::relu(tape, ops::batchnorm3d(tape, x, g.up_gamma, g.up_beta, g.up_stats, mode));
    x = g.conv.forward(tape, x, mode, true);
  }
  x = ops::conv3d(tape, x, m.seg_weight, {}, kAlgo);
  x = ops::add_channel_bias(tape, x, m.seg_bias);
  const std::array<int, 3> target{input.dim(2), input.dim(3), input.dim(4)};
  if (x.dim(2) != target[0] || x.dim(3) != target[1] || x.dim(4) != target[2]) {
    x = ops::trilinear_upsample(tape, x, target);
  }
  return x;
}

FTensor Model::forward_cls(FTape& tape, const FTensor& input, NormMode mode, bool freeze_encoder) {
  require(cfg_.head == HeadKind::kCls, ErrorCode::kInvalidArgument, "model has no classification head");
  Impl& m = *impl_;
  FTensor x = encode(tape, input, freeze_encoder ? NormMode::kEval : mode);
  x = ops::global_avgpool(tape, x);
  x = ops::reshape(tape, x, {x.dim(0), x.dim(1)});
  return ops::linear(tape, x, m.cls_weight, m.cls_bias);
}

std::vector<FTensor> Model::trainable(std::string_view prefix) const {
  std::vector<FTensor> out;
  for (const auto& p : params_)
    if (!p.buffer && p.name.starts_with(prefix)) out.push_back(p.tensor);
  return out;
}

std::size_t Model::parameter_count(std::string_view prefix, bool include_buffers) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if ((include_buffers || !p.buffer) && p.name.starts_with(prefix)) n += p.tensor.numel();
  return n;
}

const NamedParam* Model::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

void Model::set_trainable(std::string_view prefix, bool on) {
  for (auto& p : params_)
    if (!p.buffer && p.name.starts_with(prefix)) p.tensor.set_requires_grad(on);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'M', '3', 'D', 'C'};

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(std::span<const std::byte> b) : b_(b) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32() {
    const std::uint32_t bits = u32();
    return std::bit_cast<float>(bits);
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    require(b_.size() - pos_ >= n, ErrorCode::kTruncatedFile, "checkpoint ends early");
  }
  std::span<const std::byte> b_;
  std::size_t pos_ = 0;
};

std::string variant_name(EncoderVariant v) { return v == EncoderVariant::kDilated ? "dilated" : "coarse"; }

std::string head_text(const ModelConfig& c) {
  switch (c.head) {
    case HeadKind::kNone: return "none";
    case HeadKind::kSeg: return "seg:" + std::to_string(c.head_classes);
    case HeadKind::kCls: return "cls:" + std::to_string(c.head_classes);
  }
  return "none";
}

int to_int(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used == s.size()) return static_cast<int>(v);
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kParseError, std::string("checkpoint metadata: bad ") + what + " '" + s + "'");
}

}  // namespace

const NamedArray* Checkpoint::find(std::string_view name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

Checkpoint to_checkpoint(const Model& m) {
  const ModelConfig& c = m.config();
  Checkpoint ck;
  ck.metadata["depth"] = std::to_string(c.depth);
  ck.metadata["block"] = c.block() == BlockKind::kBasic ? "basic" : "bottleneck";
  ck.metadata["in_channels"] = std::to_string(c.in_channels);
  ck.metadata["base_width"] = std::to_string(c.base_width);
  ck.metadata["variant"] = variant_name(c.variant);
  ck.metadata["dilation_rate"] = std::to_string(c.dilation_rate);
  std::string br;
  for (const auto& b : c.branches) {
    if (!br.empty()) br += ",";
    br += std::to_string(b.domain_id) + ":" + std::to_string(b.class_count);
  }
  ck.metadata["branches"] = br;
  ck.metadata["head"] = head_text(c);
  ck.metadata["seed"] = std::to_string(c.seed);
  for (const auto& p : m.parameters()) {
    const auto v = std::as_const(p.tensor).values();
    ck.arrays.push_back({p.name, p.tensor.shape(), std::vector<float>(v.begin(), v.end())});
  }
  return ck;
}

std::vector<std::byte> encode_checkpoint(const Checkpoint& c) {
  std::vector<std::byte> out;
  for (char ch : kMagic) out.push_back(static_cast<std::byte>(ch));
  put_u32(out, c.format_version);
  std::string meta;
  for (const auto& [k, v] : c.metadata) meta += k + " = " + v + "\n";
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  for (char ch : meta) out.push_back(static_cast<std::byte>(ch));

  std::vector<const NamedArray*> order;
  for (const auto& a : c.arrays) order.push_back(&a);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->name < b->name; });
  put_u32(out, static_cast<std::uint32_t>(order.size()));
  for (const NamedArray* a : order) {
    put_u32(out, static_cast<std::uint32_t>(a->name.size()));
    for (char ch : a->name) out.push_back(static_cast<std::byte>(ch));
    put_u32(out, static_cast<std::uint32_t>(a->shape.size()));
    for (int d : a->shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : a->values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorCode::kBadMagic,
          "not a med3d checkpoint (magic M3DC expected)");
  Reader r(bytes.subspan(4));
  Checkpoint c;
  c.format_version = r.u32();
  require(c.format_version == Checkpoint::kFormatVersion, ErrorCode::kParseError,
          "unsupported checkpoint format version " + std::to_string(c.format_version));
  const std::uint32_t meta_len = r.u32();
  const kv::Document doc = kv::parse(r.text(meta_len));
  for (const auto& sec : doc.sections)
    for (const auto& e : sec.entries) c.metadata[e.key] = e.value;
  const std::uint32_t count = r.u32();
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.text(r.u32());
    require(names.insert(a.name).second, ErrorCode::kParseError, "duplicate tensor " + a.name);
    const std::uint32_t rank = r.u32();
    require(rank >= 1 && rank <= 8, ErrorCode::kParseError, "bad rank for " + a.name);
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint32_t d = r.u32();
      require(d >= 1 && d < (1u << 24), ErrorCode::kParseError, "bad extent for " + a.name);
      a.shape.push_back(static_cast<int>(d));
      n *= d;
    }
    require(n <= bytes.size() / 4, ErrorCode::kTruncatedFile, "checkpoint ends early");
    a.values.resize(n);
    for (auto& v : a.values) v = r.f32();
    c.arrays.push_back(std::move(a));
  }
  require(r.done(), ErrorCode::kParseError, "trailing bytes after checkpoint records");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(c);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIoFailure, "cannot create " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorCode::kIoFailure, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIoFailure, "cannot open checkpoint " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint({reinterpret_cast<const std::byte*>(raw.data()), raw.size()});
}

ModelConfig config_from_metadata(const std::map<std::string, std::string>& meta) {
  auto get = [&](const char* key) -> const std::string& {
    const auto it = meta.find(key);
    if (it == meta.end()) fail(ErrorCode::kParseError, std::string("checkpoint metadata lacks ") + key);
    return it->second;
  };
  ModelConfig c;
  c.depth = to_int(get("depth"), "depth");
  c.in_channels = to_int(get("in_channels"), "in_channels");
  c.base_width = to_int(get("base_width"), "base_width");
  c.dilation_rate = to_int(get("dilation_rate"), "dilation_rate");
  const std::string& v = get("variant");
  require(v == "dilated" || v == "coarse", ErrorCode::kParseError, "unknown encoder variant " + v);
  c.variant = v == "dilated" ? EncoderVariant::kDilated : EncoderVariant::kCoarse;
  for (const auto& item : kv::split(get("branches"), ',')) {
    const auto t = std::string(kv::trim(item));
    if (t.empty()) continue;
    const auto colon = t.find(':');
    require(colon != std::string::npos, ErrorCode::kParseError, "bad branch spec " + t);
    c.branches.push_back({to_int(t.substr(0, colon), "branch id"), to_int(t.substr(colon + 1), "branch classes")});
  }
  const std::string& h = get("head");
  if (h == "none") {
    c.head = HeadKind::kNone;
  } else {
    const auto colon = h.find(':');
    require(colon != std::string::npos, ErrorCode::kParseError, "bad head spec " + h);
    const std::string kind = h.substr(0, colon);
    require(kind == "seg" || kind == "cls", ErrorCode::kParseError, "bad head spec " + h);
    c.head = kind == "seg" ? HeadKind::kSeg : HeadKind::kCls;
    c.head_classes = to_int(h.substr(colon + 1), "head classes");
  }
  c.seed = std::stoull(get("seed"));
  const auto block = get("block");
  require(block == (c.block() == BlockKind::kBasic ? "basic" : "bottleneck"), ErrorCode::kArchMismatch,
          "block kind does not match depth");
  return c;
}

Model model_from_checkpoint(const Checkpoint& c) {
  Model m(config_from_metadata(c.metadata));
  for (const auto& p : m.parameters()) {
    const NamedArray* a = c.find(p.name);
    require(a != nullptr, ErrorCode::kArchMismatch, "checkpoint lacks tensor " + p.name);
    require(a->shape == p.tensor.shape(), ErrorCode::kShapeMismatch, "shape mismatch for " + p.name);
    FTensor t = p.tensor;
    std::copy(a->values.begin(), a->values.end(), t.values().begin());
  }
  return m;
}

TransferReport transfer_weights(const Checkpoint& ckpt, Model& target, bool strict_encoder) {
  const ModelConfig& tc = target.config();
  if (strict_encoder) {
    const ModelConfig sc = config_from_metadata(ckpt.metadata);
    const bool same = sc.depth == tc.depth && sc.block() == tc.block() && sc.in_channels == tc.in_channels &&
                      sc.base_width == tc.base_width && sc.variant == tc.variant &&
                      sc.dilation_rate == tc.dilation_rate;
    require(same, ErrorCode::kArchMismatch,
            "checkpoint encoder (depth " + ckpt.metadata.at("depth") + ") does not match the target (depth " +
                std::to_string(tc.depth) + ")");
  }
  TransferReport rep;
  std::set<std::string> used;
  for (const auto& p : target.parameters()) {
    const NamedArray* a = p.name.starts_with("encoder.") ? ckpt.find(p.name) : nullptr;
    if (a == nullptr) {
      rep.initialized.push_back(p.name);
      continue;
    }
    if (a->shape != p.tensor.shape()) {
      require(!strict_encoder, ErrorCode::kShapeMismatch,
              "shape mismatch for " + p.name + ": checkpoint " + tensor::shape_string(a->shape) + " vs model " +
                  tensor::shape_string(p.tensor.shape()));
      rep.initialized.push_back(p.name);
      continue;
    }
    FTensor t = p.tensor;
    std::copy(a->values.begin(), a->values.end(), t.values().begin());
    rep.copied.push_back(p.name);
    used.insert(p.name);
  }
  for (const auto& a : ckpt.arrays)
    if (!used.count(a.name)) rep.skipped.push_back(a.name);
  std::sort(rep.skipped.begin(), rep.skipped.end());
  return rep;
}

// ---------------------------------------------------------------------------

RoiCrop coarse_roi_extract(const LabelGrid& predicted, const Volume& vol, const LabelGrid& labels,
                           double expand_lo, double expand_hi, std::uint64_t seed) {
  require(predicted.extent() == vol.extent() && labels.extent() == vol.extent(), ErrorCode::kShapeMismatch,
          "prediction, volume and labels must share extents");
  require(expand_lo >= 0.0 && expand_lo <= expand_hi, ErrorCode::kInvalidArgument,
          "expansion range must satisfy 0 <= lo <= hi");
  const Extent3& e = vol.extent();
  const auto bb = foreground_bbox(predicted);
  BoundingBox box;
  if (!bb) {
    box.lo = {0, 0, 0};
    box.hi = {e.nx - 1, e.ny - 1, e.nz - 1};
  } else {
    std::mt19937_64 rng(seed);
    box = *bb;
    for (int ax = 0; ax < 3; ++ax) {
      const double f =
          expand_lo == expand_hi ? expand_lo : std::uniform_real_distribution<double>(expand_lo, expand_hi)(rng);
      const int grow = static_cast<int>(std::round(f * bb->extent(ax)));
      box.lo[ax] = std::max(0, box.lo[ax] - grow);
      box.hi[ax] = std::min(e[ax] - 1, box.hi[ax] + grow);
    }
  }
  const Extent3 ce{box.extent(0), box.extent(1), box.extent(2)};
  std::vector<float> cv(ce.count());
  std::vector<std::uint8_t> cl(ce.count());
  for (int z = 0; z < ce.nz; ++z)
    for (int y = 0; y < ce.ny; ++y)
      for (int x = 0; x < ce.nx; ++x) {
        cv[ce.index(x, y, z)] = vol.at(x + box.lo[0], y + box.lo[1], z + box.lo[2]);
        cl[ce.index(x, y, z)] = labels.at(x + box.lo[0], y + box.lo[1], z + box.lo[2]);
      }
  auto origin = vol.origin_offset();
  for (int ax = 0; ax < 3; ++ax) origin[ax] += box.lo[ax] * vol.spacing()[ax];
  return RoiCrop{Volume(ce, vol.spacing(), std::move(cv), vol.modality(), origin),
                 LabelGrid(ce, std::move(cl), labels.class_count()), box};
}

FTensor volume_tensor(const Volume& vol) {
  const Extent3& e = vol.extent();
  return FTensor({1, 1, e.nz, e.ny, e.nx}, std::vector<float>(vol.voxels().begin(), vol.voxels().end()));
}

std::vector<std::int32_t> label_targets(const LabelGrid& labels) {
  return std::vector<std::int32_t>(labels.labels().begin(), labels.labels().end());
}

LabelGrid predict_labels(const FTensor& logits, const Extent3& extent, int class_count) {
  require(logits.rank() == 5 && logits.dim(0) == 1 && logits.dim(2) == extent.nz && logits.dim(3) == extent.ny &&
              logits.dim(4) == extent.nx,
          ErrorCode::kShapeMismatch, "logits do not match the label grid extent");
  const auto arg = ops::argmax_channels(logits);
  std::vector<std::uint8_t> l(arg.begin(), arg.end());
  return LabelGrid(extent, std::move(l), class_count);
}

}  // namespace med3d::model
