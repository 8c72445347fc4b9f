/*
 * Copyright 2026 The voxdx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "voxdx/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "voxdx/error.hpp"

namespace voxdx {
namespace fs = std::filesystem;

const char* to_string(Variant v) {
  return v == Variant::kOriginal ? "original" : "simplified";
}

const char* to_string(NormKind n) {
  switch (n) {
    case NormKind::kBatch:
      return "batch";
    case NormKind::kGroup:
      return "group";
    default:
      return "none";
  }
}

Variant parse_variant(const std::string& s) {
  if (s == "original") return Variant::kOriginal;
  if (s == "simplified") return Variant::kSimplified;
  fail(ErrorKind::kInvalidArgument,
       "unknown variant '" + s + "' (expected original|simplified)");
}

NormKind parse_norm(const std::string& s) {
  if (s == "none") return NormKind::kNone;
  if (s == "batch") return NormKind::kBatch;
  if (s == "group") return NormKind::kGroup;
  fail(ErrorKind::kInvalidArgument,
       "unknown norm '" + s + "' (expected none|batch|group)");
}

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kConv:
      return "conv";
    case LayerKind::kBatchNorm:
      return "batch_norm";
    case LayerKind::kGroupNorm:
      return "group_norm";
    case LayerKind::kLeakyRelu:
      return "leaky_relu";
    case LayerKind::kMaxPool:
      return "maxpool";
    case LayerKind::kFlatten:
      return "flatten";
    case LayerKind::kDense:
      return "dense";
    case LayerKind::kDropout:
      return "dropout";
    case LayerKind::kConcatDemographics:
      return "concat_demographics";
  }
  return "?";
}

void ModelConfig::validate() const {
  require(alpha >= 0 && std::isfinite(alpha), ErrorKind::kInvalidArgument,
          "alpha must be >= 0");
  require(rc >= 0 && std::isfinite(rc), ErrorKind::kInvalidArgument,
          "rc must be >= 0");
  require(kp1 > 0 && kp1 <= 1 && kp2 > 0 && kp2 <= 1, ErrorKind::kInvalidArgument,
          "keep probabilities must lie in (0,1]");
  require(num_classes >= 2, ErrorKind::kInvalidArgument, "num_classes must be >= 2");
}

// ---------------------------------------------------------------------------
// Architecture

namespace {

constexpr std::size_t kBlockChannels[3] = {32, 64, 128};
constexpr std::size_t kPoolWindows[3] = {2, 4, 4};
constexpr std::size_t kPoolStride = 2;
constexpr std::size_t kKernel = 3;
constexpr std::size_t kFc1 = 512;
constexpr std::size_t kFc2 = 128;
constexpr std::size_t kDemographicFeatures = 2;

}  // namespace

template <typename T>
BasicModel<T>::BasicModel(const ModelConfig& config, Extents3 input_extents)
    : config_(config), extents_(input_extents) {
  config_.validate();
  require(input_extents.x >= 1 && input_extents.y >= 1 && input_extents.z >= 1,
          ErrorKind::kShape, "input extents must be >= 1");

  auto add_param = [&](std::string name, ParamRole role, Shape shape) {
    params_.push_back({std::move(name), role, BasicTensor<T>(std::move(shape))});
    return static_cast<int>(params_.size() - 1);
  };

  Shape shape{input_extents.x, input_extents.y, input_extents.z, 1};
  const int convs_per_block = config_.variant == Variant::kOriginal ? 2 : 1;
  int conv_index = 0;
  for (int block = 0; block < 3; ++block) {
    for (int j = 0; j < convs_per_block; ++j) {
      ++conv_index;
      const std::string id = std::to_string(conv_index);
      const std::size_t cin = shape[3];
      const std::size_t cout = kBlockChannels[block];
      LayerInfo conv{"conv" + id, LayerKind::kConv, {}};
      conv.param_a = add_param("conv" + id + ".kernel", ParamRole::kConvKernel,
                               {kKernel, kKernel, kKernel, cin, cout});
      conv.param_b = add_param("conv" + id + ".bias", ParamRole::kConvBias, {cout});
      conv.stride = 1;
      conv.window = kKernel;
      shape[3] = cout;
      conv.output = shape;
      layers_.push_back(conv);

      if (config_.norm != NormKind::kNone) {
        LayerInfo norm{"norm" + id,
                       config_.norm == NormKind::kBatch ? LayerKind::kBatchNorm
                                                        : LayerKind::kGroupNorm,
                       shape};
        norm.param_a = add_param("norm" + id + ".gamma", ParamRole::kNormGamma, {cout});
        norm.param_b = add_param("norm" + id + ".beta", ParamRole::kNormBeta, {cout});
        if (config_.norm == NormKind::kBatch) {
          norm_states_.push_back(ops::NormState::for_channels(cout));
          norm.norm_state = static_cast<int>(norm_states_.size() - 1);
        } else {
          norm.groups = ops::default_group_count(cout);
        }
        layers_.push_back(norm);
      }
      layers_.push_back({"act" + id, LayerKind::kLeakyRelu, shape});
    }

    const std::string pool_name = "pool" + std::to_string(block + 1);
    for (int axis = 0; axis < 3; ++axis) {
      require(shape[axis] >= kPoolStride, ErrorKind::kShape,
              "input extents " + input_extents.str() + " too small: layer " +
                  pool_name + " receives extent " + std::to_string(shape[axis]) +
                  " on axis " + std::to_string(axis) + " (needs >= " +
                  std::to_string(kPoolStride) + ")");
      shape[axis] = ops::axis_geometry(shape[axis], kPoolWindows[block], kPoolStride,
                                       ops::Padding::kSame)
                        .out;
    }
    LayerInfo pool{pool_name, LayerKind::kMaxPool, shape};
    pool.window = kPoolWindows[block];
    pool.stride = kPoolStride;
    layers_.push_back(pool);
  }

  const std::size_t flat = shape_numel(shape);
  layers_.push_back({"flatten", LayerKind::kFlatten, {flat}});

  auto add_dense = [&](const std::string& name, std::size_t in, std::size_t out) {
    LayerInfo d{name, LayerKind::kDense, {out}};
    d.param_a = add_param(name + ".weight", ParamRole::kDenseWeight, {in, out});
    d.param_b = add_param(name + ".bias", ParamRole::kDenseBias, {out});
    layers_.push_back(d);
  };
  add_dense("fc1", flat, kFc1);
  layers_.push_back({"act_fc1", LayerKind::kLeakyRelu, {kFc1}});
  LayerInfo drop1{"drop1", LayerKind::kDropout, {kFc1}};
  drop1.keep_prob = config_.kp1;
  layers_.push_back(drop1);
  add_dense("fc2", kFc1, kFc2);
  layers_.push_back({"act_fc2", LayerKind::kLeakyRelu, {kFc2}});
  LayerInfo drop2{"drop2", LayerKind::kDropout, {kFc2}};
  drop2.keep_prob = config_.kp2;
  layers_.push_back(drop2);
  std::size_t head_in = kFc2;
  if (config_.use_demographics) {
    head_in += kDemographicFeatures;
    layers_.push_back({"concat", LayerKind::kConcatDemographics, {head_in}});
  }
  add_dense("output", head_in, static_cast<std::size_t>(config_.num_classes));
}

template <typename T>
const Parameter<T>& BasicModel<T>::parameter(std::string_view name) const {
  const Parameter<T>* p = find_parameter(params_, name);
  require(p != nullptr, ErrorKind::kInvalidArgument,
          "model has no parameter '" + std::string(name) + "'");
  return *p;
}

template <typename T>
Parameter<T>& BasicModel<T>::parameter(std::string_view name) {
  return const_cast<Parameter<T>&>(std::as_const(*this).parameter(name));
}

template <typename T>
void BasicModel<T>::initialize(std::uint64_t seed) {
  // Parameters are drawn in declaration order from one stream, so the output
  // layer (declared last) never perturbs anything upstream.
  Rng rng(seed);
  for (auto& p : params_) {
    switch (p.role) {
      case ParamRole::kConvKernel:
      case ParamRole::kDenseWeight: {
        const Shape& s = p.value.shape();
        const std::size_t fan_in = p.value.numel() / s.back();
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (T& v : p.value.data()) v = static_cast<T>(rng.normal(0.0, std));
        break;
      }
      case ParamRole::kNormGamma:
        p.value.fill(T{1});
        break;
      default:
        p.value.fill(T{0});
    }
  }
  for (auto& s : norm_states_) s = ops::NormState::for_channels(s.running_mean.size());
}

template <typename T>
void BasicModel<T>::zero_parameters() {
  for (auto& p : params_) p.value.fill(T{0});
}

template <typename T>
BasicModel<T> build_model(const ModelConfig& config, Extents3 input_extents,
                          std::uint64_t seed) {
  BasicModel<T> m(config, input_extents);
  m.initialize(seed);
  return m;
}

template <typename T>
std::size_t parameter_count(const BasicModel<T>& model) {
  std::size_t n = 0;
  for (const auto& p : model.parameters()) n += p.value.numel();
  return n;
}

// ---------------------------------------------------------------------------
// Forward execution. The layer walk is written once and run either eagerly
// (EvalExec) or on a tape (GraphExec).

namespace {

template <typename T>
void check_inputs(const BasicModel<T>& model, const BasicTensor<T>& volumes,
                  const BasicTensor<T>* demographics) {
  const Extents3 e = model.input_extents();
  const Shape want{volumes.rank() > 0 ? volumes.dim(0) : 0, e.x, e.y, e.z, 1};
  require(volumes.rank() == 5 && volumes.shape() == want, ErrorKind::kShape,
          "model expects volumes [N," + std::to_string(e.x) + "," +
              std::to_string(e.y) + "," + std::to_string(e.z) + ",1], got " +
              shape_string(volumes.shape()));
  if (model.config().use_demographics) {
    require(demographics != nullptr, ErrorKind::kInvalidArgument,
            "model was built with demographics but none were supplied");
    require(demographics->shape() == Shape{volumes.dim(0), kDemographicFeatures},
            ErrorKind::kShape,
            "demographics must be [N,2], got " + shape_string(demographics->shape()));
  } else {
    require(demographics == nullptr, ErrorKind::kInvalidArgument,
            "model was built without demographics but some were supplied");
  }
}

template <typename T>
struct EvalExec {
  using Act = BasicTensor<T>;

  const ParameterList<T>& params;
  std::vector<ops::NormState>* states;  // null: inference statistics only
  bool training;
  Rng* rng;

  const BasicTensor<T>& p(int i) const { return params[static_cast<std::size_t>(i)].value; }
  static const Shape& shape(const Act& a) { return a.shape(); }

  Act conv(const Act& x, int k, int b) {
    return ops::conv3d(x, p(k), p(b), 1, ops::Padding::kSame);
  }
  Act batch_norm(const Act& x, int g, int b, ops::NormState& st) {
    if (training) return ops::batch_norm(x, p(g), p(b), st, true).output;
    ops::NormState copy = st;
    return ops::batch_norm(x, p(g), p(b), copy, false).output;
  }
  Act group_norm(const Act& x, std::size_t groups, int g, int b) {
    return ops::group_norm(x, groups, p(g), p(b)).output;
  }
  Act leaky(const Act& x, T alpha) { return ops::leaky_relu(x, alpha); }
  Act pool(const Act& x, std::size_t window, std::size_t stride) {
    return ops::maxpool3d(x, window, stride).output;
  }
  Act flatten(const Act& x) {
    const std::size_t n = x.dim(0);
    return x.reshaped(Shape{n, x.numel() / n});
  }
  Act dense(const Act& x, int w, int b) { return ops::dense(x, p(w), p(b)); }
  Act dropout(const Act& x, double keep) {
    if (!training || keep == 1.0) return x;
    return ops::dropout(x, keep, *rng, true);
  }
  Act concat(const Act& x, const BasicTensor<T>& demo) {
    const std::size_t n = x.dim(0), f = x.dim(1), d = demo.dim(1);
    Act out(Shape{n, f + d});
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(x.raw() + i * f, f, out.raw() + i * (f + d));
      std::copy_n(demo.raw() + i * d, d, out.raw() + i * (f + d) + f);
    }
    return out;
  }
};

template <typename T>
struct GraphExec {
  using Act = autograd::Var;

  autograd::Tape<T>& tape;
  std::vector<autograd::Var> params;
  bool training;
  Rng* rng;
  autograd::Var demo_var{};

  const Shape& shape(Act a) const { return tape.value(a).shape(); }
  autograd::Var p(int i) const { return params[static_cast<std::size_t>(i)]; }

  Act conv(Act x, int k, int b) { return autograd::conv3d(tape, x, p(k), p(b)); }
  Act batch_norm(Act x, int g, int b, ops::NormState& st) {
    return autograd::batch_norm(tape, x, p(g), p(b), st, training);
  }
  Act group_norm(Act x, std::size_t groups, int g, int b) {
    return autograd::group_norm(tape, x, groups, p(g), p(b));
  }
  Act leaky(Act x, T alpha) { return autograd::leaky_relu(tape, x, alpha); }
  Act pool(Act x, std::size_t window, std::size_t stride) {
    return autograd::maxpool3d(tape, x, window, stride);
  }
  Act flatten(Act x) { return autograd::flatten(tape, x); }
  Act dense(Act x, int w, int b) { return autograd::dense(tape, x, p(w), p(b)); }
  Act dropout(Act x, double keep) {
    if (!training || keep == 1.0) return x;
    return autograd::apply_mask(
        tape, x, ops::dropout_mask<T>(tape.value(x).shape(), keep, *rng));
  }
  Act concat(Act x, const BasicTensor<T>&) {
    return autograd::concat_columns(tape, x, demo_var);
  }
};

template <typename T, typename Exec>
typename Exec::Act run_layers(Exec& ex, const std::vector<LayerInfo>& layers,
                              std::vector<ops::NormState>* states,
                              typename Exec::Act x, const BasicTensor<T>* demo,
                              T alpha, std::vector<Shape>* trace) {
  for (const LayerInfo& l : layers) {
    switch (l.kind) {
      case LayerKind::kConv:
        x = ex.conv(x, l.param_a, l.param_b);
        break;
      case LayerKind::kBatchNorm:
        x = ex.batch_norm(x, l.param_a, l.param_b,
                          (*states)[static_cast<std::size_t>(l.norm_state)]);
        break;
      case LayerKind::kGroupNorm:
        x = ex.group_norm(x, l.groups, l.param_a, l.param_b);
        break;
      case LayerKind::kLeakyRelu:
        x = ex.leaky(x, alpha);
        break;
      case LayerKind::kMaxPool:
        x = ex.pool(x, l.window, l.stride);
        break;
      case LayerKind::kFlatten:
        x = ex.flatten(x);
        break;
      case LayerKind::kDense:
        x = ex.dense(x, l.param_a, l.param_b);
        break;
      case LayerKind::kDropout:
        x = ex.dropout(x, l.keep_prob);
        break;
      case LayerKind::kConcatDemographics:
        x = ex.concat(x, *demo);
        break;
    }
    if (trace) {
      const Shape& s = ex.shape(x);
      trace->emplace_back(s.begin() + 1, s.end());
    }
  }
  return x;
}

}  // namespace

template <typename T>
BasicTensor<T> forward(BasicModel<T>& model, const BasicTensor<T>& volumes,
                       const std::type_identity_t<BasicTensor<T>>* demographics, bool training,
                       Rng& rng, std::vector<Shape>* trace) {
  check_inputs(model, volumes, demographics);
  EvalExec<T> ex{model.parameters(), &model.norm_states(), training, &rng};
  return run_layers<T>(ex, model.layers(), &model.norm_states(), volumes,
                       demographics, static_cast<T>(model.config().alpha), trace);
}

template <typename T>
BasicTensor<T> infer(const BasicModel<T>& model, const BasicTensor<T>& volumes,
                     const std::type_identity_t<BasicTensor<T>>* demographics,
                     std::vector<Shape>* trace) {
  check_inputs(model, volumes, demographics);
  EvalExec<T> ex{model.parameters(), nullptr, false, nullptr};
  auto states = model.norm_states();
  return run_layers<T>(ex, model.layers(), &states, volumes, demographics,
                       static_cast<T>(model.config().alpha), trace);
}

template <typename T>
GraphForward forward_graph(autograd::Tape<T>& tape, BasicModel<T>& model,
                           const BasicTensor<T>& volumes,
                           const std::type_identity_t<BasicTensor<T>>* demographics, bool training,
                           Rng& rng) {
  check_inputs(model, volumes, demographics);
  GraphExec<T> ex{tape, {}, training, &rng};
  for (const auto& p : model.parameters()) ex.params.push_back(tape.leaf(p.value));
  autograd::Var x = tape.leaf(volumes, false);
  if (demographics) ex.demo_var = tape.leaf(*demographics, false);
  GraphForward out;
  out.logits = run_layers<T>(ex, model.layers(), &model.norm_states(), x,
                             demographics, static_cast<T>(model.config().alpha),
                             nullptr);
  out.params = ex.params;
  return out;
}

template <typename T>
LossAndGrads<T> loss_and_grads(BasicModel<T>& model,
                               const BasicTensor<T>& volumes,
                               const std::type_identity_t<BasicTensor<T>>* demographics,
                               std::span<const int> labels, bool training,
                               Rng& rng) {
  autograd::Tape<T> tape;
  GraphForward fwd = forward_graph(tape, model, volumes, demographics, training, rng);
  auto ce = autograd::softmax_cross_entropy(tape, fwd.logits, labels);
  LossAndGrads<T> r;
  r.loss = tape.value(ce.loss)[0];
  r.probs = std::move(ce.probs);
  tape.backward(ce.loss);
  const auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    r.grads.emplace(params[i].name, tape.grad(fwd.params[i]));
  return r;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kCheckpointFormat = "voxdx-checkpoint-1";

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt_double(v[i]);
  }
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string file_name_for(const std::string& tensor_name) { return tensor_name + ".mvol"; }

}  // namespace

void save_checkpoint(const Model& model, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  const ModelConfig& c = model.config();
  std::ostringstream o;
  o << "format = " << kCheckpointFormat << '\n';
  o << "variant = " << to_string(c.variant) << '\n';
  o << "norm = " << to_string(c.norm) << '\n';
  o << "use_demographics = " << (c.use_demographics ? 1 : 0) << '\n';
  o << "alpha = " << fmt_double(c.alpha) << '\n';
  o << "rc = " << fmt_double(c.rc) << '\n';
  o << "kp1 = " << fmt_double(c.kp1) << '\n';
  o << "kp2 = " << fmt_double(c.kp2) << '\n';
  o << "num_classes = " << c.num_classes << '\n';
  const Extents3 e = model.input_extents();
  o << "extents = " << e.x << ',' << e.y << ',' << e.z << '\n';
  o << "age_mean = " << fmt_double(model.encoder().age_mean) << '\n';
  o << "age_std = " << fmt_double(model.encoder().age_std) << '\n';
  for (std::size_t i = 0; i < model.norm_states().size(); ++i) {
    const auto& s = model.norm_states()[i];
    o << "norm_state." << i << ".mean = " << join_doubles(s.running_mean) << '\n';
    o << "norm_state." << i << ".var = " << join_doubles(s.running_var) << '\n';
  }
  for (const auto& p : model.parameters()) {
    std::string dims;
    for (std::size_t k = 0; k < p.value.rank(); ++k) {
      if (k) dims += ',';
      dims += std::to_string(p.value.dim(k));
    }
    o << "param." << p.name << " = " << dims << ' ' << file_name_for(p.name) << '\n';
    Volume v(Extents3{1, 1, static_cast<std::uint32_t>(p.value.numel())});
    std::copy(p.value.data().begin(), p.value.data().end(), v.voxels.begin());
    save_volume(v, dir / file_name_for(p.name));
  }
  std::ofstream out(dir / "checkpoint.cfg", std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo,
          "cannot write " + (dir / "checkpoint.cfg").string());
  out << o.str();
}

Model load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "checkpoint.cfg");
  require(static_cast<bool>(in), ErrorKind::kIo,
          "cannot open checkpoint " + (dir / "checkpoint.cfg").string());
  std::map<std::string, std::string> kv;
  std::vector<std::string> order;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::kData, "bad checkpoint line: " + line);
    const std::string key = trim(line.substr(0, eq));
    kv[key] = trim(line.substr(eq + 1));
    order.push_back(key);
  }
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    require(it != kv.end(), ErrorKind::kData, "checkpoint is missing '" + k + "'");
    return it->second;
  };
  require(get("format") == kCheckpointFormat, ErrorKind::kData,
          "unsupported checkpoint format '" + get("format") + "'");
  ModelConfig c;
  try {
    c.variant = parse_variant(get("variant"));
    c.norm = parse_norm(get("norm"));
    c.use_demographics = get("use_demographics") == "1";
    c.alpha = std::stod(get("alpha"));
    c.rc = std::stod(get("rc"));
    c.kp1 = std::stod(get("kp1"));
    c.kp2 = std::stod(get("kp2"));
    c.num_classes = std::stoi(get("num_classes"));
  } catch (const std::logic_error& e) {
    fail(ErrorKind::kData, std::string("bad checkpoint value: ") + e.what());
  }
  const auto ext = split(get("extents"), ',');
  require(ext.size() == 3, ErrorKind::kData, "bad checkpoint extents");
  Extents3 e{static_cast<std::uint32_t>(std::stoul(ext[0])),
             static_cast<std::uint32_t>(std::stoul(ext[1])),
             static_cast<std::uint32_t>(std::stoul(ext[2]))};
  Model m(c, e);
  m.encoder().age_mean = std::stod(get("age_mean"));
  m.encoder().age_std = std::stod(get("age_std"));
  for (std::size_t i = 0; i < m.norm_states().size(); ++i) {
    auto& s = m.norm_states()[i];
    const auto mean = split(get("norm_state." + std::to_string(i) + ".mean"), ',');
    const auto var = split(get("norm_state." + std::to_string(i) + ".var"), ',');
    require(mean.size() == s.running_mean.size() && var.size() == s.running_var.size(),
            ErrorKind::kData, "norm state " + std::to_string(i) + " has wrong width");
    for (std::size_t k = 0; k < mean.size(); ++k) {
      s.running_mean[k] = std::stod(mean[k]);
      s.running_var[k] = std::stod(var[k]);
    }
  }
  for (auto& p : m.parameters()) {
    const std::string& entry = get("param." + p.name);
    const auto sp = entry.find(' ');
    require(sp != std::string::npos, ErrorKind::kData, "bad param entry for " + p.name);
    Shape shape;
    for (const auto& d : split(entry.substr(0, sp), ',')) shape.push_back(std::stoul(d));
    require(shape == p.value.shape(), ErrorKind::kShape,
            "checkpoint tensor '" + p.name + "' has shape " + shape_string(shape) +
                ", architecture expects " + shape_string(p.value.shape()));
    const Volume v = load_volume(dir / trim(entry.substr(sp + 1)));
    require(v.voxels.size() == p.value.numel(), ErrorKind::kData,
            "checkpoint tensor '" + p.name + "' has the wrong element count");
    std::copy(v.voxels.begin(), v.voxels.end(), p.value.data().begin());
  }
  return m;
}

// ---------------------------------------------------------------------------

#define VOXDX_INSTANTIATE_MODEL(T)                                             \
  template class BasicModel<T>;                                                \
  template BasicModel<T> build_model<T>(const ModelConfig&, Extents3,          \
                                        std::uint64_t);                        \
  template std::size_t parameter_count(const BasicModel<T>&);                  \
  template BasicTensor<T> forward(BasicModel<T>&, const BasicTensor<T>&,       \
                                  const BasicTensor<T>*, bool, Rng&,           \
                                  std::vector<Shape>*);                        \
  template BasicTensor<T> infer(const BasicModel<T>&, const BasicTensor<T>&,   \
                                const BasicTensor<T>*, std::vector<Shape>*);   \
  template GraphForward forward_graph(autograd::Tape<T>&, BasicModel<T>&,      \
                                      const BasicTensor<T>&,                   \
                                      const BasicTensor<T>*, bool, Rng&);      \
  template LossAndGrads<T> loss_and_grads(BasicModel<T>&,                      \
                                          const BasicTensor<T>&,               \
                                          const BasicTensor<T>*,               \
                                          std::span<const int>, bool, Rng&);

VOXDX_INSTANTIATE_MODEL(float)
VOXDX_INSTANTIATE_MODEL(double)

#undef VOXDX_INSTANTIATE_MODEL

}  // namespace voxdx
