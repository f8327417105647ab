#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svdp/benchmark.hpp"
#include "svdp/errors.hpp"
#include "svdp/loss.hpp"
#include "svdp/metrics.hpp"
#include "svdp/model.hpp"
#include "svdp/optimizer.hpp"
#include "svdp/placement.hpp"
#include "svdp/prompts.hpp"
#include "svdp/pseudo_labels.hpp"
#include "svdp/uncertainty.hpp"
#include "svdp/updating.hpp"

namespace svdp {

enum class Mode { tta, ctta };

inline const char* to_string(Mode m) { return m == Mode::tta ? "tta" : "ctta"; }
inline Mode parse_mode(const std::string& s) {
  if (s == "tta") return Mode::tta;
  if (s == "ctta") return Mode::ctta;
  throw ConfigError("unknown mode '" + s + "' (expected tta|ctta)");
}

/// How prompt pixels are chosen for each sample.
enum class Placement { uncertainty, random, patch };

inline const char* to_string(Placement p) {
  return p == Placement::uncertainty ? "uncertainty" : p == Placement::random ? "random" : "patch";
}

inline const std::vector<double> kDefaultScales = {0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};

struct AdaptationConfig {
  Task task = Task::segmentation;
  int classes = kSceneClasses;
  int m = 10;
  double density = 1e-3;
  double alpha = 0.999;
  double theta = 0.01;
  double beta_floor = 0.9;
  double tau = 0.69;
  double lr = 1e-4;
  std::optional<double> prompt_lr;  // defaults to lr
  std::vector<double> scales = kDefaultScales;
  Mode mode = Mode::ctta;
  int rounds = 3;
  std::uint64_t seed = 0;
  UncertaintyMethod uncertainty_method = UncertaintyMethod::mc_dropout;
  std::vector<double> uncertainty_scales = {0.5, 1.0, 2.0};
  int replace_period = 1;
  LossNorm loss_norm = LossNorm::full;
  TrainScope train_scope = TrainScope::all;
  // ablation switches
  bool teacher_student = true;
  bool prompts = true;
  bool dpp = true;
  bool dpu = true;
  std::optional<double> fixed_beta;
  bool patch_prompt = false;  // one fixed square patch instead of per-sample placement
  double dropout_rate = 0.1;
  double depth_scale = 10.0;
  int samples_per_domain = 0;  // 0 = every sample in the stream

  double effective_prompt_lr() const { return prompt_lr.value_or(lr); }
  int effective_rounds() const { return mode == Mode::tta ? 1 : rounds; }

  NetworkSpec network_spec() const {
    NetworkSpec s;
    s.task = task;
    s.classes = classes;
    s.dropout_rate = dropout_rate;
    s.depth_scale = depth_scale;
    return s;
  }

  void validate() const {
    auto need = [](bool ok, const std::string& msg) {
      if (!ok) throw ConfigError(msg);
    };
    need(m >= 2, "m must be at least 2");
    need(density > 0.0 && density <= 1.0, "density must lie in (0,1]");
    need(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0,1]");
    need(theta > 0.0, "theta must be positive");
    need(beta_floor >= 0.0 && beta_floor < 1.0, "beta_floor must lie in [0,1)");
    need(tau >= 0.0 && tau <= 1.0, "tau must lie in [0,1]");
    need(lr >= 0.0 && std::isfinite(lr), "lr must be a finite non-negative number");
    need(!prompt_lr || (*prompt_lr >= 0.0 && std::isfinite(*prompt_lr)),
         "prompt_lr must be a finite non-negative number");
    need(!scales.empty(), "scales must not be empty");
    for (double s : scales) need(s > 0.0, "scales must be positive");
    for (double s : uncertainty_scales) need(s > 0.0, "uncertainty_scales must be positive");
    need(uncertainty_method != UncertaintyMethod::resolution_aug || uncertainty_scales.size() >= 2,
         "resolution_aug uncertainty needs at least 2 uncertainty_scales");
    need(rounds >= 1, "rounds must be at least 1");
    need(replace_period >= 1, "replace_period must be at least 1");
    need(!fixed_beta || (*fixed_beta >= 0.0 && *fixed_beta <= 1.0), "fixed_beta must lie in [0,1]");
    need(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must lie in [0,1)");
    need(depth_scale > 0.0, "depth_scale must be positive");
    need(samples_per_domain >= 0, "samples_per_domain must be >= 0");
    need(task == Task::depth || classes >= 2, "classes must be at least 2");
  }
};

/// One line of the JSON-lines step log.
struct StepRecord {
  std::uint64_t t = 0;
  int round = 0;
  std::string domain;
  std::size_t sample = 0;
  double uncertainty = 0.0;  // image-level, NaN when not computed
  double beta = 0.0;
  double prompt_norm = 0.0;
  double teacher_student_distance = 0.0;
  double loss = 0.0;
  std::size_t valid_pixels = 0;
  std::size_t active_prompts = 0;
  std::size_t prompt_budget = 0;
  bool skipped = false;
  std::string skip_reason;
};

/// What the adapter returns for one observed image.
template <typename T>
struct Observation {
  PredictionOutput<T> prediction;  // teacher prediction after the update
  StepRecord record;
};

/// Arg-max class per pixel.
template <typename T>
LabelMap predict_labels(const PredictionOutput<T>& out) {
  const int c_n = out.logits.channels();
  const std::size_t n = out.logits.plane_size();
  LabelMap labels(out.height(), out.width(), 0);
  for (std::size_t p = 0; p < n; ++p) {
    int best = 0;
    for (int c = 1; c < c_n; ++c) {
      if (out.logits[c * n + p] > out.logits[static_cast<std::size_t>(best) * n + p]) best = c;
    }
    labels[p] = best;
  }
  return labels;
}

template <typename T>
Grid<T> predict_depth(const PredictionOutput<T>& out) {
  Grid<T> d(out.height(), out.width());
  std::copy(out.depth.data().begin(), out.depth.data().end(), d.data().begin());
  return d;
}

/// The per-stream adaptation state machine. It holds the network, the
/// student/teacher pair, the prompt store and the optimizer; it never sees
/// ground truth or source images.
template <typename T>
class Adapter {
 public:
  Adapter(const AdaptationConfig& cfg, const ParamSet<T>& source)
      : cfg_(cfg), net_(cfg.network_spec()), source_(source) {
    cfg_.validate();
    net_.validate(source_);
    reset();
  }

  const AdaptationConfig& config() const { return cfg_; }
  const Network<T>& network() const { return net_; }
  const ModelPair<T>& pair() const { return pair_; }
  const std::optional<PromptState<T>>& prompts() const { return prompts_; }
  std::uint64_t steps() const { return t_; }

  /// Back to the source weights, zero prompts and fresh optimizer moments.
  void reset() {
    pair_ = ModelPair<T>::from_source(source_, cfg_.teacher_student ? cfg_.alpha : 1.0);
    prompts_.reset();
    adam_ = Adam<T>();
  }

  /// Runs the full per-sample pipeline on one image.
  Observation<T> observe(const Tensor3<T>& image) {
    StepRecord rec;
    rec.t = t_;
    rec.uncertainty = std::nan("");
    if (cfg_.prompts && !prompts_) init_prompts(image.height(), image.width());

    // (1) teacher uncertainty on the previous prompts' warp
    std::optional<UncertaintyReport<T>> unc;
    const bool need_unc =
        cfg_.prompts && ((placement() == Placement::uncertainty && placement_due()) ||
                         (cfg_.dpu && !cfg_.fixed_beta));
    if (need_unc) {
      const Tensor3<T> prev = warp(image, *prompts_);
      unc = cfg_.uncertainty_method == UncertaintyMethod::mc_dropout
                ? estimate_pixel(net_, pair_.teacher, prev, cfg_.m, mix_seed(cfg_.seed, t_))
                : estimate_pixel_resaug(net_, pair_.teacher, prev, cfg_.uncertainty_scales);
      rec.uncertainty = unc->image_value;
    }

    // (2) placement
    if (cfg_.prompts && placement_due()) {
      Mask mask;
      switch (placement()) {
        case Placement::uncertainty: mask = place(unc->pixel_map, cfg_.density).mask; break;
        case Placement::random:
          mask = place_random(image.height(), image.width(), cfg_.density,
                              mix_seed(cfg_.seed ^ 0x9e3779b97f4a7c15ULL, t_));
          break;
        case Placement::patch: mask = place_patch(image.height(), image.width(), cfg_.density); break;
      }
      prompts_ = reseat(*prompts_, mask);
    }

    // (3)+(4) warp and teacher pseudo-label
    const Tensor3<T> warped = cfg_.prompts ? warp(image, *prompts_) : image;
    const auto pseudo = generate(net_, pair_.teacher, warped, cfg_.scales, cfg_.tau);

    // (5) student step
    StepConfig sc;
    sc.lr = cfg_.lr;
    sc.prompt_lr = cfg_.effective_prompt_lr();
    sc.scope = cfg_.teacher_student ? cfg_.train_scope : TrainScope::none;
    sc.loss_norm = cfg_.loss_norm;
    sc.train_prompts = cfg_.prompts;
    const std::optional<PromptState<T>> before = prompts_;
    auto step = adapt_step(net_, pair_, before ? &*before : nullptr, image, pseudo, sc, adam_);
    rec.loss = step.loss.value;
    rec.valid_pixels = step.loss.valid_pixel_count;
    rec.skipped = step.skipped;
    rec.skip_reason = step.skip_reason;
    if (!step.skipped) {
      pair_.student = std::move(step.student);
      // (6) prompt EMA
      if (cfg_.prompts) {
        const double beta = prompt_beta(unc);
        rec.beta = beta;
        prompts_ = dpu_update(*before, step.prompts, beta);
      }
    } else if (cfg_.prompts) {
      rec.beta = 1.0;
    }
    if (cfg_.prompts) prompts_->set_step(t_ + 1);

    // (7) teacher EMA
    if (cfg_.teacher_student) ema_teacher(pair_);

    // (8) teacher prediction on the current warp
    const Tensor3<T> final_input = cfg_.prompts ? warp(image, *prompts_) : image;
    Observation<T> obs{net_.forward(pair_.teacher, final_input, false, 0), {}};
    if (cfg_.prompts) {
      rec.prompt_norm = prompts_->active_norm();
      rec.active_prompts = prompts_->active_count();
      rec.prompt_budget = prompts_->budget();
    }
    rec.teacher_student_distance = l2_distance(pair_.teacher, pair_.student);
    obs.record = std::move(rec);
    ++t_;
    return obs;
  }

 private:
  Placement placement() const {
    if (cfg_.patch_prompt) return Placement::patch;
    return cfg_.dpp ? Placement::uncertainty : Placement::random;
  }

  bool placement_due() const {
    return t_ % static_cast<std::uint64_t>(cfg_.replace_period) == 0;
  }

  void init_prompts(int h, int w) {
    if (prompt_budget(h, w, cfg_.density) == 0) {
      throw ConfigError("density " + std::to_string(cfg_.density) + " selects zero prompt pixels at " +
                        std::to_string(h) + "x" + std::to_string(w));
    }
    prompts_.emplace(h, w, cfg_.density);
  }

  double prompt_beta(const std::optional<UncertaintyReport<T>>& unc) const {
    if (cfg_.fixed_beta) return *cfg_.fixed_beta;
    if (!cfg_.dpu) return 0.0;
    return beta_for(unc->image_value, DpuConfig{cfg_.theta, cfg_.beta_floor});
  }

  AdaptationConfig cfg_;
  Network<T> net_;
  ParamSet<T> source_;
  ModelPair<T> pair_;
  std::optional<PromptState<T>> prompts_;
  Adam<T> adam_;
  std::uint64_t t_ = 0;
};

/// Metrics of one (round, domain) cell of a run.
struct CellMetrics {
  std::string domain;
  int round = 0;
  std::size_t samples = 0;
  std::map<std::string, double> values;  // miou/macc/pixel_accuracy or delta1/delta2/abs_rel/rmse
  std::vector<double> iou;               // per class, segmentation only
};

/// Accumulates predictions against ground truth for one cell.
class CellAccumulator {
 public:
  CellAccumulator(Task task, int classes) : task_(task), cm_(std::max(classes, 1)) {}

  template <typename T>
  void add(const PredictionOutput<T>& pred, const GroundTruth<T>& truth) {
    if (task_ == Task::segmentation) {
      cm_.add(predict_labels(pred), truth.labels);
    } else {
      depth_.add(predict_depth(pred), truth.depth);
    }
    ++n_;
  }

  CellMetrics result(const std::string& domain, int round) const {
    CellMetrics c{domain, round, n_, {}, {}};
    if (task_ == Task::segmentation) {
      const auto m = cm_.metrics();
      c.values = {{"miou", m.miou}, {"macc", m.macc}, {"pixel_accuracy", m.pixel_accuracy}};
      c.iou = m.iou;
    } else {
      const auto m = depth_.metrics();
      c.values = {{"delta1", m.delta1}, {"delta2", m.delta2}, {"abs_rel", m.abs_rel}, {"rmse", m.rmse}};
    }
    return c;
  }

 private:
  Task task_;
  ConfusionMatrix cm_;
  DepthAccumulator depth_;
  std::size_t n_ = 0;
};

inline const char* primary_metric(Task task) { return task == Task::segmentation ? "miou" : "delta1"; }

struct RunResult {
  Task task = Task::segmentation;
  Mode mode = Mode::ctta;
  std::string method = "svdp";
  std::uint64_t seed = 0;
  std::vector<std::string> domains;
  std::vector<std::vector<CellMetrics>> cells;  // [round][domain]
  std::vector<std::map<std::string, double>> round_means;
  std::map<std::string, double> overall;
  std::vector<CellMetrics> source_cells;  // frozen source model, one per domain
  std::map<std::string, double> source_mean;
  double gain = 0.0;  // overall primary metric minus the source's
  std::size_t adapt_steps = 0;
  std::size_t skipped_steps = 0;
  double trainable_fraction = 0.0;  // largest seen over the run
  std::vector<std::string> truncation;
  std::vector<StepRecord> steps;

  std::size_t cell_count() const {
    std::size_t n = 0;
    for (const auto& r : cells) n += r.size();
    return n;
  }
  double primary() const { return overall.at(primary_metric(task)); }
};

namespace detail {

inline std::map<std::string, double> mean_values(const std::vector<const CellMetrics*>& cells) {
  std::map<std::string, double> out;
  if (cells.empty()) return out;
  for (const auto* c : cells) {
    for (const auto& [k, v] : c->values) out[k] += v;
  }
  for (auto& [_, v] : out) v /= static_cast<double>(cells.size());
  return out;
}

template <typename T>
struct DomainStream {
  std::string tag;
  std::vector<const StreamSample<T>*> samples;
};

// Groups the stream by domain in order of first appearance and applies the
// per-domain sample limit, noting any domain that runs short.
template <typename T>
std::vector<DomainStream<T>> split_domains(const std::vector<StreamSample<T>>& stream, int limit,
                                           std::vector<std::string>& truncation) {
  std::vector<DomainStream<T>> out;
  for (const auto& s : stream) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& d) { return d.tag == s.domain_tag; });
    if (it == out.end()) {
      out.push_back({s.domain_tag, {}});
      it = std::prev(out.end());
    }
    if (limit == 0 || static_cast<int>(it->samples.size()) < limit) it->samples.push_back(&s);
  }
  if (limit > 0) {
    for (const auto& d : out) {
      if (static_cast<int>(d.samples.size()) < limit) {
        truncation.push_back("domain " + d.tag + ": stream exhausted after " +
                             std::to_string(d.samples.size()) + " of " + std::to_string(limit) +
                             " samples");
      }
    }
  }
  return out;
}

inline void finish(RunResult& r) {
  std::vector<const CellMetrics*> all;
  r.round_means.clear();
  for (const auto& round : r.cells) {
    std::vector<const CellMetrics*> ptrs;
    for (const auto& c : round) {
      ptrs.push_back(&c);
      all.push_back(&c);
    }
    r.round_means.push_back(mean_values(ptrs));
  }
  r.overall = mean_values(all);
  std::vector<const CellMetrics*> src;
  for (const auto& c : r.source_cells) src.push_back(&c);
  r.source_mean = mean_values(src);
  // Mean per-cell difference to the source cell of the same domain; equal to
  // overall - source mean, but exactly zero when every cell matches the source.
  const char* key = primary_metric(r.task);
  double diff = 0.0;
  std::size_t n = 0;
  for (const auto& round : r.cells) {
    for (std::size_t d = 0; d < round.size() && d < r.source_cells.size(); ++d) {
      diff += round[d].values.at(key) - r.source_cells[d].values.at(key);
      ++n;
    }
  }
  r.gain = n ? diff / static_cast<double>(n) : 0.0;
}

template <typename T>
std::vector<CellMetrics> source_cells(const Network<T>& net, const ParamSet<T>& source,
                                      const std::vector<DomainStream<T>>& domains, int classes) {
  std::vector<CellMetrics> out;
  for (const auto& d : domains) {
    CellAccumulator acc(net.task(), classes);
    for (const auto* s : d.samples) acc.add(net.forward(source, s->image, false, 0), s->truth);
    out.push_back(acc.result(d.tag, 0));
  }
  return out;
}

template <typename T>
RunResult start_result(const AdaptationConfig& cfg, const std::string& method,
                       const std::vector<StreamSample<T>>& stream, std::vector<DomainStream<T>>& domains,
                       const Network<T>& net, const ParamSet<T>& source) {
  RunResult r;
  r.task = cfg.task;
  r.mode = cfg.mode;
  r.method = method;
  r.seed = cfg.seed;
  domains = split_domains(stream, cfg.samples_per_domain, r.truncation);
  for (const auto& d : domains) r.domains.push_back(d.tag);
  r.source_cells = source_cells(net, source, domains, cfg.classes);
  return r;
}

}  // namespace detail

/// Adapts over the stream: one pass per round over every domain in stream
/// order. TTA resets to the source model at each domain; CTTA carries state
/// across domains and rounds.
template <typename T>
RunResult run(const ParamSet<T>& source, const std::vector<StreamSample<T>>& stream,
              const AdaptationConfig& cfg, const std::string& method = "svdp") {
  Adapter<T> adapter(cfg, source);
  std::vector<detail::DomainStream<T>> domains;
  RunResult r = detail::start_result(cfg, method, stream, domains, adapter.network(), source);
  const int rounds = cfg.effective_rounds();
  for (int round = 0; round < rounds; ++round) {
    r.cells.emplace_back();
    for (const auto& d : domains) {
      if (cfg.mode == Mode::tta) adapter.reset();
      CellAccumulator acc(cfg.task, cfg.classes);
      for (std::size_t i = 0; i < d.samples.size(); ++i) {
        auto obs = adapter.observe(d.samples[i]->image);
        acc.add(obs.prediction, d.samples[i]->truth);
        obs.record.round = round;
        obs.record.domain = d.tag;
        obs.record.sample = d.samples[i]->index;
        if (obs.record.skipped) {
          ++r.skipped_steps;
        } else {
          ++r.adapt_steps;
        }
        if (adapter.prompts()) {
          r.trainable_fraction =
              std::max(r.trainable_fraction, trainable_fraction(*adapter.prompts(), source));
        }
        r.steps.push_back(std::move(obs.record));
      }
      r.cells.back().push_back(acc.result(d.tag, round));
    }
  }
  detail::finish(r);
  return r;
}

namespace detail {

// Entropy minimisation on the normalization affine parameters, one Adam step per
// sample, predicting with the updated weights.
template <typename T>
RunResult run_entropy_min(const ParamSet<T>& source, const std::vector<StreamSample<T>>& stream,
                          const AdaptationConfig& cfg) {
  if (cfg.task != Task::segmentation) throw ConfigError("entropy_min supports the seg task only");
  Network<T> net(cfg.network_spec());
  net.validate(source);
  std::vector<DomainStream<T>> domains;
  RunResult r = start_result(cfg, "entropy_min", stream, domains, net, source);
  ParamSet<T> params = source;
  Adam<T> adam;
  std::uint64_t t = 0;
  for (int round = 0; round < cfg.effective_rounds(); ++round) {
    r.cells.emplace_back();
    for (const auto& d : domains) {
      if (cfg.mode == Mode::tta) {
        params = source;
        adam = Adam<T>();
      }
      CellAccumulator acc(cfg.task, cfg.classes);
      for (const auto* s : d.samples) {
        StepRecord rec;
        rec.t = t++;
        rec.round = round;
        rec.domain = d.tag;
        rec.sample = s->index;
        rec.uncertainty = std::nan("");
        ForwardTrace<T> trace;
        const auto out = net.forward(params, s->image, false, 0, trace);
        const auto loss = entropy_loss(out);
        rec.loss = loss.value;
        rec.valid_pixels = loss.valid_pixel_count;
        auto grads = net.backward(params, trace, loss.grad, false);
        if (std::isfinite(loss.value) && grads.params.all_finite()) {
          adam.step(params, grads.params, [](const std::string& n) { return is_norm_param(n); }, cfg.lr);
          ++r.adapt_steps;
        } else {
          rec.skipped = true;
          rec.skip_reason = "non-finite loss or gradient";
          ++r.skipped_steps;
        }
        acc.add(net.forward(params, s->image, false, 0), s->truth);
        rec.teacher_student_distance = l2_distance(params, source);
        r.steps.push_back(std::move(rec));
      }
      r.cells.back().push_back(acc.result(d.tag, round));
    }
  }
  finish(r);
  return r;
}

}  // namespace detail

inline const std::vector<std::string> kBaselines = {"source", "entropy_min", "dense_prompt"};

/// Simplified comparison methods:
///   source       - frozen source model, no updates
///   entropy_min  - per-sample entropy minimisation of the norm affine parameters
///   dense_prompt - the prompt pipeline with one contiguous square patch of the
///                  same budget at a fixed location, no uncertainty placement or DPU
template <typename T>
RunResult run_baseline(const std::string& name, const ParamSet<T>& source,
                       const std::vector<StreamSample<T>>& stream, const AdaptationConfig& cfg) {
  cfg.validate();
  if (name == "source") {
    Network<T> net(cfg.network_spec());
    net.validate(source);
    std::vector<detail::DomainStream<T>> domains;
    RunResult r = detail::start_result(cfg, "source", stream, domains, net, source);
    for (int round = 0; round < cfg.effective_rounds(); ++round) {
      r.cells.emplace_back(r.source_cells);
      for (auto& c : r.cells.back()) c.round = round;
    }
    detail::finish(r);
    return r;
  }
  if (name == "entropy_min") return detail::run_entropy_min(source, stream, cfg);
  if (name == "dense_prompt") {
    AdaptationConfig c = cfg;
    c.prompts = true;
    c.patch_prompt = true;
    c.dpp = false;
    c.dpu = false;
    c.fixed_beta.reset();
    return run(source, stream, c, "dense_prompt");
  }
  throw ConfigError("unknown baseline '" + name + "' (expected source|entropy_min|dense_prompt)");
}

inline nlohmann::ordered_json cell_json(const CellMetrics& c) {
  nlohmann::ordered_json j;
  j["domain"] = c.domain;
  j["round"] = c.round;
  j["samples"] = c.samples;
  for (const auto& [k, v] : c.values) j[k] = v;
  if (!c.iou.empty()) j["iou"] = c.iou;  // NaN entries serialize as null
  return j;
}

/// Metrics document; deterministic for a fixed config and seed.
inline nlohmann::ordered_json to_json(const RunResult& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["task"] = to_string(r.task);
  j["mode"] = to_string(r.mode);
  j["seed"] = r.seed;
  j["primary_metric"] = primary_metric(r.task);
  j["domains"] = r.domains;
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& round : r.cells) {
    for (const auto& c : round) j["cells"].push_back(cell_json(c));
  }
  j["round_means"] = nlohmann::ordered_json::array();
  for (const auto& m : r.round_means) j["round_means"].push_back(m);
  j["overall"] = r.overall;
  j["source"]["per_domain"] = nlohmann::ordered_json::array();
  for (const auto& c : r.source_cells) j["source"]["per_domain"].push_back(cell_json(c));
  j["source"]["mean"] = r.source_mean;
  j["gain_vs_source"] = r.gain;
  j["adapt_steps"] = r.adapt_steps;
  j["skipped_steps"] = r.skipped_steps;
  j["trainable_fraction"] = r.trainable_fraction;
  j["truncation"] = r.truncation;
  return j;
}

inline nlohmann::ordered_json to_json(const StepRecord& s) {
  nlohmann::ordered_json j;
  j["t"] = s.t;
  j["round"] = s.round;
  j["domain"] = s.domain;
  j["sample"] = s.sample;
  j["uncertainty"] = s.uncertainty;
  j["beta"] = s.beta;
  j["prompt_norm"] = s.prompt_norm;
  j["teacher_student_l2"] = s.teacher_student_distance;
  j["loss"] = s.loss;
  j["valid_pixels"] = s.valid_pixels;
  j["active_prompts"] = s.active_prompts;
  j["prompt_budget"] = s.prompt_budget;
  j["skipped"] = s.skipped;
  if (s.skipped) j["skip_reason"] = s.skip_reason;
  return j;
}

inline void write_step_log(const RunResult& r, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write step log " + path);
  for (const auto& s : r.steps) f << to_json(s).dump() << '\n';
  if (!f) throw IoError("failed writing step log " + path);
}

}  // namespace svdp
