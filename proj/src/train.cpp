#include "vxseg/train.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <optional>

#include "vxseg/errors.hpp"
#include "vxseg/kernels.hpp"
#include "vxseg/loss.hpp"
#include "vxseg/ops.hpp"

namespace vxseg {

void JointLossConfig::validate(const ModelConfig& model) const {
  for (double l : {lambda_direct, lambda_mask, lambda_feat}) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("loss weights must be finite and >= 0");
  }
  if (lambda_direct == 0.0 && lambda_mask == 0.0 && lambda_feat == 0.0) {
    throw ConfigError("at least one loss weight must be positive");
  }
  if (!class_weights.empty()) {
    if (static_cast<int>(class_weights.size()) != model.classes) {
      throw ConfigError("expected " + std::to_string(model.classes) + " class weights, got " +
                        std::to_string(class_weights.size()));
    }
    bool any = false;
    for (double w : class_weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("class weights must be finite and >= 0");
      any = any || w > 0.0;
    }
    if (!any) throw ConfigError("class weights must not all be zero");
  }
  if (r < 1) throw ConfigError("thickness factor r must be >= 1");
  if (lambda_mask > 0.0 && model.geometry.patch % r != 0) {
    throw ConfigError("mask consistency needs the patch size (" +
                      std::to_string(model.geometry.patch) + ") to be divisible by r = " +
                      std::to_string(r));
  }
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(fg_fraction >= 0.0 && fg_fraction <= 1.0)) throw ConfigError("fg_fraction must lie in [0, 1]");
  if (!(adam.learning_rate > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
    throw ConfigError("invalid optimizer hyperparameters");
  }
  if (feature_layer < -1 || feature_layer >= model.layers) {
    throw ConfigError("feature_layer must be -1 or a valid layer index");
  }
}

JointObjective::JointObjective(std::span<const ThinThickPair> pairs, const ModelConfig& model,
                               const JointLossConfig& loss)
    : model_(model), loss_(loss) {
  model_.validate();
  loss_.validate(model_);
  if (pairs.empty()) throw ConfigError("training needs at least one thin/thick pair");
  if (model_.geometry.channels != 1) throw ConfigError("training expects single-channel volumes");
  std::vector<const LabelVolume*> thick_labels;
  for (const auto& p : pairs) {
    if (p.r != loss_.r) {
      throw ConfigError("pair built with r = " + std::to_string(p.r) + " but config has r = " +
                        std::to_string(loss_.r));
    }
    Volume thick = replicate_z(p.thick, loss_.r);
    LabelVolume labels = replicate_z(p.thick_labels, loss_.r);
    if (!(thick.dims() == p.thin.dims()) || !(labels.dims() == p.thin.dims())) {
      throw DimensionError("thick volume replicated to " + dims_string(thick.dims()) +
                           " does not match thin " + dims_string(p.thin.dims()));
    }
    validate_labels(labels, model_.classes);
    BlockSampler sampler(labels, model_.geometry);
    data_.push_back({p.thin, std::move(thick), std::move(labels), std::move(sampler)});
    thick_labels.push_back(&p.thick_labels);
  }
  weights_ = loss_.class_weights.empty() ? inverse_frequency_weights(thick_labels, model_.classes)
                                         : loss_.class_weights;
}

std::vector<BatchItem> JointObjective::sample(CounterRng& rng) const {
  std::vector<BatchItem> batch;
  batch.reserve(static_cast<std::size_t>(loss_.batch_size));
  for (int b = 0; b < loss_.batch_size; ++b) {
    const auto pair = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(data_.size()) - 1));
    batch.push_back({pair, data_[pair].sampler.draw(rng, loss_.fg_fraction)});
  }
  return batch;
}

LossReport JointObjective::block_terms(const ModelParams& params, const BatchItem& item,
                                       double batch_scale, std::vector<Tensor>* gradients) const {
  const PairData& pd = data_.at(item.pair);
  const auto& g = model_.geometry;
  const bool need_thick = loss_.lambda_direct > 0.0 || loss_.lambda_feat > 0.0;
  const bool need_thin = loss_.lambda_mask > 0.0 || loss_.lambda_feat > 0.0;

  Tape tape;
  BoundModel m = bind(tape, params, gradients != nullptr);
  const auto labels = extract_label_patch(pd.labels, center_patch_origin(item.origin, g), g.patch);
  const auto feature_of = [&](const BlockForward& f) {
    return loss_.feature_layer < 0 ? f.trace.final()
                                   : f.trace.layer_outputs.at(static_cast<std::size_t>(loss_.feature_layer));
  };

  LossReport terms;
  std::vector<Var> weighted;
  std::optional<BlockForward> thick, thin;
  const auto run = [&](const Volume& v, const char* grid) {
    try {
      return forward_block(m, block_tokens(v, item.origin, model_));
    } catch (const NumericError& e) {
      throw NumericError(std::string(grid) + "-grid forward pass: " + e.what());
    }
  };
  if (need_thick) thick = run(pd.thick, "thick");
  if (need_thin) thin = run(pd.thin, "thin");

  if (loss_.lambda_direct > 0.0) {
    Var d = loss_direct(thick->decoded.probs, labels, weights_);
    terms.direct = d.value()[0];
    weighted.push_back(ops::scale(d, loss_.lambda_direct * batch_scale));
  }
  if (loss_.lambda_mask > 0.0) {
    const auto plane = static_cast<std::size_t>(g.patch) * g.patch;
    const auto thick_labels = group_labels(labels, g.patch, loss_.r);
    Var mk;
    if (loss_.mask_averaging == MaskAveraging::probabilities) {
      mk = loss_mask_consistency(thin->decoded.probs, thick_labels, loss_.r, plane, weights_);
    } else {
      Var avg = ops::softmax_lastdim(average_z_groups(thin->decoded.logits, loss_.r, plane));
      mk = loss_direct(avg, thick_labels, weights_);
    }
    terms.mask = mk.value()[0];
    weighted.push_back(ops::scale(mk, loss_.lambda_mask * batch_scale));
  }
  if (loss_.lambda_feat > 0.0) {
    Var f = loss_feature_consistency(feature_of(*thin), feature_of(*thick));
    terms.feat = f.value()[0];
    weighted.push_back(ops::scale(f, loss_.lambda_feat * batch_scale));
  }

  if (gradients) {
    Var total = weighted.front();
    for (std::size_t i = 1; i < weighted.size(); ++i) total = ops::add(total, weighted[i]);
    tape.backward(total);
    gradients->clear();
    for (const Var& v : m.all) gradients->push_back(tape.grad(v));
  }
  return terms;
}

JointObjective::Evaluation JointObjective::evaluate(const ModelParams& params,
                                                    std::span<const BatchItem> batch,
                                                    bool with_gradients) const {
  if (!(params.config == model_)) throw ConfigError("model config differs from the objective's");
  if (batch.empty()) throw ContractError("evaluate: empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  Evaluation out;
  if (with_gradients) {
    for (const Tensor* t : params.tensors()) out.gradients.emplace_back(t->shape());
  }

  // Blocks run in chunks of `threads`; each chunk is reduced in batch order.
  const std::size_t chunk = static_cast<std::size_t>(kernels::threads());
  std::vector<LossReport> terms(batch.size());
  std::vector<std::vector<Tensor>> grads(std::min(chunk, batch.size()));
  for (std::size_t start = 0; start < batch.size(); start += chunk) {
    const std::size_t end = std::min(batch.size(), start + chunk);
    const auto n = static_cast<std::ptrdiff_t>(end - start);
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static, 1) num_threads(kernels::threads())
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const std::size_t b = start + static_cast<std::size_t>(i);
      try {
        terms[b] = block_terms(params, batch[b], scale, with_gradients ? &grads[i] : nullptr);
      } catch (...) {
        failures[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
    for (const auto& f : failures)
      if (f) std::rethrow_exception(f);
    if (with_gradients) {
      for (std::size_t b = start; b < end; ++b) {
        auto& bg = grads[b - start];
        for (std::size_t t = 0; t < out.gradients.size(); ++t) {
          auto dst = out.gradients[t].data();
          const auto src = bg[t].data();
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
      }
    }
  }

  LossReport& r = out.report;
  for (const auto& t : terms) {
    r.direct += t.direct * scale;
    r.mask += t.mask * scale;
    r.feat += t.feat * scale;
  }
  r.total = loss_.lambda_direct * r.direct + loss_.lambda_mask * r.mask + loss_.lambda_feat * r.feat;
  return out;
}

Adam::Adam(const AdamConfig& config, const ModelParams& params) : config_(config) {
  for (const Tensor* t : params.tensors()) {
    m_.emplace_back(t->shape());
    v_.emplace_back(t->shape());
  }
}

void Adam::step(ModelParams& params, std::span<const Tensor> gradients) {
  auto tensors = params.tensors();
  if (gradients.size() != tensors.size()) throw DimensionError("Adam: gradient count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, t_);
  const double c2 = 1.0 - std::pow(config_.beta2, t_);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto p = tensors[i]->data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    const auto g = gradients[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
      p[k] -= config_.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.epsilon);
    }
  }
}

TrainResult train(std::span<const ThinThickPair> pairs, ModelParams params,
                  const JointLossConfig& config,
                  const std::function<void(const LossReport&)>& on_step) {
  JointObjective objective(pairs, params.config, config);
  Adam adam(config.adam, params);
  CounterRng rng(derive_seed(config.seed, "sampling"));
  TrainResult result;
  result.class_weights = objective.class_weights();
  result.curve.reserve(static_cast<std::size_t>(config.steps));
  for (int step = 1; step <= config.steps; ++step) {
    const auto batch = objective.sample(rng);
    JointObjective::Evaluation eval;
    try {
      eval = objective.evaluate(params, batch, true);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(step));
    }
    eval.report.step = step;
    const LossReport& r = eval.report;
    const std::pair<const char*, double> checks[] = {
        {"direct", r.direct}, {"mask-consistency", r.mask}, {"feature-consistency", r.feat}};
    for (const auto& [name, value] : checks) {
      if (!std::isfinite(value)) {
        throw NumericError(std::string("non-finite ") + name + " loss at step " + std::to_string(step));
      }
    }
    for (const auto& g : eval.gradients) {
      if (!g.all_finite()) throw NumericError("non-finite gradient at step " + std::to_string(step));
    }
    adam.step(params, eval.gradients);
    result.curve.push_back(r);
    if (on_step) on_step(r);
  }
  result.params = std::move(params);
  return result;
}

std::string loss_curve_csv(std::span<const LossReport> curve) {
  std::string out = "step,direct,mask,feat,total\n";
  char line[160];
  for (const auto& r : curve) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g\n", r.step, r.direct, r.mask, r.feat, r.total);
    out += line;
  }
  return out;
}

}  // namespace vxseg
