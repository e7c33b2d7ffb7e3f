#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vxseg/model.hpp"
#include "vxseg/phantom.hpp"
#include "vxseg/rng.hpp"

namespace vxseg {

/// How thin predictions are averaged before the mask-consistency term.
enum class MaskAveraging : std::uint8_t { probabilities = 0, logits = 1 };

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct JointLossConfig {
  double lambda_direct = 1.0;
  double lambda_mask = 1.0;
  double lambda_feat = 1.0;
  /// Empty means inverse class frequency over the thick labels.
  std::vector<double> class_weights;
  int r = 4;
  AdamConfig adam;
  int steps = 500;
  int batch_size = 8;
  double fg_fraction = 0.5;
  std::uint64_t seed = 0;
  MaskAveraging mask_averaging = MaskAveraging::probabilities;
  /// Encoder layer whose output feeds the feature term; -1 is the last.
  int feature_layer = -1;

  void validate(const ModelConfig& model) const;
};

struct LossReport {
  int step = 0;
  double direct = 0.0;  // terms with lambda == 0 are not evaluated and read 0
  double mask = 0.0;
  double feat = 0.0;
  double total = 0.0;
};

struct BatchItem {
  std::size_t pair = 0;
  Index3 origin;
};

// Joint objective over a fixed set of thin/thick pairs. Thick data is
// replicated onto the thin grid, so a block origin addresses corresponding
// voxels and tokens in both domains.
class JointObjective {
 public:
  JointObjective(std::span<const ThinThickPair> pairs, const ModelConfig& model,
                 const JointLossConfig& loss);

  struct Evaluation {
    LossReport report;
    std::vector<Tensor> gradients;  // ModelParams::tensors() order; empty if not requested
  };

  /// Mean of the per-block joint loss over `batch`. Block gradients are
  /// computed concurrently and summed in batch order.
  Evaluation evaluate(const ModelParams& params, std::span<const BatchItem> batch,
                      bool with_gradients) const;

  std::vector<BatchItem> sample(CounterRng& rng) const;

  const std::vector<double>& class_weights() const noexcept { return weights_; }
  const JointLossConfig& config() const noexcept { return loss_; }

  const Volume& thin(std::size_t pair) const { return data_.at(pair).thin; }
  const Volume& thick_replicated(std::size_t pair) const { return data_.at(pair).thick; }
  const LabelVolume& thick_labels_replicated(std::size_t pair) const { return data_.at(pair).labels; }
  std::size_t pair_count() const noexcept { return data_.size(); }

 private:
  struct PairData {
    Volume thin;
    Volume thick;
    LabelVolume labels;
    BlockSampler sampler;
  };

  LossReport block_terms(const ModelParams& params, const BatchItem& item, double batch_scale,
                         std::vector<Tensor>* gradients) const;

  ModelConfig model_;
  JointLossConfig loss_;
  std::vector<PairData> data_;
  std::vector<double> weights_;
};

class Adam {
 public:
  Adam(const AdamConfig& config, const ModelParams& params);
  void step(ModelParams& params, std::span<const Tensor> gradients);
  int steps_taken() const noexcept { return t_; }

 private:
  AdamConfig config_;
  int t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossReport> curve;
  std::vector<double> class_weights;
};

/// Adaptive-moment training on the joint loss. Throws NumericError naming the
/// term and step when a loss turns non-finite.
TrainResult train(std::span<const ThinThickPair> pairs, ModelParams params,
                  const JointLossConfig& config,
                  const std::function<void(const LossReport&)>& on_step = {});

/// CSV "step,direct,mask,feat,total" with full round-trip precision.
std::string loss_curve_csv(std::span<const LossReport> curve);

}  // namespace vxseg
