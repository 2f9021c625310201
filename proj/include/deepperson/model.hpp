// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "deepperson/nn.hpp"

namespace deepperson {

/// Network hyperparameters. feature_rows/feature_cols are derived from the
/// input size and backbone stride (2^depth) by finalize().
struct ModelConfig {
    int input_height = 256;
    int input_width = 128;
    int depth = 5;            // backbone downsampling stages; stride = 2^depth
    int width_base = 64;      // channel width of the first backbone stage
    int channels = 2048;      // C: channels of the shared feature map
    int feature_rows = 8;     // H
    int feature_cols = 4;     // W
    int lstm_hidden = 256;    // U: hidden units per direction
    int lstm_layers = 2;
    int num_classes = 0;      // identity count; heads need >= 2
    int global_fc_dim = 2048;
    bool part_branch = true;
    bool global_branch = true;
    bool ranking_branch = true;
    bool part_uses_lstm = true;
    std::string backbone = "smallconv";

    int stride() const { return 1 << depth; }

    /// Recomputes derived fields and checks invariants; throws ConfigError.
    void finalize();

    /// Config fingerprint for checkpoint compatibility checks.
    std::vector<std::pair<std::string, std::string>> to_kv() const;
    static ModelConfig from_kv(const std::vector<std::pair<std::string, std::string>>& kv);
};

/// Everything one forward pass produces. Branch outputs are absent when the
/// branch is disabled; the checked accessors throw instead of returning junk.
struct ModelOutputs {
    Var feature_map;                       // [C,H,W]
    std::optional<Var> ranking_embedding;  // [C], pooled feature map
    std::optional<Var> global_embedding;   // [global_fc_dim]
    std::optional<Var> part_embedding;     // [H*U]
    std::optional<Var> part_logits;        // [num_classes]
    std::optional<Var> global_logits;      // [num_classes]

    const Var& require(const std::optional<Var>& field, const char* what) const;
    const Var& ranking() const { return require(ranking_embedding, "ranking_embedding"); }
    const Var& global_feat() const { return require(global_embedding, "global_embedding"); }
    const Var& part_feat() const { return require(part_embedding, "part_embedding"); }
    /// Concatenation of the global and part features (the alternative
    /// retrieval descriptor); needs both branches.
    Var fused() const;
};

/// Feature extraction stage; implementations must downsample by stride() and
/// emit out_channels() planes.
class Backbone {
  public:
    virtual ~Backbone() = default;
    virtual Var forward(const Var& image) const = 0;  // [3,Hin,Win] -> [C,H,W]
    virtual void collect(const std::string& prefix, ParamList& out) const = 0;
    virtual int out_channels() const = 0;
    virtual int stride() const = 0;
};

using BackboneFactory =
    std::function<std::unique_ptr<Backbone>(const ModelConfig&, std::mt19937_64&)>;

/// Adapter slot: external code can register additional backbones (e.g. a
/// pretrained residual network loaded from disk) under a new name.
void register_backbone(const std::string& name, BackboneFactory factory);
std::unique_ptr<Backbone> make_backbone(const ModelConfig& cfg, std::mt19937_64& rng);

// Feature-map operations shared by the branches.
Var row_average_pool(const Var& feature_map);    // [C,H,W] -> [H,C] part sequence
Var global_descriptor_pool(const Var& feature_map);  // [C,H,W] -> [C]
Var ranking_descriptor(const Var& feature_map);  // same pooling, no learned layers

class DeepPersonNet {
  public:
    DeepPersonNet(ModelConfig cfg, std::uint64_t seed);

    /// Builds the forward graph for one image. The Tensor overload wraps the
    /// image as a non-differentiable leaf; pass a requires_grad Var to get
    /// image gradients.
    ModelOutputs forward(const Tensor& image) const;
    ModelOutputs forward(const Var& image) const;

    /// Part encoder on an [H,C] sequence: BLSTM (or the per-slice projection
    /// variant) followed by the shared per-step projection; output [H*U].
    Var encode_part_sequence(const Var& sequence) const;

    const ModelConfig& config() const { return cfg_; }
    ParamList& parameters() { return params_; }
    const ParamList& parameters() const { return params_; }

  private:
    ModelConfig cfg_;
    std::unique_ptr<Backbone> backbone_;
    BiLstm part_lstm_;
    std::vector<Linear> part_slice_fc_;  // w/o-LSTM variant: one per row
    Linear part_proj_;                   // [2U] -> [U] per step (LSTM variant)
    Linear part_head_;                   // [H*U] -> [num_classes]
    Linear global_fc_;                   // [C] -> [global_fc_dim]
    Linear global_head_;                 // [global_fc_dim] -> [num_classes]
    ParamList params_;
};

}  // namespace deepperson
