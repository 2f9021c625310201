// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>
#include <string>
#include <vector>

#include "deepperson/checkpoint.hpp"
#include "deepperson/data.hpp"
#include "deepperson/eval.hpp"
#include "deepperson/losses.hpp"
#include "deepperson/model.hpp"

namespace deepperson {

struct TrainConfig {
    int p = 16;
    int k = 8;
    int total_epochs = 150;
    double base_lr = 3e-4;
    int decay_epoch = 100;
    std::string decay_shape = "exponential";  // or "step"
    double step_decay_factor = 0.1;
    int step_decay_every = 20;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip_norm = 10.0;  // must be > 0; +inf disables clipping
    LossWeights loss_weights;
    double margin = 0.5;
    std::uint64_t seed = 0;
    int checkpoint_interval = 1;   // epochs between checkpoint writes
    int eval_interval = 1;         // epochs between in-training evals; 0 disables
    int eval_rank_max = 50;
    AugmentConfig augment;

    void validate(const ModelConfig& model) const;
    /// Keys that must match when resuming from a checkpoint.
    KvList fingerprint() const;
};

/// base_lr until decay_epoch, then an exponential anneal reaching 1e-3 of
/// base over the remaining epochs ("step" multiplies by step_decay_factor
/// every step_decay_every epochs instead).
double lr_at_epoch(int epoch, const TrainConfig& cfg);

class Adam {
  public:
    Adam() = default;
    Adam(const ParamList& params, double beta1, double beta2, double eps);

    void step(ParamList& params, double lr);
    long long steps_taken() const { return t_; }

    NamedTensors snapshot(const ParamList& params) const;
    void restore(const ParamList& params, const NamedTensors& stored);

  private:
    std::vector<Tensor> m_, v_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long long t_ = 0;
};

struct StepStats {
    double total = 0.0;
    double ranking = 0.0;
    double part_cls = 0.0;
    double global_cls = 0.0;
    double grad_norm = 0.0;  // pre-clip global norm
};

/// One optimizer step on an augmented batch: forward every image, the three
/// branch losses, combined backward, global-norm clip, Adam update.
StepStats train_step(DeepPersonNet& net, Adam& adam, const std::vector<Tensor>& images,
                     const std::vector<int>& labels, const TrainConfig& cfg, double lr);

enum class DescriptorKind { kPooled, kFused };

/// Extracts descriptors for one dataset split (inference mode, eval
/// preprocessing, deterministic record order).
EmbeddingSet extract_embeddings(const DeepPersonNet& net, const DatasetIndex& index, Split split,
                                const AugmentConfig& aug, DescriptorKind kind);

struct RunResult {
    std::string final_checkpoint;
    std::string best_checkpoint;  // empty when no in-training eval ran
    double best_map = -1.0;
    int epochs_run = 0;
};

/// Full training loop: total_epochs * floor(num_classes / p) batches,
/// key=value metrics line per epoch, checkpointing, optional resume.
/// run_until_epoch (when >= 0) stops early after that epoch index is reached,
/// leaving a checkpoint an interrupted run would resume from.
RunResult run_training(DeepPersonNet& net, const DatasetIndex& index, const TrainConfig& cfg,
                       const std::string& out_dir, const std::string& resume_path = "",
                       int run_until_epoch = -1);

}  // namespace deepperson
