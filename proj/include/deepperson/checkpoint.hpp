// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "deepperson/nn.hpp"
#include "deepperson/tensor.hpp"

namespace deepperson {

using KvList = std::vector<std::pair<std::string, std::string>>;
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

struct TrainStateSnapshot {
    int epoch = 0;               // next epoch to run
    int batch_in_epoch = 0;
    long long global_step = 0;
    double best_map = -1.0;
    int best_epoch = -1;
    std::string rng_state;       // serialized engine stream
};

/// Versioned binary container. Doubles are stored raw (little-endian), so
/// save/load round-trips are bit-exact.
struct Checkpoint {
    KvList model_config;
    KvList trainer_fingerprint;
    NamedTensors params;
    NamedTensors optimizer;      // empty when saved without optimizer state
    TrainStateSnapshot state;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);  // DataError on malformed files

NamedTensors snapshot_params(const ParamList& params);

/// Copies stored tensors into the live parameters by name; refuses on any
/// missing name or shape mismatch.
void apply_params(const NamedTensors& stored, ParamList& params);

/// Human-readable diff of two kv sections ("" when identical).
std::string diff_kv(const KvList& expected, const KvList& actual);

}  // namespace deepperson
