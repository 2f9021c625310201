// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "deepperson/data.hpp"
#include "deepperson/model.hpp"
#include "deepperson/trainer.hpp"

namespace deepperson {

struct EvalConfig {
    EvalMode mode = EvalMode::kSingle;
    DescriptorKind descriptor = DescriptorKind::kPooled;
    int rank_max = 50;
};

struct DataConfig {
    std::string root;
    SynthConfig synth;
};

/// Resolved configuration of one run. The pixel normalization lives in
/// trainer.augment and is shared by train/eval preprocessing.
struct RunConfig {
    ModelConfig model;
    TrainConfig trainer;
    DataConfig data;
    EvalConfig eval;
    double heatmap_alpha = 0.5;
};

/// Flat-namespaced key=value configuration with [section] grouping. Values
/// keep insertion-independent ordering (registry order) when echoed.
class ConfigMap {
  public:
    /// Parses `key = value` lines; `[section]` prefixes following keys;
    /// fully-qualified `section.key` also accepted. '#' starts a comment.
    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_text(const std::string& text);

    /// `--set section.key=value`; unknown keys are rejected with a
    /// closest-match suggestion.
    void set(const std::string& key, const std::string& value);
    void merge(const ConfigMap& overrides);  // overrides win

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

/// All recognized keys with their default (from a default-constructed
/// RunConfig) and a one-line description.
struct ConfigKeyInfo {
    std::string key;
    std::string default_value;
    std::string description;
};
const std::vector<ConfigKeyInfo>& config_key_registry();

/// Nearest known key by edit distance, "" when nothing is close.
std::string suggest_config_key(const std::string& unknown);

/// Applies a ConfigMap over defaults; unknown keys or unparsable values
/// throw ConfigError (with suggestions).
RunConfig resolve_config(const ConfigMap& map);

/// Serializes a resolved config in registry order, grouped by section;
/// parse_text(echo(cfg)) reproduces the config exactly.
std::string echo_config(const RunConfig& cfg);

}  // namespace deepperson
