// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include "deepperson/model.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "deepperson/errors.hpp"

namespace deepperson {

void ModelConfig::finalize() {
    if (input_height <= 0 || input_width <= 0) throw ConfigError("model: input size must be positive");
    if (depth < 1 || depth > 8) throw ConfigError("model: depth must be in [1,8]");
    if (input_height % stride() != 0 || input_width % stride() != 0)
        throw ConfigError("model: input " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                          " not divisible by backbone stride " + std::to_string(stride()));
    feature_rows = input_height / stride();
    feature_cols = input_width / stride();
    if (feature_rows < 1 || feature_cols < 1) throw ConfigError("model: feature map would be empty");
    if (channels <= 0) throw ConfigError("model: channels must be > 0");
    if (width_base <= 0) throw ConfigError("model: width_base must be > 0");
    if (lstm_hidden <= 0) throw ConfigError("model: lstm_hidden must be > 0");
    if (lstm_layers < 1) throw ConfigError("model: lstm_layers must be >= 1");
    if (global_fc_dim <= 0) throw ConfigError("model: global_fc_dim must be > 0");
    if (!part_branch && !global_branch && !ranking_branch)
        throw ConfigError("model: at least one branch must be enabled");
    if ((part_branch || global_branch) && num_classes < 2)
        throw ConfigError("model: identification branches need num_classes >= 2, got " +
                          std::to_string(num_classes));
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_kv() const {
    auto b = [](bool v) { return v ? std::string("true") : std::string("false"); };
    return {
        {"input_height", std::to_string(input_height)},
        {"input_width", std::to_string(input_width)},
        {"depth", std::to_string(depth)},
        {"width_base", std::to_string(width_base)},
        {"channels", std::to_string(channels)},
        {"lstm_hidden", std::to_string(lstm_hidden)},
        {"lstm_layers", std::to_string(lstm_layers)},
        {"num_classes", std::to_string(num_classes)},
        {"global_fc_dim", std::to_string(global_fc_dim)},
        {"part_branch", b(part_branch)},
        {"global_branch", b(global_branch)},
        {"ranking_branch", b(ranking_branch)},
        {"part_uses_lstm", b(part_uses_lstm)},
        {"backbone", backbone},
    };
}

ModelConfig ModelConfig::from_kv(const std::vector<std::pair<std::string, std::string>>& kv) {
    ModelConfig c;
    auto as_int = [](const std::string& s) { return std::stoi(s); };
    auto as_bool = [](const std::string& s) { return s == "true" || s == "1"; };
    for (const auto& [k, v] : kv) {
        if (k == "input_height") c.input_height = as_int(v);
        else if (k == "input_width") c.input_width = as_int(v);
        else if (k == "depth") c.depth = as_int(v);
        else if (k == "width_base") c.width_base = as_int(v);
        else if (k == "channels") c.channels = as_int(v);
        else if (k == "lstm_hidden") c.lstm_hidden = as_int(v);
        else if (k == "lstm_layers") c.lstm_layers = as_int(v);
        else if (k == "num_classes") c.num_classes = as_int(v);
        else if (k == "global_fc_dim") c.global_fc_dim = as_int(v);
        else if (k == "part_branch") c.part_branch = as_bool(v);
        else if (k == "global_branch") c.global_branch = as_bool(v);
        else if (k == "ranking_branch") c.ranking_branch = as_bool(v);
        else if (k == "part_uses_lstm") c.part_uses_lstm = as_bool(v);
        else if (k == "backbone") c.backbone = v;
        else throw ConfigError("model config: unknown key '" + k + "'");
    }
    c.finalize();
    return c;
}

const Var& ModelOutputs::require(const std::optional<Var>& field, const char* what) const {
    if (!field)
        throw ConfigError(std::string("model output '") + what + "' is absent: its branch is disabled");
    return *field;
}

Var ModelOutputs::fused() const {
    if (!global_embedding || !part_embedding)
        throw ConfigError("fused descriptor requires both the part and global branches");
    return concat({*global_embedding, *part_embedding});
}

// --- backbones --------------------------------------------------------------

namespace {

/// Plain stack of stride-2 conv+ReLU stages. Channel widths double per stage
/// from width_base, capped so the final stage emits exactly cfg.channels.
class SmallConvBackbone : public Backbone {
  public:
    SmallConvBackbone(const ModelConfig& cfg, std::mt19937_64& rng)
        : stride_(cfg.stride()), out_channels_(cfg.channels) {
        int cin = 3;
        for (int s = 0; s < cfg.depth; ++s) {
            int cout = (s == cfg.depth - 1) ? cfg.channels
                                            : std::min(cfg.width_base << s, cfg.channels);
            stages_.emplace_back(cin, cout, 3, 2, 1, rng);
            cin = cout;
        }
    }

    Var forward(const Var& image) const override {
        Var x = image;
        for (const auto& stage : stages_) x = relu(stage.forward(x));
        return x;
    }

    void collect(const std::string& prefix, ParamList& out) const override {
        for (std::size_t s = 0; s < stages_.size(); ++s)
            stages_[s].collect(prefix + ".stage" + std::to_string(s), out);
    }

    int out_channels() const override { return out_channels_; }
    int stride() const override { return stride_; }

  private:
    std::vector<Conv2dLayer> stages_;
    int stride_;
    int out_channels_;
};

std::map<std::string, BackboneFactory>& backbone_registry() {
    static std::map<std::string, BackboneFactory> reg = {
        {"smallconv", [](const ModelConfig& cfg, std::mt19937_64& rng) {
             return std::unique_ptr<Backbone>(new SmallConvBackbone(cfg, rng));
         }},
    };
    return reg;
}

}  // namespace

void register_backbone(const std::string& name, BackboneFactory factory) {
    backbone_registry()[name] = std::move(factory);
}

std::unique_ptr<Backbone> make_backbone(const ModelConfig& cfg, std::mt19937_64& rng) {
    auto it = backbone_registry().find(cfg.backbone);
    if (it == backbone_registry().end()) {
        std::ostringstream os;
        os << "unknown backbone '" << cfg.backbone << "'; registered:";
        for (const auto& [k, v] : backbone_registry()) os << " " << k;
        throw ConfigError(os.str());
    }
    return it->second(cfg, rng);
}

Var row_average_pool(const Var& feature_map) { return row_avg_pool(feature_map); }
Var global_descriptor_pool(const Var& feature_map) { return global_avg_pool(feature_map); }
Var ranking_descriptor(const Var& feature_map) { return global_avg_pool(feature_map); }

// --- DeepPersonNet ----------------------------------------------------------

DeepPersonNet::DeepPersonNet(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.finalize();
    std::mt19937_64 rng(seed);
    backbone_ = make_backbone(cfg_, rng);
    if (backbone_->out_channels() != cfg_.channels || backbone_->stride() != cfg_.stride())
        throw ConfigError("backbone '" + cfg_.backbone + "' does not match the configured stride/channels");
    backbone_->collect("backbone", params_);

    // Disabled branches own no parameters, so ablation variants differ only
    // by branch presence.
    if (cfg_.part_branch) {
        if (cfg_.part_uses_lstm) {
            part_lstm_ = BiLstm(cfg_.channels, cfg_.lstm_hidden, cfg_.lstm_layers, rng);
            part_lstm_.collect("part.lstm", params_);
            part_proj_ = Linear(2 * cfg_.lstm_hidden, cfg_.lstm_hidden, rng);
            part_proj_.collect("part.proj", params_);
        } else {
            for (int t = 0; t < cfg_.feature_rows; ++t) {
                part_slice_fc_.emplace_back(cfg_.channels, cfg_.lstm_hidden, rng);
                part_slice_fc_.back().collect("part.slice" + std::to_string(t), params_);
            }
        }
        part_head_ = Linear(cfg_.feature_rows * cfg_.lstm_hidden, cfg_.num_classes, rng);
        part_head_.collect("part.head", params_);
    }
    if (cfg_.global_branch) {
        global_fc_ = Linear(cfg_.channels, cfg_.global_fc_dim, rng);
        global_fc_.collect("global.fc", params_);
        global_head_ = Linear(cfg_.global_fc_dim, cfg_.num_classes, rng);
        global_head_.collect("global.head", params_);
    }
}

Var DeepPersonNet::encode_part_sequence(const Var& sequence) const {
    const Tensor& v = sequence.value();
    if (v.rank() != 2 || v.dim(0) != cfg_.feature_rows || v.dim(1) != cfg_.channels)
        throw std::invalid_argument("part sequence must be [" + std::to_string(cfg_.feature_rows) + "x" +
                                    std::to_string(cfg_.channels) + "], got " + v.shape_str());
    std::vector<Var> steps;
    steps.reserve(static_cast<std::size_t>(cfg_.feature_rows));
    for (int t = 0; t < cfg_.feature_rows; ++t) steps.push_back(select_row(sequence, t));

    std::vector<Var> encoded;
    encoded.reserve(steps.size());
    if (cfg_.part_uses_lstm) {
        std::vector<Var> hidden = part_lstm_.forward(steps);
        for (const Var& h : hidden) encoded.push_back(part_proj_.forward(h));
    } else {
        for (std::size_t t = 0; t < steps.size(); ++t)
            encoded.push_back(part_slice_fc_[t].forward(steps[t]));
    }
    return concat(encoded);
}

ModelOutputs DeepPersonNet::forward(const Tensor& image) const { return forward(Var(image)); }

ModelOutputs DeepPersonNet::forward(const Var& image) const {
    const Tensor& v = image.value();
    if (v.rank() != 3 || v.dim(0) != 3 || v.dim(1) != cfg_.input_height || v.dim(2) != cfg_.input_width)
        throw std::invalid_argument("expected image [3x" + std::to_string(cfg_.input_height) + "x" +
                                    std::to_string(cfg_.input_width) + "], got " + v.shape_str());
    if (!v.all_finite()) throw NumericError("input image contains non-finite values");

    ModelOutputs out;
    out.feature_map = backbone_->forward(image);
    if (cfg_.ranking_branch) out.ranking_embedding = ranking_descriptor(out.feature_map);
    if (cfg_.global_branch) {
        Var pooled = global_descriptor_pool(out.feature_map);
        out.global_embedding = global_fc_.forward(pooled);
        out.global_logits = global_head_.forward(*out.global_embedding);
    }
    if (cfg_.part_branch) {
        Var seq = row_average_pool(out.feature_map);
        out.part_embedding = encode_part_sequence(seq);
        out.part_logits = part_head_.forward(*out.part_embedding);
    }
    return out;
}

}  // namespace deepperson
