// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include "deepperson/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "deepperson/errors.hpp"

namespace deepperson {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        int r = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        unsigned long long r = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(r);
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    }
}

std::array<double, 3> parse_triple(const std::string& key, const std::string& v) {
    std::array<double, 3> out{};
    std::stringstream ss(v);
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= 3) throw ConfigError("config: '" + key + "' expects three comma-separated numbers");
        out[static_cast<std::size_t>(i++)] = parse_double(key, trim(item));
    }
    if (i == 1) { out[1] = out[0]; out[2] = out[0]; }
    else if (i != 3) throw ConfigError("config: '" + key + "' expects one or three numbers");
    return out;
}

std::string format_triple(const std::array<double, 3>& t) {
    return fmt_double(t[0]) + "," + fmt_double(t[1]) + "," + fmt_double(t[2]);
}

int edit_distance(const std::string& a, const std::string& b) {
    std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= b.size(); ++j) {
            int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

void reject_unknown(const std::string& key) {
    std::string msg = "config: unknown key '" + key + "'";
    std::string hint = suggest_config_key(key);
    if (!hint.empty()) msg += "; did you mean '" + hint + "'?";
    throw ConfigError(msg);
}

bool known_key(const std::string& key) {
    for (const auto& info : config_key_registry())
        if (info.key == key) return true;
    return false;
}

}  // namespace

// --- ConfigMap ---------------------------------------------------------------

ConfigMap ConfigMap::parse_text(const std::string& text) {
    ConfigMap map;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string s = trim(line);
        std::size_t comment = s.find('#');
        if (comment != std::string::npos) s = trim(s.substr(0, comment));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
        map.set(key, value);
    }
    return map;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << is.rdbuf();
    return parse_text(buffer.str());
}

void ConfigMap::set(const std::string& key, const std::string& value) {
    if (!known_key(key)) reject_unknown(key);
    values_[key] = value;
}

void ConfigMap::merge(const ConfigMap& overrides) {
    for (const auto& [k, v] : overrides.values_) values_[k] = v;
}

bool ConfigMap::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& ConfigMap::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config: key '" + key + "' not set");
    return it->second;
}

// --- registry ------------------------------------------------------------------

const std::vector<ConfigKeyInfo>& config_key_registry() {
    static const std::vector<ConfigKeyInfo> registry = [] {
        RunConfig d;  // defaults
        std::vector<ConfigKeyInfo> r = {
            {"model.input_height", std::to_string(d.model.input_height), "input image height"},
            {"model.input_width", std::to_string(d.model.input_width), "input image width"},
            {"model.depth", std::to_string(d.model.depth), "backbone stages; stride = 2^depth"},
            {"model.width_base", std::to_string(d.model.width_base), "first backbone stage channels"},
            {"model.channels", std::to_string(d.model.channels), "feature map channels"},
            {"model.lstm_hidden", std::to_string(d.model.lstm_hidden), "recurrent hidden units per direction"},
            {"model.lstm_layers", std::to_string(d.model.lstm_layers), "recurrent layers"},
            {"model.num_classes", std::to_string(d.model.num_classes), "identity count (0 = derive from dataset)"},
            {"model.global_fc_dim", std::to_string(d.model.global_fc_dim), "global branch FC width"},
            {"model.part_branch", "true", "enable the part identification branch"},
            {"model.global_branch", "true", "enable the global identification branch"},
            {"model.ranking_branch", "true", "enable the distance ranking branch"},
            {"model.part_uses_lstm", "true", "sequence encoder (false: per-slice FC variant)"},
            {"model.backbone", d.model.backbone, "backbone name"},
            {"trainer.p", std::to_string(d.trainer.p), "identities per batch"},
            {"trainer.k", std::to_string(d.trainer.k), "images per identity per batch"},
            {"trainer.epochs", std::to_string(d.trainer.total_epochs), "total training epochs"},
            {"trainer.base_lr", fmt_double(d.trainer.base_lr), "initial learning rate"},
            {"trainer.decay_epoch", std::to_string(d.trainer.decay_epoch), "epoch where lr decay starts"},
            {"trainer.decay_shape", d.trainer.decay_shape, "lr decay: exponential or step"},
            {"trainer.step_decay_factor", fmt_double(d.trainer.step_decay_factor), "step decay multiplier"},
            {"trainer.step_decay_every", std::to_string(d.trainer.step_decay_every), "epochs between step decays"},
            {"trainer.adam_beta1", fmt_double(d.trainer.adam_beta1), "Adam beta1"},
            {"trainer.adam_beta2", fmt_double(d.trainer.adam_beta2), "Adam beta2"},
            {"trainer.adam_eps", fmt_double(d.trainer.adam_eps), "Adam epsilon"},
            {"trainer.grad_clip_norm", fmt_double(d.trainer.grad_clip_norm), "global gradient norm clip (inf disables)"},
            {"trainer.weight_ranking", fmt_double(d.trainer.loss_weights.ranking), "ranking loss weight"},
            {"trainer.weight_part", fmt_double(d.trainer.loss_weights.part_cls), "part identification loss weight"},
            {"trainer.weight_global", fmt_double(d.trainer.loss_weights.global_cls), "global identification loss weight"},
            {"trainer.margin", fmt_double(d.trainer.margin), "triplet margin"},
            {"trainer.seed", std::to_string(d.trainer.seed), "run seed"},
            {"trainer.checkpoint_interval", std::to_string(d.trainer.checkpoint_interval), "epochs between checkpoints"},
            {"trainer.eval_interval", std::to_string(d.trainer.eval_interval), "epochs between in-training evals (0 = off)"},
            {"data.root", "", "dataset root (Market directory convention)"},
            {"data.mean", format_triple(d.trainer.augment.norm.mean), "per-channel pixel mean"},
            {"data.std", format_triple(d.trainer.augment.norm.stddev), "per-channel pixel std"},
            {"data.synth_ids", std::to_string(d.data.synth.num_ids), "synthetic: identity count"},
            {"data.synth_train_per_id", std::to_string(d.data.synth.train_per_id), "synthetic: train images per identity"},
            {"data.synth_query_per_id", std::to_string(d.data.synth.query_per_id), "synthetic: query images per identity"},
            {"data.synth_gallery_per_id", std::to_string(d.data.synth.gallery_per_id), "synthetic: gallery images per identity"},
            {"data.synth_cameras", std::to_string(d.data.synth.num_cameras), "synthetic: camera count"},
            {"data.synth_occlusion_prob", fmt_double(d.data.synth.occlusion_prob), "synthetic: occluder probability"},
            {"data.synth_blur_max", fmt_double(d.data.synth.blur_sigma_max), "synthetic: max blur sigma"},
            {"data.synth_junk", std::to_string(d.data.synth.junk_gallery), "synthetic: junk gallery images"},
            {"data.synth_seed", std::to_string(d.data.synth.seed), "synthetic: render seed"},
            {"eval.mode", "single", "query mode: single or multi"},
            {"eval.descriptor", "pooled", "retrieval descriptor: pooled or fused"},
            {"eval.rank_max", std::to_string(d.eval.rank_max), "CMC curve length"},
            {"heatmap.alpha", fmt_double(d.heatmap_alpha), "heatmap overlay opacity"},
        };
        return r;
    }();
    return registry;
}

std::string suggest_config_key(const std::string& unknown) {
    int best = 4;  // suggest only reasonably close names
    std::string best_key;
    for (const auto& info : config_key_registry()) {
        int dist = edit_distance(unknown, info.key);
        // Also try matching just the part after the section prefix.
        std::size_t dot = info.key.find('.');
        std::size_t udot = unknown.find('.');
        if (dot != std::string::npos && udot != std::string::npos &&
            info.key.substr(0, dot) == unknown.substr(0, udot)) {
            dist = std::min(dist, edit_distance(unknown.substr(udot + 1), info.key.substr(dot + 1)));
        }
        if (dist < best) {
            best = dist;
            best_key = info.key;
        }
    }
    return best_key;
}

// --- resolve -------------------------------------------------------------------

RunConfig resolve_config(const ConfigMap& map) {
    RunConfig cfg;
    for (const auto& [key, value] : map.entries()) {
        if (key == "model.input_height") cfg.model.input_height = parse_int(key, value);
        else if (key == "model.input_width") cfg.model.input_width = parse_int(key, value);
        else if (key == "model.depth") cfg.model.depth = parse_int(key, value);
        else if (key == "model.width_base") cfg.model.width_base = parse_int(key, value);
        else if (key == "model.channels") cfg.model.channels = parse_int(key, value);
        else if (key == "model.lstm_hidden") cfg.model.lstm_hidden = parse_int(key, value);
        else if (key == "model.lstm_layers") cfg.model.lstm_layers = parse_int(key, value);
        else if (key == "model.num_classes") cfg.model.num_classes = parse_int(key, value);
        else if (key == "model.global_fc_dim") cfg.model.global_fc_dim = parse_int(key, value);
        else if (key == "model.part_branch") cfg.model.part_branch = parse_bool(key, value);
        else if (key == "model.global_branch") cfg.model.global_branch = parse_bool(key, value);
        else if (key == "model.ranking_branch") cfg.model.ranking_branch = parse_bool(key, value);
        else if (key == "model.part_uses_lstm") cfg.model.part_uses_lstm = parse_bool(key, value);
        else if (key == "model.backbone") cfg.model.backbone = value;
        else if (key == "trainer.p") cfg.trainer.p = parse_int(key, value);
        else if (key == "trainer.k") cfg.trainer.k = parse_int(key, value);
        else if (key == "trainer.epochs") cfg.trainer.total_epochs = parse_int(key, value);
        else if (key == "trainer.base_lr") cfg.trainer.base_lr = parse_double(key, value);
        else if (key == "trainer.decay_epoch") cfg.trainer.decay_epoch = parse_int(key, value);
        else if (key == "trainer.decay_shape") cfg.trainer.decay_shape = value;
        else if (key == "trainer.step_decay_factor") cfg.trainer.step_decay_factor = parse_double(key, value);
        else if (key == "trainer.step_decay_every") cfg.trainer.step_decay_every = parse_int(key, value);
        else if (key == "trainer.adam_beta1") cfg.trainer.adam_beta1 = parse_double(key, value);
        else if (key == "trainer.adam_beta2") cfg.trainer.adam_beta2 = parse_double(key, value);
        else if (key == "trainer.adam_eps") cfg.trainer.adam_eps = parse_double(key, value);
        else if (key == "trainer.grad_clip_norm") cfg.trainer.grad_clip_norm = parse_double(key, value);
        else if (key == "trainer.weight_ranking") cfg.trainer.loss_weights.ranking = parse_double(key, value);
        else if (key == "trainer.weight_part") cfg.trainer.loss_weights.part_cls = parse_double(key, value);
        else if (key == "trainer.weight_global") cfg.trainer.loss_weights.global_cls = parse_double(key, value);
        else if (key == "trainer.margin") cfg.trainer.margin = parse_double(key, value);
        else if (key == "trainer.seed") cfg.trainer.seed = parse_u64(key, value);
        else if (key == "trainer.checkpoint_interval") cfg.trainer.checkpoint_interval = parse_int(key, value);
        else if (key == "trainer.eval_interval") cfg.trainer.eval_interval = parse_int(key, value);
        else if (key == "data.root") cfg.data.root = value;
        else if (key == "data.mean") cfg.trainer.augment.norm.mean = parse_triple(key, value);
        else if (key == "data.std") cfg.trainer.augment.norm.stddev = parse_triple(key, value);
        else if (key == "data.synth_ids") cfg.data.synth.num_ids = parse_int(key, value);
        else if (key == "data.synth_train_per_id") cfg.data.synth.train_per_id = parse_int(key, value);
        else if (key == "data.synth_query_per_id") cfg.data.synth.query_per_id = parse_int(key, value);
        else if (key == "data.synth_gallery_per_id") cfg.data.synth.gallery_per_id = parse_int(key, value);
        else if (key == "data.synth_cameras") cfg.data.synth.num_cameras = parse_int(key, value);
        else if (key == "data.synth_occlusion_prob") cfg.data.synth.occlusion_prob = parse_double(key, value);
        else if (key == "data.synth_blur_max") cfg.data.synth.blur_sigma_max = parse_double(key, value);
        else if (key == "data.synth_junk") cfg.data.synth.junk_gallery = parse_int(key, value);
        else if (key == "data.synth_seed") cfg.data.synth.seed = parse_u64(key, value);
        else if (key == "eval.mode") {
            if (value == "single") cfg.eval.mode = EvalMode::kSingle;
            else if (value == "multi") cfg.eval.mode = EvalMode::kMulti;
            else throw ConfigError("config: eval.mode must be 'single' or 'multi', got '" + value + "'");
        } else if (key == "eval.descriptor") {
            if (value == "pooled") cfg.eval.descriptor = DescriptorKind::kPooled;
            else if (value == "fused") cfg.eval.descriptor = DescriptorKind::kFused;
            else throw ConfigError("config: eval.descriptor must be 'pooled' or 'fused', got '" + value + "'");
        } else if (key == "eval.rank_max") cfg.eval.rank_max = parse_int(key, value);
        else if (key == "heatmap.alpha") cfg.heatmap_alpha = parse_double(key, value);
        else reject_unknown(key);
    }
    // Keep train-time augmentation aligned with the model input.
    cfg.trainer.augment.out_height = cfg.model.input_height;
    cfg.trainer.augment.out_width = cfg.model.input_width;
    if (cfg.eval.rank_max < 1) throw ConfigError("config: eval.rank_max must be >= 1");
    if (cfg.heatmap_alpha < 0.0 || cfg.heatmap_alpha > 1.0)
        throw ConfigError("config: heatmap.alpha must lie in [0,1]");
    cfg.trainer.eval_rank_max = cfg.eval.rank_max;
    return cfg;
}

std::string echo_config(const RunConfig& cfg) {
    // Serialize current values under the registry's key set.
    std::map<std::string, std::string> values;
    values["model.input_height"] = std::to_string(cfg.model.input_height);
    values["model.input_width"] = std::to_string(cfg.model.input_width);
    values["model.depth"] = std::to_string(cfg.model.depth);
    values["model.width_base"] = std::to_string(cfg.model.width_base);
    values["model.channels"] = std::to_string(cfg.model.channels);
    values["model.lstm_hidden"] = std::to_string(cfg.model.lstm_hidden);
    values["model.lstm_layers"] = std::to_string(cfg.model.lstm_layers);
    values["model.num_classes"] = std::to_string(cfg.model.num_classes);
    values["model.global_fc_dim"] = std::to_string(cfg.model.global_fc_dim);
    values["model.part_branch"] = cfg.model.part_branch ? "true" : "false";
    values["model.global_branch"] = cfg.model.global_branch ? "true" : "false";
    values["model.ranking_branch"] = cfg.model.ranking_branch ? "true" : "false";
    values["model.part_uses_lstm"] = cfg.model.part_uses_lstm ? "true" : "false";
    values["model.backbone"] = cfg.model.backbone;
    values["trainer.p"] = std::to_string(cfg.trainer.p);
    values["trainer.k"] = std::to_string(cfg.trainer.k);
    values["trainer.epochs"] = std::to_string(cfg.trainer.total_epochs);
    values["trainer.base_lr"] = fmt_double(cfg.trainer.base_lr);
    values["trainer.decay_epoch"] = std::to_string(cfg.trainer.decay_epoch);
    values["trainer.decay_shape"] = cfg.trainer.decay_shape;
    values["trainer.step_decay_factor"] = fmt_double(cfg.trainer.step_decay_factor);
    values["trainer.step_decay_every"] = std::to_string(cfg.trainer.step_decay_every);
    values["trainer.adam_beta1"] = fmt_double(cfg.trainer.adam_beta1);
    values["trainer.adam_beta2"] = fmt_double(cfg.trainer.adam_beta2);
    values["trainer.adam_eps"] = fmt_double(cfg.trainer.adam_eps);
    values["trainer.grad_clip_norm"] = fmt_double(cfg.trainer.grad_clip_norm);
    values["trainer.weight_ranking"] = fmt_double(cfg.trainer.loss_weights.ranking);
    values["trainer.weight_part"] = fmt_double(cfg.trainer.loss_weights.part_cls);
    values["trainer.weight_global"] = fmt_double(cfg.trainer.loss_weights.global_cls);
    values["trainer.margin"] = fmt_double(cfg.trainer.margin);
    values["trainer.seed"] = std::to_string(cfg.trainer.seed);
    values["trainer.checkpoint_interval"] = std::to_string(cfg.trainer.checkpoint_interval);
    values["trainer.eval_interval"] = std::to_string(cfg.trainer.eval_interval);
    values["data.root"] = cfg.data.root;
    values["data.mean"] = format_triple(cfg.trainer.augment.norm.mean);
    values["data.std"] = format_triple(cfg.trainer.augment.norm.stddev);
    values["data.synth_ids"] = std::to_string(cfg.data.synth.num_ids);
    values["data.synth_train_per_id"] = std::to_string(cfg.data.synth.train_per_id);
    values["data.synth_query_per_id"] = std::to_string(cfg.data.synth.query_per_id);
    values["data.synth_gallery_per_id"] = std::to_string(cfg.data.synth.gallery_per_id);
    values["data.synth_cameras"] = std::to_string(cfg.data.synth.num_cameras);
    values["data.synth_occlusion_prob"] = fmt_double(cfg.data.synth.occlusion_prob);
    values["data.synth_blur_max"] = fmt_double(cfg.data.synth.blur_sigma_max);
    values["data.synth_junk"] = std::to_string(cfg.data.synth.junk_gallery);
    values["data.synth_seed"] = std::to_string(cfg.data.synth.seed);
    values["eval.mode"] = cfg.eval.mode == EvalMode::kSingle ? "single" : "multi";
    values["eval.descriptor"] = cfg.eval.descriptor == DescriptorKind::kPooled ? "pooled" : "fused";
    values["eval.rank_max"] = std::to_string(cfg.eval.rank_max);
    values["heatmap.alpha"] = fmt_double(cfg.heatmap_alpha);

    std::ostringstream os;
    std::string section;
    for (const auto& info : config_key_registry()) {
        std::size_t dot = info.key.find('.');
        std::string sec = info.key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) os << "\n";
            os << "[" << sec << "]\n";
            section = sec;
        }
        os << info.key.substr(dot + 1) << " = " << values[info.key] << "\n";
    }
    return os.str();
}

}  // namespace deepperson
