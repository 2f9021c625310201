// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include "deepperson/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "deepperson/errors.hpp"

namespace fs = std::filesystem;

namespace deepperson {

void TrainConfig::validate(const ModelConfig& model) const {
    if (p < 2 || k < 2) throw ConfigError("trainer: p and k must both be >= 2");
    if (total_epochs < 1) throw ConfigError("trainer: total_epochs must be >= 1");
    if (decay_epoch < 0 || decay_epoch >= total_epochs)
        throw ConfigError("trainer: decay_epoch must lie in [0, total_epochs)");
    if (base_lr <= 0.0) throw ConfigError("trainer: base_lr must be > 0");
    if (decay_shape != "exponential" && decay_shape != "step")
        throw ConfigError("trainer: decay_shape must be 'exponential' or 'step'");
    if (grad_clip_norm <= 0.0)
        throw ConfigError("trainer: grad_clip_norm must be > 0 (use +inf to disable clipping)");
    if (margin < 0.0) throw ConfigError("trainer: margin must be >= 0");
    if (checkpoint_interval < 1) throw ConfigError("trainer: checkpoint_interval must be >= 1");
    if (eval_interval < 0) throw ConfigError("trainer: eval_interval must be >= 0");
    if (augment.out_height != model.input_height || augment.out_width != model.input_width)
        throw ConfigError("trainer: augmentation output size must match the model input size");
    if (model.ranking_branch && k < 2)
        throw ConfigError("trainer: the ranking branch needs k >= 2");
}

KvList TrainConfig::fingerprint() const {
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    auto fmt3 = [&](const std::array<double, 3>& t) {
        return fmt(t[0]) + "," + fmt(t[1]) + "," + fmt(t[2]);
    };
    return {
        {"p", std::to_string(p)},
        {"k", std::to_string(k)},
        {"total_epochs", std::to_string(total_epochs)},
        {"base_lr", fmt(base_lr)},
        {"decay_epoch", std::to_string(decay_epoch)},
        {"decay_shape", decay_shape},
        {"grad_clip_norm", fmt(grad_clip_norm)},
        {"weight_ranking", fmt(loss_weights.ranking)},
        {"weight_part", fmt(loss_weights.part_cls)},
        {"weight_global", fmt(loss_weights.global_cls)},
        {"margin", fmt(margin)},
        {"seed", std::to_string(seed)},
        {"pixel_mean", fmt3(augment.norm.mean)},
        {"pixel_std", fmt3(augment.norm.stddev)},
    };
}

double lr_at_epoch(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.total_epochs)
        throw std::invalid_argument("lr_at_epoch: epoch " + std::to_string(epoch) +
                                    " outside [0," + std::to_string(cfg.total_epochs) + ")");
    if (epoch < cfg.decay_epoch) return cfg.base_lr;
    if (cfg.decay_shape == "step") {
        int steps = (epoch - cfg.decay_epoch) / cfg.step_decay_every + 1;
        return cfg.base_lr * std::pow(cfg.step_decay_factor, steps);
    }
    double frac = static_cast<double>(epoch - cfg.decay_epoch) /
                  static_cast<double>(cfg.total_epochs - cfg.decay_epoch);
    return cfg.base_lr * std::pow(1e-3, frac);
}

// --- Adam --------------------------------------------------------------------

Adam::Adam(const ParamList& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        m_.push_back(Tensor::zeros(p.var.value().shape()));
        v_.push_back(Tensor::zeros(p.var.value().shape()));
    }
}

void Adam::step(ParamList& params, double lr) {
    if (params.size() != m_.size()) throw std::logic_error("Adam: parameter list changed");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& value = params[i].var.value();
        const Tensor& grad = params[i].var.grad();
        if (grad.empty()) continue;  // parameter untouched by this graph
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            double g = grad[j];
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            value[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

NamedTensors Adam::snapshot(const ParamList& params) const {
    NamedTensors out;
    out.emplace_back("adam.t", Tensor::scalar(static_cast<double>(t_)));
    for (std::size_t i = 0; i < params.size(); ++i) {
        out.emplace_back("adam.m." + params[i].name, m_[i]);
        out.emplace_back("adam.v." + params[i].name, v_[i]);
    }
    return out;
}

void Adam::restore(const ParamList& params, const NamedTensors& stored) {
    m_.assign(params.size(), Tensor());
    v_.assign(params.size(), Tensor());
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : stored) by_name[name] = &t;
    auto fetch = [&](const std::string& name) -> const Tensor& {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw DataError("checkpoint optimizer state missing '" + name + "'");
        return *it->second;
    };
    t_ = static_cast<long long>(fetch("adam.t").item());
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = fetch("adam.m." + params[i].name);
        v_[i] = fetch("adam.v." + params[i].name);
        if (!m_[i].same_shape(params[i].var.value()) || !v_[i].same_shape(params[i].var.value()))
            throw DataError("checkpoint optimizer state has wrong shape for '" + params[i].name + "'");
    }
}

// --- one step ------------------------------------------------------------------

StepStats train_step(DeepPersonNet& net, Adam& adam, const std::vector<Tensor>& images,
                     const std::vector<int>& labels, const TrainConfig& cfg, double lr) {
    if (images.empty() || images.size() != labels.size())
        throw std::invalid_argument("train_step: images and labels must align");
    const ModelConfig& mc = net.config();

    std::vector<Var> rank_embs, part_logits, global_logits;
    for (const Tensor& img : images) {
        ModelOutputs out = net.forward(img);
        if (mc.ranking_branch) rank_embs.push_back(*out.ranking_embedding);
        if (mc.part_branch) part_logits.push_back(*out.part_logits);
        if (mc.global_branch) global_logits.push_back(*out.global_logits);
    }

    std::optional<Var> trp, cls_p, cls_g;
    if (mc.ranking_branch)
        trp = triplet_batch_hard(stack_rows(rank_embs), labels, TripletConfig{cfg.margin});
    if (mc.part_branch) cls_p = identification_loss(stack_rows(part_logits), labels);
    if (mc.global_branch) cls_g = identification_loss(stack_rows(global_logits), labels);

    auto guard_nan = [](const std::optional<Var>& v, const char* name) {
        if (v && !std::isfinite(v->value().item()))
            throw NumericError(std::string("training aborted: ") + name + " loss is not finite");
    };
    guard_nan(trp, "ranking");
    guard_nan(cls_p, "part identification");
    guard_nan(cls_g, "global identification");

    Var total = combined_loss(trp, cls_p, cls_g, cfg.loss_weights);

    ParamList& params = net.parameters();
    zero_grads(params);
    backward(total);

    StepStats stats;
    stats.total = total.value().item();
    stats.ranking = trp ? trp->value().item() : 0.0;
    stats.part_cls = cls_p ? cls_p->value().item() : 0.0;
    stats.global_cls = cls_g ? cls_g->value().item() : 0.0;
    stats.grad_norm = global_grad_norm(params);
    if (!std::isfinite(stats.grad_norm))
        throw NumericError("training aborted: gradient norm is not finite");

    if (std::isfinite(cfg.grad_clip_norm) && stats.grad_norm > cfg.grad_clip_norm) {
        double s = cfg.grad_clip_norm / stats.grad_norm;
        for (auto& p : params)
            if (!p.var.grad().empty()) p.var.grad().scale_(s);
    }
    adam.step(params, lr);
    return stats;
}

// --- extraction ------------------------------------------------------------------

EmbeddingSet extract_embeddings(const DeepPersonNet& net, const DatasetIndex& index, Split split,
                                const AugmentConfig& aug, DescriptorKind kind) {
    NoGradGuard inference;
    std::vector<int> rec_idx = index.split_indices(split);
    EmbeddingSet set;
    bool first = true;
    int d = 0;
    for (std::size_t i = 0; i < rec_idx.size(); ++i) {
        const ImageRecord& rec = index.records[static_cast<std::size_t>(rec_idx[i])];
        Tensor input = preprocess_eval_image(load_image(rec.path), aug);
        ModelOutputs out = net.forward(input);
        Var desc = kind == DescriptorKind::kPooled ? out.ranking() : out.fused();
        if (first) {
            d = desc.value().dim(0);
            set.vectors = Tensor::zeros({static_cast<int>(rec_idx.size()), d});
            first = false;
        }
        double* dst = set.vectors.data() + i * static_cast<std::size_t>(d);
        for (int j = 0; j < d; ++j) dst[j] = desc.value()[static_cast<std::size_t>(j)];
        set.identities.push_back(rec.identity);
        set.cameras.push_back(rec.camera);
    }
    return set;
}

// --- training loop ----------------------------------------------------------------

namespace {

std::string format_metrics_line(int epoch, double lr, double loss, double trp, double cls_p,
                                double cls_g) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "epoch=%d lr=%.17g loss=%.17g loss_trp=%.17g loss_cls_p=%.17g loss_cls_g=%.17g",
                  epoch, lr, loss, trp, cls_p, cls_g);
    return std::string(buf);
}

Checkpoint make_checkpoint(const DeepPersonNet& net, const Adam& adam, const TrainConfig& cfg,
                           const TrainStateSnapshot& state) {
    Checkpoint ckpt;
    ckpt.model_config = net.config().to_kv();
    ckpt.trainer_fingerprint = cfg.fingerprint();
    ckpt.params = snapshot_params(net.parameters());
    ckpt.optimizer = adam.snapshot(net.parameters());
    ckpt.state = state;
    return ckpt;
}

}  // namespace

RunResult run_training(DeepPersonNet& net, const DatasetIndex& index, const TrainConfig& cfg,
                       const std::string& out_dir, const std::string& resume_path,
                       int run_until_epoch) {
    cfg.validate(net.config());
    if (index.num_classes < cfg.p)
        throw DataError("training needs at least p=" + std::to_string(cfg.p) +
                        " identities, dataset has " + std::to_string(index.num_classes));
    int per_epoch = batches_per_epoch(index, cfg.p);
    if (per_epoch < 1) throw DataError("dataset too small for one batch per epoch");

    fs::create_directories(out_dir);
    std::mt19937_64 sampler_rng(cfg.seed);
    Adam adam(net.parameters(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    TrainStateSnapshot state;

    if (!resume_path.empty()) {
        Checkpoint ckpt = load_checkpoint(resume_path);
        std::string model_diff = diff_kv(ckpt.model_config, net.config().to_kv());
        std::string train_diff = diff_kv(ckpt.trainer_fingerprint, cfg.fingerprint());
        if (!model_diff.empty() || !train_diff.empty())
            throw ConfigError("refusing to resume: checkpoint was written under a different "
                              "configuration:\n" + model_diff + train_diff);
        apply_params(ckpt.params, net.parameters());
        adam.restore(net.parameters(), ckpt.optimizer);
        state = ckpt.state;
        std::istringstream is(state.rng_state);
        is >> sampler_rng;
        if (!is) throw DataError("checkpoint: malformed rng state");
    }

    std::ofstream metrics(fs::path(out_dir) / "metrics.log",
                          resume_path.empty() ? std::ios::trunc : std::ios::app);
    if (!metrics) throw DataError("cannot open metrics log in " + out_dir);
    std::ofstream eval_log;

    bool has_eval_splits = !index.split_indices(Split::kQuery).empty() &&
                           !index.split_indices(Split::kGallery).empty();

    int stop_epoch = run_until_epoch >= 0 ? std::min(run_until_epoch, cfg.total_epochs)
                                          : cfg.total_epochs;
    RunResult result;
    result.best_map = state.best_map;
    for (int epoch = state.epoch; epoch < stop_epoch; ++epoch) {
        double lr = lr_at_epoch(epoch, cfg);
        double sum_total = 0, sum_trp = 0, sum_p = 0, sum_g = 0;
        for (int b = 0; b < per_epoch; ++b) {
            PKBatch batch = pk_sample(index, cfg.p, cfg.k, sampler_rng);
            std::vector<Tensor> images;
            images.reserve(batch.record_indices.size());
            for (std::size_t slot = 0; slot < batch.record_indices.size(); ++slot) {
                const ImageRecord& rec =
                    index.records[static_cast<std::size_t>(batch.record_indices[slot])];
                std::mt19937_64 aug_rng(
                    mix_seed(cfg.seed, static_cast<std::uint64_t>(state.global_step),
                             static_cast<std::uint64_t>(slot)));
                images.push_back(augment_train_image(load_image(rec.path), cfg.augment, aug_rng));
            }
            StepStats stats;
            try {
                stats = train_step(net, adam, images, batch.labels, cfg, lr);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(b) + ")");
            }
            sum_total += stats.total;
            sum_trp += stats.ranking;
            sum_p += stats.part_cls;
            sum_g += stats.global_cls;
            ++state.global_step;
        }
        metrics << format_metrics_line(epoch, lr, sum_total / per_epoch, sum_trp / per_epoch,
                                       sum_p / per_epoch, sum_g / per_epoch)
                << "\n";
        metrics.flush();

        state.epoch = epoch + 1;
        state.batch_in_epoch = 0;

        bool do_eval = has_eval_splits && cfg.eval_interval > 0 &&
                       ((epoch + 1) % cfg.eval_interval == 0 || epoch + 1 == cfg.total_epochs);
        if (do_eval) {
            EmbeddingSet q = extract_embeddings(net, index, Split::kQuery, cfg.augment,
                                                DescriptorKind::kPooled);
            EmbeddingSet g = extract_embeddings(net, index, Split::kGallery, cfg.augment,
                                                DescriptorKind::kPooled);
            EvalReport report = evaluate(q, g, EvalMode::kSingle, cfg.eval_rank_max);
            if (!eval_log.is_open()) {
                eval_log.open(fs::path(out_dir) / "eval.log",
                              resume_path.empty() ? std::ios::trunc : std::ios::app);
            }
            char buf[128];
            std::snprintf(buf, sizeof buf, "epoch=%d rank1=%.6f mAP=%.6f", epoch,
                          report.cmc.empty() ? 0.0 : report.cmc[0], report.mean_ap);
            eval_log << buf << "\n";
            eval_log.flush();
            if (report.mean_ap > state.best_map) {
                state.best_map = report.mean_ap;
                state.best_epoch = epoch;
                std::ostringstream rng_os;
                rng_os << sampler_rng;
                state.rng_state = rng_os.str();
                std::string best_path = (fs::path(out_dir) / "best.ckpt").string();
                save_checkpoint(best_path, make_checkpoint(net, adam, cfg, state));
                result.best_checkpoint = best_path;
            }
        }

        if ((epoch + 1) % cfg.checkpoint_interval == 0 || epoch + 1 == cfg.total_epochs) {
            std::ostringstream rng_os;
            rng_os << sampler_rng;
            state.rng_state = rng_os.str();
            std::string latest = (fs::path(out_dir) / "latest.ckpt").string();
            save_checkpoint(latest, make_checkpoint(net, adam, cfg, state));
            result.final_checkpoint = latest;
        }
        result.epochs_run = epoch + 1;
    }
    result.best_map = state.best_map;
    if (result.final_checkpoint.empty()) {
        std::ostringstream rng_os;
        rng_os << sampler_rng;
        state.rng_state = rng_os.str();
        std::string latest = (fs::path(out_dir) / "latest.ckpt").string();
        save_checkpoint(latest, make_checkpoint(net, adam, cfg, state));
        result.final_checkpoint = latest;
    }
    return result;
}

}  // namespace deepperson
