// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deepperson/config.hpp"
#include "deepperson/errors.hpp"
#include "deepperson/heatmap.hpp"

namespace fs = std::filesystem;
using namespace deepperson;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "run";
};

void attach_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "configuration file");
    cmd->add_option("--set", args.overrides, "override: section.key=value")->take_all();
    cmd->add_option("--seed", args.seed, "run seed (overrides trainer.seed and data.synth_seed)");
    cmd->add_option("--out", args.out_dir, "output directory");
}

RunConfig resolve(const CommonArgs& args) {
    ConfigMap map;
    if (!args.config_path.empty()) map = ConfigMap::parse_file(args.config_path);
    for (const std::string& kv : args.overrides) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects section.key=value, got '" + kv + "'");
        map.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.seed) {
        map.set("trainer.seed", std::to_string(*args.seed));
        map.set("data.synth_seed", std::to_string(*args.seed));
    }
    if (!map.has("data.root")) {
        if (const char* env = std::getenv("DEEPPERSON_DATA_ROOT"); env && *env)
            map.set("data.root", env);
    }
    return resolve_config(map);
}

std::string require_data_root(const RunConfig& cfg) {
    if (cfg.data.root.empty())
        throw ConfigError("no dataset root: set data.root or DEEPPERSON_DATA_ROOT");
    return cfg.data.root;
}

PixelNorm norm_from_fingerprint(const KvList& kv, PixelNorm fallback) {
    auto parse3 = [](const std::string& s, std::array<double, 3>& out) {
        if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &out[0], &out[1], &out[2]) != 3)
            throw DataError("checkpoint: malformed pixel normalization entry '" + s + "'");
    };
    for (const auto& [k, v] : kv) {
        if (k == "pixel_mean") parse3(v, fallback.mean);
        if (k == "pixel_std") parse3(v, fallback.stddev);
    }
    return fallback;
}

struct LoadedModel {
    ModelConfig config;
    std::unique_ptr<DeepPersonNet> net;
    PixelNorm norm;
};

LoadedModel load_model(const std::string& ckpt_path, const PixelNorm& fallback_norm) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    LoadedModel lm;
    lm.config = ModelConfig::from_kv(ckpt.model_config);
    lm.net = std::make_unique<DeepPersonNet>(lm.config, 0);
    apply_params(ckpt.params, lm.net->parameters());
    lm.norm = norm_from_fingerprint(ckpt.trainer_fingerprint, fallback_norm);
    return lm;
}

AugmentConfig eval_preprocess(const ModelConfig& mc, const PixelNorm& norm) {
    AugmentConfig pre;
    pre.out_height = mc.input_height;
    pre.out_width = mc.input_width;
    pre.norm = norm;
    return pre;
}

int cmd_train(const CommonArgs& args, const std::string& resume) {
    RunConfig cfg = resolve(args);
    DatasetIndex index = load_dataset_index(require_data_root(cfg));
    if (cfg.model.num_classes == 0) {
        cfg.model.num_classes = index.num_classes;
    } else if (cfg.model.num_classes != index.num_classes) {
        throw ConfigError("model.num_classes=" + std::to_string(cfg.model.num_classes) +
                          " but the dataset has " + std::to_string(index.num_classes) +
                          " training identities (set 0 to derive)");
    }
    cfg.model.finalize();
    cfg.trainer.validate(cfg.model);

    fs::create_directories(args.out_dir);
    std::string echoed = echo_config(cfg);
    std::cout << echoed;  // provenance: the resolved configuration
    std::ofstream(fs::path(args.out_dir) / "resolved.cfg") << echoed;

    DeepPersonNet net(cfg.model, cfg.trainer.seed);
    RunResult result = run_training(net, index, cfg.trainer, args.out_dir, resume);
    std::cout << "trained " << result.epochs_run << " epochs; checkpoint: " << result.final_checkpoint;
    if (!result.best_checkpoint.empty())
        std::cout << "; best mAP " << result.best_map << " at " << result.best_checkpoint;
    std::cout << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& ckpt_path) {
    RunConfig cfg = resolve(args);
    LoadedModel lm = load_model(ckpt_path, cfg.trainer.augment.norm);
    if (cfg.eval.descriptor == DescriptorKind::kFused &&
        (!lm.config.part_branch || !lm.config.global_branch))
        throw ConfigError("the fused descriptor needs a checkpoint trained with both the part and "
                          "global branches enabled");
    DatasetIndex index = load_dataset_index(require_data_root(cfg));
    AugmentConfig pre = eval_preprocess(lm.config, lm.norm);
    EmbeddingSet q = extract_embeddings(*lm.net, index, Split::kQuery, pre, cfg.eval.descriptor);
    EmbeddingSet g = extract_embeddings(*lm.net, index, Split::kGallery, pre, cfg.eval.descriptor);
    EvalReport report = evaluate(q, g, cfg.eval.mode, cfg.eval.rank_max);

    fs::create_directories(args.out_dir);
    std::string text = report_to_string(report);
    std::cout << text;
    std::ofstream(fs::path(args.out_dir) / "report.txt") << text;
    std::ofstream ap_file(fs::path(args.out_dir) / "per_query_ap.tsv");
    write_per_query_ap(report, ap_file);
    return 0;
}

int cmd_extract(const CommonArgs& args, const std::string& ckpt_path, const std::string& list_path,
                const std::string& output) {
    RunConfig cfg = resolve(args);
    LoadedModel lm = load_model(ckpt_path, cfg.trainer.augment.norm);
    if (cfg.eval.descriptor == DescriptorKind::kFused &&
        (!lm.config.part_branch || !lm.config.global_branch))
        throw ConfigError("the fused descriptor needs a checkpoint trained with both the part and "
                          "global branches enabled");
    AugmentConfig pre = eval_preprocess(lm.config, lm.norm);

    std::ifstream list(list_path);
    if (!list) throw DataError("cannot open image list: " + list_path);
    fs::create_directories(fs::path(output).parent_path().empty() ? "." : fs::path(output).parent_path().string());
    std::ofstream out(output);
    if (!out) throw DataError("cannot open output file: " + output);

    NoGradGuard inference;
    std::string path;
    char num[32];
    while (std::getline(list, path)) {
        if (path.empty()) continue;
        try {
            Tensor input = preprocess_eval_image(load_image(path), pre);
            ModelOutputs mo = lm.net->forward(input);
            Var desc = cfg.eval.descriptor == DescriptorKind::kPooled ? mo.ranking() : mo.fused();
            out << path << "\t";
            const Tensor& v = desc.value();
            for (std::size_t i = 0; i < v.size(); ++i) {
                std::snprintf(num, sizeof num, "%.9g", static_cast<double>(static_cast<float>(v[i])));
                if (i) out << ",";
                out << num;
            }
            out << "\n";
        } catch (const DataError& e) {
            std::cerr << "warning: " << e.what() << "\n";
            out << path << "\tERROR " << e.what() << "\n";
        }
    }
    return 0;
}

int cmd_heatmap(const CommonArgs& args, const std::string& ckpt_path, const std::string& image_path,
                std::string output) {
    RunConfig cfg = resolve(args);
    LoadedModel lm = load_model(ckpt_path, cfg.trainer.augment.norm);
    RgbImage image = load_image(image_path);
    AugmentConfig pre = eval_preprocess(lm.config, lm.norm);
    HeatmapResult result = render_heatmap(*lm.net, image, pre, cfg.heatmap_alpha);
    fs::create_directories(args.out_dir);
    if (output.empty()) output = (fs::path(args.out_dir) / "heatmap.png").string();
    save_image(output, result.overlay);
    std::cout << "heatmap written to " << output << "\n";
    return 0;
}

int cmd_synth_gen(const CommonArgs& args) {
    RunConfig cfg = resolve(args);
    std::string root = require_data_root(cfg);
    DatasetIndex index = generate_synthetic_dataset(root, cfg.data.synth);
    std::cout << "synthetic dataset at " << root << ": " << index.num_classes << " identities, "
              << index.split_indices(Split::kTrain).size() << " train / "
              << index.split_indices(Split::kQuery).size() << " query / "
              << index.split_indices(Split::kGallery).size() << " gallery images\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deepperson: three-branch metric learning for person retrieval"};
    app.require_subcommand(1);

    CommonArgs train_args, eval_args, extract_args, heatmap_args, synth_args;
    std::string resume, eval_ckpt, extract_ckpt, extract_list, extract_out = "descriptors.tsv";
    std::string heatmap_ckpt, heatmap_image, heatmap_out;

    CLI::App* train = app.add_subcommand("train", "train a model");
    attach_common(train, train_args);
    train->add_option("--resume", resume, "checkpoint to resume from");

    CLI::App* eval = app.add_subcommand("eval", "retrieval evaluation of a checkpoint");
    attach_common(eval, eval_args);
    eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();

    CLI::App* extract = app.add_subcommand("extract", "write descriptors for an image list");
    attach_common(extract, extract_args);
    extract->add_option("--checkpoint", extract_ckpt, "model checkpoint")->required();
    extract->add_option("--images", extract_list, "text file with one image path per line")->required();
    extract->add_option("--output", extract_out, "output descriptor file");

    CLI::App* heatmap = app.add_subcommand("heatmap", "render a feature-energy overlay");
    attach_common(heatmap, heatmap_args);
    heatmap->add_option("--checkpoint", heatmap_ckpt, "model checkpoint")->required();
    heatmap->add_option("--image", heatmap_image, "input image")->required();
    heatmap->add_option("--output", heatmap_out, "output overlay image");

    CLI::App* synth = app.add_subcommand("synth-gen", "generate a synthetic dataset");
    attach_common(synth, synth_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems are configuration errors
    }

    try {
        if (train->parsed()) return cmd_train(train_args, resume);
        if (eval->parsed()) return cmd_eval(eval_args, eval_ckpt);
        if (extract->parsed()) return cmd_extract(extract_args, extract_ckpt, extract_list, extract_out);
        if (heatmap->parsed()) return cmd_heatmap(heatmap_args, heatmap_ckpt, heatmap_image, heatmap_out);
        if (synth->parsed()) return cmd_synth_gen(synth_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
