// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "deepperson/config.hpp"
#include "deepperson/errors.hpp"

namespace fs = std::filesystem;
using namespace deepperson;

TEST_CASE("config text parsing: sections, comments, qualified keys") {
    ConfigMap map = ConfigMap::parse_text(
        "# a comment\n"
        "[model]\n"
        "depth = 3\n"
        "channels = 16   # trailing comment\n"
        "\n"
        "trainer.epochs = 5\n"
        "[trainer]\n"
        "p = 4\n");
    CHECK(map.get("model.depth") == "3");
    CHECK(map.get("model.channels") == "16");
    CHECK(map.get("trainer.epochs") == "5");
    CHECK(map.get("trainer.p") == "4");
    CHECK(!map.has("trainer.k"));

    CHECK_THROWS_AS(ConfigMap::parse_text("[model\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(ConfigMap::parse_text("just words\n"), ConfigError);
}

TEST_CASE("unknown keys are refused with a suggestion") {
    ConfigMap map;
    CHECK_THROWS_WITH_AS(map.set("model.depht", "5"), doctest::Contains("model.depth"), ConfigError);
    CHECK_THROWS_WITH_AS(map.set("trainer.epoch", "5"), doctest::Contains("trainer.epochs"),
                         ConfigError);
    CHECK_THROWS_AS(map.set("nonsense.zzz.qqq", "1"), ConfigError);
    CHECK(suggest_config_key("model.depht") == "model.depth");
}

TEST_CASE("resolution applies defaults, types, and validation") {
    ConfigMap map;
    RunConfig defaults = resolve_config(map);
    CHECK(defaults.model.input_height == 256);
    CHECK(defaults.model.channels == 2048);
    CHECK(defaults.trainer.p * defaults.trainer.k == 128);
    CHECK(defaults.trainer.base_lr == 3e-4);
    CHECK(defaults.trainer.total_epochs == 150);
    CHECK(defaults.trainer.decay_epoch == 100);
    CHECK(defaults.trainer.margin == 0.5);
    CHECK(defaults.eval.mode == EvalMode::kSingle);
    CHECK(defaults.eval.descriptor == DescriptorKind::kPooled);

    map.set("model.depth", "3");
    map.set("model.input_height", "64");
    map.set("model.input_width", "32");
    map.set("trainer.grad_clip_norm", "inf");
    map.set("data.mean", "0.4,0.5,0.6");
    RunConfig cfg = resolve_config(map);
    CHECK(cfg.model.depth == 3);
    CHECK(std::isinf(cfg.trainer.grad_clip_norm));
    CHECK(cfg.trainer.augment.norm.mean[2] == 0.6);
    CHECK(cfg.trainer.augment.out_height == 64);  // follows the model input

    ConfigMap bad;
    bad.set("trainer.p", "four");
    CHECK_THROWS_AS(resolve_config(bad), ConfigError);
    ConfigMap bad2;
    bad2.set("eval.mode", "both");
    CHECK_THROWS_AS(resolve_config(bad2), ConfigError);
    ConfigMap bad3;
    bad3.set("heatmap.alpha", "1.5");
    CHECK_THROWS_AS(resolve_config(bad3), ConfigError);
}

TEST_CASE("file overrides defaults, command line overrides file") {
    fs::path dir = fs::temp_directory_path() / "deepperson_cfg_test";
    fs::create_directories(dir);
    std::ofstream(dir / "a.cfg") << "[trainer]\nepochs = 30\nseed = 5\n";
    ConfigMap file_map = ConfigMap::parse_file((dir / "a.cfg").string());
    ConfigMap overrides;
    overrides.set("trainer.epochs", "10");
    file_map.merge(overrides);
    RunConfig cfg = resolve_config(file_map);
    CHECK(cfg.trainer.total_epochs == 10);  // command line wins
    CHECK(cfg.trainer.seed == 5);           // file still applies elsewhere

    CHECK_THROWS_AS(ConfigMap::parse_file((dir / "missing.cfg").string()), ConfigError);
}

TEST_CASE("echoed config reloads to the identical configuration") {
    ConfigMap map;
    map.set("model.depth", "4");
    map.set("model.input_height", "128");
    map.set("model.input_width", "64");
    map.set("model.part_uses_lstm", "false");
    map.set("trainer.epochs", "12");
    map.set("trainer.decay_epoch", "8");
    map.set("eval.descriptor", "fused");
    RunConfig cfg = resolve_config(map);

    std::string text = echo_config(cfg);
    RunConfig back = resolve_config(ConfigMap::parse_text(text));
    CHECK(echo_config(back) == text);
    CHECK(back.model.part_uses_lstm == false);
    CHECK(back.trainer.total_epochs == 12);
    CHECK(back.eval.descriptor == DescriptorKind::kFused);
}
