// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end checks of the command-line tool. The binary path arrives via
// the DEEPPERSON_BIN environment variable (set by ctest).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "deepperson/config.hpp"

namespace fs = std::filesystem;
using namespace deepperson;

namespace {

std::string bin() {
    const char* b = std::getenv("DEEPPERSON_BIN");
    REQUIRE_MESSAGE(b != nullptr, "DEEPPERSON_BIN must point at the CLI binary");
    return b;
}

struct RunOutput {
    int exit_code = -1;
    std::string stdout_text;
    std::string stderr_text;
};

RunOutput run_cli(const std::string& args, const std::string& workdir) {
    fs::path out = fs::path(workdir) / "stdout.txt";
    fs::path err = fs::path(workdir) / "stderr.txt";
    std::string cmd = bin() + " " + args + " >" + out.string() + " 2>" + err.string();
    int rc = std::system(cmd.c_str());
    RunOutput result;
    result.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    auto slurp = [](const fs::path& p) {
        std::ifstream is(p);
        return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    };
    result.stdout_text = slurp(out);
    result.stderr_text = slurp(err);
    return result;
}

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("deepperson_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

// One tiny dataset + trained checkpoint shared by all test cases.
struct Workspace {
    fs::path base = fresh_dir("ws");
    fs::path data = base / "data";
    fs::path run = base / "run";
    std::string tiny_model_args =
        " --set model.depth=3 --set model.width_base=4 --set model.channels=8"
        " --set model.lstm_hidden=4 --set model.global_fc_dim=8"
        " --set model.input_height=64 --set model.input_width=32";

    Workspace() {
        RunOutput gen = run_cli("synth-gen --set data.root=" + data.string() +
                                    " --set data.synth_ids=4 --set data.synth_train_per_id=4"
                                    " --set data.synth_query_per_id=1 --set data.synth_gallery_per_id=2"
                                    " --seed 3",
                                base.string());
        REQUIRE(gen.exit_code == 0);
        RunOutput train = run_cli(
            "train --set data.root=" + data.string() + tiny_model_args +
                " --set trainer.p=2 --set trainer.k=2 --set trainer.epochs=2"
                " --set trainer.decay_epoch=1 --set trainer.eval_interval=0 --seed 3 --out " +
                run.string(),
            base.string());
        REQUIRE_MESSAGE(train.exit_code == 0, train.stderr_text);
    }
};

Workspace& workspace() {
    static Workspace ws;
    return ws;
}

}  // namespace

TEST_CASE("cli: synth-gen and train produce the expected artifacts") {
    Workspace& ws = workspace();
    CHECK(fs::exists(ws.data / "bounding_box_train"));
    CHECK(fs::exists(ws.data / "query"));
    CHECK(fs::exists(ws.data / "bounding_box_test"));
    CHECK(fs::exists(ws.run / "latest.ckpt"));
    CHECK(fs::exists(ws.run / "metrics.log"));
    CHECK(fs::exists(ws.run / "resolved.cfg"));

    // The echoed config is reloadable and reflects the overrides.
    RunConfig cfg = resolve_config(ConfigMap::parse_file((ws.run / "resolved.cfg").string()));
    CHECK(cfg.model.depth == 3);
    CHECK(cfg.trainer.total_epochs == 2);
    CHECK(cfg.model.num_classes == 4);  // derived from the dataset and echoed

    std::string metrics = read_file(ws.run / "metrics.log");
    CHECK(metrics.find("loss_cls_g=") != std::string::npos);
}

TEST_CASE("cli: unknown config keys are refused with a suggestion") {
    Workspace& ws = workspace();
    RunOutput out = run_cli("train --set model.depht=5", ws.base.string());
    CHECK(out.exit_code == 2);
    CHECK(out.stderr_text.find("depth") != std::string::npos);

    RunOutput out2 = run_cli("train --set trainer.epochs=abc", ws.base.string());
    CHECK(out2.exit_code == 2);

    // Ablation toggle parses and is echoed (config validation only, no data).
    RunOutput out3 = run_cli("train --set model.part_uses_lstm=false", ws.base.string());
    CHECK(out3.exit_code != 0);  // still fails later for lack of data.root
    CHECK(out3.stderr_text.find("unknown key") == std::string::npos);
}

TEST_CASE("cli: missing dataset root is a data/config error") {
    Workspace& ws = workspace();
    RunOutput out = run_cli("train", ws.base.string());
    CHECK(out.exit_code == 2);  // no data.root configured
    RunOutput out2 = run_cli("train --set data.root=/nonexistent/path56789", ws.base.string());
    CHECK(out2.exit_code == 3);  // configured but absent
}

TEST_CASE("cli: eval writes the report and is byte-reproducible") {
    Workspace& ws = workspace();
    fs::path eval1 = ws.base / "eval1";
    fs::path eval2 = ws.base / "eval2";
    std::string args = "eval --checkpoint " + (ws.run / "latest.ckpt").string() +
                       " --set data.root=" + ws.data.string();
    RunOutput a = run_cli(args + " --out " + eval1.string(), ws.base.string());
    REQUIRE_MESSAGE(a.exit_code == 0, a.stderr_text);
    RunOutput b = run_cli(args + " --out " + eval2.string(), ws.base.string());
    REQUIRE(b.exit_code == 0);

    std::string report = read_file(eval1 / "report.txt");
    CHECK(report.find("rank1=") != std::string::npos);
    CHECK(report.find("rank5=") != std::string::npos);
    CHECK(report.find("rank10=") != std::string::npos);
    CHECK(report.find("mAP=") != std::string::npos);
    CHECK(report == read_file(eval2 / "report.txt"));
    CHECK(read_file(eval1 / "per_query_ap.tsv") == read_file(eval2 / "per_query_ap.tsv"));
    CHECK(a.stdout_text.find("mAP=") != std::string::npos);

    // Multi-query mode works on the same artifacts.
    RunOutput c = run_cli(args + " --set eval.mode=multi --out " + (ws.base / "eval3").string(),
                          ws.base.string());
    CHECK(c.exit_code == 0);
}

TEST_CASE("cli: fused descriptor needs both branches in the checkpoint") {
    Workspace& ws = workspace();
    fs::path run2 = ws.base / "run_noPart";
    RunOutput train = run_cli(
        "train --set data.root=" + ws.data.string() + ws.tiny_model_args +
            " --set model.part_branch=false"
            " --set trainer.p=2 --set trainer.k=2 --set trainer.epochs=1"
            " --set trainer.decay_epoch=0 --set trainer.eval_interval=0 --seed 4 --out " +
            run2.string(),
        ws.base.string());
    REQUIRE_MESSAGE(train.exit_code == 0, train.stderr_text);
    RunOutput out = run_cli("eval --checkpoint " + (run2 / "latest.ckpt").string() +
                                " --set data.root=" + ws.data.string() +
                                " --set eval.descriptor=fused --out " + (ws.base / "evalf").string(),
                            ws.base.string());
    CHECK(out.exit_code == 2);
    CHECK(out.stderr_text.find("fused") != std::string::npos);
}

TEST_CASE("cli: extract descriptor files") {
    Workspace& ws = workspace();
    // Three real images plus one unreadable row.
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(ws.data / "query")) {
        paths.push_back(entry.path().string());
        if (paths.size() == 3) break;
    }
    REQUIRE(paths.size() == 3);
    fs::path list = ws.base / "images.txt";
    {
        std::ofstream os(list);
        for (const auto& p : paths) os << p << "\n";
        os << (ws.base / "absent.png").string() << "\n";
    }
    fs::path outfile = ws.base / "descriptors.tsv";
    std::string args = "extract --checkpoint " + (ws.run / "latest.ckpt").string() + " --images " +
                       list.string() + " --output " + outfile.string();
    RunOutput a = run_cli(args, ws.base.string());
    REQUIRE_MESSAGE(a.exit_code == 0, a.stderr_text);

    std::ifstream is(outfile);
    std::string line;
    int rows = 0, error_rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        auto tab = line.find('\t');
        REQUIRE(tab != std::string::npos);
        if (line.find("ERROR", tab) != std::string::npos) {
            ++error_rows;
            continue;
        }
        int commas = 0;
        for (char ch : line.substr(tab + 1))
            if (ch == ',') ++commas;
        CHECK(commas == 7);  // 8 channels -> 8 values per row
    }
    CHECK(rows == 4);
    CHECK(error_rows == 1);

    // Extraction twice gives identical bytes; an empty list gives an empty file.
    RunOutput b = run_cli("extract --checkpoint " + (ws.run / "latest.ckpt").string() +
                              " --images " + list.string() + " --output " +
                              (ws.base / "descriptors2.tsv").string(),
                          ws.base.string());
    REQUIRE(b.exit_code == 0);
    CHECK(read_file(outfile) == read_file(ws.base / "descriptors2.tsv"));

    fs::path empty_list = ws.base / "empty.txt";
    std::ofstream(empty_list).close();
    RunOutput c = run_cli("extract --checkpoint " + (ws.run / "latest.ckpt").string() +
                              " --images " + empty_list.string() + " --output " +
                              (ws.base / "empty.tsv").string(),
                          ws.base.string());
    CHECK(c.exit_code == 0);
    CHECK(read_file(ws.base / "empty.tsv").empty());
}

TEST_CASE("cli: heatmap renders an overlay image") {
    Workspace& ws = workspace();
    std::string image;
    for (const auto& entry : fs::directory_iterator(ws.data / "query")) {
        image = entry.path().string();
        break;
    }
    fs::path outfile = ws.base / "heat.png";
    RunOutput a = run_cli("heatmap --checkpoint " + (ws.run / "latest.ckpt").string() +
                              " --image " + image + " --output " + outfile.string() + " --out " +
                              ws.base.string(),
                          ws.base.string());
    REQUIRE_MESSAGE(a.exit_code == 0, a.stderr_text);
    CHECK(fs::exists(outfile));
    CHECK(fs::file_size(outfile) > 0);
}

TEST_CASE("cli: usage errors exit with the config code") {
    Workspace& ws = workspace();
    RunOutput a = run_cli("eval", ws.base.string());  // missing required --checkpoint
    CHECK(a.exit_code == 2);
    RunOutput b = run_cli("frobnicate", ws.base.string());
    CHECK(b.exit_code == 2);
}
