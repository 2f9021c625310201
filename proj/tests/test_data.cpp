// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "deepperson/data.hpp"
#include "deepperson/errors.hpp"
#include "deepperson/heatmap.hpp"

namespace fs = std::filesystem;
using namespace deepperson;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("deepperson_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

SynthConfig small_synth() {
    SynthConfig cfg;
    cfg.num_ids = 4;
    cfg.train_per_id = 6;
    cfg.query_per_id = 2;
    cfg.gallery_per_id = 4;
    cfg.height = 64;
    cfg.width = 32;
    cfg.seed = 9;
    return cfg;
}

}  // namespace

TEST_CASE("market filename parsing") {
    auto p = parse_market_filename("0002_c1s1_000451_03.jpg");
    REQUIRE(p.has_value());
    CHECK(p->first == 2);
    CHECK(p->second == 1);

    p = parse_market_filename("-1_c3s2_000001_00.jpg");
    REQUIRE(p.has_value());
    CHECK(p->first == -1);
    CHECK(p->second == 3);

    p = parse_market_filename("1377_c12s1_0.png");
    REQUIRE(p.has_value());
    CHECK(p->second == 12);

    CHECK(!parse_market_filename("readme.txt").has_value());
    CHECK(!parse_market_filename("abc_c1.jpg").has_value());
    CHECK(!parse_market_filename("0001_x1.jpg").has_value());
    CHECK(!parse_market_filename("_c1.jpg").has_value());
}

TEST_CASE("synthetic dataset: counts, layout, and index") {
    fs::path root = fresh_dir("synth_counts");
    SynthConfig cfg = small_synth();
    cfg.num_ids = 8;
    cfg.train_per_id = 16;
    DatasetIndex index = generate_synthetic_dataset(root.string(), cfg);
    CHECK(index.num_classes == 8);
    CHECK(index.split_indices(Split::kTrain).size() == 128);
    CHECK(index.split_indices(Split::kQuery).size() == 8 * cfg.query_per_id);
    CHECK(index.split_indices(Split::kGallery).size() ==
          8 * cfg.gallery_per_id + cfg.junk_gallery);

    // Reload from disk: identical ordering and metadata, junk flagged.
    DatasetIndex loaded = load_dataset_index(root.string());
    CHECK(loaded.num_classes == 8);
    REQUIRE(loaded.records.size() == index.records.size());
    int junk = 0;
    for (const auto& r : loaded.records)
        if (r.identity == -1) ++junk;
    CHECK(junk == cfg.junk_gallery);

    DatasetIndex again = load_dataset_index(root.string());
    REQUIRE(again.records.size() == loaded.records.size());
    for (std::size_t i = 0; i < loaded.records.size(); ++i) {
        CHECK(again.records[i].path == loaded.records[i].path);
        CHECK(again.records[i].identity == loaded.records[i].identity);
    }
    for (std::size_t i = 1; i < loaded.records.size(); ++i) {
        if (loaded.records[i].split == loaded.records[i - 1].split)
            CHECK(loaded.records[i].path > loaded.records[i - 1].path);
    }
}

TEST_CASE("loader skips unparseable names and rejects empty splits") {
    fs::path root = fresh_dir("synth_badfiles");
    generate_synthetic_dataset(root.string(), small_synth());
    // An image-suffixed file that does not follow the naming convention.
    save_image((root / "bounding_box_train" / "notes.png").string(), RgbImage::filled(4, 4, 0, 0, 0));
    DatasetIndex index = load_dataset_index(root.string());
    for (const auto& r : index.records) CHECK(r.path.find("notes.png") == std::string::npos);

    fs::path empty_root = fresh_dir("synth_empty");
    fs::create_directories(empty_root / "bounding_box_train");
    fs::create_directories(empty_root / "query");
    fs::create_directories(empty_root / "bounding_box_test");
    CHECK_THROWS_AS(load_dataset_index(empty_root.string()), DataError);
    CHECK_THROWS_AS(load_dataset_index((empty_root / "nowhere").string()), DataError);
}

TEST_CASE("synthetic rendering is deterministic per seed") {
    SynthConfig cfg = small_synth();
    RgbImage a = render_synthetic_image(cfg, 3, 5);
    RgbImage b = render_synthetic_image(cfg, 3, 5);
    REQUIRE(a.pixels.size() == b.pixels.size());
    for (std::size_t i = 0; i < a.pixels.size(); ++i) CHECK(a.pixels[i] == b.pixels[i]);

    cfg.seed = 10;
    RgbImage c = render_synthetic_image(cfg, 3, 5);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.pixels.size(); ++i)
        if (a.pixels[i] != c.pixels[i]) { any_diff = true; break; }
    CHECK(any_diff);

    // File-level determinism: two generations write byte-identical images.
    fs::path r1 = fresh_dir("synth_det1"), r2 = fresh_dir("synth_det2");
    generate_synthetic_dataset(r1.string(), small_synth());
    generate_synthetic_dataset(r2.string(), small_synth());
    auto read_bytes = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    };
    for (const auto& entry : fs::directory_iterator(r1 / "bounding_box_train")) {
        fs::path other = r2 / "bounding_box_train" / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(read_bytes(entry.path()) == read_bytes(other));
    }
}

TEST_CASE("pixel 1-NN on raw renders beats chance but stays imperfect") {
    SynthConfig cfg = small_synth();
    cfg.num_ids = 8;
    cfg.train_per_id = 8;
    cfg.query_per_id = 4;
    cfg.occlusion_prob = 0.45;
    cfg.blur_sigma_max = 1.2;
    auto flat = [&](int id, int idx) {
        RgbImage img = render_synthetic_image(cfg, id, idx);
        return img.pixels;
    };
    std::vector<std::vector<float>> train_px;
    std::vector<int> train_id;
    for (int id = 1; id <= cfg.num_ids; ++id)
        for (int i = 0; i < cfg.train_per_id; ++i) {
            train_px.push_back(flat(id, i));
            train_id.push_back(id);
        }
    int correct = 0, total = 0;
    for (int id = 1; id <= cfg.num_ids; ++id)
        for (int i = 0; i < cfg.query_per_id; ++i) {
            auto probe = flat(id, cfg.train_per_id + i);  // held-out render
            double best = 1e300;
            int best_id = -1;
            for (std::size_t t = 0; t < train_px.size(); ++t) {
                double ssq = 0.0;
                for (std::size_t k = 0; k < probe.size(); ++k) {
                    double d = probe[k] - train_px[t][k];
                    ssq += d * d;
                }
                if (ssq < best) { best = ssq; best_id = train_id[t]; }
            }
            correct += best_id == id;
            ++total;
        }
    double acc = static_cast<double>(correct) / total;
    CHECK(acc > 1.0 / cfg.num_ids);  // above chance: the task is learnable
    CHECK(acc < 1.0);                // below perfect: nuisances matter
}

TEST_CASE("pk sampling honors the multiplicity contract") {
    std::vector<ImageRecord> records;
    for (int id = 10; id < 10 + 751; ++id)
        for (int j = 0; j < 5; ++j)
            records.push_back({"mem://" + std::to_string(id) + "_" + std::to_string(j), id, 0,
                               Split::kTrain});
    DatasetIndex index = build_index(std::move(records));
    CHECK(index.num_classes == 751);
    CHECK(batches_per_epoch(index, 32) == 23);

    std::mt19937_64 rng(4);
    PKBatch b32 = pk_sample(index, 32, 4, rng);
    CHECK(b32.record_indices.size() == 128);
    PKBatch b16 = pk_sample(index, 16, 8, rng);
    CHECK(b16.record_indices.size() == 128);

    for (int trial = 0; trial < 50; ++trial) {
        PKBatch b = pk_sample(index, 7, 3, rng);
        b.validate();  // throws on any contract violation
        std::map<int, int> seen;
        for (int l : b.labels) seen[l]++;
        CHECK(seen.size() == 7);
        for (auto& [l, n] : seen) CHECK(n == 3);
    }
}

TEST_CASE("pk sampling replacement and error paths") {
    std::vector<ImageRecord> records;
    records.push_back({"mem://a", 1, 0, Split::kTrain});  // a single image
    for (int j = 0; j < 6; ++j)
        records.push_back({"mem://b" + std::to_string(j), 2, 0, Split::kTrain});
    DatasetIndex index = build_index(std::move(records));

    std::mt19937_64 rng(1);
    PKBatch batch = pk_sample(index, 2, 4, rng);
    int repeats = 0;
    for (std::size_t i = 0; i < batch.record_indices.size(); ++i)
        if (index.records[static_cast<std::size_t>(batch.record_indices[i])].identity == 1) ++repeats;
    CHECK(repeats == 4);  // the one image of identity 1, sampled with replacement

    CHECK_THROWS_AS(pk_sample(index, 3, 2, rng), DataError);  // only 2 identities
    CHECK_THROWS_AS(pk_sample(index, 2, 1, rng), DataError);  // k < 2
}

TEST_CASE("crop draw: boundary parameters give the full image") {
    AugmentConfig cfg;
    cfg.scale_lo = cfg.scale_hi = 1.0;
    cfg.aspect_lo = cfg.aspect_hi = 2.0;
    std::mt19937_64 rng(2);
    CropDraw d = draw_crop(cfg, rng);
    CHECK(d.height == 256);
    CHECK(d.width == 128);
    CHECK(d.top == 0);
    CHECK(d.left == 0);
    CHECK(!d.fallback_full);
}

TEST_CASE("flip is an involution") {
    RgbImage img = render_synthetic_image(small_synth(), 1, 0);
    RgbImage twice = hflip(hflip(img));
    for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(twice.pixels[i] == img.pixels[i]);
    RgbImage once = hflip(img);
    CHECK(once.at(10, 0, 0) == img.at(10, img.width - 1, 0));
}

TEST_CASE("augmentation distribution: flip rate and scale coverage") {
    AugmentConfig cfg;
    std::mt19937_64 rng(12345);
    int flips = 0;
    double min_frac = 1e9, max_frac = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        CropDraw d = draw_crop(cfg, rng);
        flips += d.flip ? 1 : 0;
        double frac = static_cast<double>(d.height) * d.width / (256.0 * 128.0);
        min_frac = std::min(min_frac, frac);
        max_frac = std::max(max_frac, frac);
        CHECK(d.height <= 256);
        CHECK(d.width <= 128);
    }
    double rate = static_cast<double>(flips) / n;
    CHECK(rate > 0.48);
    CHECK(rate < 0.52);
    CHECK(min_frac < 0.66);  // lower edge of the area interval is reached
    CHECK(max_frac > 0.97);  // and so is the upper edge
    CHECK(min_frac > 0.60);  // rounding slop only
}

TEST_CASE("augmentation output contract") {
    AugmentConfig cfg;
    std::mt19937_64 rng(6);
    RgbImage img = render_synthetic_image(small_synth(), 2, 1);
    Tensor out = augment_train_image(img, cfg, rng);
    CHECK(out.shape() == std::vector<int>{3, 256, 128});
    CHECK(out.all_finite());
}

TEST_CASE("eval preprocessing is a deterministic resize plus normalization") {
    AugmentConfig cfg;
    RgbImage img = render_synthetic_image(small_synth(), 2, 3);
    RgbImage big = resize_bilinear(img, 512, 256);
    Tensor a = preprocess_eval_image(big, cfg);
    Tensor b = preprocess_eval_image(big, cfg);
    CHECK(a.shape() == std::vector<int>{3, 256, 128});
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("normalization round-trips through denormalize") {
    PixelNorm norm;
    norm.mean = {0.45, 0.5, 0.55};
    norm.stddev = {0.2, 0.25, 0.3};
    RgbImage img = render_synthetic_image(small_synth(), 1, 2);
    Tensor t = normalize_to_tensor(img, norm);
    RgbImage back = denormalize(t, norm);
    double max_err = 0.0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        max_err = std::max(max_err, std::fabs(static_cast<double>(img.pixels[i]) - back.pixels[i]));
    CHECK(max_err < 1e-6);
}

TEST_CASE("image decode errors carry the path") {
    fs::path dir = fresh_dir("decode");
    std::ofstream(dir / "broken.png") << "not an image";
    CHECK_THROWS_WITH_AS(load_image((dir / "broken.png").string()),
                         doctest::Contains("broken.png"), DataError);
    CHECK_THROWS_AS(load_image((dir / "missing.png").string()), DataError);
}

TEST_CASE("align-corners upsampling preserves the corner values") {
    Tensor grid = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor up = upsample_bilinear_corners(grid, 5, 7);
    CHECK(up.at({0, 0}) == 1.0);
    CHECK(up.at({0, 6}) == 2.0);
    CHECK(up.at({4, 0}) == 3.0);
    CHECK(up.at({4, 6}) == 4.0);
    CHECK(up.at({2, 3}) == doctest::Approx(2.5));  // bilinear center

    // The documented convention on the real grid size.
    std::mt19937_64 rng(8);
    Tensor energy({8, 4});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < energy.size(); ++i) energy[i] = unit(rng);
    Tensor big = upsample_bilinear_corners(energy, 256, 128);
    CHECK(big.at({0, 0}) == energy.at({0, 0}));
    CHECK(big.at({0, 127}) == energy.at({0, 3}));
    CHECK(big.at({255, 0}) == energy.at({7, 0}));
    CHECK(big.at({255, 127}) == energy.at({7, 3}));
}

TEST_CASE("feature energy and normalization guards") {
    Tensor fb = Tensor::from({2, 1, 2}, {3.0, 0.0, 4.0, 0.0});
    Tensor energy = feature_energy(fb);
    CHECK(energy.at({0, 0}) == doctest::Approx(5.0));
    CHECK(energy.at({0, 1}) == 0.0);

    // Constant map: zero range renders all-zero.
    Tensor flat = minmax_normalize(Tensor::full({4, 4}, 2.5));
    for (std::size_t i = 0; i < flat.size(); ++i) CHECK(flat[i] == 0.0);

    Tensor norm = minmax_normalize(Tensor::from({1, 3}, {1.0, 2.0, 3.0}));
    CHECK(norm[0] == 0.0);
    CHECK(norm[1] == 0.5);
    CHECK(norm[2] == 1.0);
}

TEST_CASE("heat overlay blends with the configured opacity") {
    RgbImage base = RgbImage::filled(2, 2, 0.0, 0.0, 0.0);
    Tensor energy = Tensor::from({2, 2}, {0.0, 1.0, 0.5, 0.25});
    RgbImage out = overlay_heat(base, energy, 0.0);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) CHECK(out.pixels[i] == 0.0);
    RgbImage hot = overlay_heat(base, energy, 1.0);
    CHECK(hot.at(0, 1, 0) > 0.4);  // max energy renders red-dominant
    CHECK(hot.at(0, 1, 1) == doctest::Approx(0.0));
    CHECK(hot.at(0, 1, 2) == doctest::Approx(0.0));
    CHECK(hot.at(0, 0, 2) > 0.4);  // zero energy renders blue-dominant
    CHECK(hot.at(0, 0, 0) == doctest::Approx(0.0));
    CHECK_THROWS(overlay_heat(base, Tensor::zeros({3, 3}), 0.5));
    CHECK_THROWS(overlay_heat(base, energy, 1.5));
}
