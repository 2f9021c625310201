// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#include "deepperson/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>

#include "deepperson/errors.hpp"

namespace fs = std::filesystem;

namespace deepperson {

std::vector<int> DatasetIndex::split_indices(Split split) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].split == split) out.push_back(static_cast<int>(i));
    return out;
}

int DatasetIndex::label_of(int identity) const {
    auto it = std::lower_bound(train_identities.begin(), train_identities.end(), identity);
    if (it == train_identities.end() || *it != identity)
        throw DataError("identity " + std::to_string(identity) + " is not a training identity");
    return static_cast<int>(it - train_identities.begin());
}

std::optional<std::pair<int, int>> parse_market_filename(const std::string& name) {
    // <id>_c<cam>... ; id may be negative (junk).
    std::size_t us = name.find('_');
    if (us == std::string::npos || us == 0) return std::nullopt;
    if (us + 1 >= name.size() || name[us + 1] != 'c') return std::nullopt;
    int id = 0, cam = 0;
    try {
        std::size_t used = 0;
        id = std::stoi(name.substr(0, us), &used);
        if (used != us) return std::nullopt;
        std::size_t cam_start = us + 2;
        std::size_t cam_end = cam_start;
        while (cam_end < name.size() && std::isdigit(static_cast<unsigned char>(name[cam_end]))) ++cam_end;
        if (cam_end == cam_start) return std::nullopt;
        cam = std::stoi(name.substr(cam_start, cam_end - cam_start));
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (id < -1 || cam < 0) return std::nullopt;
    return std::make_pair(id, cam);
}

DatasetIndex build_index(std::vector<ImageRecord> records) {
    DatasetIndex index;
    index.records = std::move(records);
    std::set<int> ids;
    for (std::size_t i = 0; i < index.records.size(); ++i) {
        const ImageRecord& r = index.records[i];
        if (r.split == Split::kTrain && r.identity != -1) {
            ids.insert(r.identity);
            index.train_by_identity[r.identity].push_back(static_cast<int>(i));
        }
    }
    index.train_identities.assign(ids.begin(), ids.end());
    index.num_classes = static_cast<int>(index.train_identities.size());
    return index;
}

namespace {

const char* split_dir(Split s) {
    switch (s) {
        case Split::kTrain: return "bounding_box_train";
        case Split::kQuery: return "query";
        case Split::kGallery: return "bounding_box_test";
    }
    return "";
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp" || ext == ".ppm";
}

}  // namespace

DatasetIndex load_dataset_index(const std::string& root) {
    if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root);
    std::vector<ImageRecord> records;
    for (Split split : {Split::kTrain, Split::kQuery, Split::kGallery}) {
        fs::path dir = fs::path(root) / split_dir(split);
        if (!fs::is_directory(dir))
            throw DataError("missing dataset split directory: " + dir.string());
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
        std::sort(files.begin(), files.end());  // order-stable index
        int kept = 0;
        for (const fs::path& f : files) {
            auto parsed = parse_market_filename(f.filename().string());
            if (!parsed) {
                std::cerr << "warning: skipping unparseable filename " << f.filename().string() << "\n";
                continue;
            }
            records.push_back({f.string(), parsed->first, parsed->second, split});
            ++kept;
        }
        if (kept == 0) throw DataError("dataset split '" + std::string(split_dir(split)) + "' is empty");
    }
    return build_index(std::move(records));
}

int batches_per_epoch(const DatasetIndex& index, int p) {
    if (p < 1) throw std::invalid_argument("batches_per_epoch: p must be >= 1");
    return index.num_classes / p;
}

void PKBatch::validate() const {
    if (p < 2 || k < 2) throw DataError("PK batch requires p >= 2 and k >= 2");
    if (record_indices.size() != static_cast<std::size_t>(p) * k ||
        labels.size() != record_indices.size())
        throw DataError("PK batch size mismatch");
    std::map<int, int> counts;
    for (int l : labels) counts[l]++;
    if (static_cast<int>(counts.size()) != p)
        throw DataError("PK batch holds " + std::to_string(counts.size()) + " identities, expected " +
                        std::to_string(p));
    for (const auto& [label, n] : counts)
        if (n != k)
            throw DataError("PK batch: identity label " + std::to_string(label) + " appears " +
                            std::to_string(n) + " times, expected " + std::to_string(k));
}

PKBatch pk_sample(const DatasetIndex& index, int p, int k, std::mt19937_64& rng) {
    if (k < 2) throw DataError("pk_sample: k must be >= 2 (anchors need a positive)");
    if (p < 2) throw DataError("pk_sample: p must be >= 2 (anchors need a negative)");
    if (p > index.num_classes)
        throw DataError("pk_sample: requested " + std::to_string(p) + " identities, dataset has " +
                        std::to_string(index.num_classes));

    // Choose p identities via a partial Fisher-Yates pass.
    std::vector<int> ids = index.train_identities;
    for (int i = 0; i < p; ++i) {
        std::uniform_int_distribution<int> pick(i, static_cast<int>(ids.size()) - 1);
        std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(pick(rng))]);
    }
    ids.resize(static_cast<std::size_t>(p));

    PKBatch batch;
    batch.p = p;
    batch.k = k;
    for (int id : ids) {
        const std::vector<int>& pool = index.train_by_identity.at(id);
        std::vector<int> chosen;
        if (static_cast<int>(pool.size()) >= k) {
            std::vector<int> shuffled = pool;
            for (int i = 0; i < k; ++i) {
                std::uniform_int_distribution<int> pick(i, static_cast<int>(shuffled.size()) - 1);
                std::swap(shuffled[static_cast<std::size_t>(i)], shuffled[static_cast<std::size_t>(pick(rng))]);
            }
            chosen.assign(shuffled.begin(), shuffled.begin() + k);
        } else {
            // Identities with fewer than k images are sampled with replacement.
            std::uniform_int_distribution<int> pick(0, static_cast<int>(pool.size()) - 1);
            for (int i = 0; i < k; ++i) chosen.push_back(pool[static_cast<std::size_t>(pick(rng))]);
        }
        int label = index.label_of(id);
        for (int rec : chosen) {
            batch.record_indices.push_back(rec);
            batch.labels.push_back(label);
        }
    }
    batch.validate();
    return batch;
}

// --- augmentation -------------------------------------------------------------

CropDraw draw_crop(const AugmentConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> scale_dist(cfg.scale_lo, cfg.scale_hi);
    std::uniform_real_distribution<double> aspect_dist(cfg.aspect_lo, cfg.aspect_hi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    double area = static_cast<double>(cfg.out_height) * cfg.out_width;
    CropDraw draw;
    bool found = false;
    for (int attempt = 0; attempt < cfg.max_redraws; ++attempt) {
        double scale = scale_dist(rng);
        double aspect = aspect_dist(rng);  // height / width
        int ch = static_cast<int>(std::lround(std::sqrt(scale * area * aspect)));
        int cw = static_cast<int>(std::lround(std::sqrt(scale * area / aspect)));
        if (ch < 1 || cw < 1 || ch > cfg.out_height || cw > cfg.out_width) continue;
        draw.height = ch;
        draw.width = cw;
        std::uniform_int_distribution<int> top_dist(0, cfg.out_height - ch);
        std::uniform_int_distribution<int> left_dist(0, cfg.out_width - cw);
        draw.top = top_dist(rng);
        draw.left = left_dist(rng);
        found = true;
        break;
    }
    if (!found) {
        draw.top = 0;
        draw.left = 0;
        draw.height = cfg.out_height;
        draw.width = cfg.out_width;
        draw.fallback_full = true;
    }
    draw.flip = unit(rng) < cfg.flip_prob;
    return draw;
}

Tensor augment_train_image(const RgbImage& decoded, const AugmentConfig& cfg, std::mt19937_64& rng) {
    if (decoded.height < 1 || decoded.width < 1) throw DataError("augment: empty image");
    RgbImage resized = resize_bilinear(decoded, cfg.out_height, cfg.out_width);
    CropDraw d = draw_crop(cfg, rng);
    RgbImage cropped = crop(resized, d.top, d.left, d.height, d.width);
    RgbImage final_img = resize_bilinear(cropped, cfg.out_height, cfg.out_width);
    if (d.flip) final_img = hflip(final_img);
    Tensor t = normalize_to_tensor(final_img, cfg.norm);
    if (!t.all_finite()) throw NumericError("augment: non-finite pixels after normalization");
    return t;
}

Tensor preprocess_eval_image(const RgbImage& decoded, const AugmentConfig& cfg) {
    if (decoded.height < 1 || decoded.width < 1) throw DataError("preprocess: empty image");
    RgbImage resized = resize_bilinear(decoded, cfg.out_height, cfg.out_width);
    return normalize_to_tensor(resized, cfg.norm);
}

// --- synthetic dataset ----------------------------------------------------------

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    // splitmix64 over the packed inputs
    std::uint64_t x = seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xbf58476d1ce4e5b9ULL);
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

IdentityAttrs draw_identity_attrs(std::uint64_t seed, int identity) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(identity), 0xa11ce));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    IdentityAttrs a{};
    auto draw_color = [&](float* c) {
        // Saturated, spread-out colors so identities stay separable.
        for (int i = 0; i < 3; ++i) c[i] = static_cast<float>(0.15 + 0.8 * unit(rng));
    };
    draw_color(a.head_color);
    draw_color(a.torso_color);
    draw_color(a.leg_color);
    a.body_width_frac = 0.35 + 0.25 * unit(rng);
    a.torso_height_frac = 0.3 + 0.15 * unit(rng);
    a.head_height_frac = 0.12 + 0.08 * unit(rng);
    return a;
}

RgbImage render_synthetic_image(const SynthConfig& cfg, int identity, int image_index) {
    IdentityAttrs attrs = draw_identity_attrs(cfg.seed, identity);
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(identity),
                                 0xbeef00ULL + static_cast<std::uint64_t>(image_index)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    int h = cfg.height, w = cfg.width;
    // Background: smooth two-corner gradient plus speckle.
    float bg0[3], bg1[3];
    for (int i = 0; i < 3; ++i) {
        bg0[i] = static_cast<float>(0.1 + 0.8 * unit(rng));
        bg1[i] = static_cast<float>(0.1 + 0.8 * unit(rng));
    }
    double speckle = 0.05 + 0.07 * unit(rng);
    RgbImage img;
    img.height = h;
    img.width = w;
    img.pixels.resize(static_cast<std::size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y) {
        double fy = static_cast<double>(y) / (h - 1);
        for (int x = 0; x < w; ++x) {
            double fx = static_cast<double>(x) / (w - 1);
            double mixv = 0.5 * (fx + fy);
            double noise = speckle * (unit(rng) - 0.5);
            for (int c = 0; c < 3; ++c) {
                double v = (1 - mixv) * bg0[c] + mixv * bg1[c] + noise;
                img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }

    // Body: head/torso/leg blocks stacked vertically, centered with a small
    // per-image shift and scale jitter (an imperfect detector box, in
    // effect). The vertical structure feeds the part-sequence prior.
    double shift_x = (unit(rng) - 0.5) * 0.14 * w;
    double shift_y = (unit(rng) - 0.5) * 0.10 * h;
    double body_scale = 0.88 + 0.24 * unit(rng);
    int body_top = static_cast<int>(std::lround(0.5 * h - 0.42 * body_scale * h + shift_y));
    int body_bottom = static_cast<int>(std::lround(0.5 * h + 0.42 * body_scale * h + shift_y));
    int body_height = body_bottom - body_top;
    int body_width =
        static_cast<int>(std::lround(attrs.body_width_frac * w * (0.88 + 0.24 * unit(rng))));
    int center_x = static_cast<int>(std::lround(0.5 * w + shift_x));

    int head_end = body_top + static_cast<int>(std::lround(attrs.head_height_frac * body_height));
    int torso_end = head_end + static_cast<int>(std::lround(attrs.torso_height_frac * body_height));

    auto paint = [&](int y0, int y1, int half_width, const float* color) {
        for (int y = std::max(0, y0); y < std::min(h, y1); ++y) {
            for (int x = std::max(0, center_x - half_width); x < std::min(w, center_x + half_width); ++x) {
                for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
            }
        }
    };
    paint(body_top, head_end, body_width / 3, attrs.head_color);
    paint(head_end, torso_end, body_width / 2, attrs.torso_color);
    paint(torso_end, body_bottom, static_cast<int>(body_width / 2.5), attrs.leg_color);

    // Occluder: a random rectangle of random color.
    if (unit(rng) < cfg.occlusion_prob) {
        int ow = static_cast<int>(std::lround((0.2 + 0.3 * unit(rng)) * w));
        int oh = static_cast<int>(std::lround((0.1 + 0.25 * unit(rng)) * h));
        int ox = static_cast<int>(std::lround(unit(rng) * (w - ow)));
        int oy = static_cast<int>(std::lround(unit(rng) * (h - oh)));
        float oc[3] = {static_cast<float>(unit(rng)), static_cast<float>(unit(rng)),
                       static_cast<float>(unit(rng))};
        for (int y = oy; y < oy + oh; ++y)
            for (int x = ox; x < ox + ow; ++x)
                for (int c = 0; c < 3; ++c) img.at(y, x, c) = oc[c];
    }

    // Photometric nuisances: global brightness and a per-channel color cast.
    // Raw pixel statistics stop identifying the person; a trained model has
    // to learn the invariance.
    double brightness = 0.92 + 0.16 * unit(rng);
    double cast[3];
    for (double& c : cast) c = (unit(rng) - 0.5) * 0.06;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = static_cast<float>(
                    std::clamp(img.at(y, x, c) * brightness + cast[c], 0.0, 1.0));

    double sigma = cfg.blur_sigma_max * unit(rng);
    if (sigma > 0.05) img = gaussian_blur(img, sigma);
    return img;
}

DatasetIndex generate_synthetic_dataset(const std::string& root, const SynthConfig& cfg) {
    if (cfg.num_ids < 2) throw DataError("synthetic dataset needs at least 2 identities");
    if (cfg.train_per_id < 1 || cfg.query_per_id < 0 || cfg.gallery_per_id < 1)
        throw DataError("synthetic dataset: bad per-identity counts");

    fs::create_directories(fs::path(root) / "bounding_box_train");
    fs::create_directories(fs::path(root) / "query");
    fs::create_directories(fs::path(root) / "bounding_box_test");

    std::vector<ImageRecord> records;
    char name[96];
    auto emit = [&](Split split, int identity, int image_index, int camera, int seq) {
        const char* dir = split == Split::kTrain ? "bounding_box_train"
                          : split == Split::kQuery ? "query"
                                                   : "bounding_box_test";
        std::snprintf(name, sizeof name, "%04d_c%ds1_%06d_%02d.png", identity, camera, seq, 0);
        fs::path path = fs::path(root) / dir / name;
        RgbImage img = render_synthetic_image(cfg, identity, image_index);
        save_image(path.string(), img);
        records.push_back({path.string(), identity, camera, split});
    };

    for (int id = 1; id <= cfg.num_ids; ++id) {
        int image_index = 0;
        for (int i = 0; i < cfg.train_per_id; ++i, ++image_index)
            emit(Split::kTrain, id, image_index, 1 + (i % cfg.num_cameras), image_index);
        for (int i = 0; i < cfg.query_per_id; ++i, ++image_index)
            emit(Split::kQuery, id, image_index, 1 + (i % cfg.num_cameras), image_index);
        for (int i = 0; i < cfg.gallery_per_id; ++i, ++image_index)
            emit(Split::kGallery, id, image_index, 1 + (i % cfg.num_cameras), image_index);
    }
    // Junk gallery entries exercise the protocol exclusions.
    for (int j = 0; j < cfg.junk_gallery; ++j) {
        std::snprintf(name, sizeof name, "-1_c%ds1_%06d_%02d.png", 1 + (j % cfg.num_cameras), j, 0);
        fs::path path = fs::path(root) / "bounding_box_test" / name;
        RgbImage img = render_synthetic_image(cfg, -1, j);
        save_image(path.string(), img);
        records.push_back({path.string(), -1, 1 + (j % cfg.num_cameras), Split::kGallery});
    }

    std::sort(records.begin(), records.end(),
              [](const ImageRecord& a, const ImageRecord& b) {
                  if (a.split != b.split) return static_cast<int>(a.split) < static_cast<int>(b.split);
                  return a.path < b.path;
              });
    return build_index(std::move(records));
}

}  // namespace deepperson
