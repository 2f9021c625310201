// Copyright 2026 The deepperson Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "deepperson/image.hpp"
#include "deepperson/tensor.hpp"

namespace deepperson {

enum class Split { kTrain, kQuery, kGallery };

struct ImageRecord {
    std::string path;
    int identity = 0;  // -1 marks junk
    int camera = 0;
    Split split = Split::kTrain;
};

/// Index over a dataset in the Market directory convention
/// (bounding_box_train/, query/, bounding_box_test/).
struct DatasetIndex {
    std::vector<ImageRecord> records;
    int num_classes = 0;                           // distinct train identities
    std::vector<int> train_identities;             // sorted, junk excluded
    std::map<int, std::vector<int>> train_by_identity;  // identity -> record indices

    std::vector<int> split_indices(Split split) const;
    int label_of(int identity) const;  // contiguous class label in [0, num_classes)
};

/// Parses `<id>_c<cam>...` filenames; nullopt when the name does not follow
/// the convention.
std::optional<std::pair<int, int>> parse_market_filename(const std::string& name);

DatasetIndex build_index(std::vector<ImageRecord> records);
DatasetIndex load_dataset_index(const std::string& root);

int batches_per_epoch(const DatasetIndex& index, int p);

/// Identity-balanced mini-batch: p distinct identities, k records each.
struct PKBatch {
    int p = 0;
    int k = 0;
    std::vector<int> record_indices;  // into DatasetIndex::records
    std::vector<int> labels;          // contiguous class labels, aligned

    void validate() const;  // multiplicity contract
};

PKBatch pk_sample(const DatasetIndex& index, int p, int k, std::mt19937_64& rng);

// --- augmentation -----------------------------------------------------------

struct AugmentConfig {
    int out_height = 256;
    int out_width = 128;
    double scale_lo = 0.64, scale_hi = 1.0;    // crop area fraction
    double aspect_lo = 2.0, aspect_hi = 3.0;   // crop height/width ratio
    double flip_prob = 0.5;
    int max_redraws = 10;
    PixelNorm norm;
};

struct CropDraw {
    int top = 0, left = 0, height = 0, width = 0;
    bool flip = false;
    bool fallback_full = false;  // crop draw kept exceeding bounds
};

CropDraw draw_crop(const AugmentConfig& cfg, std::mt19937_64& rng);

/// resize -> random scale/aspect crop -> resize -> flip -> normalize.
Tensor augment_train_image(const RgbImage& decoded, const AugmentConfig& cfg, std::mt19937_64& rng);

/// Deterministic resize + normalize.
Tensor preprocess_eval_image(const RgbImage& decoded, const AugmentConfig& cfg);

// --- synthetic dataset -------------------------------------------------------

struct SynthConfig {
    int num_ids = 8;
    int train_per_id = 16;
    int query_per_id = 2;
    int gallery_per_id = 4;
    int height = 256;
    int width = 128;
    int num_cameras = 4;
    double occlusion_prob = 0.3;
    double blur_sigma_max = 0.8;
    int junk_gallery = 2;  // extra gallery images labeled -1
    std::uint64_t seed = 0;
};

/// Persistent per-identity appearance: color blocks stacked head to foot.
struct IdentityAttrs {
    float head_color[3];
    float torso_color[3];
    float leg_color[3];
    double body_width_frac;   // of canvas width
    double torso_height_frac; // of body height
    double head_height_frac;
};

IdentityAttrs draw_identity_attrs(std::uint64_t seed, int identity);

/// Renders one sample of an identity: the persistent body over per-image
/// background texture, shift, optional occluder, and blur. Deterministic in
/// (seed, identity, image_index).
RgbImage render_synthetic_image(const SynthConfig& cfg, int identity, int image_index);

/// Writes the dataset in the Market directory convention and returns its
/// index (paths point at the written files).
DatasetIndex generate_synthetic_dataset(const std::string& root, const SynthConfig& cfg);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace deepperson
