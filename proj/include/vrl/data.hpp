#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vrl/segment.hpp"
#include "vrl/tensor.hpp"

namespace vrl {

// One evaluation unit: a query clip, a reference video and the ground-truth
// span of the matching segment on the reference timeline.
struct EpisodeRecord {
    std::string pair_id;
    int class_id = 0;
    Tensor query;      // {d, q}
    Tensor reference;  // {d, r}
    Segment gt;
};

struct DatasetSplits {
    std::vector<EpisodeRecord> train, val, test;

    // Throws ManifestError if the per-split class sets overlap or a ground
    // truth falls outside its reference timeline.
    void validate() const;
};

struct SynthConfig {
    int n_classes = 40;
    int train_classes = 32;
    int val_classes = 4;
    int test_classes = 4;
    int segments_per_class = 4;
    int d = 16;
    int seg_len_min = 6, seg_len_max = 12;     // class prototype length
    int query_len_min = 4, query_len_max = 16;  // clamp on warped query length
    int bg_len_min = 10, bg_len_max = 30;       // total background around the segment
    double noise_sigma = 0.3;
    double warp_min = 0.8, warp_max = 1.25;
    double amp_min = 0.9, amp_max = 1.1;
    // Background drawn from the coordinate subspace orthogonal to all
    // prototypes (exact-copy instances stay exactly recoverable).
    bool orthogonal_background = false;
    std::uint64_t seed = 0;

    void validate() const;
};

// Class-disjoint synthetic episodes: per class a smooth prototype track, per
// episode a warped/noisy instance planted in a background reference plus an
// independent same-class query. Fully determined by (cfg, cfg.seed).
DatasetSplits synthesize(const SynthConfig& cfg);

// "VRLF1" feature file: magic, u32 d, u32 T, then d*T float32 little-endian
// values ordered time step by time step.
void write_features(const Tensor& seq, const std::filesystem::path& path);
Tensor read_features(const std::filesystem::path& path);

// Writes features/<pair_id>_{q,r}.vrlf plus manifest.tsv under dir.
void write_dataset(const DatasetSplits& splits, const std::filesystem::path& dir);

// Parses a manifest TSV and loads the referenced feature files. Header:
// pair_id  split  class_id  query_path  ref_path  gt_start  gt_end
DatasetSplits load_manifest(const std::filesystem::path& manifest_path);

}  // namespace vrl
