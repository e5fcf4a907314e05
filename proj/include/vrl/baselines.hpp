#pragma once

#include <random>

#include "vrl/data.hpp"
#include "vrl/inference.hpp"
#include "vrl/training.hpp"

namespace vrl {

// Pairwise Euclidean distances between unit-normalized feature columns;
// entries lie in [0, 2].
Tensor distance_table(const Tensor& query, const Tensor& ref);

// Uniform draw over all legal (s, e) with e - s + 1 <= max_len.
Segment chance_baseline(int r, const DecodeConfig& cfg, std::mt19937_64& rng);

// Number of legal segments chance_baseline draws from.
long long count_legal_segments(int r, int max_len);

// Training-free diagonal-block search: minimum-mean-cost monotone path from
// the top row to the bottom row of the distance table, with diagonal,
// horizontal and vertical moves. Returns the reference-column span of the
// best path. Ties break to the smaller start column, then the smaller end.
Segment frame_level_baseline(const Tensor& query, const Tensor& ref, const DecodeConfig& cfg);

struct VideoBaselineConfig {
    int hidden = 32;
    int epochs = 10;
    double lr = 0.001;
    double margin = 0.2;
    int max_sample_tries = 200;
    int stride = 1;  // candidate stride during search
    std::uint64_t seed = 0;
};

struct EncoderParams {
    int d = 0;
    int hidden = 0;
    ParamSet p;
};

EncoderParams video_level_init(int d, const VideoBaselineConfig& cfg);

// L2-normalized last LSTM hidden state of a {d, T} segment.
Tensor video_encode(const EncoderParams& enc, const Tensor& seq);

// Triplet training: anchor = query, positive = reference segment with
// tIoU > 0.8 against the ground truth, negative = segment with tIoU < 0.2.
EncoderParams video_level_train(const DatasetSplits& data, const VideoBaselineConfig& cfg,
                                const DecodeConfig& dcfg);

// Exhaustive candidate search (respecting max_len and stride) for the segment
// whose embedding is closest to the query's. Returns the segment and the
// embedding distance.
std::pair<Segment, double> video_level_search(const EncoderParams& enc, const Tensor& query,
                                              const Tensor& ref, const DecodeConfig& dcfg,
                                              int stride = 1);

}  // namespace vrl
