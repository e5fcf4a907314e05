#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "vrl/data.hpp"
#include "vrl/inference.hpp"
#include "vrl/model.hpp"

namespace vrl {

// Target distribution over {start, end, inside, outside}.
using StepLabel = std::array<double, 4>;

// Soft labels for a reference of length r with ground truth [s, e]:
// outside -> [0,0,0,1], start -> [1/2,0,1/2,0], end -> [0,1/2,1/2,0],
// strictly inside -> [0,0,1,0], s == e -> [1/3,1/3,1/3,0].
std::vector<StepLabel> make_labels(int r, const Segment& seg);

// Weighted cross-entropy: -(1/r) sum_i w_i sum_n g_i^n log p_i^n with
// w_i = c_w on steps carrying start/end mass, 1 elsewhere. Terms with
// g_i^n = 0 contribute exactly 0.
double weighted_loss(const std::vector<StepProbs>& probs, const std::vector<StepLabel>& labels,
                     double c_w);

// Same loss built on the tape for backprop; prob_vars are the per-step
// 4-vectors from model_forward.
Var weighted_loss_on_tape(Tape& tape, std::span<const Var> prob_vars,
                          const std::vector<StepLabel>& labels, double c_w);

struct AdamState {
    ParamSet m, v;
    long step = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState init(const ParamSet& params, double lr, double beta1, double beta2);
};

// In-place Adam update with bias correction. Throws on NaN gradients, naming
// the offending block.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state);

// Scales grads in place so their global L2 norm is at most max_norm; returns
// the pre-clip norm. max_norm = infinity disables clipping.
double clip_global_norm(ParamSet& grads, double max_norm);

struct TrainConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    int l = 128;
    int k = 8;
    double c_w = 10.0;
    int epochs = 30;
    std::uint64_t seed = 0;
    int max_pred_len = 32;
    double clip = 5.0;  // global-norm gradient clip; infinity disables
};

struct EpochStats {
    int epoch = 0;
    double mean_train_loss = 0.0;
    double val_map_avg = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    ModelParams best;         // checkpoint with the best validation average mAP
    double best_val_map = 0.0;
    int best_epoch = 0;
    std::vector<EpochStats> log;
};

// One optimizer step per episode; per epoch each training query is paired
// with a uniformly sampled same-class reference episode (never itself).
// Validation uses the fixed episode pairing. on_epoch, if set, is called
// after each epoch with its stats.
TrainResult train(const TrainConfig& cfg, const DatasetSplits& data,
                  const std::function<void(const EpochStats&)>& on_epoch = nullptr);

// Validation/test helper: forward + decode every episode, returns average mAP
// along with the predictions.
struct EvalRun {
    std::vector<Segment> preds;
    std::vector<double> log_scores;
    double map_avg = 0.0;
};
EvalRun run_model(const ModelParams& params, const std::vector<EpisodeRecord>& episodes,
                  const DecodeConfig& dcfg);

}  // namespace vrl
