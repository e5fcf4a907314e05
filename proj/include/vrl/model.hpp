#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "vrl/layers.hpp"

namespace vrl {

// Per-step class distribution: start, end, inside, outside.
using StepProbs = std::array<double, 4>;

struct ModelConfig {
    int d = 16;   // feature dimension
    int l = 128;  // hidden size, shared by every recurrent layer
    int k = 8;    // bilinear rank
};

struct ModelParams {
    ModelConfig cfg;
    ParamSet p;

    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
};

// Everything the forward pass computes, kept for inspection and tests.
// Sequence tensors are {l, r} (or {l, q}) with one column per time step.
struct ForwardTrace {
    Tensor hq, hr;            // aggregated hidden states
    Tensor alpha;             // {r, q}; row i = attention over query at ref step i
    Tensor gated_q, gated_r;  // {l, r}
    Tensor match;             // {l, r}, the bilinear matching vectors t_i
    Tensor hf, hb;            // forward / backward matching states
    Tensor hl;                // localization states
    std::vector<StepProbs> probs;
};

struct ForwardResult {
    std::vector<StepProbs> probs;
    ForwardTrace trace;
    // Tape handles for loss construction / backprop.
    std::vector<Var> prob_vars;
    BoundParams bound;
};

ForwardResult model_forward(Tape& tape, const ModelParams& params, const Tensor& query,
                            const Tensor& ref);

// Row i is the attention distribution over query steps at reference step i.
inline const Tensor& export_attention(const ForwardTrace& trace) { return trace.alpha; }

// "VRLC1" checkpoint: named blocks with shape headers and raw little-endian
// float64 payloads. Layout documented in the README.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace vrl
