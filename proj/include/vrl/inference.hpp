#pragma once

#include <vector>

#include "vrl/model.hpp"
#include "vrl/segment.hpp"

namespace vrl {

struct DecodeConfig {
    int max_len = 32;  // maximum predicted segment length, in time steps
};

struct Decoded {
    Segment seg;
    double log_score = 0.0;

    double score() const;  // joint probability, exp(log_score)
};

// Argmax of p1_s * p2_e * geomean(p3_s..p3_e) over segments of length at most
// max_len. Log-space with prefix sums, O(r * max_len). Ties break to the
// smaller s, then the smaller e.
Decoded decode(const std::vector<StepProbs>& probs, const DecodeConfig& cfg);

// Exhaustive reference decoder, same tie-breaking. Guarded to r <= 10000.
Decoded brute_force_decode(const std::vector<StepProbs>& probs, const DecodeConfig& cfg);

}  // namespace vrl
