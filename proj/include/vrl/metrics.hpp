#pragma once

#include <array>
#include <span>
#include <string>

#include "vrl/segment.hpp"

namespace vrl {

inline constexpr std::array<double, 5> kTiouThresholds{0.5, 0.6, 0.7, 0.8, 0.9};

// Per-threshold fractions in [0, 1] plus their mean. Printed as percentages.
struct EvalResult {
    std::array<double, 5> scores{};
    double average = 0.0;
};

// Temporal IoU in inclusive step counts; 0 for disjoint segments.
double tiou(const Segment& a, const Segment& b);

// Top-1 mAP: with one prediction and one ground truth per pair, the score at
// threshold tau is the fraction of pairs with tiou >= tau.
EvalResult evaluate(std::span<const Segment> preds, std::span<const Segment> gts);

// Table-shaped TSV row: thresholds then Average, percentages one decimal.
std::string format_eval(const EvalResult& res, const std::string& label);

}  // namespace vrl
