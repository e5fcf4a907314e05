#include "vrl/metrics.hpp"

#include <algorithm>
#include <cstdio>

namespace vrl {

double tiou(const Segment& a, const Segment& b) {
    const int inter = std::min(a.e, b.e) - std::max(a.s, b.s) + 1;
    if (inter <= 0) return 0.0;
    const int uni = std::max(a.e, b.e) - std::min(a.s, b.s) + 1;
    return static_cast<double>(inter) / uni;
}

EvalResult evaluate(std::span<const Segment> preds, std::span<const Segment> gts) {
    if (preds.size() != gts.size())
        throw ContractError("evaluate: " + std::to_string(preds.size()) + " predictions vs " +
                            std::to_string(gts.size()) + " ground truths");
    EvalResult res;
    if (preds.empty()) return res;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double t = tiou(preds[i], gts[i]);
        for (std::size_t k = 0; k < kTiouThresholds.size(); ++k)
            if (t >= kTiouThresholds[k]) res.scores[k] += 1.0;
    }
    for (double& s : res.scores) s /= static_cast<double>(preds.size());
    for (double s : res.scores) res.average += s;
    res.average /= static_cast<double>(res.scores.size());
    return res;
}

std::string format_eval(const EvalResult& res, const std::string& label) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s\t%.1f\t%.1f\t%.1f\t%.1f\t%.1f\t%.1f", label.c_str(),
                  100.0 * res.scores[0], 100.0 * res.scores[1], 100.0 * res.scores[2],
                  100.0 * res.scores[3], 100.0 * res.scores[4], 100.0 * res.average);
    return buf;
}

}  // namespace vrl
