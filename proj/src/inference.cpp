#include "vrl/inference.hpp"

#include <cmath>

namespace vrl {

double Decoded::score() const { return std::exp(log_score); }

namespace {

void check_probs(const std::vector<StepProbs>& probs, const DecodeConfig& cfg) {
    if (probs.empty()) throw ContractError("decode: empty probability sequence");
    if (cfg.max_len < 1) throw ContractError("decode: max_len must be >= 1");
    for (const StepProbs& p : probs)
        for (double v : p)
            if (v <= 0.0) throw DomainError("decode requires strictly positive probabilities");
}

// Rounding-tolerant "strictly better" comparison. Prefix-sum differences and
// per-segment sums round differently, so exact-tie tables (all-uniform, for
// example) would otherwise break ties on floating-point noise instead of the
// (smaller s, smaller e) rule. Candidates are visited in lexicographic order,
// so refusing sub-tolerance improvements keeps the earliest tied segment.
bool better(double candidate, double incumbent) {
    return candidate > incumbent + 1e-12 * std::max(1.0, std::abs(incumbent));
}

}  // namespace

Decoded decode(const std::vector<StepProbs>& probs, const DecodeConfig& cfg) {
    check_probs(probs, cfg);
    const int r = static_cast<int>(probs.size());
    // prefix3[i] = sum of log p3 over steps 1..i (1-based)
    std::vector<double> prefix3(static_cast<std::size_t>(r) + 1, 0.0);
    for (int i = 1; i <= r; ++i)
        prefix3[static_cast<std::size_t>(i)] =
            prefix3[static_cast<std::size_t>(i - 1)] + std::log(probs[static_cast<std::size_t>(i - 1)][2]);
    Decoded best;
    bool have = false;
    for (int s = 1; s <= r; ++s) {
        const int e_max = std::min(r, s + cfg.max_len - 1);
        const double lp1 = std::log(probs[static_cast<std::size_t>(s - 1)][0]);
        for (int e = s; e <= e_max; ++e) {
            const double inside =
                (prefix3[static_cast<std::size_t>(e)] - prefix3[static_cast<std::size_t>(s - 1)]) /
                (e - s + 1);
            const double ls = lp1 + std::log(probs[static_cast<std::size_t>(e - 1)][1]) + inside;
            if (!have || better(ls, best.log_score)) {
                best = Decoded{Segment{s, e}, ls};
                have = true;
            }
        }
    }
    return best;
}

Decoded brute_force_decode(const std::vector<StepProbs>& probs, const DecodeConfig& cfg) {
    check_probs(probs, cfg);
    const int r = static_cast<int>(probs.size());
    if (r > 10000) throw ContractError("brute_force_decode guard: r > 10000");
    Decoded best;
    bool have = false;
    for (int s = 1; s <= r; ++s)
        for (int e = s; e <= std::min(r, s + cfg.max_len - 1); ++e) {
            double inside = 0.0;
            for (int i = s; i <= e; ++i) inside += std::log(probs[static_cast<std::size_t>(i - 1)][2]);
            const double ls = std::log(probs[static_cast<std::size_t>(s - 1)][0]) +
                              std::log(probs[static_cast<std::size_t>(e - 1)][1]) +
                              inside / (e - s + 1);
            if (!have || better(ls, best.log_score)) {
                best = Decoded{Segment{s, e}, ls};
                have = true;
            }
        }
    return best;
}

}  // namespace vrl
