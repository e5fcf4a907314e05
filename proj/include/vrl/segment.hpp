#pragma once

#include <string>

#include "vrl/errors.hpp"

namespace vrl {

// Inclusive [s, e] interval of 1-based time steps.
struct Segment {
    int s = 1;
    int e = 1;

    int length() const { return e - s + 1; }

    void validate(int r) const {
        if (s < 1 || s > e || e > r)
            throw ContractError("segment [" + std::to_string(s) + "," + std::to_string(e) +
                                "] invalid for timeline of length " + std::to_string(r));
    }

    bool operator==(const Segment&) const = default;
};

}  // namespace vrl
