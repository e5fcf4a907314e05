#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vrl/tensor.hpp"

namespace vrl {

// Named parameter blocks in a stable order. Names drive gradient-check
// reporting, Adam state layout and checkpoint serialization.
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Tensor> values;

    int add(const std::string& name, Tensor value) {
        if (index(name) >= 0) throw ContractError("duplicate parameter block '" + name + "'");
        names.push_back(name);
        values.push_back(std::move(value));
        return static_cast<int>(values.size() - 1);
    }

    int index(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        return -1;
    }

    Tensor& at(const std::string& name) {
        int i = index(name);
        if (i < 0) throw ContractError("unknown parameter block '" + name + "'");
        return values[static_cast<std::size_t>(i)];
    }
    const Tensor& at(const std::string& name) const {
        int i = index(name);
        if (i < 0) throw ContractError("unknown parameter block '" + name + "'");
        return values[static_cast<std::size_t>(i)];
    }

    std::size_t block_count() const { return values.size(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const Tensor& t : values) n += static_cast<std::size_t>(t.count());
        return n;
    }

    // Zero-valued copy with the same layout (gradient / moment buffers).
    ParamSet zeros_like() const {
        ParamSet z;
        z.names = names;
        for (const Tensor& t : values) z.values.push_back(Tensor::zeros(t.shape));
        return z;
    }
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
inline Tensor init_uniform(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
    const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-r, r);
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = dist(rng);
    return t;
}

struct GradCheckBlock {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckBlock> blocks;
    double max_rel_err = 0.0;
    double tol = 0.0;
    bool passed = false;
};

// Central finite-difference check of `analytic` (a gradient in the layout of
// `params`) against the scalar function f, perturbing every scalar by +-eps.
GradCheckReport grad_check(const ParamSet& params, const std::function<double(const ParamSet&)>& f,
                           const ParamSet& analytic, double eps, double tol);

}  // namespace vrl
