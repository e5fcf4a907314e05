#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "vrl/errors.hpp"

namespace vrl {

// Dense row-major tensor of doubles. Rank 1 ({n}) or 2 ({rows, cols}) is all
// the model needs; feature sequences are {d, T} with one column per time step.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape) {
        Tensor t;
        t.shape = std::move(shape);
        t.data.assign(t.count(), 0.0);
        return t;
    }

    static Tensor full(std::vector<int> shape, double v) {
        Tensor t = zeros(std::move(shape));
        for (double& x : t.data) x = v;
        return t;
    }

    static Tensor from(std::vector<int> shape, std::vector<double> values) {
        Tensor t;
        t.shape = std::move(shape);
        t.data = std::move(values);
        if (static_cast<std::size_t>(t.count()) != t.data.size())
            throw DimensionError("value count " + std::to_string(t.data.size()) +
                                 " does not match shape " + t.shape_str());
        return t;
    }

    static Tensor identity(int n) {
        Tensor t = zeros({n, n});
        for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    int count() const {
        long long n = 1;
        for (int s : shape) n *= s;
        return static_cast<int>(n);
    }

    int rank() const { return static_cast<int>(shape.size()); }
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return rank() < 2 ? 1 : shape[1]; }

    double& at(int i) { return data[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols() + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols() + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // Column t of a {d, T} feature matrix as a {d} vector.
    Tensor column(int t) const {
        Tensor c = zeros({rows()});
        for (int i = 0; i < rows(); ++i) c.at(i) = at(i, t);
        return c;
    }
};

}  // namespace vrl
