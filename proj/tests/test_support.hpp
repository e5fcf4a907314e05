#pragma once

// Shared test-only helpers: random tensors, finite-difference oracles and the
// unfactorized bilinear reference (never part of the trained model).

#include <functional>
#include <random>

#include "vrl/param.hpp"
#include "vrl/tensor.hpp"

namespace vrl::testing {

inline Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = dist(rng);
    return t;
}

// Central finite differences of a scalar function of one tensor.
inline Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x,
                          double eps = 1e-5) {
    Tensor g = Tensor::zeros(x.shape);
    Tensor w = x;
    for (int i = 0; i < x.count(); ++i) {
        const double orig = w.at(i);
        w.at(i) = orig + eps;
        const double fp = f(w);
        w.at(i) = orig - eps;
        const double fm = f(w);
        w.at(i) = orig;
        g.at(i) = (fp - fm) / (2.0 * eps);
    }
    return g;
}

inline double max_rel_err(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (int i = 0; i < a.count(); ++i) {
        const double denom = std::max({std::abs(a.at(i)), std::abs(b.at(i)), 1e-8});
        worst = std::max(worst, std::abs(a.at(i) - b.at(i)) / denom);
    }
    return worst;
}

// Full bilinear form t_j = q^T W_j r + b_j with W stored as l matrices of
// shape {l, l}. Reference oracle for the factorized implementation.
inline Tensor bilinear_full_oracle(const std::vector<Tensor>& w, const Tensor& b, const Tensor& q,
                                   const Tensor& r) {
    const int l = static_cast<int>(w.size());
    Tensor t = Tensor::zeros({l});
    for (int j = 0; j < l; ++j) {
        double acc = b.at(j);
        for (int a = 0; a < q.count(); ++a)
            for (int c = 0; c < r.count(); ++c) acc += q.at(a) * w[static_cast<std::size_t>(j)].at(a, c) * r.at(c);
        t.at(j) = acc;
    }
    return t;
}

}  // namespace vrl::testing
