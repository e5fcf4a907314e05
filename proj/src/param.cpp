#include "vrl/param.hpp"

#include <algorithm>
#include <cmath>

namespace vrl {

GradCheckReport grad_check(const ParamSet& params, const std::function<double(const ParamSet&)>& f,
                           const ParamSet& analytic, double eps, double tol) {
    if (analytic.names != params.names)
        throw ContractError("grad_check: analytic gradient layout does not match params");
    GradCheckReport report;
    report.tol = tol;
    ParamSet work = params;
    for (std::size_t b = 0; b < params.block_count(); ++b) {
        GradCheckBlock block;
        block.name = params.names[b];
        Tensor& w = work.values[b];
        const Tensor& a = analytic.values[b];
        for (int i = 0; i < w.count(); ++i) {
            const double orig = w.at(i);
            w.at(i) = orig + eps;
            const double fp = f(work);
            w.at(i) = orig - eps;
            const double fm = f(work);
            w.at(i) = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double denom = std::max({std::abs(a.at(i)), std::abs(numeric), 1e-8});
            block.max_rel_err = std::max(block.max_rel_err, std::abs(a.at(i) - numeric) / denom);
        }
        report.max_rel_err = std::max(report.max_rel_err, block.max_rel_err);
        report.blocks.push_back(std::move(block));
    }
    report.passed = report.max_rel_err < tol;
    return report;
}

}  // namespace vrl
