#pragma once

// Finite-difference check for whole models: compares tape gradients of
// loss_fn() (a pure function of the current parameter values) against central
// differences, using the same relative-error rule as grad_check.
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "synli/tensor.hpp"

namespace synli_test {

struct ModelCheckReport {
    double max_rel_error = 0.0;
    bool pass = false;
};

inline ModelCheckReport check_model_grads(const std::function<synli::Tensor()>& loss_fn,
                                          const std::vector<synli::Tensor>& params, double step,
                                          double tol) {
    using synli::Tape;
    using synli::Tensor;
    std::vector<std::vector<double>> tape_grads(params.size());
    {
        Tape tape;
        Tensor loss = loss_fn();
        for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();
        tape.backward(loss);
        for (size_t i = 0; i < params.size(); ++i)
            tape_grads[i] = params[i].has_grad() ? params[i].grad()
                                                 : std::vector<double>(params[i].size(), 0.0);
    }
    ModelCheckReport report;
    for (size_t i = 0; i < params.size(); ++i) {
        std::vector<double>& data = const_cast<Tensor&>(params[i]).data();
        for (size_t j = 0; j < data.size(); ++j) {
            double orig = data[j];
            data[j] = orig + step;
            double f_plus = loss_fn().value();
            data[j] = orig - step;
            double f_minus = loss_fn().value();
            data[j] = orig;
            double fd = (f_plus - f_minus) / (2.0 * step);
            double tg = tape_grads[i][j];
            double rel = std::fabs(tg - fd) / std::max({1.0, std::fabs(tg), std::fabs(fd)});
            if (rel > tol) {
                // central differences lie when the step straddles a relu/max
                // kink; compare the one-sided slopes and skip nonsmooth points
                double f0 = loss_fn().value();
                double d_plus = (f_plus - f0) / step;
                double d_minus = (f0 - f_minus) / step;
                double gap = std::fabs(d_plus - d_minus) /
                             std::max({1.0, std::fabs(d_plus), std::fabs(d_minus)});
                if (gap > tol) continue;
            }
            report.max_rel_error = std::max(report.max_rel_error, rel);
        }
    }
    report.pass = report.max_rel_error <= tol;
    return report;
}

}  // namespace synli_test
