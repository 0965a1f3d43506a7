#ifndef ODCL_TESTS_FD_UTIL_HPP
#define ODCL_TESTS_FD_UTIL_HPP

#include <cmath>
#include <functional>

#include "odcl/backbone.hpp"

namespace odcl::testutil {

// Central finite difference of a scalar function with respect to one entry.
template <class F>
double central_diff(F&& eval, double& param, double step = 1e-5) {
    const double orig = param;
    param = orig + step;
    const double up = eval();
    param = orig - step;
    const double down = eval();
    param = orig;
    return (up - down) / (2.0 * step);
}

// Numeric gradient for every entry of a matrix parameter.
template <class F>
Mat<double> numeric_grad(F&& eval, Mat<double>& param, double step = 1e-5) {
    Mat<double> g(param.rows(), param.cols());
    for (Eigen::Index i = 0; i < param.rows(); ++i)
        for (Eigen::Index j = 0; j < param.cols(); ++j)
            g(i, j) = central_diff(eval, param(i, j), step);
    return g;
}

// Max-norm relative difference, guarded against all-zero gradients.
inline double relative_error(const Mat<double>& analytic, const Mat<double>& numeric) {
    double scale = std::max({analytic.template lpNorm<Eigen::Infinity>(),
                             numeric.template lpNorm<Eigen::Infinity>(), 1e-12});
    return (analytic - numeric).template lpNorm<Eigen::Infinity>() / scale;
}

} // namespace odcl::testutil

#endif
