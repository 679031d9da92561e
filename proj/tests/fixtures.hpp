#pragma once

// Seeded synthetic problems shared by the unit and acceptance tests.

#include <cmath>
#include <random>
#include <vector>

#include "spatialrisk/numkernel.hpp"

namespace fixture {

using spatialrisk::DenseMatrix;
using spatialrisk::Vector;

struct LinearProblem {
    DenseMatrix x;  // regressors, no intercept column
    Vector y;
    Vector beta;    // intercept first
    std::vector<std::size_t> outliers;
};

/// y = b0 + X b + sigma * e, then `fraction` of rows shifted by `magnitude` sigmas.
inline LinearProblem contaminated_linear(std::uint64_t seed, std::size_t n, std::size_t p, double sigma,
                                         double fraction, double magnitude) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    LinearProblem prob;
    prob.x = DenseMatrix(n, p);
    prob.beta.resize(p + 1);
    for (auto& b : prob.beta) b = coef(gen);
    prob.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = prob.beta[0];
        for (std::size_t j = 0; j < p; ++j) {
            prob.x(i, j) = nd(gen);
            v += prob.x(i, j) * prob.beta[j + 1];
        }
        prob.y[i] = v + sigma * nd(gen);
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), gen);
    const auto n_out = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    for (std::size_t k = 0; k < n_out; ++k) {
        prob.outliers.push_back(order[k]);
        prob.y[order[k]] += magnitude * sigma;
    }
    return prob;
}

inline double distance(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

/// 1-D step: y = 0 for x < 0.5 and 1 otherwise, on n evenly spaced points in [0, 1].
inline void step_data(std::size_t n, DenseMatrix& x, Vector& y) {
    x = DenseMatrix(n, 1);
    y.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = static_cast<double>(i) / static_cast<double>(n - 1);
        y[i] = x(i, 0) < 0.5 ? 0.0 : 1.0;
    }
}

/// Noiseless nonlinear target on uniform features in [0, 1]^4:
/// y = 10 sin(pi x0 x1) + 20 (x2 - 0.5)^2 + 5 x3.
inline void nonlinear_data(std::uint64_t seed, std::size_t n, DenseMatrix& x, Vector& y) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    x = DenseMatrix(n, 4);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 4; ++j) x(i, j) = u(gen);
        y[i] = 10.0 * std::sin(M_PI * x(i, 0) * x(i, 1)) + 20.0 * (x(i, 2) - 0.5) * (x(i, 2) - 0.5) + 5.0 * x(i, 3);
    }
}

}  // namespace fixture
