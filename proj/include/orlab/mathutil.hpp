#pragma once

// Small numeric helpers shared across modules.

#include <cmath>
#include <span>
#include <stdexcept>

namespace orlab {

// Numerically stable logistic function.
inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow for large |x|.
inline double log_sigmoid(double x) {
    if (x >= 0.0) {
        return -std::log1p(std::exp(-x));
    }
    return x - std::log1p(std::exp(x));
}

inline double logsumexp(std::span<const double> xs) {
    if (xs.empty()) {
        throw std::invalid_argument("logsumexp: empty input");
    }
    double m = xs[0];
    for (double x : xs) {
        if (x > m) m = x;
    }
    double s = 0.0;
    for (double x : xs) {
        s += std::exp(x - m);
    }
    return m + std::log(s);
}

// Total variation distance between two distributions over the same support.
inline double total_variation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("total_variation: size mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += std::abs(a[i] - b[i]);
    }
    return 0.5 * s;
}

}  // namespace orlab
