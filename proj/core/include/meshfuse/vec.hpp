#pragma once
// Small dense-vector helpers shared across the library. All math is double
// precision; vectors are plain std::vector<double>.

#include <cmath>
#include <cstddef>
#include <vector>

#include "meshfuse/errors.hpp"

namespace meshfuse {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const Vec& v) {
    return std::sqrt(dot(v, v));
}

// Cosine similarity. An all-zero vector has similarity 0 with anything.
inline double cosine(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) {
        throw DimensionError("cosine: dimension mismatch");
    }
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

inline Vec normalized(Vec v) {
    const double n = l2_norm(v);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
    return v;
}

inline bool is_unit(const Vec& v, double tol = 1e-6) {
    return std::abs(l2_norm(v) - 1.0) <= tol;
}

inline bool is_zero(const Vec& v) {
    for (double x : v) {
        if (x != 0.0) return false;
    }
    return true;
}

}  // namespace meshfuse
