#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ingram/errors.hpp"
#include "ingram/rng.hpp"

namespace ingram {

// Dense row-major matrix of doubles. Vectors are 1-column or 1-row tensors.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(size_t(r) * size_t(c), 0.0) {}

    double& at(int r, int c) { return v[size_t(r) * cols + c]; }
    double at(int r, int c) const { return v[size_t(r) * cols + c]; }

    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    static Tensor zeros(int r, int c) { return Tensor(r, c); }

    static Tensor filled(int r, int c, double value) {
        Tensor t(r, c);
        for (auto& x : t.v) x = value;
        return t;
    }

    // Uniform on [-b, b] with b = sqrt(6 / (rows + cols)).
    static Tensor glorot(int r, int c, Rng& rng) {
        if (r < 1 || c < 1) throw NumericError("glorot: non-positive shape");
        const double bound = std::sqrt(6.0 / double(r + c));
        Tensor t(r, c);
        for (auto& x : t.v) x = rng.uniform(-bound, bound);
        return t;
    }
};

}  // namespace ingram
