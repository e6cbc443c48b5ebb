#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "ewcdr/errors.hpp"

namespace ewcdr {

// Dense double vector. Everything in this library runs in 64-bit floats.
struct Tensor1 {
    std::vector<double> data;

    Tensor1() = default;
    explicit Tensor1(std::size_t n) : data(n, 0.0) {}
    Tensor1(std::initializer_list<double> xs) : data(xs) {}

    std::size_t size() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool operator==(const Tensor1&) const = default;
};

// Dense row-major double matrix.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Tensor2(std::initializer_list<std::initializer_list<double>> rs) {
        rows = rs.size();
        cols = rows == 0 ? 0 : rs.begin()->size();
        data.reserve(rows * cols);
        for (const auto& r : rs) {
            if (r.size() != cols) throw shape_error("Tensor2: ragged initializer");
            data.insert(data.end(), r.begin(), r.end());
        }
    }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool operator==(const Tensor2&) const = default;
};

inline Tensor1 matvec(const Tensor2& w, const Tensor1& h) {
    if (w.cols != h.size())
        throw shape_error("matvec: " + std::to_string(w.rows) + "x" + std::to_string(w.cols) +
                          " with vector of length " + std::to_string(h.size()));
    Tensor1 out(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
        double acc = 0.0;
        const double* row = w.data.data() + r * w.cols;
        for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * h[c];
        out[r] = acc;
    }
    return out;
}

// w^T v, used when propagating gradients back through a layer.
inline Tensor1 matvec_transposed(const Tensor2& w, const Tensor1& v) {
    if (w.rows != v.size())
        throw shape_error("matvec_transposed: " + std::to_string(w.rows) + "x" +
                          std::to_string(w.cols) + " with vector of length " +
                          std::to_string(v.size()));
    Tensor1 out(w.cols);
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double* row = w.data.data() + r * w.cols;
        for (std::size_t c = 0; c < w.cols; ++c) out[c] += row[c] * v[r];
    }
    return out;
}

// Numerically stable softmax: shifts by the max entry before exponentiating,
// so arbitrarily large logits cannot overflow.
inline Tensor1 softmax(const Tensor1& z) {
    if (z.size() == 0) throw shape_error("softmax: empty input");
    const double m = *std::max_element(z.data.begin(), z.data.end());
    Tensor1 out(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - m);
        sum += out[i];
    }
    for (std::size_t i = 0; i < z.size(); ++i) out[i] /= sum;
    return out;
}

inline double log_sum_exp(const Tensor1& z) {
    if (z.size() == 0) throw shape_error("log_sum_exp: empty input");
    const double m = *std::max_element(z.data.begin(), z.data.end());
    double sum = 0.0;
    for (double v : z.data) sum += std::exp(v - m);
    return m + std::log(sum);
}

inline Tensor2 outer(const Tensor1& a, const Tensor1& b) {
    Tensor2 out(a.size(), b.size());
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t c = 0; c < b.size(); ++c) out(r, c) = a[r] * b[c];
    return out;
}

inline double l2_norm(const Tensor1& z) {
    double acc = 0.0;
    for (double v : z.data) acc += v * v;
    return std::sqrt(acc);
}

inline Tensor1 negated(const Tensor1& z) {
    Tensor1 out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = -z[i];
    return out;
}

}  // namespace ewcdr
