#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace linefix::nn {

using Vector = std::vector<double>;

// Dense row-major matrix. Sized for desk-scale models; plain loops, no BLAS.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

    void zero() { std::fill(a.begin(), a.end(), 0.0); }

    bool operator==(const Matrix&) const = default;
};

// y += W x
void matvec_add(const Matrix& w, const Vector& x, Vector& y);
// x += W^T y
void matvec_t_add(const Matrix& w, const Vector& y, Vector& x);
// W += y x^T
void outer_add(Matrix& w, const Vector& y, const Vector& x);

double dot(const Vector& a, const Vector& b);
void add_scaled(Vector& y, const Vector& x, double s);  // y += s*x

// In-place softmax; subtracts the max for stability.
void softmax_inplace(Vector& v);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace linefix::nn
