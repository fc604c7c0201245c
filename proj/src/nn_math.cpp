#include "linefix/nn_math.hpp"

#include <algorithm>
#include <cmath>

namespace linefix::nn {

void matvec_add(const Matrix& w, const Vector& x, Vector& y) {
    assert(static_cast<int>(x.size()) == w.cols);
    assert(static_cast<int>(y.size()) == w.rows);
    const double* row = w.a.data();
    for (int r = 0; r < w.rows; ++r, row += w.cols) {
        double acc = 0.0;
        for (int c = 0; c < w.cols; ++c) acc += row[c] * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] += acc;
    }
}

void matvec_t_add(const Matrix& w, const Vector& y, Vector& x) {
    assert(static_cast<int>(y.size()) == w.rows);
    assert(static_cast<int>(x.size()) == w.cols);
    const double* row = w.a.data();
    for (int r = 0; r < w.rows; ++r, row += w.cols) {
        const double yr = y[static_cast<std::size_t>(r)];
        if (yr == 0.0) continue;
        for (int c = 0; c < w.cols; ++c) x[static_cast<std::size_t>(c)] += row[c] * yr;
    }
}

void outer_add(Matrix& w, const Vector& y, const Vector& x) {
    assert(static_cast<int>(y.size()) == w.rows);
    assert(static_cast<int>(x.size()) == w.cols);
    double* row = w.a.data();
    for (int r = 0; r < w.rows; ++r, row += w.cols) {
        const double yr = y[static_cast<std::size_t>(r)];
        if (yr == 0.0) continue;
        for (int c = 0; c < w.cols; ++c) row[c] += yr * x[static_cast<std::size_t>(c)];
    }
}

double dot(const Vector& a, const Vector& b) {
    assert(a.size() == b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

void add_scaled(Vector& y, const Vector& x, double s) {
    assert(y.size() == x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
}

void softmax_inplace(Vector& v) {
    if (v.empty()) return;
    double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (auto& e : v) {
        e = std::exp(e - mx);
        sum += e;
    }
    for (auto& e : v) e /= sum;
}

}  // namespace linefix::nn
