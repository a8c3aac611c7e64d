#pragma once

#include <cstddef>
#include <vector>

#include "snasnet/rng.hpp"

namespace snasnet {

// Dense NCHW tensor of 32-bit floats.
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> data;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0f) {}

    static Tensor4 zeros(int n, int c, int h, int w) { return Tensor4(n, c, h, w); }

    size_t size() const { return data.size(); }

    float& at(int i, int ch, int y, int x) {
        return data[((static_cast<size_t>(i) * c + ch) * h + y) * w + x];
    }
    float at(int i, int ch, int y, int x) const {
        return data[((static_cast<size_t>(i) * c + ch) * h + y) * w + x];
    }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }
};

// Convolution kernel (C_out, C_in, k, k) with stride/padding. No bias;
// a batch-norm follows every conv in this architecture.
struct ConvWeights {
    int c_out = 0, c_in = 0, k = 1;
    int stride = 1, padding = 0;
    std::vector<float> kernel;

    ConvWeights() = default;
    ConvWeights(int co, int ci, int k_, int stride_, int padding_)
        : c_out(co), c_in(ci), k(k_), stride(stride_), padding(padding_),
          kernel(static_cast<size_t>(co) * ci * k_ * k_, 0.0f) {}

    float& at(int co, int ci, int ky, int kx) {
        return kernel[((static_cast<size_t>(co) * c_in + ci) * k + ky) * k + kx];
    }
    float at(int co, int ci, int ky, int kx) const {
        return kernel[((static_cast<size_t>(co) * c_in + ci) * k + ky) * k + kx];
    }
};

Tensor4 conv2d(const Tensor4& input, const ConvWeights& w);

// Gradient of conv2d: given d(loss)/d(output), returns d(loss)/d(input) and
// accumulates d(loss)/d(kernel) into grad_kernel (same layout as w.kernel).
Tensor4 conv2d_backward(const Tensor4& input, const ConvWeights& w,
                        const Tensor4& grad_out, std::vector<float>& grad_kernel);

// Average pooling with count-include-pad semantics: the divisor is always
// k*k, also at padded borders.
Tensor4 avgpool2d(const Tensor4& input, int k, int stride, int padding);
Tensor4 avgpool2d_backward(const Tensor4& grad_out, int in_h, int in_w,
                           int k, int stride, int padding);

// Per-channel batch normalization over batch and spatial positions.
struct BnCache {
    std::vector<float> mean, invstd; // per channel
    Tensor4 xhat;
};

Tensor4 batchnorm_batchstats(const Tensor4& input, const std::vector<float>& gamma,
                             const std::vector<float>& beta, float eps,
                             BnCache* cache = nullptr);
Tensor4 batchnorm_backward(const Tensor4& grad_out, const BnCache& cache,
                           const std::vector<float>& gamma,
                           std::vector<float>& grad_gamma, std::vector<float>& grad_beta);

// Row-major (N, D) matrix.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0f) {}

    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

// y = x * W^T + b with W of shape (d_out, d_in).
Matrix linear(const Matrix& x, const Matrix& weight, const std::vector<float>& bias);
Matrix linear_backward(const Matrix& x, const Matrix& weight, const Matrix& grad_out,
                       std::vector<float>& grad_weight, std::vector<float>& grad_bias);

// Zero-mean Gaussian with std sqrt(2 / fan_in).
void he_init(std::vector<float>& out, int fan_in, Rng& rng);

} // namespace snasnet
