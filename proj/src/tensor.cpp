#include "snasnet/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace snasnet {

static void check(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

Tensor4 conv2d(const Tensor4& input, const ConvWeights& w) {
    check(input.c == w.c_in, "conv2d: input channel count does not match kernel");
    check(input.n > 0 && input.h > 0 && input.w > 0, "conv2d: empty input");

    const int oh = (input.h + 2 * w.padding - w.k) / w.stride + 1;
    const int ow = (input.w + 2 * w.padding - w.k) / w.stride + 1;
    check(oh > 0 && ow > 0, "conv2d: kernel larger than padded input");

    Tensor4 out(input.n, w.c_out, oh, ow);
    for (int i = 0; i < input.n; ++i) {
        for (int co = 0; co < w.c_out; ++co) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    float acc = 0.0f;
                    const int y0 = oy * w.stride - w.padding;
                    const int x0 = ox * w.stride - w.padding;
                    for (int ci = 0; ci < w.c_in; ++ci) {
                        for (int ky = 0; ky < w.k; ++ky) {
                            const int y = y0 + ky;
                            if (y < 0 || y >= input.h) continue;
                            for (int kx = 0; kx < w.k; ++kx) {
                                const int x = x0 + kx;
                                if (x < 0 || x >= input.w) continue;
                                acc += input.at(i, ci, y, x) * w.at(co, ci, ky, kx);
                            }
                        }
                    }
                    out.at(i, co, oy, ox) = acc;
                }
            }
        }
    }
    return out;
}

Tensor4 conv2d_backward(const Tensor4& input, const ConvWeights& w,
                        const Tensor4& grad_out, std::vector<float>& grad_kernel) {
    check(input.c == w.c_in, "conv2d_backward: channel mismatch");
    check(grad_out.c == w.c_out, "conv2d_backward: grad channel mismatch");
    grad_kernel.resize(w.kernel.size(), 0.0f);

    Tensor4 grad_in(input.n, input.c, input.h, input.w);
    for (int i = 0; i < input.n; ++i) {
        for (int co = 0; co < w.c_out; ++co) {
            for (int oy = 0; oy < grad_out.h; ++oy) {
                for (int ox = 0; ox < grad_out.w; ++ox) {
                    const float g = grad_out.at(i, co, oy, ox);
                    if (g == 0.0f) continue;
                    const int y0 = oy * w.stride - w.padding;
                    const int x0 = ox * w.stride - w.padding;
                    for (int ci = 0; ci < w.c_in; ++ci) {
                        for (int ky = 0; ky < w.k; ++ky) {
                            const int y = y0 + ky;
                            if (y < 0 || y >= input.h) continue;
                            for (int kx = 0; kx < w.k; ++kx) {
                                const int x = x0 + kx;
                                if (x < 0 || x >= input.w) continue;
                                grad_in.at(i, ci, y, x) += g * w.at(co, ci, ky, kx);
                                grad_kernel[((static_cast<size_t>(co) * w.c_in + ci) * w.k + ky) * w.k + kx] +=
                                    g * input.at(i, ci, y, x);
                            }
                        }
                    }
                }
            }
        }
    }
    return grad_in;
}

Tensor4 avgpool2d(const Tensor4& input, int k, int stride, int padding) {
    check(input.h + 2 * padding >= k && input.w + 2 * padding >= k,
          "avgpool2d: window larger than padded input");
    const int oh = (input.h + 2 * padding - k) / stride + 1;
    const int ow = (input.w + 2 * padding - k) / stride + 1;
    const float inv = 1.0f / static_cast<float>(k * k);

    Tensor4 out(input.n, input.c, oh, ow);
    for (int i = 0; i < input.n; ++i) {
        for (int ch = 0; ch < input.c; ++ch) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    float acc = 0.0f;
                    for (int ky = 0; ky < k; ++ky) {
                        const int y = oy * stride - padding + ky;
                        if (y < 0 || y >= input.h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int x = ox * stride - padding + kx;
                            if (x < 0 || x >= input.w) continue;
                            acc += input.at(i, ch, y, x);
                        }
                    }
                    out.at(i, ch, oy, ox) = acc * inv;
                }
            }
        }
    }
    return out;
}

Tensor4 avgpool2d_backward(const Tensor4& grad_out, int in_h, int in_w,
                           int k, int stride, int padding) {
    const float inv = 1.0f / static_cast<float>(k * k);
    Tensor4 grad_in(grad_out.n, grad_out.c, in_h, in_w);
    for (int i = 0; i < grad_out.n; ++i) {
        for (int ch = 0; ch < grad_out.c; ++ch) {
            for (int oy = 0; oy < grad_out.h; ++oy) {
                for (int ox = 0; ox < grad_out.w; ++ox) {
                    const float g = grad_out.at(i, ch, oy, ox) * inv;
                    for (int ky = 0; ky < k; ++ky) {
                        const int y = oy * stride - padding + ky;
                        if (y < 0 || y >= in_h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int x = ox * stride - padding + kx;
                            if (x < 0 || x >= in_w) continue;
                            grad_in.at(i, ch, y, x) += g;
                        }
                    }
                }
            }
        }
    }
    return grad_in;
}

Tensor4 batchnorm_batchstats(const Tensor4& input, const std::vector<float>& gamma,
                             const std::vector<float>& beta, float eps, BnCache* cache) {
    check(static_cast<int>(gamma.size()) == input.c && static_cast<int>(beta.size()) == input.c,
          "batchnorm: parameter size does not match channel count");
    check(input.n >= 2, "batchnorm: batch statistics need batch size >= 2");

    const size_t per_channel = static_cast<size_t>(input.n) * input.h * input.w;
    std::vector<float> mean(input.c), invstd(input.c);
    for (int ch = 0; ch < input.c; ++ch) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < input.n; ++i)
            for (int y = 0; y < input.h; ++y)
                for (int x = 0; x < input.w; ++x) {
                    const double v = input.at(i, ch, y, x);
                    sum += v;
                    sq += v * v;
                }
        const double m = sum / static_cast<double>(per_channel);
        const double var = sq / static_cast<double>(per_channel) - m * m;
        mean[ch] = static_cast<float>(m);
        invstd[ch] = static_cast<float>(1.0 / std::sqrt(std::max(var, 0.0) + eps));
    }

    Tensor4 out(input.n, input.c, input.h, input.w);
    Tensor4 xhat;
    if (cache) xhat = Tensor4(input.n, input.c, input.h, input.w);
    for (int i = 0; i < input.n; ++i)
        for (int ch = 0; ch < input.c; ++ch)
            for (int y = 0; y < input.h; ++y)
                for (int x = 0; x < input.w; ++x) {
                    const float xh = (input.at(i, ch, y, x) - mean[ch]) * invstd[ch];
                    if (cache) xhat.at(i, ch, y, x) = xh;
                    out.at(i, ch, y, x) = gamma[ch] * xh + beta[ch];
                }
    if (cache) {
        cache->mean = std::move(mean);
        cache->invstd = std::move(invstd);
        cache->xhat = std::move(xhat);
    }
    return out;
}

Tensor4 batchnorm_backward(const Tensor4& grad_out, const BnCache& cache,
                           const std::vector<float>& gamma,
                           std::vector<float>& grad_gamma, std::vector<float>& grad_beta) {
    const int C = grad_out.c;
    grad_gamma.resize(C, 0.0f);
    grad_beta.resize(C, 0.0f);
    const double m = static_cast<double>(grad_out.n) * grad_out.h * grad_out.w;

    Tensor4 grad_in(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
    for (int ch = 0; ch < C; ++ch) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int i = 0; i < grad_out.n; ++i)
            for (int y = 0; y < grad_out.h; ++y)
                for (int x = 0; x < grad_out.w; ++x) {
                    const double g = grad_out.at(i, ch, y, x);
                    sum_g += g;
                    sum_gx += g * cache.xhat.at(i, ch, y, x);
                }
        grad_beta[ch] += static_cast<float>(sum_g);
        grad_gamma[ch] += static_cast<float>(sum_gx);
        const double a = gamma[ch] * cache.invstd[ch];
        for (int i = 0; i < grad_out.n; ++i)
            for (int y = 0; y < grad_out.h; ++y)
                for (int x = 0; x < grad_out.w; ++x) {
                    const double g = grad_out.at(i, ch, y, x);
                    const double xh = cache.xhat.at(i, ch, y, x);
                    grad_in.at(i, ch, y, x) =
                        static_cast<float>(a * (g - sum_g / m - xh * sum_gx / m));
                }
    }
    return grad_in;
}

Matrix linear(const Matrix& x, const Matrix& weight, const std::vector<float>& bias) {
    check(x.cols == weight.cols, "linear: inner dimensions do not match");
    check(static_cast<int>(bias.size()) == weight.rows, "linear: bias size mismatch");
    Matrix out(x.rows, weight.rows);
    for (int i = 0; i < x.rows; ++i) {
        for (int o = 0; o < weight.rows; ++o) {
            float acc = bias[o];
            const float* xr = &x.data[static_cast<size_t>(i) * x.cols];
            const float* wr = &weight.data[static_cast<size_t>(o) * weight.cols];
            for (int d = 0; d < x.cols; ++d) acc += xr[d] * wr[d];
            out.at(i, o) = acc;
        }
    }
    return out;
}

Matrix linear_backward(const Matrix& x, const Matrix& weight, const Matrix& grad_out,
                       std::vector<float>& grad_weight, std::vector<float>& grad_bias) {
    grad_weight.resize(weight.data.size(), 0.0f);
    grad_bias.resize(weight.rows, 0.0f);
    Matrix grad_in(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        for (int o = 0; o < weight.rows; ++o) {
            const float g = grad_out.at(i, o);
            if (g == 0.0f) continue;
            grad_bias[o] += g;
            const float* xr = &x.data[static_cast<size_t>(i) * x.cols];
            float* gw = &grad_weight[static_cast<size_t>(o) * weight.cols];
            float* gi = &grad_in.data[static_cast<size_t>(i) * x.cols];
            const float* wr = &weight.data[static_cast<size_t>(o) * weight.cols];
            for (int d = 0; d < x.cols; ++d) {
                gw[d] += g * xr[d];
                gi[d] += g * wr[d];
            }
        }
    }
    return grad_in;
}

void he_init(std::vector<float>& out, int fan_in, Rng& rng) {
    if (fan_in <= 0) throw std::invalid_argument("he_init: fan_in must be positive");
    const float std = std::sqrt(2.0f / static_cast<float>(fan_in));
    for (auto& v : out) v = std * rng.gaussian();
}

} // namespace snasnet
