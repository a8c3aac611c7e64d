#include "snasnet/data.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace snasnet {

namespace {

constexpr int kCifarDim = 32;
constexpr int kCifarChannels = 3;
constexpr int kCifarRecordBytes = 1 + kCifarChannels * kCifarDim * kCifarDim;

void standardize(Tensor4& images, const std::vector<float>& mean, const std::vector<float>& std) {
    for (int i = 0; i < images.n; ++i)
        for (int c = 0; c < images.c; ++c)
            for (int y = 0; y < images.h; ++y)
                for (int x = 0; x < images.w; ++x)
                    images.at(i, c, y, x) = (images.at(i, c, y, x) - mean[c]) / std[c];
}

void compute_channel_stats(const Tensor4& images, std::vector<float>& mean, std::vector<float>& std) {
    mean.assign(images.c, 0.0f);
    std.assign(images.c, 1.0f);
    const double count = static_cast<double>(images.n) * images.h * images.w;
    for (int c = 0; c < images.c; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < images.n; ++i)
            for (int y = 0; y < images.h; ++y)
                for (int x = 0; x < images.w; ++x) {
                    const double v = images.at(i, c, y, x);
                    sum += v;
                    sq += v * v;
                }
        const double m = sum / count;
        const double var = std::max(sq / count - m * m, 1e-12);
        mean[c] = static_cast<float>(m);
        std[c] = static_cast<float>(std::sqrt(var));
    }
}

LabeledBatch read_cifar_file(const std::string& path, int expected_records) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cifar10: cannot open " + path);
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<long long>(in.tellg());
    const long long expected = static_cast<long long>(expected_records) * kCifarRecordBytes;
    if (bytes != expected)
        throw std::runtime_error("cifar10: " + path + " has " + std::to_string(bytes) +
                                 " bytes, expected " + std::to_string(expected));
    in.seekg(0);

    LabeledBatch batch;
    batch.images = Tensor4(expected_records, kCifarChannels, kCifarDim, kCifarDim);
    batch.labels.resize(expected_records);
    std::vector<unsigned char> rec(kCifarRecordBytes);
    for (int i = 0; i < expected_records; ++i) {
        in.read(reinterpret_cast<char*>(rec.data()), kCifarRecordBytes);
        if (!in) throw std::runtime_error("cifar10: short read in " + path);
        batch.labels[i] = rec[0];
        if (batch.labels[i] > 9)
            throw std::runtime_error("cifar10: label out of range in " + path);
        float* dst = &batch.images.data[static_cast<size_t>(i) * kCifarChannels * kCifarDim * kCifarDim];
        for (int k = 0; k < kCifarChannels * kCifarDim * kCifarDim; ++k)
            dst[k] = static_cast<float>(rec[1 + k]) / 255.0f;
    }
    return batch;
}

LabeledBatch concat(std::vector<LabeledBatch> parts) {
    int total = 0;
    for (const auto& p : parts) total += p.size();
    const auto& first = parts.front().images;
    LabeledBatch out;
    out.images = Tensor4(total, first.c, first.h, first.w);
    out.labels.reserve(total);
    size_t offset = 0;
    for (auto& p : parts) {
        std::copy(p.images.data.begin(), p.images.data.end(), out.images.data.begin() + offset);
        offset += p.images.data.size();
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    }
    return out;
}

} // namespace

Dataset load_cifar10_binary(const std::string& dir) {
    std::vector<LabeledBatch> parts;
    for (int b = 1; b <= 5; ++b)
        parts.push_back(read_cifar_file(dir + "/data_batch_" + std::to_string(b) + ".bin", 10000));

    Dataset ds;
    ds.num_classes = 10;
    ds.train = concat(std::move(parts));
    ds.test = read_cifar_file(dir + "/test_batch.bin", 10000);

    compute_channel_stats(ds.train.images, ds.channel_mean, ds.channel_std);
    standardize(ds.train.images, ds.channel_mean, ds.channel_std);
    standardize(ds.test.images, ds.channel_mean, ds.channel_std);
    return ds;
}

void write_cifar_records(const LabeledBatch& batch, const std::vector<float>& mean,
                         const std::vector<float>& std, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cifar10: cannot write " + path);
    const int per_image = batch.images.c * batch.images.h * batch.images.w;
    for (int i = 0; i < batch.size(); ++i) {
        out.put(static_cast<char>(batch.labels[i]));
        for (int c = 0; c < batch.images.c; ++c)
            for (int y = 0; y < batch.images.h; ++y)
                for (int x = 0; x < batch.images.w; ++x) {
                    const float v = denormalize(batch.images.at(i, c, y, x), mean[c], std[c]);
                    const long byte = std::lround(static_cast<double>(v) * 255.0);
                    out.put(static_cast<char>(std::min(255L, std::max(0L, byte))));
                }
        (void)per_image;
    }
}

Dataset make_synthetic(const SyntheticSpec& spec) {
    if (spec.num_classes < 2 || spec.image_size < 4)
        throw std::invalid_argument("make_synthetic: bad spec");
    Rng rng(spec.seed);
    const int s = spec.image_size;

    auto base_pattern = [&](int cls, int y, int x) -> float {
        if (spec.family == PatternFamily::Stripes) {
            const double theta = M_PI * cls / spec.num_classes;
            const double u = (x * std::cos(theta) + y * std::sin(theta)) / s;
            return static_cast<float>(std::sin(2.0 * M_PI * 2.5 * u));
        }
        // Gaussian blob at a class-specific position on a circle.
        const double phi = 2.0 * M_PI * cls / spec.num_classes;
        const double cy = s / 2.0 + (s / 4.0) * std::sin(phi);
        const double cx = s / 2.0 + (s / 4.0) * std::cos(phi);
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        const double sigma = s / 6.0;
        return static_cast<float>(2.0 * std::exp(-d2 / (2.0 * sigma * sigma)) - 0.5);
    };

    auto fill_split = [&](int per_class) {
        LabeledBatch batch;
        batch.images = Tensor4(per_class * spec.num_classes, 1, s, s);
        batch.labels.resize(batch.images.n);
        int idx = 0;
        for (int cls = 0; cls < spec.num_classes; ++cls) {
            for (int k = 0; k < per_class; ++k, ++idx) {
                batch.labels[idx] = cls;
                for (int y = 0; y < s; ++y)
                    for (int x = 0; x < s; ++x)
                        batch.images.at(idx, 0, y, x) =
                            base_pattern(cls, y, x) +
                            static_cast<float>(spec.noise_std) * rng.gaussian();
            }
        }
        return batch;
    };

    Dataset ds;
    ds.num_classes = spec.num_classes;
    ds.train = fill_split(spec.samples_per_class_train);
    ds.test = fill_split(spec.samples_per_class_test);
    compute_channel_stats(ds.train.images, ds.channel_mean, ds.channel_std);
    standardize(ds.train.images, ds.channel_mean, ds.channel_std);
    standardize(ds.test.images, ds.channel_mean, ds.channel_std);
    return ds;
}

LabeledBatch augment(const LabeledBatch& batch, int crop_pad, bool flip, Rng& rng) {
    if (crop_pad < 0) throw std::invalid_argument("augment: crop_pad must be non-negative");
    LabeledBatch out;
    out.images = Tensor4(batch.images.n, batch.images.c, batch.images.h, batch.images.w);
    out.labels = batch.labels;
    const int h = batch.images.h, w = batch.images.w;
    for (int i = 0; i < batch.images.n; ++i) {
        int dy = 0, dx = 0;
        if (crop_pad > 0) {
            dy = static_cast<int>(rng.below(2 * crop_pad + 1)) - crop_pad;
            dx = static_cast<int>(rng.below(2 * crop_pad + 1)) - crop_pad;
        }
        const bool mirror = flip && rng.coin(0.5);
        for (int c = 0; c < batch.images.c; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const int sx = mirror ? w - 1 - x : x;
                    const int oy = y + dy, ox = sx + dx;
                    const float v = (oy >= 0 && oy < h && ox >= 0 && ox < w)
                                        ? batch.images.at(i, c, oy, ox)
                                        : 0.0f;
                    out.images.at(i, c, y, x) = v;
                }
    }
    return out;
}

LabeledBatch slice(const LabeledBatch& batch, int start, int count) {
    if (start < 0 || start + count > batch.size())
        throw std::invalid_argument("slice: range out of bounds");
    LabeledBatch out;
    out.images = Tensor4(count, batch.images.c, batch.images.h, batch.images.w);
    const size_t per = static_cast<size_t>(batch.images.c) * batch.images.h * batch.images.w;
    std::copy(batch.images.data.begin() + start * per,
              batch.images.data.begin() + (start + count) * per, out.images.data.begin());
    out.labels.assign(batch.labels.begin() + start, batch.labels.begin() + start + count);
    return out;
}

} // namespace snasnet
