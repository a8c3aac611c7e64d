#pragma once

#include <string>
#include <vector>

#include "snasnet/rng.hpp"
#include "snasnet/tensor.hpp"

namespace snasnet {

struct LabeledBatch {
    Tensor4 images;
    std::vector<int> labels;

    int size() const { return images.n; }
};

struct Dataset {
    LabeledBatch train, test;
    int num_classes = 0;
    // Channel standardization constants computed from the training split.
    std::vector<float> channel_mean, channel_std;
};

// Standard CIFAR-10 binary format: data_batch_1..5.bin + test_batch.bin,
// each record = 1 label byte + 3072 pixel bytes (R, G, B planes, row-major).
// Pixels are mapped to [0,1] then channel-standardized with constants from
// the training split.
Dataset load_cifar10_binary(const std::string& dir);

// Writes records in the same binary layout (de-standardizing first);
// loader round-trips raw bytes exactly.
void write_cifar_records(const LabeledBatch& batch, const std::vector<float>& mean,
                         const std::vector<float>& std, const std::string& path);

enum class PatternFamily { Stripes, Blobs };

struct SyntheticSpec {
    int num_classes = 4;
    int samples_per_class_train = 64;
    int samples_per_class_test = 32;
    int image_size = 16;
    PatternFamily family = PatternFamily::Stripes;
    double noise_std = 0.5;
    uint64_t seed = 1;
};

// Class-conditional patterns plus Gaussian noise; single channel,
// standardized with train-split constants. Deterministic per (spec, seed).
Dataset make_synthetic(const SyntheticSpec& spec);

// Per-sample random pad-then-crop and 0.5-probability horizontal mirror.
LabeledBatch augment(const LabeledBatch& batch, int crop_pad, bool flip, Rng& rng);

// Rows [start, start+count) of a batch.
LabeledBatch slice(const LabeledBatch& batch, int start, int count);

// De-standardize one value (inverse of the loader's normalization).
inline float denormalize(float v, float mean, float std) { return v * std + mean; }

} // namespace snasnet
