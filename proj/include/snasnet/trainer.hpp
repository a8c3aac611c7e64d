#pragma once

#include <string>
#include <vector>

#include "snasnet/data.hpp"
#include "snasnet/network.hpp"

namespace snasnet {

struct TrainConfig {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    int epochs = 20;
    int batch_size = 64;
    bool cosine = true;
    bool augment_enabled = true;
    int crop_pad = 4;
    bool flip = true;
};

struct SurrogateConfig {
    float gamma = 1.0f; // width of the rectangular window around the threshold
};

// Rectangular surrogate for d(spike)/d(membrane): 1/gamma inside
// |u - threshold| < gamma/2, zero outside. Integrates to 1.
float surrogate_grad(float u, float threshold, float gamma);

// One reverse LIF step. grad_spike is dL/d(o_t), carry holds dL/d(u_post_t)
// on entry and dL/d(u_post_{t-1}) on exit (hard reset detached: the spike
// is treated as a constant inside the reset branch). pre_reset_u is the
// membrane recorded by the forward pass. Returns dL/d(input current).
Tensor4 lif_backward(const Tensor4& pre_reset_u, const Tensor4& grad_spike,
                     Tensor4& carry, const LifConfig& cfg, float sg_gamma);

struct StepStats {
    double loss = 0.0;
    int correct = 0;
};

// Forward + full BPTT over cfg.timesteps for one mini-batch; gradients
// accumulate into the network's parameter grad buffers (zeroed first).
StepStats backprop_batch(SpikingNetwork& net, const Tensor4& images,
                         const std::vector<int>& labels, const SurrogateConfig& scfg,
                         Rng& dropout_rng);

struct SgdState {
    std::vector<std::vector<float>> velocity;
};

// v = momentum * v + grad + weight_decay * w; w -= lr * v.
void sgd_step(SpikingNetwork& net, SgdState& state, double lr, double momentum,
              double weight_decay);

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

struct TrainResult {
    std::vector<EpochMetrics> metrics;
    bool diverged = false;
    std::string diagnostic;
};

TrainResult train(SpikingNetwork& net, const Dataset& data, const TrainConfig& tcfg,
                  const SurrogateConfig& scfg, uint64_t seed);

// Accuracy with dropout disabled; LIF state reset per evaluation chunk.
double evaluate(SpikingNetwork& net, const LabeledBatch& split, int batch_size = 64);

// Checkpoint: magic "SNCK", version, genotype JSON, then flat parameter
// arrays in declaration order (little-endian f32).
void save_checkpoint(SpikingNetwork& net, const std::string& path);
SpikingNetwork load_checkpoint(const std::string& path, const NetworkConfig& cfg);

} // namespace snasnet
