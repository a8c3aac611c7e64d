#pragma once

#include "snasnet/tensor.hpp"

namespace snasnet {

// Discrete-time leaky integrate-and-fire parameters. The membrane decays by
// (1 - 1/tau_m) and integrates the input scaled by 1/tau_m; a spike fires
// when the potential reaches the threshold, then the potential hard-resets
// to zero.
struct LifConfig {
    float tau_m = 4.0f / 3.0f;
    float threshold = 1.0f;
    float reset_value = 0.0f;

    float decay() const { return 1.0f - 1.0f / tau_m; }
    float input_scale() const { return 1.0f / tau_m; }
};

struct LifState {
    Tensor4 membrane;

    LifState() = default;
    explicit LifState(int n, int c, int h, int w) : membrane(n, c, h, w) {}

    void reset(float value = 0.0f) { membrane.fill(value); }
};

// Spike maps are Tensor4 whose entries are exactly 0.0 or 1.0.
using SpikeTensor = Tensor4;

// One integration step. Fire-then-reset: the spike is decided on the
// post-integration membrane, and firing neurons enter the next step at
// reset_value. "Exceeds" is implemented as u >= threshold.
// Optionally records the pre-reset membrane (needed for surrogate-gradient
// backward passes).
SpikeTensor lif_step(LifState& state, const Tensor4& input_current, const LifConfig& cfg,
                     Tensor4* pre_reset_membrane = nullptr);

} // namespace snasnet
