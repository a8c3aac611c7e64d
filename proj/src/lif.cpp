#include "snasnet/lif.hpp"

#include <stdexcept>

namespace snasnet {

SpikeTensor lif_step(LifState& state, const Tensor4& input_current, const LifConfig& cfg,
                     Tensor4* pre_reset_membrane) {
    if (!state.membrane.same_shape(input_current))
        throw std::invalid_argument("lif_step: input shape does not match state shape");

    const float decay = cfg.decay();
    const float scale = cfg.input_scale();

    SpikeTensor spikes(input_current.n, input_current.c, input_current.h, input_current.w);
    if (pre_reset_membrane)
        *pre_reset_membrane = Tensor4(input_current.n, input_current.c, input_current.h, input_current.w);

    const size_t sz = input_current.size();
    for (size_t i = 0; i < sz; ++i) {
        const float u = decay * state.membrane.data[i] + scale * input_current.data[i];
        if (pre_reset_membrane) pre_reset_membrane->data[i] = u;
        if (u >= cfg.threshold) {
            spikes.data[i] = 1.0f;
            state.membrane.data[i] = cfg.reset_value;
        } else {
            spikes.data[i] = 0.0f;
            state.membrane.data[i] = u;
        }
    }
    return spikes;
}

} // namespace snasnet
