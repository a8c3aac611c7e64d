#pragma once

#include <array>
#include <string>
#include <vector>

#include "snasnet/genotype.hpp"
#include "snasnet/lif.hpp"
#include "snasnet/tensor.hpp"
#include "snasnet/trace.hpp"

namespace snasnet {

struct NetworkConfig {
    int base_channels = 16;
    int timesteps = 5;
    int num_classes = 10;
    int in_channels = 3;
    int in_h = 32, in_w = 32;
    int voting_k = 10;
    int fc_hidden = 1024;
    // Default trace covers the LIF layers downstream of searched edges
    // (cell nodes 1..3 of each cell plus the reduction layer); setting this
    // adds the encoder layer as well. The default keeps fully disconnected
    // cells at a constant kernel so they rank last instead of scoring on
    // input passthrough alone. Node 0 of each cell is a pass-through with
    // no LIF and is never traced.
    bool trace_all_lif_layers = false;
    LifConfig lif;
};

// Conv followed by batch norm (batch statistics, no running averages).
struct ConvBnLayer {
    ConvWeights conv;
    std::vector<float> gamma, beta;
    float eps = 1e-5f;

    // Gradient accumulators, filled by the BPTT backward pass.
    std::vector<float> g_kernel, g_gamma, g_beta;
};

struct LinearLayer {
    Matrix weight;
    std::vector<float> bias;

    std::vector<float> g_weight, g_bias;
};

struct EdgeOpInstance {
    Operation op = Operation::Zeroize;
    ConvBnLayer cb; // populated only for Conv1x1 / Conv3x3
};

struct CellInstance {
    int channels = 0;
    std::array<EdgeOpInstance, kNumEdges> fwd, bwd;
    std::array<LifState, kNumNodes> states;
    // Node spike maps from the previous timestep, read by backward edges.
    std::array<SpikeTensor, kNumNodes> buffer;
};

// Per-timestep forward caches needed by the backward pass.
struct EdgeCache {
    bool used = false;
    Tensor4 input; // op input (source spikes)
    BnCache bn;    // conv edges only
};

struct CellTape {
    std::array<EdgeCache, kNumEdges> fwd, bwd;
    std::array<Tensor4, kNumNodes> node_u; // pre-reset membranes
    std::array<SpikeTensor, kNumNodes> node_out;
    Tensor4 cell_in;
};

struct StepTape {
    BnCache enc_bn;
    Tensor4 enc_u;
    SpikeTensor enc_out;
    CellTape cell1, cell2;
    BnCache red_bn;
    Tensor4 red_conv_in; // cell1 output spikes
    Tensor4 red_u;
    SpikeTensor red_spikes; // pre-pool
    Tensor4 vec_in;         // cell2 output spikes
    Matrix flat;            // pooled + flattened, before dropout
    std::vector<float> dropout_mask;
    Matrix fc1_in;  // after dropout
    Matrix fc1_out; // input to the voting FC
};

using Tape = std::vector<StepTape>;

// Macro skeleton: encoder (conv-BN-LIF), searched cell (C -> C), reduction
// (conv C -> 2C, BN, LIF, AvgPool(2)), second searched cell (2C -> 2C,
// independent weights), vectorize (AvgPool(2) + flatten), classifier
// (dropout, FC(hidden), FC(num_classes * k), voting mean over k).
struct SpikingNetwork {
    NetworkConfig cfg;
    CellGenotype genotype;

    ConvBnLayer encoder;
    LifState enc_state;
    CellInstance cell1;
    ConvBnLayer reduction;
    LifState red_state;
    CellInstance cell2;
    LinearLayer fc1, fc2;

    int cell_h = 0, cell_w = 0; // spatial dims entering cell1
    int red_h = 0, red_w = 0;   // spatial dims entering cell2
    int flat_dim = 0;

    bool dirty = false;       // forward has run since the last reset
    int batch_in_flight = 0;  // batch size the states were allocated for
};

// Fully initialized network: he_init conv/FC weights, BN gamma=1 beta=0.
// Each component draws from its own seed stream derived from `seed`, so
// zeroizing one edge never shifts another component's weights.
SpikingNetwork build_network(const CellGenotype& g, const NetworkConfig& cfg, uint64_t seed);

void reset_network(SpikingNetwork& net, int batch_size);

struct ForwardOptions {
    bool training = false;
    Rng* dropout_rng = nullptr; // required when training
    Tape* tape = nullptr;
    bool collect_trace = true;
};

struct ForwardOutput {
    ActivationTrace trace;
    std::vector<Matrix> voted_logits; // one (N, num_classes) matrix per timestep
    Matrix mean_logits;               // averaged over timesteps
};

// One simulation timestep, t counted from 1. The same image batch is
// presented at every t; membrane state and backward buffers persist inside
// `net` between calls.
void forward_step(SpikingNetwork& net, const Tensor4& batch, int t,
                  ActivationTrace* trace, Matrix* voted_logits,
                  const ForwardOptions& opts = {});

// Resets, then runs T steps collecting the trace and per-timestep logits.
// Throws if the network carries stale state from an unreset earlier run.
ForwardOutput forward_collect(SpikingNetwork& net, const Tensor4& batch, int T,
                              const ForwardOptions& opts = {});

// Parameter registry in declaration order (checkpointing, SGD, decay).
struct ParamRef {
    std::string name;
    std::vector<float>* values;
    std::vector<float>* grads;
};
std::vector<ParamRef> parameters(SpikingNetwork& net);

void zero_gradients(SpikingNetwork& net);

// Number of LIF layers contributing to the trace under cfg.
int num_trace_layers(const NetworkConfig& cfg);

} // namespace snasnet
