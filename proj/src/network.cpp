#include "snasnet/network.hpp"

#include <cstring>
#include <stdexcept>

namespace snasnet {

namespace {

// Stable component indices for per-component weight streams.
enum ComponentId : uint64_t {
    kEncoder = 0,
    kCell1Fwd = 1,  // ..6
    kCell1Bwd = 7,  // ..12
    kReduction = 13,
    kCell2Fwd = 14, // ..19
    kCell2Bwd = 20, // ..25
    kFc1 = 26,
    kFc2 = 27,
};

ConvBnLayer make_conv_bn(int c_out, int c_in, int k, int stride, int padding,
                         uint64_t seed) {
    ConvBnLayer layer;
    layer.conv = ConvWeights(c_out, c_in, k, stride, padding);
    Rng rng(seed);
    he_init(layer.conv.kernel, c_in * k * k, rng);
    layer.gamma.assign(c_out, 1.0f);
    layer.beta.assign(c_out, 0.0f);
    return layer;
}

EdgeOpInstance make_edge(Operation op, int channels, uint64_t seed) {
    EdgeOpInstance e;
    e.op = op;
    if (op == Operation::Conv1x1)
        e.cb = make_conv_bn(channels, channels, 1, 1, 0, seed);
    else if (op == Operation::Conv3x3)
        e.cb = make_conv_bn(channels, channels, 3, 1, 1, seed);
    return e;
}

LinearLayer make_linear(int d_out, int d_in, uint64_t seed) {
    LinearLayer l;
    l.weight = Matrix(d_out, d_in);
    Rng rng(seed);
    he_init(l.weight.data, d_in, rng);
    l.bias.assign(d_out, 0.0f);
    return l;
}

// Applies one edge operation. Returns false for Zeroize (no contribution).
bool apply_edge_op(ConvBnLayer& cb, Operation op, const Tensor4& x, Tensor4& out,
                   EdgeCache* cache) {
    switch (op) {
        case Operation::Zeroize:
            return false;
        case Operation::SkipConnect:
            out = x;
            break;
        case Operation::AvgPool3x3:
            out = avgpool2d(x, 3, 1, 1);
            break;
        case Operation::Conv1x1:
        case Operation::Conv3x3: {
            if (cache) cache->input = x;
            Tensor4 c = conv2d(x, cb.conv);
            out = batchnorm_batchstats(c, cb.gamma, cb.beta, cb.eps,
                                       cache ? &cache->bn : nullptr);
            break;
        }
    }
    if (cache) cache->used = true;
    return true;
}

void accumulate(Tensor4& acc, const Tensor4& x) {
    for (size_t i = 0; i < acc.size(); ++i) acc.data[i] += x.data[i];
}

SpikeTensor cell_forward(CellInstance& cell, const Tensor4& input, int t,
                         const LifConfig& lif, CellTape* tape,
                         ActivationTrace* trace, int layer_base) {
    std::array<SpikeTensor, kNumNodes> node_out;
    if (tape) tape->cell_in = input;

    for (int n = 0; n < kNumNodes; ++n) {
        Tensor4 pre = (n == 0) ? input
                               : Tensor4::zeros(input.n, cell.channels, input.h, input.w);
        for (int i = 0; i < n; ++i) {
            const int e = edge_index(i, n);
            Tensor4 contrib;
            if (apply_edge_op(cell.fwd[e].cb, cell.fwd[e].op, node_out[i], contrib,
                              tape ? &tape->fwd[e] : nullptr))
                accumulate(pre, contrib);
        }
        // Backward edges read the previous timestep's spikes; there is no
        // history at t = 1.
        if (t > 1) {
            for (int j = n + 1; j < kNumNodes; ++j) {
                const int e = edge_index(n, j);
                if (cell.bwd[e].op == Operation::Zeroize) continue;
                Tensor4 contrib;
                if (apply_edge_op(cell.bwd[e].cb, cell.bwd[e].op, cell.buffer[j], contrib,
                                  tape ? &tape->bwd[e] : nullptr))
                    accumulate(pre, contrib);
            }
        }
        if (n == 0) {
            // Node 0 is the cell's input node: a pass-through with no LIF,
            // as in the NAS-Bench-201 cell. Feeding binary spikes straight
            // into a LIF with tau_m = 4/3 drives the membrane to the
            // threshold only asymptotically, so a node-0 LIF would never
            // fire and every cell would be silent.
            node_out[0] = pre;
        } else {
            node_out[n] = lif_step(cell.states[n], pre, lif, tape ? &tape->node_u[n] : nullptr);
            if (trace) append_spike_block(*trace, layer_base + n, t, node_out[n]);
        }
    }

    // buffer[0] may be non-binary when backward edges target node 0, but no
    // backward edge ever reads it (they read higher-numbered nodes only).
    cell.buffer = node_out;
    if (tape) tape->node_out = node_out;
    return node_out[kNumNodes - 1];
}

} // namespace

int num_trace_layers(const NetworkConfig& cfg) {
    // cell nodes 1..3 twice plus reduction; +1 for the encoder
    const int base = 2 * (kNumNodes - 1) + 1;
    return cfg.trace_all_lif_layers ? base + 1 : base;
}

SpikingNetwork build_network(const CellGenotype& g, const NetworkConfig& cfg, uint64_t seed) {
    if (!validate_genotype(g).empty())
        throw std::invalid_argument("build_network: genotype violates the bidirectional-pair constraint");
    if (cfg.base_channels < 1 || cfg.timesteps < 1 || cfg.num_classes < 1 || cfg.voting_k < 1)
        throw std::invalid_argument("build_network: invalid network config");

    SpikingNetwork net;
    net.cfg = cfg;
    net.genotype = g;

    const int C = cfg.base_channels;
    net.encoder = make_conv_bn(C, cfg.in_channels, 3, 1, 1, derive_seed(seed, kEncoder));
    net.cell_h = cfg.in_h;
    net.cell_w = cfg.in_w;

    net.cell1.channels = C;
    net.cell2.channels = 2 * C;
    for (int e = 0; e < kNumEdges; ++e) {
        net.cell1.fwd[e] = make_edge(g.forward[e], C, derive_seed(seed, kCell1Fwd + e));
        net.cell1.bwd[e] = make_edge(g.backward[e], C, derive_seed(seed, kCell1Bwd + e));
        net.cell2.fwd[e] = make_edge(g.forward[e], 2 * C, derive_seed(seed, kCell2Fwd + e));
        net.cell2.bwd[e] = make_edge(g.backward[e], 2 * C, derive_seed(seed, kCell2Bwd + e));
    }

    net.reduction = make_conv_bn(2 * C, C, 3, 1, 1, derive_seed(seed, kReduction));
    net.red_h = cfg.in_h / 2;
    net.red_w = cfg.in_w / 2;
    if (net.red_h < 2 || net.red_w < 2)
        throw std::invalid_argument("build_network: input spatial dims too small for the skeleton");

    net.flat_dim = 2 * C * (net.red_h / 2) * (net.red_w / 2);
    net.fc1 = make_linear(cfg.fc_hidden, net.flat_dim, derive_seed(seed, kFc1));
    net.fc2 = make_linear(cfg.num_classes * cfg.voting_k, cfg.fc_hidden, derive_seed(seed, kFc2));
    return net;
}

void reset_network(SpikingNetwork& net, int batch_size) {
    const int C = net.cfg.base_channels;
    net.enc_state = LifState(batch_size, C, net.cell_h, net.cell_w);
    net.red_state = LifState(batch_size, 2 * C, net.cell_h, net.cell_w);
    for (int n = 0; n < kNumNodes; ++n) {
        net.cell1.states[n] = LifState(batch_size, C, net.cell_h, net.cell_w);
        net.cell1.buffer[n] = Tensor4::zeros(batch_size, C, net.cell_h, net.cell_w);
        net.cell2.states[n] = LifState(batch_size, 2 * C, net.red_h, net.red_w);
        net.cell2.buffer[n] = Tensor4::zeros(batch_size, 2 * C, net.red_h, net.red_w);
    }
    net.dirty = false;
    net.batch_in_flight = batch_size;
}

void forward_step(SpikingNetwork& net, const Tensor4& batch, int t,
                  ActivationTrace* trace, Matrix* voted_logits,
                  const ForwardOptions& opts) {
    if (batch.n != net.batch_in_flight)
        throw std::logic_error("forward_step: network state not reset for this batch size");
    if (batch.c != net.cfg.in_channels || batch.h != net.cfg.in_h || batch.w != net.cfg.in_w)
        throw std::invalid_argument("forward_step: batch dims do not match network config");
    if (opts.training && !opts.dropout_rng)
        throw std::logic_error("forward_step: training mode requires a dropout rng");
    net.dirty = true;

    StepTape* st = nullptr;
    if (opts.tape) {
        opts.tape->emplace_back();
        st = &opts.tape->back();
    }
    const bool all_layers = net.cfg.trace_all_lif_layers;

    // Encoder: direct coding, the same image at every timestep.
    Tensor4 enc_c = conv2d(batch, net.encoder.conv);
    Tensor4 enc_b = batchnorm_batchstats(enc_c, net.encoder.gamma, net.encoder.beta,
                                         net.encoder.eps, st ? &st->enc_bn : nullptr);
    SpikeTensor s0 = lif_step(net.enc_state, enc_b, net.cfg.lif, st ? &st->enc_u : nullptr);
    if (trace && all_layers) append_spike_block(*trace, 0, t, s0);
    if (st) st->enc_out = s0;

    SpikeTensor c1 = cell_forward(net.cell1, s0, t, net.cfg.lif, st ? &st->cell1 : nullptr,
                                  trace, 1);

    // Reduction: Conv(C, 2C) - BN - LIF - AvgPool(2).
    if (st) st->red_conv_in = c1;
    Tensor4 red_c = conv2d(c1, net.reduction.conv);
    Tensor4 red_b = batchnorm_batchstats(red_c, net.reduction.gamma, net.reduction.beta,
                                         net.reduction.eps, st ? &st->red_bn : nullptr);
    SpikeTensor red_s = lif_step(net.red_state, red_b, net.cfg.lif, st ? &st->red_u : nullptr);
    if (trace) append_spike_block(*trace, 1 + kNumNodes, t, red_s);
    if (st) st->red_spikes = red_s;
    Tensor4 red_p = avgpool2d(red_s, 2, 2, 0);

    SpikeTensor c2 = cell_forward(net.cell2, red_p, t, net.cfg.lif, st ? &st->cell2 : nullptr,
                                  trace, 2 + kNumNodes);

    // Vectorize: AvgPool(2) then flatten.
    if (st) st->vec_in = c2;
    Tensor4 v = avgpool2d(c2, 2, 2, 0);
    Matrix flat(batch.n, net.flat_dim);
    std::memcpy(flat.data.data(), v.data.data(), v.size() * sizeof(float));
    if (st) st->flat = flat;

    // Classifier: inverted dropout (identity outside training), two FCs,
    // voting mean over groups of k.
    Matrix fc_in = flat;
    if (opts.training) {
        std::vector<float> mask(flat.data.size());
        constexpr float keep = 0.5f;
        for (size_t i = 0; i < mask.size(); ++i)
            mask[i] = opts.dropout_rng->coin(keep) ? 1.0f / keep : 0.0f;
        for (size_t i = 0; i < mask.size(); ++i) fc_in.data[i] *= mask[i];
        if (st) st->dropout_mask = std::move(mask);
    }
    if (st) st->fc1_in = fc_in;
    Matrix h1 = linear(fc_in, net.fc1.weight, net.fc1.bias);
    if (st) st->fc1_out = h1;
    Matrix out = linear(h1, net.fc2.weight, net.fc2.bias);

    if (voted_logits) {
        const int k = net.cfg.voting_k;
        Matrix voted(batch.n, net.cfg.num_classes);
        for (int i = 0; i < batch.n; ++i)
            for (int cls = 0; cls < net.cfg.num_classes; ++cls) {
                float acc = 0.0f;
                for (int j = 0; j < k; ++j) acc += out.at(i, cls * k + j);
                voted.at(i, cls) = acc / static_cast<float>(k);
            }
        *voted_logits = std::move(voted);
    }
}

ForwardOutput forward_collect(SpikingNetwork& net, const Tensor4& batch, int T,
                              const ForwardOptions& opts) {
    if (net.batch_in_flight != batch.n || net.dirty)
        throw std::logic_error("forward_collect: network state not reset (stale membrane corrupts scoring)");

    ForwardOutput out;
    out.voted_logits.reserve(T);
    for (int t = 1; t <= T; ++t) {
        Matrix logits;
        forward_step(net, batch, t, opts.collect_trace ? &out.trace : nullptr, &logits, opts);
        out.voted_logits.push_back(std::move(logits));
    }

    out.mean_logits = Matrix(batch.n, net.cfg.num_classes);
    for (const auto& l : out.voted_logits)
        for (size_t i = 0; i < l.data.size(); ++i) out.mean_logits.data[i] += l.data[i];
    for (auto& v : out.mean_logits.data) v /= static_cast<float>(T);
    return out;
}

namespace {

void add_conv_bn_params(std::vector<ParamRef>& out, ConvBnLayer& l, const std::string& prefix) {
    out.push_back({prefix + ".kernel", &l.conv.kernel, &l.g_kernel});
    out.push_back({prefix + ".gamma", &l.gamma, &l.g_gamma});
    out.push_back({prefix + ".beta", &l.beta, &l.g_beta});
}

void add_cell_params(std::vector<ParamRef>& out, CellInstance& cell, const std::string& prefix) {
    for (int e = 0; e < kNumEdges; ++e) {
        const auto p = edge_pair(e);
        if (cell.fwd[e].op == Operation::Conv1x1 || cell.fwd[e].op == Operation::Conv3x3)
            add_conv_bn_params(out, cell.fwd[e].cb,
                               prefix + ".fwd(" + std::to_string(p.lo) + "," + std::to_string(p.hi) + ")");
        if (cell.bwd[e].op == Operation::Conv1x1 || cell.bwd[e].op == Operation::Conv3x3)
            add_conv_bn_params(out, cell.bwd[e].cb,
                               prefix + ".bwd(" + std::to_string(p.hi) + "," + std::to_string(p.lo) + ")");
    }
}

} // namespace

std::vector<ParamRef> parameters(SpikingNetwork& net) {
    std::vector<ParamRef> out;
    add_conv_bn_params(out, net.encoder, "encoder");
    add_cell_params(out, net.cell1, "cell1");
    add_conv_bn_params(out, net.reduction, "reduction");
    add_cell_params(out, net.cell2, "cell2");
    out.push_back({"fc1.weight", &net.fc1.weight.data, &net.fc1.g_weight});
    out.push_back({"fc1.bias", &net.fc1.bias, &net.fc1.g_bias});
    out.push_back({"fc2.weight", &net.fc2.weight.data, &net.fc2.g_weight});
    out.push_back({"fc2.bias", &net.fc2.bias, &net.fc2.g_bias});
    return out;
}

void zero_gradients(SpikingNetwork& net) {
    for (auto& p : parameters(net)) {
        p.grads->assign(p.values->size(), 0.0f);
    }
}

} // namespace snasnet
