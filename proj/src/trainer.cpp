#include "snasnet/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace snasnet {

float surrogate_grad(float u, float threshold, float gamma) {
    if (gamma <= 0.0f) throw std::invalid_argument("surrogate_grad: gamma must be positive");
    return std::abs(u - threshold) < gamma / 2.0f ? 1.0f / gamma : 0.0f;
}

Tensor4 lif_backward(const Tensor4& pre_reset_u, const Tensor4& grad_spike,
                     Tensor4& carry, const LifConfig& cfg, float sg_gamma) {
    const float decay = cfg.decay();
    const float scale = cfg.input_scale();
    Tensor4 grad_input(pre_reset_u.n, pre_reset_u.c, pre_reset_u.h, pre_reset_u.w);
    for (size_t i = 0; i < pre_reset_u.size(); ++i) {
        const float u = pre_reset_u.data[i];
        const float spiked = (u >= cfg.threshold) ? 1.0f : 0.0f;
        const float grad_u = grad_spike.data[i] * surrogate_grad(u, cfg.threshold, sg_gamma) +
                             carry.data[i] * (1.0f - spiked);
        grad_input.data[i] = grad_u * scale;
        carry.data[i] = grad_u * decay;
    }
    return grad_input;
}

namespace {

void add_into(Tensor4& acc, const Tensor4& x) {
    for (size_t i = 0; i < acc.size(); ++i) acc.data[i] += x.data[i];
}

// Backward through one edge operation; accumulates parameter gradients for
// conv edges and returns the gradient on the op input.
Tensor4 edge_backward(EdgeOpInstance& e, const EdgeCache& cache, const Tensor4& grad_out) {
    switch (e.op) {
        case Operation::SkipConnect:
            return grad_out;
        case Operation::AvgPool3x3:
            return avgpool2d_backward(grad_out, grad_out.h, grad_out.w, 3, 1, 1);
        case Operation::Conv1x1:
        case Operation::Conv3x3: {
            Tensor4 g_conv = batchnorm_backward(grad_out, cache.bn, e.cb.gamma,
                                                e.cb.g_gamma, e.cb.g_beta);
            return conv2d_backward(cache.input, e.cb.conv, g_conv, e.cb.g_kernel);
        }
        case Operation::Zeroize:
            break;
    }
    throw std::logic_error("edge_backward: no gradient path through Zeroize");
}

using NodeTensors = std::array<Tensor4, kNumNodes>;

// Reverse pass over one cell at one timestep. future_grad carries dL/d(node
// spikes at t) contributed by t+1 backward edges; prev_future_grad collects
// the same quantity for t-1. Returns dL/d(cell input).
Tensor4 cell_backward(CellInstance& cell, const CellTape& tape, int t,
                      const Tensor4& grad_cell_out, NodeTensors& future_grad,
                      NodeTensors& carry, NodeTensors& prev_future_grad,
                      const LifConfig& lif, float sg_gamma) {
    NodeTensors spike_grad;
    for (int n = 0; n < kNumNodes; ++n) {
        spike_grad[n] = future_grad[n];
        prev_future_grad[n] = Tensor4::zeros(grad_cell_out.n, cell.channels,
                                             grad_cell_out.h, grad_cell_out.w);
    }
    add_into(spike_grad[kNumNodes - 1], grad_cell_out);

    Tensor4 grad_input;
    for (int n = kNumNodes - 1; n >= 0; --n) {
        // Node 0 is a pass-through (no LIF), so its pre-activation gradient
        // is the output gradient itself.
        Tensor4 grad_pre =
            n == 0 ? spike_grad[0]
                   : lif_backward(tape.node_u[n], spike_grad[n], carry[n], lif, sg_gamma);
        for (int i = 0; i < n; ++i) {
            const int e = edge_index(i, n);
            if (cell.fwd[e].op == Operation::Zeroize) continue;
            add_into(spike_grad[i], edge_backward(cell.fwd[e], tape.fwd[e], grad_pre));
        }
        if (t > 1) {
            for (int j = n + 1; j < kNumNodes; ++j) {
                const int e = edge_index(n, j);
                if (cell.bwd[e].op == Operation::Zeroize) continue;
                add_into(prev_future_grad[j], edge_backward(cell.bwd[e], tape.bwd[e], grad_pre));
            }
        }
        if (n == 0) grad_input = std::move(grad_pre);
    }
    return grad_input;
}

NodeTensors zero_nodes(int n, int c, int h, int w) {
    NodeTensors out;
    for (auto& t : out) t = Tensor4::zeros(n, c, h, w);
    return out;
}

} // namespace

StepStats backprop_batch(SpikingNetwork& net, const Tensor4& images,
                         const std::vector<int>& labels, const SurrogateConfig& scfg,
                         Rng& dropout_rng) {
    const int N = images.n;
    const int T = net.cfg.timesteps;
    const int classes = net.cfg.num_classes;
    if (static_cast<int>(labels.size()) != N)
        throw std::invalid_argument("backprop_batch: label count does not match batch");

    reset_network(net, N);
    zero_gradients(net);

    Tape tape;
    ForwardOptions opts;
    opts.training = true;
    opts.dropout_rng = &dropout_rng;
    opts.tape = &tape;
    opts.collect_trace = false;
    ForwardOutput out = forward_collect(net, images, T, opts);

    // Softmax cross-entropy on the time-averaged voted logits.
    StepStats stats;
    Matrix grad_mean(N, classes);
    for (int i = 0; i < N; ++i) {
        float mx = out.mean_logits.at(i, 0);
        int argmax = 0;
        for (int c = 1; c < classes; ++c)
            if (out.mean_logits.at(i, c) > mx) { mx = out.mean_logits.at(i, c); argmax = c; }
        double denom = 0.0;
        for (int c = 0; c < classes; ++c)
            denom += std::exp(static_cast<double>(out.mean_logits.at(i, c)) - mx);
        const double log_denom = std::log(denom) + mx;
        stats.loss += (log_denom - out.mean_logits.at(i, labels[i])) / N;
        if (argmax == labels[i]) ++stats.correct;
        for (int c = 0; c < classes; ++c) {
            const double p = std::exp(static_cast<double>(out.mean_logits.at(i, c)) - log_denom);
            grad_mean.at(i, c) = static_cast<float>((p - (c == labels[i] ? 1.0 : 0.0)) / N);
        }
    }

    const int C = net.cfg.base_channels;
    const LifConfig& lif = net.cfg.lif;
    const float sg = scfg.gamma;

    Tensor4 enc_carry = Tensor4::zeros(N, C, net.cell_h, net.cell_w);
    Tensor4 red_carry = Tensor4::zeros(N, 2 * C, net.cell_h, net.cell_w);
    NodeTensors c1_carry = zero_nodes(N, C, net.cell_h, net.cell_w);
    NodeTensors c2_carry = zero_nodes(N, 2 * C, net.red_h, net.red_w);
    NodeTensors c1_future = zero_nodes(N, C, net.cell_h, net.cell_w);
    NodeTensors c2_future = zero_nodes(N, 2 * C, net.red_h, net.red_w);

    const int vh = net.red_h / 2, vw = net.red_w / 2;

    for (int t = T; t >= 1; --t) {
        StepTape& st = tape[t - 1];

        // Classifier backward: voting -> fc2 -> fc1 -> dropout -> unflatten.
        const int k = net.cfg.voting_k;
        Matrix grad_fc2_out(N, classes * k);
        for (int i = 0; i < N; ++i)
            for (int c = 0; c < classes; ++c) {
                const float g = grad_mean.at(i, c) / static_cast<float>(T * k);
                for (int j = 0; j < k; ++j) grad_fc2_out.at(i, c * k + j) = g;
            }
        Matrix grad_h1 = linear_backward(st.fc1_out, net.fc2.weight, grad_fc2_out,
                                         net.fc2.g_weight, net.fc2.g_bias);
        Matrix grad_fc_in = linear_backward(st.fc1_in, net.fc1.weight, grad_h1,
                                            net.fc1.g_weight, net.fc1.g_bias);
        if (!st.dropout_mask.empty())
            for (size_t i = 0; i < grad_fc_in.data.size(); ++i)
                grad_fc_in.data[i] *= st.dropout_mask[i];

        Tensor4 grad_v(N, 2 * C, vh, vw);
        std::memcpy(grad_v.data.data(), grad_fc_in.data.data(),
                    grad_v.size() * sizeof(float));
        Tensor4 grad_c2_out = avgpool2d_backward(grad_v, net.red_h, net.red_w, 2, 2, 0);

        // Second cell.
        NodeTensors c2_prev_future;
        Tensor4 grad_red_pool = cell_backward(net.cell2, st.cell2, t, grad_c2_out,
                                              c2_future, c2_carry, c2_prev_future, lif, sg);
        c2_future = std::move(c2_prev_future);

        // Reduction block: AvgPool(2) <- LIF <- BN <- Conv.
        Tensor4 grad_red_spikes = avgpool2d_backward(grad_red_pool, net.cell_h, net.cell_w, 2, 2, 0);
        Tensor4 grad_red_bn = lif_backward(st.red_u, grad_red_spikes, red_carry, lif, sg);
        Tensor4 grad_red_conv = batchnorm_backward(grad_red_bn, st.red_bn, net.reduction.gamma,
                                                   net.reduction.g_gamma, net.reduction.g_beta);
        Tensor4 grad_c1_out = conv2d_backward(st.red_conv_in, net.reduction.conv, grad_red_conv,
                                              net.reduction.g_kernel);

        // First cell.
        NodeTensors c1_prev_future;
        Tensor4 grad_s0 = cell_backward(net.cell1, st.cell1, t, grad_c1_out,
                                        c1_future, c1_carry, c1_prev_future, lif, sg);
        c1_future = std::move(c1_prev_future);

        // Encoder.
        Tensor4 grad_enc_bn = lif_backward(st.enc_u, grad_s0, enc_carry, lif, sg);
        Tensor4 grad_enc_conv = batchnorm_backward(grad_enc_bn, st.enc_bn, net.encoder.gamma,
                                                   net.encoder.g_gamma, net.encoder.g_beta);
        conv2d_backward(images, net.encoder.conv, grad_enc_conv, net.encoder.g_kernel);
    }
    return stats;
}

void sgd_step(SpikingNetwork& net, SgdState& state, double lr, double momentum,
              double weight_decay) {
    auto params = parameters(net);
    if (state.velocity.empty()) {
        state.velocity.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i)
            state.velocity[i].assign(params[i].values->size(), 0.0f);
    }
    for (size_t i = 0; i < params.size(); ++i) {
        auto& w = *params[i].values;
        auto& g = *params[i].grads;
        auto& v = state.velocity[i];
        if (g.size() != w.size()) g.assign(w.size(), 0.0f);
        for (size_t j = 0; j < w.size(); ++j) {
            v[j] = static_cast<float>(momentum * v[j] + g[j] + weight_decay * w[j]);
            w[j] -= static_cast<float>(lr * v[j]);
        }
    }
}

double evaluate(SpikingNetwork& net, const LabeledBatch& split, int batch_size) {
    const int total = split.size();
    if (total == 0) return 0.0;

    // Chunk boundaries keeping every chunk >= 2 (batch statistics).
    std::vector<std::pair<int, int>> chunks;
    int start = 0;
    while (start < total) {
        int take = std::min(batch_size, total - start);
        if (total - start - take == 1) --take; // avoid a trailing singleton
        if (take < 2) take = total - start;
        chunks.emplace_back(start, take);
        start += take;
    }

    int correct = 0;
    for (const auto& [off, count] : chunks) {
        if (count < 2)
            throw std::invalid_argument("evaluate: split too small for batch statistics");
        LabeledBatch chunk = slice(split, off, count);
        reset_network(net, count);
        ForwardOptions opts;
        opts.collect_trace = false;
        ForwardOutput out = forward_collect(net, chunk.images, net.cfg.timesteps, opts);
        for (int i = 0; i < count; ++i) {
            int argmax = 0;
            for (int c = 1; c < net.cfg.num_classes; ++c)
                if (out.mean_logits.at(i, c) > out.mean_logits.at(i, argmax)) argmax = c;
            if (argmax == chunk.labels[i]) ++correct;
        }
    }
    return static_cast<double>(correct) / total;
}

TrainResult train(SpikingNetwork& net, const Dataset& data, const TrainConfig& tcfg,
                  const SurrogateConfig& scfg, uint64_t seed) {
    if (tcfg.lr < 0.0 || tcfg.epochs < 1)
        throw std::invalid_argument("train: bad training config");

    TrainResult result;
    SgdState sgd;
    Rng dropout_rng(derive_seed(seed, 0xd0));

    const int total = data.train.size();
    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        const double lr = tcfg.cosine
                              ? tcfg.lr * 0.5 * (1.0 + std::cos(M_PI * epoch / tcfg.epochs))
                              : tcfg.lr;

        Rng epoch_rng(derive_seed(seed, 0x100 + static_cast<uint64_t>(epoch)));
        for (int i = total - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<int>(epoch_rng.below(static_cast<uint32_t>(i + 1)))]);

        double loss_sum = 0.0;
        int correct = 0, seen = 0, steps = 0;
        int start = 0;
        while (start < total) {
            int take = std::min(tcfg.batch_size, total - start);
            if (total - start - take == 1) --take;
            if (take < 2) take = total - start;
            if (take < 2) break; // cannot form a batch-norm batch

            LabeledBatch batch;
            batch.images = Tensor4(take, data.train.images.c, data.train.images.h,
                                   data.train.images.w);
            batch.labels.resize(take);
            const size_t per = static_cast<size_t>(data.train.images.c) *
                               data.train.images.h * data.train.images.w;
            for (int i = 0; i < take; ++i) {
                const int src = order[start + i];
                std::memcpy(&batch.images.data[i * per],
                            &data.train.images.data[static_cast<size_t>(src) * per],
                            per * sizeof(float));
                batch.labels[i] = data.train.labels[src];
            }
            start += take;

            if (tcfg.augment_enabled && (tcfg.crop_pad > 0 || tcfg.flip))
                batch = augment(batch, tcfg.crop_pad, tcfg.flip, epoch_rng);

            const StepStats stats = backprop_batch(net, batch.images, batch.labels, scfg,
                                                   dropout_rng);
            if (!std::isfinite(stats.loss)) {
                result.diverged = true;
                result.diagnostic = "NaN loss at epoch " + std::to_string(epoch) +
                                    " (learning rate likely too high for this configuration)";
                return result;
            }
            sgd_step(net, sgd, lr, tcfg.momentum, tcfg.weight_decay);
            loss_sum += stats.loss;
            correct += stats.correct;
            seen += take;
            ++steps;
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.lr = lr;
        m.train_loss = steps > 0 ? loss_sum / steps : 0.0;
        m.train_acc = seen > 0 ? static_cast<double>(correct) / seen : 0.0;
        m.test_acc = evaluate(net, data.test, tcfg.batch_size);
        result.metrics.push_back(m);
    }
    return result;
}

namespace {

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

} // namespace

void save_checkpoint(SpikingNetwork& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write("SNCK", 4);
    put_u32(out, 1);
    const std::string geno = serialize_genotype(net.genotype);
    put_u32(out, static_cast<uint32_t>(geno.size()));
    out.write(geno.data(), static_cast<std::streamsize>(geno.size()));
    auto params = parameters(net);
    put_u32(out, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) {
        put_u32(out, static_cast<uint32_t>(p.values->size()));
        out.write(reinterpret_cast<const char*>(p.values->data()),
                  static_cast<std::streamsize>(p.values->size() * sizeof(float)));
    }
}

SpikingNetwork load_checkpoint(const std::string& path, const NetworkConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "SNCK")
        throw std::runtime_error("checkpoint: bad magic in " + path);
    if (get_u32(in) != 1) throw std::runtime_error("checkpoint: unsupported version");

    const uint32_t geno_len = get_u32(in);
    std::string geno(geno_len, '\0');
    in.read(geno.data(), geno_len);
    if (!in) throw std::runtime_error("checkpoint: truncated genotype");

    SpikingNetwork net = build_network(deserialize_genotype(geno), cfg, 0);
    auto params = parameters(net);
    const uint32_t count = get_u32(in);
    if (count != params.size())
        throw std::runtime_error("checkpoint: parameter count does not match the config");
    for (auto& p : params) {
        const uint32_t len = get_u32(in);
        if (len != p.values->size())
            throw std::runtime_error("checkpoint: size mismatch for " + p.name);
        in.read(reinterpret_cast<char*>(p.values->data()),
                static_cast<std::streamsize>(len * sizeof(float)));
        if (!in) throw std::runtime_error("checkpoint: truncated parameters");
    }
    return net;
}

} // namespace snasnet
