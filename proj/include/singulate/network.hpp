#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "singulate/encoder.hpp"
#include "singulate/rng.hpp"

namespace singulate {

enum class LayerKind { convolution, relu, max_pool, flatten, fully_connected, sigmoid };

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::convolution: return "convolution";
        case LayerKind::relu: return "relu";
        case LayerKind::max_pool: return "max_pool";
        case LayerKind::flatten: return "flatten";
        case LayerKind::fully_connected: return "fully_connected";
        case LayerKind::sigmoid: return "sigmoid";
    }
    return "unknown";
}

/// Convolutions are 3x3, stride 1, zero pad 1; pooling is 2x2, stride 2.
struct LayerSpec {
    LayerKind kind{};
    std::int32_t in_channels = 0;
    std::int32_t out_channels = 0;
    std::int32_t in_units = 0;
    std::int32_t out_units = 0;
};

inline LayerSpec conv_layer(int in_channels, int out_channels) {
    return {LayerKind::convolution, in_channels, out_channels, 0, 0};
}
inline LayerSpec relu_layer() { return {LayerKind::relu}; }
inline LayerSpec pool_layer() { return {LayerKind::max_pool}; }
inline LayerSpec flatten_layer() { return {LayerKind::flatten}; }
inline LayerSpec fc_layer(int in_units, int out_units) {
    return {LayerKind::fully_connected, 0, 0, in_units, out_units};
}
inline LayerSpec sigmoid_layer() { return {LayerKind::sigmoid}; }

inline std::vector<LayerSpec> build_default_architecture() {
    return {conv_layer(1, 16),  relu_layer(), pool_layer(),
            conv_layer(16, 16), relu_layer(), pool_layer(),
            conv_layer(16, 32), relu_layer(), pool_layer(),
            conv_layer(32, 32), relu_layer(), pool_layer(),
            conv_layer(32, 64), relu_layer(), flatten_layer(),
            fc_layer(1024, 256), relu_layer(), fc_layer(256, 1), sigmoid_layer()};
}

namespace detail {

struct Shape {
    int c = 0, h = 0, w = 0;
    bool flat = false;

    int units() const { return flat ? c : c * h * w; }
};

inline Shape next_shape(Shape s, const LayerSpec& layer, std::size_t index) {
    auto fail = [&](const std::string& why) {
        throw std::invalid_argument("architecture: layer " + std::to_string(index) + " (" +
                                    layer_kind_name(layer.kind) + ") " + why);
    };
    switch (layer.kind) {
        case LayerKind::convolution:
            if (s.flat) fail("needs a spatial input");
            if (s.c != layer.in_channels) fail("input channel mismatch");
            if (layer.out_channels <= 0) fail("needs positive output channels");
            return {layer.out_channels, s.h, s.w, false};
        case LayerKind::relu:
            return s;
        case LayerKind::max_pool:
            if (s.flat) fail("needs a spatial input");
            if (s.h % 2 != 0 || s.w % 2 != 0) fail("needs even spatial dims");
            return {s.c, s.h / 2, s.w / 2, false};
        case LayerKind::flatten:
            if (s.flat) fail("input is already flat");
            return {s.c * s.h * s.w, 1, 1, true};
        case LayerKind::fully_connected:
            if (!s.flat) fail("needs a flat input");
            if (s.c != layer.in_units) fail("input unit mismatch");
            if (layer.out_units <= 0) fail("needs positive output units");
            return {layer.out_units, 1, 1, true};
        case LayerKind::sigmoid:
            return s;
    }
    fail("has unknown kind");
    return s;
}

inline std::size_t layer_weight_count(const LayerSpec& layer) {
    if (layer.kind == LayerKind::convolution)
        return std::size_t(layer.out_channels) * layer.in_channels * 9;
    if (layer.kind == LayerKind::fully_connected)
        return std::size_t(layer.out_units) * layer.in_units;
    return 0;
}

inline std::size_t layer_bias_count(const LayerSpec& layer) {
    if (layer.kind == LayerKind::convolution) return std::size_t(layer.out_channels);
    if (layer.kind == LayerKind::fully_connected) return std::size_t(layer.out_units);
    return 0;
}

}  // namespace detail

/// Walks shape composition from a 1 x input_size x input_size image; throws
/// on any mismatch. Returns the total parameter count.
inline std::size_t validate_architecture(const std::vector<LayerSpec>& arch,
                                         int input_size = PushImage::size) {
    if (arch.empty()) throw std::invalid_argument("architecture: empty layer list");
    detail::Shape s{1, input_size, input_size, false};
    std::size_t params = 0;
    for (std::size_t i = 0; i < arch.size(); ++i) {
        s = detail::next_shape(s, arch[i], i);
        params += detail::layer_weight_count(arch[i]) + detail::layer_bias_count(arch[i]);
        if (arch[i].kind == LayerKind::sigmoid && i + 1 != arch.size())
            throw std::invalid_argument("architecture: sigmoid must be the final layer");
    }
    if (arch.back().kind != LayerKind::sigmoid || !s.flat || s.c != 1)
        throw std::invalid_argument("architecture: must end in a scalar sigmoid");
    return params;
}

/// Weight layout: convolution [out_channel][in_channel][ky][kx], fully
/// connected [out_unit][in_unit]. Adam moment buffers shape-match.
struct LayerParams {
    std::vector<double> w, b;
    std::vector<double> mw, vw, mb, vb;
};

struct NetworkParams {
    std::vector<LayerSpec> arch;
    std::vector<LayerParams> layers;
    std::int64_t adam_step = 0;
};

/// Uniform init in +-sqrt(6 / fan_in), biases zero, moments zero.
inline NetworkParams init_params(const std::vector<LayerSpec>& arch, std::uint64_t seed,
                                 int input_size = PushImage::size) {
    validate_architecture(arch, input_size);
    NetworkParams params;
    params.arch = arch;
    params.layers.resize(arch.size());
    Rng rng(derive_seed(seed, 0x1217));
    for (std::size_t i = 0; i < arch.size(); ++i) {
        const LayerSpec& l = arch[i];
        LayerParams& p = params.layers[i];
        std::size_t nw = detail::layer_weight_count(l), nb = detail::layer_bias_count(l);
        if (nw == 0) continue;
        double fan_in = (l.kind == LayerKind::convolution) ? l.in_channels * 9.0 : l.in_units;
        double r = std::sqrt(6.0 / fan_in);
        p.w.resize(nw);
        for (double& v : p.w) v = rng.uniform(-r, r);
        p.b.assign(nb, 0.0);
        p.mw.assign(nw, 0.0);
        p.vw.assign(nw, 0.0);
        p.mb.assign(nb, 0.0);
        p.vb.assign(nb, 0.0);
    }
    return params;
}

struct LayerGrads {
    std::vector<double> w, b;
};
using Gradients = std::vector<LayerGrads>;

namespace detail {

inline void conv3_forward(const double* in, int ci_n, int h, int w, const double* wts,
                          const double* bias, int co_n, double* out) {
    for (int co = 0; co < co_n; ++co) {
        double* o = out + std::size_t(co) * h * w;
        std::fill(o, o + std::size_t(h) * w, bias[co]);
        for (int ci = 0; ci < ci_n; ++ci) {
            const double* src = in + std::size_t(ci) * h * w;
            const double* wk = wts + (std::size_t(co) * ci_n + ci) * 9;
            for (int k = 0; k < 9; ++k) {
                int dy = k / 3 - 1, dx = k % 3 - 1;
                double wv = wk[k];
                int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                for (int y = y0; y < y1; ++y) {
                    const double* s = src + std::size_t(y + dy) * w + dx;
                    double* orow = o + std::size_t(y) * w;
                    for (int x = x0; x < x1; ++x) orow[x] += wv * s[x];
                }
            }
        }
    }
}

/// dW and db accumulate; d_in is overwritten.
inline void conv3_backward(const double* in, const double* d_out, int ci_n, int h, int w,
                           const double* wts, int co_n, double* d_in, double* d_w, double* d_b) {
    std::fill(d_in, d_in + std::size_t(ci_n) * h * w, 0.0);
    for (int co = 0; co < co_n; ++co) {
        const double* dz = d_out + std::size_t(co) * h * w;
        double bsum = 0.0;
        for (std::size_t i = 0; i < std::size_t(h) * w; ++i) bsum += dz[i];
        d_b[co] += bsum;
        for (int ci = 0; ci < ci_n; ++ci) {
            const double* src = in + std::size_t(ci) * h * w;
            double* din = d_in + std::size_t(ci) * h * w;
            const double* wk = wts + (std::size_t(co) * ci_n + ci) * 9;
            double* dwk = d_w + (std::size_t(co) * ci_n + ci) * 9;
            for (int k = 0; k < 9; ++k) {
                int dy = k / 3 - 1, dx = k % 3 - 1;
                double wv = wk[k];
                double wsum = 0.0;
                int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                for (int y = y0; y < y1; ++y) {
                    const double* s = src + std::size_t(y + dy) * w + dx;
                    double* drow = din + std::size_t(y + dy) * w + dx;
                    const double* dzrow = dz + std::size_t(y) * w;
                    for (int x = x0; x < x1; ++x) {
                        wsum += dzrow[x] * s[x];
                        drow[x] += wv * dzrow[x];
                    }
                }
                dwk[k] += wsum;
            }
        }
    }
}

inline void pool2_forward(const double* in, int c, int h, int w, double* out,
                          std::int32_t* argmax) {
    int oh = h / 2, ow = w / 2;
    for (int ch = 0; ch < c; ++ch) {
        const double* src = in + std::size_t(ch) * h * w;
        double* o = out + std::size_t(ch) * oh * ow;
        std::int32_t* am = argmax + std::size_t(ch) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                int base = 2 * y * w + 2 * x;
                int best = base;
                double bv = src[base];
                for (int q = 1; q < 4; ++q) {
                    int idx = base + (q / 2) * w + (q % 2);
                    if (src[idx] > bv) {
                        bv = src[idx];
                        best = idx;
                    }
                }
                o[std::size_t(y) * ow + x] = bv;
                am[std::size_t(y) * ow + x] = best;
            }
        }
    }
}

inline void fc_forward(const double* in, int in_n, const double* wts, const double* bias,
                       int out_n, double* out) {
    for (int j = 0; j < out_n; ++j) {
        const double* row = wts + std::size_t(j) * in_n;
        double acc = bias[j];
        for (int i = 0; i < in_n; ++i) acc += row[i] * in[i];
        out[j] = acc;
    }
}

inline void fc_backward(const double* in, const double* d_out, int in_n, const double* wts,
                        int out_n, double* d_in, double* d_w, double* d_b) {
    std::fill(d_in, d_in + in_n, 0.0);
    for (int j = 0; j < out_n; ++j) {
        double dz = d_out[j];
        d_b[j] += dz;
        const double* row = wts + std::size_t(j) * in_n;
        double* drow = d_w + std::size_t(j) * in_n;
        for (int i = 0; i < in_n; ++i) {
            drow[i] += dz * in[i];
            d_in[i] += dz * row[i];
        }
    }
}

/// Per-layer activation buffers for one sample; acts[0] is the input image,
/// acts[i+1] the output of layer i.
struct Workspace {
    std::vector<Shape> shapes;
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> deltas;
    std::vector<std::vector<std::int32_t>> argmax;

    void bind(const std::vector<LayerSpec>& arch, int input_size = PushImage::size) {
        shapes.assign(1, Shape{1, input_size, input_size, false});
        for (std::size_t i = 0; i < arch.size(); ++i)
            shapes.push_back(next_shape(shapes.back(), arch[i], i));
        acts.resize(shapes.size());
        deltas.resize(shapes.size());
        argmax.assign(arch.size(), {});
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            acts[i].resize(std::size_t(shapes[i].units()));
            deltas[i].resize(std::size_t(shapes[i].units()));
        }
        for (std::size_t i = 0; i < arch.size(); ++i)
            if (arch[i].kind == LayerKind::max_pool)
                argmax[i].resize(std::size_t(shapes[i + 1].units()));
    }
};

inline bool buffer_finite(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += std::abs(x);
    return std::isfinite(acc);
}

/// Returns the final activation (sigmoid output when the net ends in one).
inline double forward_sample(const NetworkParams& params, const float* image, Workspace& ws) {
    std::size_t n_in = ws.acts[0].size();
    for (std::size_t i = 0; i < n_in; ++i) ws.acts[0][i] = image[i];
    for (std::size_t i = 0; i < params.arch.size(); ++i) {
        const LayerSpec& l = params.arch[i];
        const Shape& si = ws.shapes[i];
        const std::vector<double>& in = ws.acts[i];
        std::vector<double>& out = ws.acts[i + 1];
        switch (l.kind) {
            case LayerKind::convolution:
                conv3_forward(in.data(), si.c, si.h, si.w, params.layers[i].w.data(),
                              params.layers[i].b.data(), l.out_channels, out.data());
                break;
            case LayerKind::relu:
                for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] > 0.0 ? in[k] : 0.0;
                break;
            case LayerKind::max_pool:
                pool2_forward(in.data(), si.c, si.h, si.w, out.data(), ws.argmax[i].data());
                break;
            case LayerKind::flatten:
                out = in;
                break;
            case LayerKind::fully_connected:
                fc_forward(in.data(), l.in_units, params.layers[i].w.data(),
                           params.layers[i].b.data(), l.out_units, out.data());
                break;
            case LayerKind::sigmoid:
                for (std::size_t k = 0; k < in.size(); ++k) out[k] = 1.0 / (1.0 + std::exp(-in[k]));
                break;
        }
        if (!buffer_finite(out))
            throw std::runtime_error("forward: non-finite activation in layer " +
                                     std::to_string(i) + " (" + layer_kind_name(l.kind) + ")");
    }
    return ws.acts.back()[0];
}

/// Backpropagates from a seed gradient on the PRE-sigmoid scalar; the final
/// sigmoid is folded into the loss gradient by the caller.
inline void backward_sample(const NetworkParams& params, Workspace& ws, double d_logit,
                            Gradients& grads) {
    std::size_t last = params.arch.size() - 1;
    ws.deltas[last].assign(ws.deltas[last].size(), 0.0);
    ws.deltas[last][0] = d_logit;
    for (std::size_t i = last; i-- > 0;) {
        const LayerSpec& l = params.arch[i];
        const Shape& si = ws.shapes[i];
        const std::vector<double>& d_out = ws.deltas[i + 1];
        std::vector<double>& d_in = ws.deltas[i];
        switch (l.kind) {
            case LayerKind::convolution:
                conv3_backward(ws.acts[i].data(), d_out.data(), si.c, si.h, si.w,
                               params.layers[i].w.data(), l.out_channels, d_in.data(),
                               grads[i].w.data(), grads[i].b.data());
                break;
            case LayerKind::relu:
                for (std::size_t k = 0; k < d_in.size(); ++k)
                    d_in[k] = ws.acts[i][k] > 0.0 ? d_out[k] : 0.0;
                break;
            case LayerKind::max_pool:
                std::fill(d_in.begin(), d_in.end(), 0.0);
                for (std::size_t k = 0; k < d_out.size(); ++k) {
                    int ch = int(k / (std::size_t(si.h / 2) * (si.w / 2)));
                    d_in[std::size_t(ch) * si.h * si.w + ws.argmax[i][k]] += d_out[k];
                }
                break;
            case LayerKind::flatten:
                d_in = d_out;
                break;
            case LayerKind::fully_connected:
                fc_backward(ws.acts[i].data(), d_out.data(), l.in_units, params.layers[i].w.data(),
                            l.out_units, d_in.data(), grads[i].w.data(), grads[i].b.data());
                break;
            case LayerKind::sigmoid:
                for (std::size_t k = 0; k < d_in.size(); ++k) {
                    double p = ws.acts[i + 1][k];
                    d_in[k] = d_out[k] * p * (1.0 - p);
                }
                break;
        }
    }
}

inline constexpr double prob_clamp = 1e-7;

inline double clamped_nll(double p, int label) {
    p = std::clamp(p, prob_clamp, 1.0 - prob_clamp);
    return label ? -std::log(p) : -std::log(1.0 - p);
}

}  // namespace detail

inline std::vector<double> forward(const NetworkParams& params,
                                   const std::vector<PushImage>& batch) {
    detail::Workspace ws;
    ws.bind(params.arch);
    std::vector<double> out;
    out.reserve(batch.size());
    for (const PushImage& img : batch)
        out.push_back(detail::forward_sample(params, img.pixels.data(), ws));
    return out;
}

/// One training example with its provenance.
struct LabeledSample {
    PushImage image;
    int label = 0;  ///< 1 when the push singulated per the oracle
    std::int64_t trial = 0;
    std::int32_t push_index = 0;
    std::string policy;
    bool validation = false;
};

inline Gradients make_gradients(const NetworkParams& params) {
    Gradients grads(params.arch.size());
    for (std::size_t i = 0; i < params.arch.size(); ++i) {
        grads[i].w.assign(params.layers[i].w.size(), 0.0);
        grads[i].b.assign(params.layers[i].b.size(), 0.0);
    }
    return grads;
}

/// Mean clamped negative log likelihood over the batch and its gradient.
inline std::pair<double, Gradients> loss_and_gradients(
    const NetworkParams& params, const std::vector<const LabeledSample*>& batch,
    int input_size = PushImage::size) {
    if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
    detail::Workspace ws;
    ws.bind(params.arch, input_size);
    Gradients grads = make_gradients(params);
    double loss = 0.0;
    double inv_n = 1.0 / double(batch.size());
    for (const LabeledSample* sample : batch) {
        if (sample->image.pixels.size() != std::size_t(input_size) * input_size)
            throw std::invalid_argument("loss_and_gradients: sample pixel count mismatch");
        double p = detail::forward_sample(params, sample->image.pixels.data(), ws);
        loss += detail::clamped_nll(p, sample->label) * inv_n;
        double d_logit = (std::clamp(p, detail::prob_clamp, 1.0 - detail::prob_clamp) -
                          double(sample->label)) *
                         inv_n;
        detail::backward_sample(params, ws, d_logit, grads);
    }
    for (const LayerGrads& g : grads)
        if (!detail::buffer_finite(g.w) || !detail::buffer_finite(g.b))
            throw std::runtime_error("loss_and_gradients: non-finite gradient");
    return {loss, grads};
}

inline std::pair<double, Gradients> loss_and_gradients(const NetworkParams& params,
                                                       const std::vector<LabeledSample>& batch,
                                                       int input_size = PushImage::size) {
    std::vector<const LabeledSample*> ptrs;
    ptrs.reserve(batch.size());
    for (const LabeledSample& s : batch) ptrs.push_back(&s);
    return loss_and_gradients(params, ptrs, input_size);
}

struct TrainConfig {
    int epochs = 25;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double decay = 0.0;
    double negatives_per_positive = 3.0;  ///< oversample positives up to this ratio
    std::vector<LayerSpec> architecture = build_default_architecture();
};

/// Textbook Adam with bias correction; epsilon sits outside the square root.
inline void apply_adam(NetworkParams& params, const Gradients& grads, const TrainConfig& cfg) {
    params.adam_step += 1;
    double t = double(params.adam_step);
    double lr = cfg.learning_rate / (1.0 + cfg.decay * (t - 1.0));
    double c1 = 1.0 - std::pow(cfg.beta1, t);
    double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        LayerParams& p = params.layers[i];
        auto update = [&](std::vector<double>& theta, std::vector<double>& m,
                          std::vector<double>& v, const std::vector<double>& g) {
            for (std::size_t k = 0; k < theta.size(); ++k) {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                theta[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.epsilon);
            }
        };
        update(p.w, p.mw, p.vw, grads[i].w);
        update(p.b, p.mb, p.vb, grads[i].b);
    }
}

struct EpochLog {
    double train_loss = 0.0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    double val_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    NetworkParams params;
    std::vector<EpochLog> log;
};

/// Seeded, deterministic training run: epoch-wise positive oversampling to
/// the configured ratio, seeded shuffle, Adam minibatch updates.
inline TrainResult train(const std::vector<LabeledSample>& dataset, const TrainConfig& cfg,
                         std::uint64_t seed) {
    std::vector<const LabeledSample*> train_set, val_set, positives;
    for (const LabeledSample& s : dataset)
        (s.validation ? val_set : train_set).push_back(&s);
    std::size_t n_pos = 0;
    for (const LabeledSample* s : train_set) n_pos += (s->label == 1);
    if (train_set.empty() || n_pos == 0 || n_pos == train_set.size())
        throw std::invalid_argument("train: training split must contain both classes");
    for (const LabeledSample* s : train_set)
        if (s->label == 1) positives.push_back(s);

    TrainResult result;
    result.params = init_params(cfg.architecture, derive_seed(seed, 0x1D17));
    Rng shuffle_rng(derive_seed(seed, 0x5F0F));

    std::size_t n_neg = train_set.size() - n_pos;
    std::size_t pos_target = std::size_t(std::ceil(double(n_neg) / cfg.negatives_per_positive));
    detail::Workspace ws;
    ws.bind(cfg.architecture);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<const LabeledSample*> order = train_set;
        for (std::size_t k = n_pos; k < pos_target; ++k)
            order.push_back(positives[k % positives.size()]);
        for (std::size_t k = order.size(); k > 1; --k)
            std::swap(order[k - 1], order[shuffle_rng.uniform_index(k)]);

        EpochLog log;
        double weight_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<const LabeledSample*> batch(order.begin() + start, order.begin() + stop);
            auto [loss, grads] = loss_and_gradients(result.params, batch);
            apply_adam(result.params, grads, cfg);
            log.train_loss += loss * double(batch.size());
            weight_sum += double(batch.size());
        }
        log.train_loss /= weight_sum;

        if (!val_set.empty()) {
            double vloss = 0.0, correct = 0.0;
            for (const LabeledSample* s : val_set) {
                double p = detail::forward_sample(result.params, s->image.pixels.data(), ws);
                vloss += detail::clamped_nll(p, s->label);
                correct += ((p >= 0.5) == (s->label == 1)) ? 1.0 : 0.0;
            }
            log.val_loss = vloss / double(val_set.size());
            log.val_accuracy = correct / double(val_set.size());
        }
        result.log.push_back(log);
    }
    return result;
}

}  // namespace singulate
