#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mmgr/error.hpp"
#include "mmgr/layers.hpp"
#include "mmgr/parallel.hpp"
#include "mmgr/rng.hpp"
#include "mmgr/tensor.hpp"

namespace mmgr {

// Layer topology plus input/output contract for one stream network.
struct NetworkConfig {
    std::vector<LayerSpec> layers;
    Shape input_shape;  // [C,H,W] for 2d streams, [C,T,H,W] for 3d streams
    int class_count = 0;
};

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value;
    Tensor<T>* grad;
    bool decay_exempt;  // biases and batch-norm parameters skip weight decay
};

template <typename T>
struct BufferRef {
    std::string name;
    Tensor<T>* value;  // checkpointed but not optimized (running statistics)
};

template <typename T>
struct LayerAux {
    std::vector<std::vector<std::size_t>> argmax;  // maxpool, per sample
    std::vector<Tensor<T>> mask;                   // dropout, per sample
    BatchNormCache<T> bn;
};

// Per-forward storage: the activation chain and whatever each layer needs
// for its backward pass. One workspace belongs to one forward/backward pair.
template <typename T>
struct Workspace {
    Mode mode = Mode::eval;
    std::vector<std::vector<Tensor<T>>> acts;  // acts[0] inputs, acts[i+1] layer i outputs
    std::vector<LayerAux<T>> aux;
    bool stored = false;
};

namespace detail {

template <typename T>
void xavier_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / (double)(fan_in + fan_out));
    for (auto& v : w) v = (T)rng.uniform(-bound, bound);
}

} // namespace detail

template <typename T>
class Layer {
public:
    explicit Layer(LayerSpec spec) : spec_(std::move(spec)) { spec_.validate(); }
    virtual ~Layer() = default;

    const LayerSpec& spec() const { return spec_; }
    LayerKind kind() const { return spec_.kind; }

    // Validates the incoming shape, allocates parameters, returns the
    // outgoing shape. Called once while the network is assembled.
    virtual Shape build(const Shape& in) = 0;

    virtual void init_params(Rng&) {}
    virtual void collect_params(const std::string&, std::vector<ParamRef<T>>&) {}
    virtual void collect_buffers(const std::string&, std::vector<BufferRef<T>>&) {}

    virtual void forward(const std::vector<Tensor<T>>& in, std::vector<Tensor<T>>& out, Mode mode,
                         Rng& rng, LayerAux<T>* aux) = 0;
    // Accumulates parameter gradients into the layer's own grad buffers and
    // writes input gradients (zero-initialized by the caller) into gin.
    virtual void backward(const std::vector<Tensor<T>>& in, const std::vector<Tensor<T>>& out,
                          const LayerAux<T>& aux, const std::vector<Tensor<T>>& gout,
                          std::vector<Tensor<T>>& gin) = 0;

protected:
    LayerSpec spec_;
};

// ---------------------------------------------------------------------------

template <typename T>
class Conv2dLayer final : public Layer<T> {
    using Layer<T>::spec_;

public:
    explicit Conv2dLayer(LayerSpec s) : Layer<T>(std::move(s)) {}

    Shape build(const Shape& in) override {
        if (in.size() != 3) throw ShapeError("conv2d expects [C,H,W] input, got " + shape_str(in));
        if ((int)in[0] != spec_.in_channels)
            throw ShapeError("conv2d expects " + std::to_string(spec_.in_channels) +
                             " input channels, got " + std::to_string(in[0]));
        const std::size_t K = (std::size_t)spec_.out_channels;
        w_ = Tensor<T>({K, in[0], (std::size_t)spec_.kernel[1], (std::size_t)spec_.kernel[2]});
        b_ = Tensor<T>({K});
        gw_ = Tensor<T>(w_.shape());
        gb_ = Tensor<T>(b_.shape());
        const long Ho = detail::conv_out_size((long)in[1], spec_.kernel[1], spec_.stride[1],
                                              spec_.pad[1], "conv2d");
        const long Wo = detail::conv_out_size((long)in[2], spec_.kernel[2], spec_.stride[2],
                                              spec_.pad[2], "conv2d");
        return {K, (std::size_t)Ho, (std::size_t)Wo};
    }

    void init_params(Rng& rng) override {
        const std::size_t taps = w_.dim(2) * w_.dim(3);
        detail::xavier_uniform(w_, w_.dim(1) * taps, w_.dim(0) * taps, rng);
        b_.fill(T{0});
    }

    void collect_params(const std::string& p, std::vector<ParamRef<T>>& out) override {
        out.push_back({p + ".weight", &w_, &gw_, false});
        out.push_back({p + ".bias", &b_, &gb_, true});
    }

    void forward(const std::vector<Tensor<T>>& in, std::vector<Tensor<T>>& out, Mode, Rng&,
                 LayerAux<T>*) override {
        out.resize(in.size());
        parallel_for(in.size(), [&](std::size_t i) {
            out[i] = conv2d_forward(in[i], w_, b_, {spec_.stride[1], spec_.stride[2]},
                                    {spec_.pad[1], spec_.pad[2]});
        });
    }

    void backward(const std::vector<Tensor<T>>& in, const std::vector<Tensor<T>>&,
                  const LayerAux<T>&, const std::vector<Tensor<T>>& gout,
                  std::vector<Tensor<T>>& gin) override {
        const std::size_t B = in.size();
        std::vector<Tensor<T>> gws(B), gbs(B);
        parallel_for(B, [&](std::size_t i) {
            gin[i] = Tensor<T>(in[i].shape());
            gws[i] = Tensor<T>(w_.shape());
            gbs[i] = Tensor<T>(b_.shape());
            conv2d_backward(in[i], w_, gout[i], &gin[i], &gws[i], &gbs[i],
                            {spec_.stride[1], spec_.stride[2]}, {spec_.pad[1], spec_.pad[2]});
        });
        // reduce in sample order so results do not depend on thread count
        for (std::size_t i = 0; i < B; ++i) {
            axpy(gw_, gws[i], T{1});
            axpy(gb_, gbs[i], T{1});
        }
    }

private:
    Tensor<T> w_, b_, gw_, gb_;
};

template <typename T>
class Conv3dLayer final : public Layer<T> {
    using Layer<T>::spec_;

public:
    explicit Conv3dLayer(LayerSpec s) : Layer<T>(std::move(s)) {}

    Shape build(const Shape& in) override {
        if (in.size() != 4)
            throw ShapeError("conv3d expects [C,T,H,W] input, got " + shape_str(in));
        if ((int)in[0] != spec_.in_channels)
            throw ShapeError("conv3d expects " + std::to_string(spec_.in_channels) +
                             " input channels, got " + std::to_string(in[0]));
        const std::size_t K = (std::size_t)spec_.out_channels;
        w_ = Tensor<T>({K, in[0], (std::size_t)spec_.kernel[0], (std::size_t)spec_.kernel[1],
                        (std::size_t)spec_.kernel[2]});
        b_ = Tensor<T>({K});
        gw_ = Tensor<T>(w_.shape());
        gb_ = Tensor<T>(b_.shape());
        const long To = detail::conv_out_size((long)in[1], spec_.kernel[0], spec_.stride[0],
                                              spec_.pad[0], "conv3d");
        const long Ho = detail::conv_out_size((long)in[2], spec_.kernel[1], spec_.stride[1],
                                              spec_.pad[1], "conv3d");
        const long Wo = detail::conv_out_size((long)in[3], spec_.kernel[2], spec_.stride[2],
                                              spec_.pad[2], "conv3d");
        return {K, (std::size_t)To, (std::size_t)Ho, (std::size_t)Wo};
    }

    void init_params(Rng& rng) override {
        const std::size_t taps = w_.dim(2) * w_.dim(3) * w_.dim(4);
        detail::xavier_uniform(w_, w_.dim(1) * taps, w_.dim(0) * taps, rng);
        b_.fill(T{0});
    }

    void collect_params(const std::string& p, std::vector<ParamRef<T>>& out) override {
        out.push_back({p + ".weight", &w_, &gw_, false});
        out.push_back({p + ".bias", &b_, &gb_, true});
    }

    void forward(const std::vector<Tensor<T>>& in, std::vector<Tensor<T>>& out, Mode, Rng&,
                 LayerAux<T>*) override {
        out.resize(in.size());
        parallel_for(in.size(), [&](std::size_t i) {
            out[i] = conv3d_forward(in[i], w_, b_, spec_.stride, spec_.pad);
        });
    }

    void backward(const std::vector<Tensor<T>>& in, const std::vector<Tensor<T>>&,
                  const LayerAux<T>&, const std::vector<Tensor<T>>& gout,
                  std::vector<Tensor<T>>& gin) override {
        const std::size_t B = in.size();
        std::vector<Tensor<T>> gws(B), gbs(B);
        parallel_for(B, [&](std::size_t i) {
            gin[i] = Tensor<T>(in[i].shape());
            gws[i] = Tensor<T>(w_.shape());
            gbs[i] = Tensor<T>(b_.shape());
            conv3d_backward(in[i], w_, gout[i], &gin[i], &gws[i], &gbs[i], spec_.stride, spec_.pad);
        });
        for (std::size_t i = 0; i < B; ++i) {
            axpy(gw_, gws[i], T{1});
            axpy(gb_, gbs[i], T{1});
        }
    }

private:
    Tensor<T> w_, b_, gw_, gb_;
};

template <typename T>
class MaxPool3dLayer final : public Layer<T> {
    using Layer<T>::spec_;

public:
    explicit MaxPool3dLayer(LayerSpec s) : Layer<T>(std::move(s)) {}

    Shape build(const Shape& in) override {
        if (in.size() != 3 && in.size() != 4)
            throw ShapeError("maxpool3d expects [C,T,H,W] or [C,H,W] input, got " + shape_str(in));
        const bool spatial = in.size() == 3;
        const long To = spatial ? 1
                                : detail::pool_out_size((long)in[1], spec_.kernel[0],
                                                        spec_.stride[0], "maxpool3d");
        const long Ho = detail::pool_out_size((long)in[spatial ? 1 : 2], spec_.kernel[1],
                                              spec_.stride[1], "maxpool3d");
        const long Wo = detail::pool_out_size((long)in[spatial ? 2 : 3], spec_.kernel[2],
                                              spec_.stride[2], "maxpool3d");
        if (spatial && spec_.kernel[0] != 1)
            throw ShapeError("maxpool3d: temporal window on [C,H,W] input must be 1");
        if (spatial) return {in[0], (std::size_t)Ho, (std::size_t)Wo};
        return {in[0], (std::size_t)To, (std::size_t)Ho, (std::size_t)Wo};
    }

    void forward(const std::vector<Tensor<T>>& in, std::vector<Tensor<T>>& out, Mode, Rng&,
                 LayerAux<T>* aux) override {
        out.resize(in.size());
        if (aux) aux->argmax.resize(in.size());
        parallel_for(in.size(), [&](std::size_t i) {
            out[i] = maxpool3d_forward(in[i], spec_.kernel, spec_.stride,
                                       aux ? &aux->argmax[i] : nullptr);
        });
    }

    void backward(const std::vector<Tensor<T>>& in, const std::vector<Tensor<T>>&,
                  const LayerAux<T>& aux, const std::vector<Tensor<T>>& gout,
                  std::vector<Tensor<T>>& gin) override {
        parallel_for(in.size(), [&](std::size_t i) {
            gin[i] = Tensor<T>(in[i].shape());
            maxpool3d_backward(aux.argmax[i], gout[i], gin[i]);
        });
    }
};

template <typename T>
class ReluLayer final : public Layer<T> {
public:
    explicit ReluLayer(LayerSpec s) : Layer<T>(std::move(s)) {}

    Shape build(const Shape& in) override { return in; }

    void forward(const std::vector<Tensor<T>>& in, std::vector<Tensor<T>>& out, Mode, Rng&,
                 LayerAux<T>*) override {
        out.resize(in.size());
        parallel_for(in.size(), [&](std::size_t i) { out[i] = relu_forward(in[i]); });
    }

    void backward(const std::vector<Tensor<T>>& in, const std::vector<Tensor<T>>&,
                  const LayerAux<T>&, const std::vector<Tensor<T>>& gout,
                  std::vector<Tensor<T>>& gin) override {
        parallel_for(in.size(), [&](std::size_t i) {
            gin[i] = Tensor<T>(in[i].shape());
            relu_backward(in[i], gout[i], gin[i]);
        });
    }
};

template <typename T>
class FullyConnectedLayer final : public Layer<T> {
    using Layer<T>::spec_;

public:
    explicit FullyConnectedLayer(LayerSpec s) : Layer<T>(std::move(s)) {}

    Shape build(const Shape& in) override {
        const std::size_t n = shape_numel(in);
        const std::size_t l = (std::size_t)spec_.units;
        if (l < 1) throw ParameterError("fully_connected: units must be >= 1");
        w_ = Tensor<T>({l, n});
        b_ = Tensor<T>({l});
        gw_ = Tensor<T>(w_.shape());
        gb_ = Tensor<T>(b_.shape());
        return {l};
    }

    void init_params(Rng& rng) override {
        detail::xavier_uniform(w_, w_.dim(1), w_.dim(0), rng);
        b_.fill(T{0});
    }

    void collect_params(const std::string& p, std::vector<ParamRef<T>>& out) override {
        out.push_back({p + ".weight", &w_, &gw_, false});
        out.push_back({p + ".bias", &b_, &gb_, true});
    }

    void forward(const std::vector<Tensor<T>>& in, std::vector<Tensor<T>>& out, Mode, Rng&,
                 LayerAux<T>*) override {
        out.resize(in.size());
        parallel_for(in.size(), [&](std::size_t i) {
            // implicit flatten: any input rank is read as a vector
            out[i] = fully_connected_forward(in[i], w_, b_);
        });
    }

    void backward(const std::vector<Tensor<T>>& in, const std::vector<Tensor<T>>&,
                  const LayerAux<T>&, const std::vector<Tensor<T>>& gout,
                  std::vector<Tensor<T>>& gin) override {
        const std::size_t B = in.size();
        std::vector<Tensor<T>> gws(B), gbs(B);
        parallel_for(B, [&](std::size_t i) {
            gin[i] = Tensor<T>(in[i].shape());
            gws[i] = Tensor<T>(w_.shape());
            gbs[i] = Tensor<T>(b_.shape());
            fully_connected_backward(in[i], w_, gout[i], &gin[i], &gws[i], &gbs[i]);
        });
        for (std::size_t i = 0; i < B; ++i) {
            axpy(gw_, gws[i], T{1});
            axpy(gb_, gbs[i], T{1});
        }
    }

private:
    Tensor<T> w_, b_, gw_, gb_;
};

template <typename T>
class SoftmaxLayer final : public Layer<T> {
public:
    explicit SoftmaxLayer(LayerSpec s) : Layer<T>(std::move(s)) {}

    Shape build(const Shape& in) override {
        if (in.size() != 1) throw ShapeError("softmax expects a vector input, got " + shape_str(in));
        return in;
    }

    void forward(const std::vector<Tensor<T>>& in, std::vector<Tensor<T>>& out, Mode, Rng&,
                 LayerAux<T>*) override {
        out.resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = softmax(in[i]);
    }

    void backward(const std::vector<Tensor<T>>& in, const std::vector<Tensor<T>>& out,
                  const LayerAux<T>&, const std::vector<Tensor<T>>& gout,
                  std::vector<Tensor<T>>& gin) override {
        for (std::size_t i = 0; i < in.size(); ++i) {
            gin[i] = Tensor<T>(in[i].shape());
            softmax_backward(out[i], gout[i], gin[i]);
        }
    }
};

template <typename T>
class DropoutLayer final : public Layer<T> {
    using Layer<T>::spec_;

public:
    explicit DropoutLayer(LayerSpec s) : Layer<T>(std::move(s)) {}

    Shape build(const Shape& in) override { return in; }

    void forward(const std::vector<Tensor<T>>& in, std::vector<Tensor<T>>& out, Mode mode,
                 Rng& rng, LayerAux<T>* aux) override {
        out.resize(in.size());
        if (aux) aux->mask.resize(in.size());
        // serial: mask draws must not depend on thread interleaving
        for (std::size_t i = 0; i < in.size(); ++i)
            out[i] = dropout_forward(in[i], spec_.keep_prob, mode, rng,
                                     aux ? &aux->mask[i] : nullptr);
    }

    void backward(const std::vector<Tensor<T>>& in, const std::vector<Tensor<T>>&,
                  const LayerAux<T>& aux, const std::vector<Tensor<T>>& gout,
                  std::vector<Tensor<T>>& gin) override {
        for (std::size_t i = 0; i < in.size(); ++i) {
            gin[i] = Tensor<T>(in[i].shape());
            dropout_backward(aux.mask[i], gout[i], gin[i]);
        }
    }
};

template <typename T>
class BatchNormLayer final : public Layer<T> {
    using Layer<T>::spec_;

public:
    explicit BatchNormLayer(LayerSpec s) : Layer<T>(std::move(s)) {}

    Shape build(const Shape& in) override {
        if (in.empty()) throw ShapeError("batch_norm expects a shaped input");
        if ((int)in[0] != spec_.in_channels)
            throw ShapeError("batch_norm expects " + std::to_string(spec_.in_channels) +
                             " channels, got " + std::to_string(in[0]));
        const std::size_t C = in[0];
        gamma_ = Tensor<T>({C}, T{1});
        beta_ = Tensor<T>({C});
        ggamma_ = Tensor<T>({C});
        gbeta_ = Tensor<T>({C});
        running_mean_ = Tensor<T>({C});
        running_var_ = Tensor<T>({C}, T{1});
        return in;
    }

    void init_params(Rng&) override {
        gamma_.fill(T{1});
        beta_.fill(T{0});
        running_mean_.fill(T{0});
        running_var_.fill(T{1});
    }

    void collect_params(const std::string& p, std::vector<ParamRef<T>>& out) override {
        out.push_back({p + ".gamma", &gamma_, &ggamma_, true});
        out.push_back({p + ".beta", &beta_, &gbeta_, true});
    }

    void collect_buffers(const std::string& p, std::vector<BufferRef<T>>& out) override {
        out.push_back({p + ".running_mean", &running_mean_});
        out.push_back({p + ".running_var", &running_var_});
    }

    void forward(const std::vector<Tensor<T>>& in, std::vector<Tensor<T>>& out, Mode mode, Rng&,
                 LayerAux<T>* aux) override {
        batch_norm_forward(in, out, gamma_, beta_, running_mean_, running_var_, spec_.bn_momentum,
                           spec_.bn_epsilon, mode, aux ? &aux->bn : nullptr);
    }

    void backward(const std::vector<Tensor<T>>& in, const std::vector<Tensor<T>>&,
                  const LayerAux<T>& aux, const std::vector<Tensor<T>>& gout,
                  std::vector<Tensor<T>>& gin) override {
        gin.resize(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) gin[i] = Tensor<T>(in[i].shape());
        batch_norm_backward(aux.bn, gamma_, gout, gin, &ggamma_, &gbeta_);
    }

private:
    Tensor<T> gamma_, beta_, ggamma_, gbeta_, running_mean_, running_var_;
};

// ---------------------------------------------------------------------------

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& s) {
    switch (s.kind) {
        case LayerKind::conv2d: return std::make_unique<Conv2dLayer<T>>(s);
        case LayerKind::conv3d: return std::make_unique<Conv3dLayer<T>>(s);
        case LayerKind::maxpool3d: return std::make_unique<MaxPool3dLayer<T>>(s);
        case LayerKind::relu: return std::make_unique<ReluLayer<T>>(s);
        case LayerKind::fully_connected: return std::make_unique<FullyConnectedLayer<T>>(s);
        case LayerKind::softmax: return std::make_unique<SoftmaxLayer<T>>(s);
        case LayerKind::dropout: return std::make_unique<DropoutLayer<T>>(s);
        case LayerKind::batch_norm: return std::make_unique<BatchNormLayer<T>>(s);
    }
    throw ParameterError("unknown layer kind");
}

// A stream network: ordered layers, their parameters and gradient buffers.
// Parameters live inside the layers; params()/buffers() expose them as named
// references for the optimizer and the checkpoint writer.
template <typename T>
class Network {
public:
    explicit Network(NetworkConfig config) : config_(std::move(config)) {
        if (config_.class_count < 1) throw ParameterError("network: class count must be >= 1");
        if (config_.layers.empty()) throw ParameterError("network: no layers");
        Shape shape = config_.input_shape;
        for (std::size_t i = 0; i < config_.layers.size(); ++i) {
            auto layer = make_layer<T>(config_.layers[i]);
            in_shapes_.push_back(shape);
            try {
                shape = layer->build(shape);
            } catch (const Error& e) {
                throw ShapeError(layer_err(i, config_.layers[i].kind, e.what()));
            }
            layers_.push_back(std::move(layer));
        }
        if (shape != Shape{(std::size_t)config_.class_count})
            throw ShapeError("network: final layer emits " + shape_str(shape) + ", expected [" +
                             std::to_string(config_.class_count) + "]");
    }

    const NetworkConfig& config() const { return config_; }
    int class_count() const { return config_.class_count; }
    const Shape& input_shape() const { return config_.input_shape; }
    std::size_t layer_count() const { return layers_.size(); }

    void init_params(std::uint64_t seed) {
        Rng root(seed);
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            Rng lr = root.split(i);
            layers_[i]->init_params(lr);
        }
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            layers_[i]->collect_params(param_prefix(i), out);
        return out;
    }

    std::vector<BufferRef<T>> buffers() {
        std::vector<BufferRef<T>> out;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            layers_[i]->collect_buffers(param_prefix(i), out);
        return out;
    }

    void zero_grads() {
        for (auto& p : params()) p.grad->fill(T{0});
    }

    // Batched forward. In train mode the workspace keeps the activation chain
    // for a subsequent backward call.
    std::vector<Tensor<T>> forward_batch(const std::vector<Tensor<T>>& inputs, Mode mode,
                                         Workspace<T>& ws, Rng& rng) {
        if (inputs.empty()) throw ParameterError("forward: empty batch");
        for (const auto& t : inputs)
            if (t.shape() != config_.input_shape)
                throw ShapeError("forward: input shape " + shape_str(t.shape()) +
                                 " != configured " + shape_str(config_.input_shape));
        ws.mode = mode;
        ws.acts.assign(layers_.size() + 1, {});
        ws.aux.assign(layers_.size(), {});
        ws.acts[0] = inputs;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            try {
                layers_[i]->forward(ws.acts[i], ws.acts[i + 1], mode, rng, &ws.aux[i]);
            } catch (const Error& e) {
                throw ShapeError(layer_err(i, layers_[i]->kind(), e.what()));
            }
        }
        ws.stored = (mode == Mode::train);
        return ws.acts.back();
    }

    // Backward through the stored chain; accumulates parameter gradients and
    // returns the gradient with respect to each input.
    std::vector<Tensor<T>> backward_batch(Workspace<T>& ws,
                                          const std::vector<Tensor<T>>& upstream) {
        if (!ws.stored)
            throw StateError("backward: no stored activations (requires a train-mode forward)");
        if (upstream.size() != ws.acts[0].size())
            throw ShapeError("backward: upstream batch size mismatch");
        std::vector<Tensor<T>> grad = upstream;
        for (std::size_t i = layers_.size(); i-- > 0;) {
            std::vector<Tensor<T>> gin;
            gin.resize(ws.acts[i].size());
            layers_[i]->backward(ws.acts[i], ws.acts[i + 1], ws.aux[i], grad, gin);
            grad = std::move(gin);
        }
        ws.stored = false;
        return grad;
    }

    // Single-sample convenience wrappers around the batched path.
    Tensor<T> forward(const Tensor<T>& input, Mode mode) {
        Rng rng(fwd_rng_seed_++);
        auto out = forward_batch({input}, mode, single_ws_, rng);
        return out[0];
    }

    Tensor<T> forward(const Tensor<T>& input, Mode mode, Rng& rng) {
        auto out = forward_batch({input}, mode, single_ws_, rng);
        return out[0];
    }

    Tensor<T> backward(const Tensor<T>& upstream) {
        auto gin = backward_batch(single_ws_, {upstream});
        return gin[0];
    }

private:
    static std::string layer_err(std::size_t i, LayerKind kind, const std::string& msg) {
        return "layer " + std::to_string(i) + " (" + layer_kind_name(kind) + "): " + msg;
    }

    std::string param_prefix(std::size_t i) const {
        return "layer" + std::to_string(i) + "." + layer_kind_name(layers_[i]->kind());
    }

    NetworkConfig config_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::vector<Shape> in_shapes_;
    Workspace<T> single_ws_;
    std::uint64_t fwd_rng_seed_ = 0;
};

} // namespace mmgr
