#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mmgr/error.hpp"
#include "mmgr/network.hpp"
#include "mmgr/rng.hpp"
#include "mmgr/tensor.hpp"

namespace mmgr {

template <typename T>
struct LossGrad {
    double loss;
    Tensor<T> grad;
};

// Softmax cross-entropy on logits with a one-hot target:
// loss = log(sum_j e^{p_j}) - p_i, grad = softmax(p) - onehot(i).
template <typename T>
LossGrad<T> cross_entropy_loss(const Tensor<T>& logits, int label) {
    const std::size_t l = logits.size();
    if (l < 2) throw ParameterError("cross_entropy_loss: needs at least 2 classes");
    if (label < 0 || (std::size_t)label >= l)
        throw ParameterError("cross_entropy_loss: label " + std::to_string(label) +
                             " out of range [0," + std::to_string(l) + ")");
    double m = (double)logits[0];
    for (const auto& v : logits) m = std::max(m, (double)v);
    double z = 0.0;
    for (const auto& v : logits) z += std::exp((double)v - m);
    const double lse = m + std::log(z);
    LossGrad<T> out{lse - (double)logits[(std::size_t)label], Tensor<T>(logits.shape())};
    for (std::size_t i = 0; i < l; ++i) {
        double s = std::exp((double)logits[i] - m) / z;
        out.grad[i] = (T)(s - (i == (std::size_t)label ? 1.0 : 0.0));
    }
    return out;
}

// Batch negative log-likelihood over probability vectors. Probabilities of
// zero at the true label are clamped to 1e-12 before the log; the number of
// clamp events is reported through clamp_count when given.
template <typename T>
double nll_batch_loss(const std::vector<Tensor<T>>& probs, const std::vector<int>& labels,
                      int* clamp_count = nullptr) {
    if (probs.empty() || probs.size() != labels.size())
        throw ParameterError("nll_batch_loss: empty batch or label count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto& p = probs[i];
        double s = 0.0;
        for (const auto& v : p) s += (double)v;
        if (std::abs(s - 1.0) > 1e-4)
            throw ParameterError("nll_batch_loss: sample " + std::to_string(i) +
                                 " probabilities sum to " + std::to_string(s));
        if (labels[i] < 0 || (std::size_t)labels[i] >= p.size())
            throw ParameterError("nll_batch_loss: label out of range");
        double q = (double)p[(std::size_t)labels[i]];
        if (q < 1e-12) {
            q = 1e-12;
            if (clamp_count) ++*clamp_count;
        }
        total += -std::log(q);
    }
    return total / (double)probs.size();
}

// Soft (norm-rescaling) gradient clipping over the global norm of all
// gradient tensors. Returns the pre-clip global norm.
template <typename T>
double clip_gradients(const std::vector<Tensor<T>*>& grads, double c) {
    if (c <= 0.0) throw ParameterError("clip_gradients: threshold must be > 0");
    double sq = 0.0;
    for (const auto* g : grads)
        for (const auto& v : *g) sq += (double)v * (double)v;
    const double norm = std::sqrt(sq);
    if (norm > c) {
        const T s = (T)(c / norm);
        for (auto* g : grads) scale(*g, s);
    }
    return norm;
}

// Step-decay schedule: lr0 * decay^(iteration / interval).
inline double lr_schedule(double lr0, double decay, long interval, long iteration) {
    if (iteration < 0) throw ParameterError("lr_schedule: iteration must be >= 0");
    if (interval < 1) return lr0;
    double lr = lr0;
    for (long k = 0; k < iteration / interval; ++k) lr *= decay;
    return lr;
}

struct OptimizerHyper {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0;
    double clip = 10.0;
    double lr_decay = 0.1;
    long lr_interval = 1500;

    void validate() const {
        if (momentum < 0.0 || momentum >= 1.0)
            throw ParameterError("optimizer: momentum must be in [0,1)");
        if (lr <= 0.0) throw ParameterError("optimizer: learning rate must be > 0");
        if (weight_decay < 0.0) throw ParameterError("optimizer: weight decay must be >= 0");
        if (clip <= 0.0) throw ParameterError("optimizer: clip threshold must be > 0");
    }
};

// SGD with momentum, weight decay and step-decay schedule:
//   v_t     = mu * v_{t-1} - lr * g
//   theta_t = theta_{t-1} + v_t - wd * lr * theta_{t-1}
// Weight decay is not applied to biases or batch-norm parameters.
template <typename T>
class SgdOptimizer {
public:
    SgdOptimizer(std::vector<ParamRef<T>> params, OptimizerHyper hyper)
        : params_(std::move(params)), hyper_(hyper) {
        hyper_.validate();
        velocities_.reserve(params_.size());
        for (const auto& p : params_) velocities_.emplace_back(p.value->shape());
    }

    double learning_rate() const {
        return lr_schedule(hyper_.lr, hyper_.lr_decay, hyper_.lr_interval, iteration_);
    }

    double clip() {
        std::vector<Tensor<T>*> grads;
        grads.reserve(params_.size());
        for (auto& p : params_) grads.push_back(p.grad);
        return clip_gradients(grads, hyper_.clip);
    }

    // One update from the current gradient buffers. Gradients must already be
    // batch-averaged (and normally clipped).
    void step() {
        const double lr = learning_rate();
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            auto& v = velocities_[i];
            const double decay = p.decay_exempt ? 0.0 : hyper_.weight_decay * lr;
            T* th = p.value->data();
            const T* g = p.grad->data();
            T* vel = v.data();
            const std::size_t n = p.value->size();
            for (std::size_t j = 0; j < n; ++j) {
                const double vnew = hyper_.momentum * (double)vel[j] - lr * (double)g[j];
                vel[j] = (T)vnew;
                th[j] = (T)((double)th[j] + vnew - decay * (double)th[j]);
            }
        }
        ++iteration_;
    }

    long iteration() const { return iteration_; }
    void set_iteration(long it) { iteration_ = it; }
    const OptimizerHyper& hyper() const { return hyper_; }

    // Velocity tensors by parameter name, for checkpointing.
    std::vector<std::pair<std::string, Tensor<T>*>> velocity_refs() {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        for (std::size_t i = 0; i < params_.size(); ++i)
            out.emplace_back("opt." + params_[i].name, &velocities_[i]);
        return out;
    }

private:
    std::vector<ParamRef<T>> params_;
    std::vector<Tensor<T>> velocities_;
    OptimizerHyper hyper_;
    long iteration_ = 0;
};

struct EpochStats {
    double mean_loss = 0.0;
    double accuracy = 0.0;
    double lr = 0.0;
};

template <typename T>
struct LabeledSample {
    Tensor<T> input;
    int label;
};

// One pass over the dataset: shuffle, then per batch forward / loss /
// backward / batch-average / clip / sgd step. Deterministic for a fixed seed.
template <typename T>
EpochStats train_epoch(Network<T>& net, const std::vector<LabeledSample<T>>& data,
                       SgdOptimizer<T>& opt, std::size_t batch_size, std::uint64_t epoch_seed) {
    if (data.empty()) throw ParameterError("train_epoch: empty dataset");
    if (batch_size < 1) throw ParameterError("train_epoch: batch size must be >= 1");

    Rng rng(epoch_seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_int(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0, batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
        const std::size_t bsz = std::min(batch_size, order.size() - start);
        std::vector<Tensor<T>> inputs(bsz);
        std::vector<int> labels(bsz);
        for (std::size_t i = 0; i < bsz; ++i) {
            inputs[i] = data[order[start + i]].input;
            labels[i] = data[order[start + i]].label;
        }
        Workspace<T> ws;
        Rng batch_rng = rng.split(batch_index);
        std::vector<Tensor<T>> logits;
        try {
            logits = net.forward_batch(inputs, Mode::train, ws, batch_rng);
        } catch (const ShapeError& e) {
            throw ShapeError("train_epoch: batch " + std::to_string(batch_index) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("train_epoch: batch " + std::to_string(batch_index) + ": " + e.what());
        }
        std::vector<Tensor<T>> upstream(bsz);
        for (std::size_t i = 0; i < bsz; ++i) {
            auto lg = cross_entropy_loss(logits[i], labels[i]);
            loss_sum += lg.loss;
            upstream[i] = std::move(lg.grad);
            scale(upstream[i], (T)(1.0 / (double)bsz));  // batch-averaged gradient
            std::size_t arg = 0;
            for (std::size_t k = 1; k < logits[i].size(); ++k)
                if (logits[i][k] > logits[i][arg]) arg = k;
            if ((int)arg == labels[i]) ++correct;
        }
        seen += bsz;
        net.zero_grads();
        net.backward_batch(ws, upstream);
        opt.clip();
        opt.step();
    }
    EpochStats stats;
    stats.mean_loss = loss_sum / (double)seen;
    stats.accuracy = (double)correct / (double)seen;
    stats.lr = opt.learning_rate();
    return stats;
}

inline std::string format_epoch_log(int epoch, const EpochStats& s) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "epoch=%d loss=%.6f acc=%.4f lr=%.6g", epoch, s.mean_loss,
                  s.accuracy, s.lr);
    return buf;
}

} // namespace mmgr
