#pragma once

#include <string>
#include <vector>

#include "mmgr/error.hpp"
#include "mmgr/flow.hpp"
#include "mmgr/network.hpp"
#include "mmgr/optim.hpp"
#include "mmgr/rng.hpp"
#include "mmgr/tensor.hpp"
#include "mmgr/video.hpp"

namespace mmgr {

enum class Aggregation { max, mean };

inline Aggregation parse_aggregation(const std::string& s) {
    if (s == "max") return Aggregation::max;
    if (s == "mean") return Aggregation::mean;
    throw ParameterError("unknown aggregation '" + s + "' (expected max or mean)");
}

// One voting unit: a single rgb/depth/saliency frame or a stacked-flow block.
template <typename T>
struct Snippet {
    Modality modality;
    Tensor<T> payload;
    int frame_index = 0;
    std::string augment;  // empty for the original, "hflip" for its counterpart
};

// l x T matrix of per-class probabilities, one column per snippet.
template <typename T>
struct ScoreMatrix {
    Tensor<T> values;  // [l,T]

    ScoreMatrix() = default;
    ScoreMatrix(std::size_t classes, std::size_t columns)
        : values({classes, columns}) {}

    std::size_t classes() const { return values.dim(0); }
    std::size_t columns() const { return values.dim(1); }

    void set_column(std::size_t j, const Tensor<T>& col) {
        for (std::size_t i = 0; i < classes(); ++i) values[i * columns() + j] = col[i];
    }

    Tensor<T> column(std::size_t j) const {
        Tensor<T> col({classes()});
        for (std::size_t i = 0; i < classes(); ++i) col[i] = values[i * columns() + j];
        return col;
    }
};

struct SnippetOptions {
    Modality modality = Modality::rgb;
    int segments = 5;      // K
    int per_segment = 1;   // n
    int flow_stack = 5;    // L, flow modality only
    FlowParams flow_params;
    bool append_hflip = false;  // test-time augmented counterparts
};

// Segment-based snippet sampling: the sequence is split into K contiguous
// segments [floor(j*T/K), floor((j+1)*T/K)) and n frame indices are drawn
// uniformly per segment. Flow snippets anchor a stacked-flow block at each
// index; with append_hflip every snippet gains a mirrored counterpart.
template <typename T>
std::vector<Snippet<T>> sample_snippets(const VideoSample<T>& sample, const SnippetOptions& opt,
                                        Rng& rng) {
    if (opt.segments < 1) throw ParameterError("sample_snippets: segments must be >= 1");
    if (opt.per_segment < 1) throw ParameterError("sample_snippets: per_segment must be >= 1");
    const bool is_flow = opt.modality == Modality::flow;
    const FrameSequence<T>& seq = is_flow && !sample.has(Modality::flow)
                                      ? sample.stream(Modality::rgb)
                                      : sample.stream(opt.modality);
    const std::size_t t_in = seq.frame_count();
    if (t_in < (std::size_t)opt.segments)
        throw ParameterError("sample_snippets: sequence length " + std::to_string(t_in) +
                             " shorter than " + std::to_string(opt.segments) + " segments");

    std::vector<Snippet<T>> out;
    out.reserve((std::size_t)(opt.segments * opt.per_segment) * (opt.append_hflip ? 2 : 1));
    for (int j = 0; j < opt.segments; ++j) {
        const std::size_t lo = (std::size_t)j * t_in / (std::size_t)opt.segments;
        const std::size_t hi = (std::size_t)(j + 1) * t_in / (std::size_t)opt.segments;
        for (int k = 0; k < opt.per_segment; ++k) {
            const int idx = (int)(lo + rng.uniform_int(hi - lo));
            Snippet<T> s;
            s.modality = opt.modality;
            s.frame_index = idx;
            s.payload = is_flow ? stack_flow(seq, opt.flow_stack, idx, opt.flow_params)
                                : seq.frames[(std::size_t)idx];
            out.push_back(std::move(s));
        }
    }
    if (opt.append_hflip) {
        const std::size_t base = out.size();
        for (std::size_t i = 0; i < base; ++i) {
            Snippet<T> s;
            s.modality = out[i].modality;
            s.frame_index = out[i].frame_index;
            s.augment = "hflip";
            s.payload = hflip(out[i].payload, is_flow);
            out.push_back(std::move(s));
        }
    }
    return out;
}

// Column j = softmax(forward(net, snippet_j)) in eval mode.
template <typename T>
ScoreMatrix<T> score_snippets(Network<T>& net, const std::vector<Snippet<T>>& snippets) {
    if (snippets.empty()) throw ParameterError("score_snippets: no snippets");
    std::vector<Tensor<T>> inputs;
    inputs.reserve(snippets.size());
    for (const auto& s : snippets) inputs.push_back(s.payload);
    Workspace<T> ws;
    Rng rng(0);  // unused in eval mode
    auto logits = net.forward_batch(inputs, Mode::eval, ws, rng);
    ScoreMatrix<T> m((std::size_t)net.class_count(), snippets.size());
    for (std::size_t j = 0; j < logits.size(); ++j) m.set_column(j, softmax(logits[j]));
    return m;
}

// Voting: per-row maximum or arithmetic mean across snippet columns.
template <typename T>
Tensor<T> aggregate(const ScoreMatrix<T>& m, Aggregation h) {
    const std::size_t l = m.classes(), t = m.columns();
    if (t < 1) throw ParameterError("aggregate: empty score matrix");
    Tensor<T> out({l});
    for (std::size_t i = 0; i < l; ++i) {
        const T* row = m.values.data() + i * t;
        if (h == Aggregation::max) {
            T best = row[0];
            for (std::size_t j = 1; j < t; ++j) best = std::max(best, row[j]);
            out[i] = best;
        } else {
            double acc = 0.0;
            for (std::size_t j = 0; j < t; ++j) acc += (double)row[j];
            out[i] = (T)(acc / (double)t);
        }
    }
    return out;
}

// Argmax with ties broken toward the lowest class index.
template <typename T>
int predict_label(const Tensor<T>& scores) {
    if (scores.size() < 1) throw ParameterError("predict_label: empty score vector");
    std::size_t arg = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[arg]) arg = i;
    return (int)arg;
}

// --- consensus training -------------------------------------------------------
// Training aggregates pre-softmax logits with the mean (differentiable and
// smooth), then applies the cross-entropy loss to the video-level vector.

template <typename T>
struct ConsensusBatchResult {
    double mean_loss = 0.0;
    std::size_t correct = 0;
};

template <typename T>
ConsensusBatchResult<T> consensus_train_batch(Network<T>& net,
                                              const std::vector<const VideoSample<T>*>& videos,
                                              const SnippetOptions& opt, Rng& rng,
                                              SgdOptimizer<T>& optimizer) {
    if (videos.empty()) throw ParameterError("consensus_train_batch: empty batch");
    std::vector<Tensor<T>> inputs;
    std::vector<std::size_t> owner;  // snippet -> video index
    std::vector<std::size_t> counts(videos.size(), 0);
    for (std::size_t vi = 0; vi < videos.size(); ++vi) {
        auto snippets = sample_snippets(*videos[vi], opt, rng);
        for (auto& s : snippets) {
            inputs.push_back(std::move(s.payload));
            owner.push_back(vi);
            ++counts[vi];
        }
    }

    Workspace<T> ws;
    auto logits = net.forward_batch(inputs, Mode::train, ws, rng);

    const std::size_t l = (std::size_t)net.class_count();
    std::vector<Tensor<T>> video_logits(videos.size(), Tensor<T>({l}));
    for (std::size_t i = 0; i < logits.size(); ++i)
        axpy(video_logits[owner[i]], logits[i], (T)(1.0 / (double)counts[owner[i]]));

    ConsensusBatchResult<T> res;
    std::vector<Tensor<T>> video_grads(videos.size());
    for (std::size_t vi = 0; vi < videos.size(); ++vi) {
        auto lg = cross_entropy_loss(video_logits[vi], videos[vi]->label);
        res.mean_loss += lg.loss;
        if (predict_label(video_logits[vi]) == videos[vi]->label) ++res.correct;
        video_grads[vi] = std::move(lg.grad);
    }
    res.mean_loss /= (double)videos.size();

    // d(video logit)/d(snippet logit) = 1/count; batch-averaged over videos
    std::vector<Tensor<T>> upstream(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        upstream[i] = video_grads[owner[i]];
        scale(upstream[i], (T)(1.0 / ((double)counts[owner[i]] * (double)videos.size())));
    }

    net.zero_grads();
    net.backward_batch(ws, upstream);
    optimizer.clip();
    optimizer.step();
    return res;
}

// Single-video step, the degenerate batch of one.
template <typename T>
double consensus_train_step(Network<T>& net, const VideoSample<T>& sample,
                            const SnippetOptions& opt, Rng& rng, SgdOptimizer<T>& optimizer) {
    return consensus_train_batch(net, {&sample}, opt, rng, optimizer).mean_loss;
}

template <typename T>
EpochStats consensus_train_epoch(Network<T>& net, const std::vector<VideoSample<T>>& data,
                                 const SnippetOptions& opt, SgdOptimizer<T>& optimizer,
                                 std::size_t batch_size, std::uint64_t epoch_seed) {
    if (data.empty()) throw ParameterError("consensus_train_epoch: empty dataset");
    Rng rng(epoch_seed);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_int(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0, batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
        const std::size_t bsz = std::min(batch_size, order.size() - start);
        std::vector<const VideoSample<T>*> batch(bsz);
        for (std::size_t i = 0; i < bsz; ++i) batch[i] = &data[order[start + i]];
        Rng batch_rng = rng.split(batch_index);
        auto res = consensus_train_batch(net, batch, opt, batch_rng, optimizer);
        loss_sum += res.mean_loss * (double)bsz;
        correct += res.correct;
    }
    EpochStats stats;
    stats.mean_loss = loss_sum / (double)data.size();
    stats.accuracy = (double)correct / (double)data.size();
    stats.lr = optimizer.learning_rate();
    return stats;
}

// Test-time scoring of one video: sample snippets, score, vote.
template <typename T>
struct VideoScore {
    Tensor<T> aggregated;
    ScoreMatrix<T> matrix;
};

template <typename T>
VideoScore<T> score_video(Network<T>& net, const VideoSample<T>& sample,
                          const SnippetOptions& opt, Rng& rng, Aggregation h) {
    auto snippets = sample_snippets(sample, opt, rng);
    VideoScore<T> vs;
    vs.matrix = score_snippets(net, snippets);
    vs.aggregated = aggregate(vs.matrix, h);
    return vs;
}

} // namespace mmgr
