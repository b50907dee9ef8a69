#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mmgr/consensus.hpp"
#include "mmgr/error.hpp"
#include "mmgr/flow.hpp"
#include "mmgr/network.hpp"
#include "mmgr/tensor.hpp"
#include "mmgr/video.hpp"

namespace mmgr {

// Per-stream score vectors for a set of samples.
template <typename T>
struct StreamScore {
    std::string tag;
    std::vector<std::string> ids;
    std::vector<Tensor<T>> scores;  // aligned with ids, each [l]
    bool normalized = false;

    void check() const {
        if (ids.size() != scores.size())
            throw ParameterError("stream '" + tag + "': id/score count mismatch");
    }
};

struct FusionSpec {
    std::vector<double> weights;       // one per stream, not all zero
    bool softmax_normalize = false;    // Table-3 style softmax pre-processing
};

// Applies softmax per score vector when requested. The normalized flag makes
// double application an error: softmax is not idempotent.
template <typename T>
StreamScore<T> normalize_scores(const StreamScore<T>& s, bool apply) {
    if (!apply) return s;
    if (s.normalized)
        throw StateError("normalize_scores: stream '" + s.tag + "' already normalized");
    StreamScore<T> out = s;
    for (auto& v : out.scores) v = softmax(v);
    out.normalized = true;
    return out;
}

// Weighted arithmetic mean across streams, per sample. All streams must
// cover the same sample ids.
template <typename T>
StreamScore<T> fuse_scores(const std::vector<StreamScore<T>>& streams_in, const FusionSpec& spec) {
    if (streams_in.empty()) throw ParameterError("fuse_scores: no streams");
    if (spec.weights.size() != streams_in.size())
        throw ParameterError("fuse_scores: " + std::to_string(spec.weights.size()) +
                             " weights for " + std::to_string(streams_in.size()) + " streams");
    double wsum = 0.0;
    for (double w : spec.weights) {
        if (w < 0.0) throw ParameterError("fuse_scores: negative weight");
        wsum += w;
    }
    if (wsum == 0.0) throw ParameterError("fuse_scores: weights must not all be zero");

    std::vector<StreamScore<T>> streams;
    streams.reserve(streams_in.size());
    for (const auto& s : streams_in) {
        s.check();
        streams.push_back(normalize_scores(s, spec.softmax_normalize));
    }

    const auto& first = streams[0];
    std::vector<std::map<std::string, std::size_t>> index(streams.size());
    for (std::size_t si = 1; si < streams.size(); ++si) {
        for (std::size_t i = 0; i < streams[si].ids.size(); ++i)
            index[si][streams[si].ids[i]] = i;
        if (streams[si].ids.size() != first.ids.size())
            throw AlignmentError("fuse_scores: stream '" + streams[si].tag + "' has " +
                                 std::to_string(streams[si].ids.size()) + " samples, expected " +
                                 std::to_string(first.ids.size()));
    }

    StreamScore<T> fused;
    fused.tag = "fused";
    fused.ids = first.ids;
    fused.normalized = true;
    for (const auto& s : streams) fused.normalized = fused.normalized && s.normalized;
    fused.scores.reserve(first.ids.size());
    for (std::size_t i = 0; i < first.ids.size(); ++i) {
        Tensor<T> acc(first.scores[i].shape());
        for (std::size_t si = 0; si < streams.size(); ++si) {
            const Tensor<T>* vec;
            if (si == 0) {
                vec = &streams[0].scores[i];
            } else {
                auto it = index[si].find(first.ids[i]);
                if (it == index[si].end())
                    throw AlignmentError("fuse_scores: sample '" + first.ids[i] +
                                         "' missing from stream '" + streams[si].tag + "'");
                vec = &streams[si].scores[it->second];
            }
            if (!vec->same_shape(acc))
                throw ShapeError("fuse_scores: class count mismatch in stream '" +
                                 streams[si].tag + "'");
            axpy(acc, *vec, (T)(spec.weights[si] / wsum));
        }
        fused.scores.push_back(std::move(acc));
    }
    return fused;
}

// --- end-to-end test pipeline -------------------------------------------------
// Votes from the 2d consensus streams (rgb, stacked flow) and scores from the
// 3d streams (depth, saliency) are each aggregated per component, the two
// component vectors fused, and the argmax taken.

template <typename T>
struct PipelineNets {
    Network<T>* rgb = nullptr;
    Network<T>* flow = nullptr;
    Network<T>* depth = nullptr;
    Network<T>* saliency = nullptr;

    bool any() const { return rgb || flow || depth || saliency; }
};

struct PipelineOptions {
    SnippetOptions rgb_snippets;         // modality forced to rgb
    SnippetOptions flow_snippets;        // modality forced to flow
    Aggregation agg = Aggregation::mean;
    int volume_center = 15;              // covers all 32 frames
    bool volume_hflip = false;           // mirrored volume as a second 3d vote
    bool normalize_3d = false;           // softmax on the 3d stream outputs
    double w_2scvn = 1.0, w_3ddsn = 1.0;
    double w_rgb = 1.0, w_flow = 1.0;
    double w_depth = 2.0, w_sal = 1.0;
    FlowParams flow_params;
};

template <typename T>
struct PipelineResult {
    int label = -1;
    Tensor<T> fused;
    std::vector<std::pair<std::string, Tensor<T>>> per_stream;  // tag -> score vector
};

namespace detail {

template <typename T>
Tensor<T> weighted_mean(const std::vector<std::pair<Tensor<T>, double>>& items) {
    double wsum = 0.0;
    for (const auto& [t, w] : items) wsum += w;
    if (wsum == 0.0) throw ParameterError("pipeline: component weights sum to zero");
    Tensor<T> acc(items.front().first.shape());
    for (const auto& [t, w] : items) axpy(acc, t, (T)(w / wsum));
    return acc;
}

// Scores a 3d stream: volume at the configured center frame, optionally a
// mirrored second vote, aggregated with h.
template <typename T>
Tensor<T> score_3d_stream(Network<T>& net, const FrameSequence<T>& seq32,
                          const PipelineOptions& opt) {
    std::vector<Tensor<T>> volumes;
    volumes.push_back(build_volume(seq32, opt.volume_center));
    if (opt.volume_hflip) {
        FrameSequence<T> mirrored;
        mirrored.modality = seq32.modality;
        mirrored.frames.reserve(seq32.frames.size());
        for (const auto& f : seq32.frames) mirrored.frames.push_back(hflip(f));
        volumes.push_back(build_volume(mirrored, opt.volume_center));
    }
    Workspace<T> ws;
    Rng rng(0);
    auto logits = net.forward_batch(volumes, Mode::eval, ws, rng);
    ScoreMatrix<T> m((std::size_t)net.class_count(), logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j)
        m.set_column(j, opt.normalize_3d ? softmax(logits[j]) : logits[j]);
    return aggregate(m, opt.agg);
}

} // namespace detail

// Algorithm-style single-sample prediction across all configured streams.
// The sample must provide every modality a configured network needs.
template <typename T>
PipelineResult<T> pipeline_predict(const VideoSample<T>& raw, PipelineNets<T>& nets,
                                   const PipelineOptions& opt, Rng& rng) {
    if (!nets.any()) throw ParameterError("pipeline: no stream networks configured");
    PipelineResult<T> res;
    std::vector<std::pair<Tensor<T>, double>> components;

    // 2SCVN component
    std::vector<std::pair<Tensor<T>, double>> votes;
    if (nets.rgb || nets.flow) {
        VideoSample<T> sample;
        sample.id = raw.id;
        sample.label = raw.label;
        sample.streams[Modality::rgb] = resample_to(raw.stream(Modality::rgb), 32);
        if (nets.flow) {
            if (raw.has(Modality::flow))
                sample.streams[Modality::flow] = resample_to(raw.stream(Modality::flow), 32);
            else
                ensure_flow(sample, opt.flow_params);
        }
        if (nets.rgb) {
            SnippetOptions so = opt.rgb_snippets;
            so.modality = Modality::rgb;
            Rng r = rng.split("rgb");
            auto vs = score_video(*nets.rgb, sample, so, r, opt.agg);
            res.per_stream.emplace_back("rgb", vs.aggregated);
            votes.emplace_back(vs.aggregated, opt.w_rgb);
        }
        if (nets.flow) {
            SnippetOptions so = opt.flow_snippets;
            so.modality = Modality::flow;
            so.flow_params = opt.flow_params;
            Rng r = rng.split("flow");
            auto vs = score_video(*nets.flow, sample, so, r, opt.agg);
            res.per_stream.emplace_back("flow", vs.aggregated);
            votes.emplace_back(vs.aggregated, opt.w_flow);
        }
        components.emplace_back(detail::weighted_mean(votes), opt.w_2scvn);
    }

    // 3DDSN component
    std::vector<std::pair<Tensor<T>, double>> scores3d;
    if (nets.depth) {
        auto seq = resample_to(raw.stream(Modality::depth), 32);
        auto s = detail::score_3d_stream(*nets.depth, seq, opt);
        res.per_stream.emplace_back("depth", s);
        scores3d.emplace_back(s, opt.w_depth);
    }
    if (nets.saliency) {
        auto seq = resample_to(raw.stream(Modality::saliency), 32);
        auto s = detail::score_3d_stream(*nets.saliency, seq, opt);
        res.per_stream.emplace_back("saliency", s);
        scores3d.emplace_back(s, opt.w_sal);
    }
    if (!scores3d.empty()) components.emplace_back(detail::weighted_mean(scores3d), opt.w_3ddsn);

    res.fused = detail::weighted_mean(components);
    res.label = predict_label(res.fused);
    return res;
}

} // namespace mmgr
