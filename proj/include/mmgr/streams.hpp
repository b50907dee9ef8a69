#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mmgr/checkpoint.hpp"
#include "mmgr/config.hpp"
#include "mmgr/consensus.hpp"
#include "mmgr/flow.hpp"
#include "mmgr/fusion.hpp"
#include "mmgr/network.hpp"
#include "mmgr/optim.hpp"
#include "mmgr/synth.hpp"
#include "mmgr/video.hpp"

namespace mmgr {

inline bool is_3d_modality(Modality m) {
    return m == Modality::depth || m == Modality::saliency;
}

// Everything a train/score run needs, resolved from the flat config file
// plus per-stream defaults. 2d streams default to the schedule lr=0.1 with
// a 1/10 decay every 1500 iterations, 3d streams to lr=1e-4 every 5000.
struct StreamRunConfig {
    Modality modality = Modality::rgb;
    int classes = 0;

    std::vector<long> widths_2d{8, 16, 32};
    std::vector<long> widths_3d{8, 8, 16, 16, 32, 32, 32, 32};
    bool batchnorm_2d = true;
    bool batchnorm_3d = false;
    double dropout_keep = 1.0;
    long fc_hidden = 0;

    long segments = 5;      // K
    long per_segment = 1;   // n
    long flow_stack = 5;    // L
    FlowParams flow_params;
    bool test_hflip = true;
    Aggregation agg = Aggregation::mean;
    long volume_center = 15;
    bool normalize_3d = false;

    OptimizerHyper hyper;
    long batch_size = 8;
    long epochs = 20;
    std::uint64_t seed = 0;

    SnippetOptions snippet_options(bool test_time) const {
        SnippetOptions o;
        o.modality = modality;
        o.segments = (int)segments;
        o.per_segment = (int)per_segment;
        o.flow_stack = (int)flow_stack;
        o.flow_params = flow_params;
        o.append_hflip = test_time && test_hflip;
        return o;
    }
};

inline StreamRunConfig parse_stream_config(const Config& cfg, Modality modality, int classes) {
    StreamRunConfig rc;
    rc.modality = modality;
    rc.classes = classes;
    rc.widths_2d = cfg.get_int_list("conv_widths", rc.widths_2d);
    rc.widths_3d = cfg.get_int_list("conv3d_widths", rc.widths_3d);
    rc.batchnorm_2d = cfg.get_bool("batchnorm", rc.batchnorm_2d);
    rc.batchnorm_3d = cfg.get_bool("batchnorm3d", rc.batchnorm_3d);
    rc.dropout_keep = cfg.get_double("dropout_keep", rc.dropout_keep);
    rc.fc_hidden = cfg.get_int("fc_hidden", rc.fc_hidden);
    rc.segments = cfg.get_int("segments", rc.segments);
    rc.per_segment = cfg.get_int("per_segment", rc.per_segment);
    rc.flow_stack = cfg.get_int("flow_stack", rc.flow_stack);
    rc.flow_params.alpha = cfg.get_double("flow_alpha", rc.flow_params.alpha);
    rc.flow_params.iterations = (int)cfg.get_int("flow_iters", rc.flow_params.iterations);
    rc.test_hflip = cfg.get_bool("test_hflip", rc.test_hflip);
    rc.agg = parse_aggregation(cfg.get("agg", "mean"));
    rc.volume_center = cfg.get_int("volume_center", rc.volume_center);
    rc.normalize_3d = cfg.get_bool("normalize_3d", rc.normalize_3d);

    const bool is3d = is_3d_modality(modality);
    rc.hyper.lr = cfg.get_double("lr", is3d ? 1e-4 : 0.1);
    rc.hyper.momentum = cfg.get_double("momentum", 0.9);
    rc.hyper.weight_decay = cfg.get_double("weight_decay", 0.0);
    rc.hyper.clip = cfg.get_double("clip", 10.0);
    rc.hyper.lr_decay = cfg.get_double("lr_decay", 0.1);
    rc.hyper.lr_interval = cfg.get_int("lr_interval", is3d ? 5000 : 1500);
    rc.batch_size = cfg.get_int("batch_size", 8);
    rc.epochs = cfg.get_int("epochs", 20);
    rc.seed = (std::uint64_t)cfg.get_int("seed", 0);
    return rc;
}

// --- stream network topologies ---------------------------------------------------

// 2d consensus stream: per width a conv3x3(pad 1) [+ batch norm] + relu +
// 2x2 spatial pool block, then optional dropout, optional hidden fc and the
// class head.
inline NetworkConfig make_2d_stream(int in_channels, int height, int width, int classes,
                                    const std::vector<long>& widths, bool batchnorm,
                                    double dropout_keep, long fc_hidden) {
    NetworkConfig cfg;
    cfg.input_shape = {(std::size_t)in_channels, (std::size_t)height, (std::size_t)width};
    cfg.class_count = classes;
    int ch = in_channels;
    for (long w : widths) {
        cfg.layers.push_back(make_conv2d(ch, (int)w, 3, 1, 1));
        if (batchnorm) cfg.layers.push_back(make_batch_norm((int)w));
        cfg.layers.push_back(make_relu());
        cfg.layers.push_back(make_maxpool3d(1, 2, 2));
        ch = (int)w;
    }
    if (dropout_keep < 1.0) cfg.layers.push_back(make_dropout(dropout_keep));
    if (fc_hidden > 0) {
        cfg.layers.push_back(make_fc((int)fc_hidden));
        cfg.layers.push_back(make_relu());
    }
    cfg.layers.push_back(make_fc(classes));
    return cfg;
}

// 3d stream: eight 3x3x3 conv layers with five pools, the first pool
// spatial-only (1x2x2), the rest 2x2x2. Layout follows the usual
// c-p-c-p-cc-p-cc-p-cc-p arrangement.
inline NetworkConfig make_3d_stream(int in_channels, int frames, int height, int width,
                                    int classes, const std::vector<long>& widths, bool batchnorm,
                                    long fc_hidden) {
    if (widths.size() != 8)
        throw ConfigError("conv3d_widths: expected 8 entries, got " +
                          std::to_string(widths.size()));
    NetworkConfig cfg;
    cfg.input_shape = {(std::size_t)in_channels, (std::size_t)frames, (std::size_t)height,
                       (std::size_t)width};
    cfg.class_count = classes;
    int ch = in_channels;
    auto conv = [&](long w) {
        cfg.layers.push_back(make_conv3d(ch, (int)w, 3, 3, 1, 1, 1));
        if (batchnorm) cfg.layers.push_back(make_batch_norm((int)w));
        cfg.layers.push_back(make_relu());
        ch = (int)w;
    };
    conv(widths[0]);
    cfg.layers.push_back(make_maxpool3d(1, 2, 2));
    conv(widths[1]);
    cfg.layers.push_back(make_maxpool3d(2, 2, 2));
    conv(widths[2]);
    conv(widths[3]);
    cfg.layers.push_back(make_maxpool3d(2, 2, 2));
    conv(widths[4]);
    conv(widths[5]);
    cfg.layers.push_back(make_maxpool3d(2, 2, 2));
    conv(widths[6]);
    conv(widths[7]);
    cfg.layers.push_back(make_maxpool3d(2, 2, 2));
    if (fc_hidden > 0) {
        cfg.layers.push_back(make_fc((int)fc_hidden));
        cfg.layers.push_back(make_relu());
    }
    cfg.layers.push_back(make_fc(classes));
    return cfg;
}

// Topology for one stream given the dataset's frame geometry [C,H,W].
inline NetworkConfig stream_network_config(const StreamRunConfig& rc, const Shape& frame_shape) {
    const int h = (int)frame_shape[1], w = (int)frame_shape[2];
    if (is_3d_modality(rc.modality))
        return make_3d_stream(modality_channels(rc.modality), 32, h, w, rc.classes, rc.widths_3d,
                              rc.batchnorm_3d, rc.fc_hidden);
    const int ch = rc.modality == Modality::flow ? 2 * (int)rc.flow_stack
                                                 : modality_channels(rc.modality);
    return make_2d_stream(ch, h, w, rc.classes, rc.widths_2d, rc.batchnorm_2d, rc.dropout_keep,
                          rc.fc_hidden);
}

template <typename T>
Network<T> build_stream_network(const StreamRunConfig& rc, const Shape& frame_shape) {
    return Network<T>(stream_network_config(rc, frame_shape));
}

// --- dataset loading --------------------------------------------------------------

// Loads the listed samples, keeping only the needed modalities in memory and
// resampling every stream to the canonical 32-frame timeline.
template <typename T>
std::vector<VideoSample<T>> load_dataset(const DatasetManifest& manifest,
                                         const std::vector<Modality>& needed,
                                         bool resample = true) {
    std::vector<VideoSample<T>> out(manifest.entries.size());
    parallel_for(manifest.entries.size(), [&](std::size_t i) {
        auto sample = load_sample<T>(manifest, manifest.entries[i].id);
        VideoSample<T> kept;
        kept.id = sample.id;
        kept.label = sample.label;
        for (Modality m : needed) {
            const bool flow_from_rgb = m == Modality::flow && !sample.has(Modality::flow);
            const auto& seq = flow_from_rgb ? sample.stream(Modality::rgb) : sample.stream(m);
            if (flow_from_rgb && kept.has(Modality::rgb)) continue;
            kept.streams[flow_from_rgb ? Modality::rgb : m] =
                resample ? resample_to(seq, 32) : seq;
        }
        out[i] = std::move(kept);
    });
    return out;
}

// Computes the in-memory flow modality for every sample lacking one.
template <typename T>
void ensure_flow_dataset(std::vector<VideoSample<T>>& samples, const FlowParams& params) {
    for (auto& s : samples) ensure_flow(s, params);
}

// --- training drivers ---------------------------------------------------------------

using LogSink = std::function<void(const std::string&)>;

template <typename T>
std::vector<LabeledSample<T>> make_volume_items(const std::vector<VideoSample<T>>& samples,
                                                Modality m, int center) {
    std::vector<LabeledSample<T>> items(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        items[i] = {build_volume(samples[i].stream(m), center), samples[i].label};
    });
    return items;
}

// Trains one 3d stream on center-frame volumes. Returns per-epoch stats.
template <typename T>
std::vector<EpochStats> train_3d_stream(Network<T>& net, SgdOptimizer<T>& opt,
                                        const std::vector<VideoSample<T>>& samples,
                                        const StreamRunConfig& rc, const LogSink& log = {}) {
    auto items = make_volume_items(samples, rc.modality, (int)rc.volume_center);
    std::vector<EpochStats> history;
    for (long e = 0; e < rc.epochs; ++e) {
        auto stats = train_epoch(net, items, opt, (std::size_t)rc.batch_size,
                                 hash_combine(rc.seed, (std::uint64_t)e));
        history.push_back(stats);
        if (log) log(format_epoch_log((int)e, stats));
    }
    return history;
}

// Trains one 2d consensus stream (rgb or stacked flow snippets). Flow fields
// are materialized once per sample up front; per-snippet stacking then only
// copies cached planes.
template <typename T>
std::vector<EpochStats> train_consensus_stream(Network<T>& net, SgdOptimizer<T>& opt,
                                               std::vector<VideoSample<T>>& samples,
                                               const StreamRunConfig& rc, const LogSink& log = {}) {
    const auto opts = rc.snippet_options(false);
    if (rc.modality == Modality::flow) ensure_flow_dataset(samples, rc.flow_params);
    std::vector<EpochStats> history;
    for (long e = 0; e < rc.epochs; ++e) {
        auto stats = consensus_train_epoch(net, samples, opts, opt, (std::size_t)rc.batch_size,
                                           hash_combine(rc.seed, (std::uint64_t)e));
        history.push_back(stats);
        if (log) log(format_epoch_log((int)e, stats));
    }
    return history;
}

template <typename T>
std::vector<EpochStats> train_stream(Network<T>& net, SgdOptimizer<T>& opt,
                                     std::vector<VideoSample<T>>& samples,
                                     const StreamRunConfig& rc, const LogSink& log = {}) {
    return is_3d_modality(rc.modality) ? train_3d_stream(net, opt, samples, rc, log)
                                       : train_consensus_stream(net, opt, samples, rc, log);
}

// --- scoring drivers ---------------------------------------------------------------

// Scores every sample with one stream network. 2d streams emit aggregated
// consensus votes (probability space); 3d streams emit class-head outputs,
// softmaxed only when the config asks for it. Results keep manifest order.
template <typename T>
StreamScore<T> score_stream(Network<T>& net, std::vector<VideoSample<T>>& samples,
                            const StreamRunConfig& rc) {
    StreamScore<T> out;
    out.tag = modality_name(rc.modality);
    out.ids.reserve(samples.size());
    out.scores.reserve(samples.size());
    if (rc.modality == Modality::flow) ensure_flow_dataset(samples, rc.flow_params);
    if (is_3d_modality(rc.modality)) {
        out.normalized = rc.normalize_3d;
        for (const auto& s : samples) {
            std::vector<Tensor<T>> vols{build_volume(s.stream(rc.modality), (int)rc.volume_center)};
            Workspace<T> ws;
            Rng rng(0);
            auto logits = net.forward_batch(vols, Mode::eval, ws, rng);
            out.ids.push_back(s.id);
            out.scores.push_back(rc.normalize_3d ? softmax(logits[0]) : logits[0]);
        }
    } else {
        out.normalized = true;  // consensus votes are probability vectors
        const auto opts = rc.snippet_options(true);
        for (const auto& s : samples) {
            Rng rng(hash_combine(rc.seed, fnv1a(s.id)));
            auto vs = score_video(net, s, opts, rng, rc.agg);
            out.ids.push_back(s.id);
            out.scores.push_back(vs.aggregated);
        }
        // max-aggregated votes are not a probability vector
        if (rc.agg == Aggregation::max) out.normalized = false;
    }
    return out;
}

// --- flow cache ----------------------------------------------------------------------

// Writes a flow/ modality directory per sample (skipping samples that have
// one), one .flo per source frame pair with the final field duplicated so
// the modality keeps its source frame count.
inline int precompute_flow_cache(const DatasetManifest& manifest, const FlowParams& params) {
    int written = 0;
    for (const auto& e : manifest.entries) {
        const auto dir = manifest.sample_dir(e.id) / "flow";
        if (std::filesystem::is_directory(dir)) continue;
        auto sample = load_sample<double>(manifest, e.id);
        auto flow = compute_flow_sequence(sample.stream(Modality::rgb), params);
        std::filesystem::create_directories(dir);
        for (std::size_t i = 0; i < flow.frames.size(); ++i)
            write_flo(dir / frame_name(i, "flo"), flow.frames[i]);
        ++written;
    }
    return written;
}

} // namespace mmgr
