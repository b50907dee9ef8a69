// mmgr: train / score / fuse / evaluate multi-modal gesture streams.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmgr/mmgr.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string data;
    std::string split = "train";
    std::string modality = "rgb";
    std::string config_path;
    std::string out;
    std::optional<long> seed;
};

mmgr::Config load_run_config(const CommonArgs& args) {
    mmgr::Config cfg;
    if (!args.config_path.empty()) cfg = mmgr::Config::from_file(args.config_path);
    if (args.seed) cfg.set("seed", std::to_string(*args.seed));
    return cfg;
}

template <typename Fn>
int with_precision(const mmgr::Config& cfg, Fn&& fn) {
    const auto p = cfg.get("precision", "f32");
    if (p == "f32") return fn(float{});
    if (p == "f64") return fn(double{});
    throw mmgr::ConfigError("config: precision must be f32 or f64, got '" + p + "'");
}

template <typename T>
mmgr::Shape dataset_frame_shape(const std::vector<mmgr::VideoSample<T>>& samples) {
    if (samples.empty()) throw mmgr::ParameterError("dataset is empty");
    const auto& streams = samples.front().streams;
    if (streams.empty()) throw mmgr::ParameterError("first sample has no modalities");
    return streams.begin()->second.frames.front().shape();
}

// --- gen -----------------------------------------------------------------------

struct GenArgs {
    std::string out;
    std::string split = "train";
    int classes = 8;
    int per_class = 10;
    int frames = 32;
    int size = 64;
    long seed = 0;
    double blob_radius = 0.0;
    double speed = 0.0;
};

int run_gen(const GenArgs& a) {
    mmgr::SynthSpec spec;
    spec.classes = a.classes;
    spec.per_class = a.per_class;
    spec.frames = a.frames;
    spec.height = spec.width = a.size;
    spec.seed = (std::uint64_t)a.seed;
    spec.split = a.split;
    spec.blob_radius = a.blob_radius;
    spec.speed = a.speed;
    auto manifest = mmgr::gen_synthetic(a.out, spec);
    std::printf("generated %zu samples (%d classes) under %s/%s\n", manifest.entries.size(),
                manifest.class_count, a.out.c_str(), a.split.c_str());
    return 0;
}

// --- flow ----------------------------------------------------------------------

int run_flow(const CommonArgs& args, double alpha, int iters) {
    auto manifest = mmgr::load_manifest(args.data, args.split);
    mmgr::FlowParams params{alpha, iters};
    int written = mmgr::precompute_flow_cache(manifest, params);
    std::printf("flow cached for %d of %zu samples\n", written, manifest.entries.size());
    return 0;
}

// --- train ---------------------------------------------------------------------

int run_train(const CommonArgs& args) {
    const auto cfg = load_run_config(args);
    return with_precision(cfg, [&](auto tag) {
        using T = decltype(tag);
        auto manifest = mmgr::load_manifest(args.data, args.split);
        const int classes = (int)cfg.get_int("classes", manifest.class_count);
        auto rc = mmgr::parse_stream_config(cfg, mmgr::parse_modality(args.modality), classes);
        auto samples = mmgr::load_dataset<T>(manifest, {rc.modality});
        auto net = mmgr::build_stream_network<T>(rc, dataset_frame_shape(samples));
        net.init_params(rc.seed);
        mmgr::SgdOptimizer<T> opt(net.params(), rc.hyper);
        mmgr::train_stream(net, opt, samples, rc,
                           [](const std::string& line) { std::cout << line << "\n"; });
        if (!args.out.empty()) {
            mmgr::save_network_checkpoint(args.out, net, &opt);
            std::printf("checkpoint written to %s\n", args.out.c_str());
        }
        return 0;
    });
}

// --- score ---------------------------------------------------------------------

int run_score(const CommonArgs& args, const std::string& ckpt) {
    const auto cfg = load_run_config(args);
    return with_precision(cfg, [&](auto tag) {
        using T = decltype(tag);
        auto manifest = mmgr::load_manifest(args.data, args.split);
        const int classes = (int)cfg.get_int("classes", manifest.class_count);
        auto rc = mmgr::parse_stream_config(cfg, mmgr::parse_modality(args.modality), classes);
        auto samples = mmgr::load_dataset<T>(manifest, {rc.modality});
        auto net = mmgr::build_stream_network<T>(rc, dataset_frame_shape(samples));
        mmgr::load_network_checkpoint<T>(ckpt, net);
        auto scores = mmgr::score_stream(net, samples, rc);
        mmgr::write_score_csv(args.out, scores);
        std::printf("scores for %zu samples written to %s\n", scores.ids.size(),
                    args.out.c_str());
        return 0;
    });
}

// --- fuse ----------------------------------------------------------------------

int run_fuse(const std::vector<std::string>& csvs, const std::string& weights_arg,
             bool normalize, const std::string& out, const std::string& pred_out) {
    std::vector<mmgr::StreamScore<double>> streams;
    for (const auto& path : csvs) streams.push_back(mmgr::read_score_csv<double>(path));
    mmgr::FusionSpec spec;
    spec.softmax_normalize = normalize;
    if (weights_arg.empty()) {
        spec.weights.assign(streams.size(), 1.0);
    } else {
        std::stringstream ss(weights_arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) spec.weights.push_back(std::stod(tok));
    }
    auto fused = mmgr::fuse_scores(streams, spec);
    if (!out.empty()) mmgr::write_score_csv(out, fused);
    if (!pred_out.empty()) {
        std::vector<std::pair<std::string, int>> rows;
        for (std::size_t i = 0; i < fused.ids.size(); ++i)
            rows.emplace_back(fused.ids[i], mmgr::predict_label(fused.scores[i]));
        mmgr::write_label_csv(pred_out, rows);
    }
    std::printf("fused %zu streams over %zu samples\n", streams.size(), fused.ids.size());
    return 0;
}

// --- eval ----------------------------------------------------------------------

mmgr::PredictionSet make_prediction_set(const std::string& pred_csv, const std::string& truth_csv) {
    auto preds = mmgr::read_label_csv(pred_csv);
    auto truths = mmgr::read_label_csv(truth_csv);
    std::map<std::string, int> truth_by_id(truths.begin(), truths.end());
    mmgr::PredictionSet set;
    int max_label = 0;
    for (const auto& [id, pred] : preds) {
        auto it = truth_by_id.find(id);
        if (it == truth_by_id.end())
            throw mmgr::AlignmentError("no truth label for sample '" + id + "'");
        set.items.push_back({id, it->second, pred});
        max_label = std::max({max_label, pred, it->second});
    }
    set.class_count = max_label + 1;
    set.check();
    return set;
}

int run_eval(const std::string& pred_csv, const std::string& truth_csv,
             const std::string& confusion_out, const std::string& confusion_norm_out,
             const std::string& base_csv, const std::string& changes_out) {
    auto set = make_prediction_set(pred_csv, truth_csv);
    std::printf("accuracy=%.6f\n", mmgr::accuracy(set));
    if (!confusion_out.empty() || !confusion_norm_out.empty()) {
        auto m = mmgr::confusion(set);
        if (!confusion_out.empty()) mmgr::write_confusion_csv(confusion_out, m, false);
        if (!confusion_norm_out.empty()) mmgr::write_confusion_csv(confusion_norm_out, m, true);
    }
    if (!base_csv.empty()) {
        auto base = make_prediction_set(base_csv, truth_csv);
        base.class_count = set.class_count = std::max(base.class_count, set.class_count);
        auto changes = mmgr::change_analysis(base, set);
        std::printf("changes_correct=%ld changes_error=%ld\n", changes.total_correct(),
                    changes.total_error());
        if (!changes_out.empty()) {
            std::ofstream f(changes_out, std::ios::trunc | std::ios::binary);
            if (!f) throw mmgr::Error("cannot write " + changes_out);
            f << "class,correct,error\n";
            for (std::size_t c = 0; c < changes.correct.size(); ++c)
                f << c << "," << changes.correct[c] << "," << changes.error[c] << "\n";
        }
    }
    return 0;
}

// --- pipeline --------------------------------------------------------------------

int run_pipeline(const CommonArgs& args, const std::string& scores_out) {
    const auto cfg = load_run_config(args);
    return with_precision(cfg, [&](auto tag) {
        using T = decltype(tag);
        auto manifest = mmgr::load_manifest(args.data, args.split);
        const int classes = (int)cfg.get_int("classes", manifest.class_count);
        const std::uint64_t seed = (std::uint64_t)cfg.get_int("seed", 0);

        struct StreamSlot {
            mmgr::Modality modality;
            const char* ckpt_key;
        };
        const StreamSlot slots[] = {{mmgr::Modality::rgb, "ckpt_rgb"},
                                    {mmgr::Modality::flow, "ckpt_flow"},
                                    {mmgr::Modality::depth, "ckpt_depth"},
                                    {mmgr::Modality::saliency, "ckpt_saliency"}};

        std::vector<mmgr::Modality> needed;
        for (const auto& slot : slots)
            if (cfg.has(slot.ckpt_key)) {
                if (slot.modality == mmgr::Modality::flow) {
                    if (std::find(needed.begin(), needed.end(), mmgr::Modality::rgb) ==
                        needed.end())
                        needed.push_back(mmgr::Modality::rgb);
                    needed.push_back(mmgr::Modality::flow);
                } else {
                    needed.push_back(slot.modality);
                }
            }
        if (needed.empty()) throw mmgr::ConfigError("pipeline: no ckpt_* keys in config");
        if (cfg.has("ckpt_rgb") &&
            std::find(needed.begin(), needed.end(), mmgr::Modality::rgb) == needed.end())
            needed.push_back(mmgr::Modality::rgb);

        auto samples = mmgr::load_dataset<T>(manifest, needed, /*resample=*/false);

        mmgr::PipelineNets<T> nets;
        std::vector<std::unique_ptr<mmgr::Network<T>>> owned;
        mmgr::Shape frame_shape;
        for (const auto& s : samples.front().streams)
            if (s.first != mmgr::Modality::flow) frame_shape = s.second.frames.front().shape();
        for (const auto& slot : slots) {
            if (!cfg.has(slot.ckpt_key)) continue;
            auto rc = mmgr::parse_stream_config(cfg, slot.modality, classes);
            owned.push_back(std::make_unique<mmgr::Network<T>>(
                mmgr::stream_network_config(rc, frame_shape)));
            mmgr::load_network_checkpoint<T>(cfg.require(slot.ckpt_key), *owned.back());
            switch (slot.modality) {
                case mmgr::Modality::rgb: nets.rgb = owned.back().get(); break;
                case mmgr::Modality::flow: nets.flow = owned.back().get(); break;
                case mmgr::Modality::depth: nets.depth = owned.back().get(); break;
                case mmgr::Modality::saliency: nets.saliency = owned.back().get(); break;
            }
        }

        auto base_rc = mmgr::parse_stream_config(cfg, mmgr::Modality::rgb, classes);
        mmgr::PipelineOptions popt;
        popt.rgb_snippets = base_rc.snippet_options(true);
        popt.flow_snippets = base_rc.snippet_options(true);
        popt.flow_snippets.modality = mmgr::Modality::flow;
        popt.agg = base_rc.agg;
        popt.volume_center = (int)base_rc.volume_center;
        popt.volume_hflip = cfg.get_bool("volume_hflip", false);
        popt.normalize_3d = base_rc.normalize_3d;
        popt.w_2scvn = cfg.get_double("w_2scvn", 1.0);
        popt.w_3ddsn = cfg.get_double("w_3ddsn", 1.0);
        popt.w_rgb = cfg.get_double("w_rgb", 1.0);
        popt.w_flow = cfg.get_double("w_flow", 1.0);
        popt.w_depth = cfg.get_double("w_depth", 2.0);
        popt.w_sal = cfg.get_double("w_sal", 1.0);
        popt.flow_params = base_rc.flow_params;

        std::vector<std::pair<std::string, int>> rows;
        mmgr::StreamScore<T> fused_scores;
        fused_scores.tag = "fused";
        std::size_t correct = 0, labeled = 0;
        for (auto& sample : samples) {
            mmgr::Rng rng(mmgr::hash_combine(seed, mmgr::fnv1a(sample.id)));
            auto res = mmgr::pipeline_predict(sample, nets, popt, rng);
            rows.emplace_back(sample.id, res.label);
            fused_scores.ids.push_back(sample.id);
            fused_scores.scores.push_back(res.fused);
            if (sample.label >= 0) {
                ++labeled;
                if (res.label == sample.label) ++correct;
            }
        }
        mmgr::write_label_csv(args.out, rows);
        if (!scores_out.empty()) mmgr::write_score_csv(scores_out, fused_scores);
        if (labeled > 0)
            std::printf("pipeline accuracy=%.6f over %zu samples\n",
                        (double)correct / (double)labeled, labeled);
        return 0;
    });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-modal gesture recognition workbench"};
    app.require_subcommand(1);

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "generate a synthetic gesture dataset");
    gen->add_option("--out", gen_args.out, "dataset root directory")->required();
    gen->add_option("--split", gen_args.split, "split name (default train)");
    gen->add_option("--classes", gen_args.classes, "number of motion classes (2..16)");
    gen->add_option("--per-class", gen_args.per_class, "samples per class");
    gen->add_option("--frames", gen_args.frames, "frames per sample (>= 8)");
    gen->add_option("--size", gen_args.size, "frame height and width");
    gen->add_option("--seed", gen_args.seed, "generator seed");
    gen->add_option("--blob-radius", gen_args.blob_radius, "blob radius in px (0 = auto)");
    gen->add_option("--speed", gen_args.speed, "blob speed in px/frame (0 = auto)");

    CommonArgs flow_args;
    double flow_alpha = 1.0;
    int flow_iters = 200;
    auto* flowc = app.add_subcommand("flow", "precompute and cache optical flow");
    flowc->add_option("--data", flow_args.data, "dataset root")->required();
    flowc->add_option("--split", flow_args.split, "dataset split");
    flowc->add_option("--alpha", flow_alpha, "smoothness weight");
    flowc->add_option("--iters", flow_iters, "solver iterations");

    CommonArgs train_args;
    auto* train = app.add_subcommand("train", "train one stream");
    train->add_option("--data", train_args.data, "dataset root")->required();
    train->add_option("--split", train_args.split, "dataset split");
    train->add_option("--modality", train_args.modality, "rgb|flow|depth|saliency");
    train->add_option("--config", train_args.config_path, "key = value config file");
    train->add_option("--seed", train_args.seed, "seed override");
    train->add_option("--out", train_args.out, "checkpoint output path");

    CommonArgs score_args;
    std::string score_ckpt;
    auto* score = app.add_subcommand("score", "emit per-sample score CSV for one stream");
    score->add_option("--data", score_args.data, "dataset root")->required();
    score->add_option("--split", score_args.split, "dataset split");
    score->add_option("--modality", score_args.modality, "rgb|flow|depth|saliency");
    score->add_option("--config", score_args.config_path, "key = value config file");
    score->add_option("--seed", score_args.seed, "seed override");
    score->add_option("--ckpt", score_ckpt, "stream checkpoint")->required();
    score->add_option("--out", score_args.out, "score CSV output")->required();

    std::vector<std::string> fuse_csvs;
    std::string fuse_weights, fuse_out, fuse_pred;
    bool fuse_normalize = false;
    auto* fuse = app.add_subcommand("fuse", "fuse score CSVs with weights");
    fuse->add_option("csvs", fuse_csvs, "input score CSVs")->required()->expected(-1);
    fuse->add_option("--weights", fuse_weights, "comma-separated stream weights");
    fuse->add_flag("--normalize", fuse_normalize, "softmax each stream before fusing");
    fuse->add_option("--out", fuse_out, "fused score CSV output");
    fuse->add_option("--pred", fuse_pred, "fused predictions CSV output");

    std::string eval_pred, eval_truth, eval_conf, eval_conf_norm, eval_base, eval_changes;
    auto* evalc = app.add_subcommand("eval", "accuracy / confusion / change analysis");
    evalc->add_option("--pred", eval_pred, "predictions CSV (id,label)")->required();
    evalc->add_option("--truth", eval_truth, "truth CSV (id,label)")->required();
    evalc->add_option("--confusion", eval_conf, "write confusion counts CSV");
    evalc->add_option("--confusion-norm", eval_conf_norm, "write row-normalized confusion CSV");
    evalc->add_option("--base", eval_base, "base predictions CSV for change analysis");
    evalc->add_option("--changes", eval_changes, "write per-class change CSV");

    CommonArgs pipe_args;
    std::string pipe_scores;
    auto* pipe = app.add_subcommand("pipeline", "end-to-end multi-stream prediction");
    pipe->add_option("--data", pipe_args.data, "dataset root")->required();
    pipe->add_option("--split", pipe_args.split, "dataset split");
    pipe->add_option("--config", pipe_args.config_path, "config with ckpt_* stream keys")
        ->required();
    pipe->add_option("--seed", pipe_args.seed, "seed override");
    pipe->add_option("--out", pipe_args.out, "predictions CSV output")->required();
    pipe->add_option("--scores", pipe_scores, "fused score CSV output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) return run_gen(gen_args);
        if (flowc->parsed()) return run_flow(flow_args, flow_alpha, flow_iters);
        if (train->parsed()) return run_train(train_args);
        if (score->parsed()) return run_score(score_args, score_ckpt);
        if (fuse->parsed())
            return run_fuse(fuse_csvs, fuse_weights, fuse_normalize, fuse_out, fuse_pred);
        if (evalc->parsed())
            return run_eval(eval_pred, eval_truth, eval_conf, eval_conf_norm, eval_base,
                            eval_changes);
        if (pipe->parsed()) return run_pipeline(pipe_args, pipe_scores);
    } catch (const mmgr::NotFoundError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const mmgr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
