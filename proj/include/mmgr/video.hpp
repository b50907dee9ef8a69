#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mmgr/error.hpp"
#include "mmgr/image_io.hpp"
#include "mmgr/rng.hpp"
#include "mmgr/tensor.hpp"

namespace mmgr {

enum class Modality { rgb, depth, saliency, flow };

inline const char* modality_name(Modality m) {
    switch (m) {
        case Modality::rgb: return "rgb";
        case Modality::depth: return "depth";
        case Modality::saliency: return "saliency";
        case Modality::flow: return "flow";
    }
    return "?";
}

inline Modality parse_modality(const std::string& s) {
    if (s == "rgb") return Modality::rgb;
    if (s == "depth") return Modality::depth;
    if (s == "saliency") return Modality::saliency;
    if (s == "flow") return Modality::flow;
    throw ParameterError("unknown modality '" + s + "'");
}

inline int modality_channels(Modality m) {
    switch (m) {
        case Modality::rgb: return 3;
        case Modality::depth: return 1;
        case Modality::saliency: return 1;
        case Modality::flow: return 2;
    }
    return 0;
}

inline const char* modality_ext(Modality m) {
    switch (m) {
        case Modality::rgb: return "ppm";
        case Modality::depth: return "pgm";
        case Modality::saliency: return "pgm";
        case Modality::flow: return "flo";
    }
    return "";
}

template <typename T>
struct FrameSequence {
    Modality modality = Modality::rgb;
    std::vector<Tensor<T>> frames;  // each [C,H,W]

    std::size_t frame_count() const { return frames.size(); }
    std::size_t height() const { return frames.at(0).dim(1); }
    std::size_t width() const { return frames.at(0).dim(2); }
};

template <typename T>
struct VideoSample {
    std::string id;
    int label = -1;
    std::map<Modality, FrameSequence<T>> streams;

    const FrameSequence<T>& stream(Modality m) const {
        auto it = streams.find(m);
        if (it == streams.end())
            throw ConfigError("sample " + id + ": modality '" + modality_name(m) + "' not present");
        return it->second;
    }
    bool has(Modality m) const { return streams.count(m) > 0; }
    std::size_t frame_count() const {
        if (streams.empty()) throw StateError("sample " + id + ": no modalities");
        return streams.begin()->second.frame_count();
    }
};

struct ManifestEntry {
    std::string id;
    int label;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::string split;
    std::vector<ManifestEntry> entries;
    int class_count = 0;

    std::filesystem::path split_dir() const { return root / split; }
    std::filesystem::path sample_dir(const std::string& id) const { return split_dir() / id; }
};

// --- manifest CSV: header "id,label" ----------------------------------------

inline void save_manifest(const DatasetManifest& m) {
    std::filesystem::create_directories(m.split_dir());
    std::ofstream f(m.split_dir() / "manifest.csv", std::ios::trunc);
    if (!f) throw Error("cannot write manifest under " + m.split_dir().string());
    f << "id,label\n";
    for (const auto& e : m.entries) f << e.id << "," << e.label << "\n";
}

inline DatasetManifest load_manifest(const std::filesystem::path& root, const std::string& split) {
    DatasetManifest m;
    m.root = root;
    m.split = split;
    const auto path = m.split_dir() / "manifest.csv";
    std::ifstream f(path);
    if (!f) throw NotFoundError("manifest not found: " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw FormatError(path.string() + ": empty manifest");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "id,label") throw FormatError(path.string() + ": bad header '" + line + "'");
    int max_label = -1;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw FormatError(path.string() + ": bad row '" + line + "'");
        ManifestEntry e;
        e.id = line.substr(0, comma);
        try {
            e.label = std::stoi(line.substr(comma + 1));
        } catch (...) {
            throw FormatError(path.string() + ": bad label in row '" + line + "'");
        }
        if (e.label < 0) throw FormatError(path.string() + ": negative label in row '" + line + "'");
        max_label = std::max(max_label, e.label);
        m.entries.push_back(std::move(e));
    }
    m.class_count = max_label + 1;
    return m;
}

// --- sample loading -----------------------------------------------------------

inline std::string frame_name(std::size_t index, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%05zu.%s", index, ext);
    return buf;
}

template <typename T>
FrameSequence<T> load_frame_sequence(const std::filesystem::path& dir, Modality m) {
    FrameSequence<T> seq;
    seq.modality = m;
    const char* ext = modality_ext(m);
    for (std::size_t i = 0;; ++i) {
        const auto path = dir / frame_name(i, ext);
        if (!std::filesystem::exists(path)) break;
        switch (m) {
            case Modality::rgb: seq.frames.push_back(read_ppm<T>(path)); break;
            case Modality::depth:
            case Modality::saliency: seq.frames.push_back(read_pgm<T>(path)); break;
            case Modality::flow: seq.frames.push_back(read_flo<T>(path)); break;
        }
        if (seq.frames.back().shape() != seq.frames.front().shape())
            throw FormatError(path.string() + ": frame shape differs from first frame");
    }
    if (seq.frames.empty())
        throw FormatError("no frames found in " + dir.string());
    return seq;
}

// Loads every modality subdirectory present. Modalities must agree on frame
// count; pixel values arrive already scaled to [0,1] (flow stays raw).
template <typename T>
VideoSample<T> load_sample(const DatasetManifest& manifest, const std::string& id) {
    const auto dir = manifest.sample_dir(id);
    if (!std::filesystem::is_directory(dir))
        throw NotFoundError("sample directory not found: " + dir.string());
    VideoSample<T> sample;
    sample.id = id;
    for (Modality m : {Modality::rgb, Modality::depth, Modality::saliency, Modality::flow}) {
        const auto sub = dir / modality_name(m);
        if (!std::filesystem::is_directory(sub)) continue;
        sample.streams[m] = load_frame_sequence<T>(sub, m);
    }
    if (sample.streams.empty())
        throw FormatError("sample " + id + ": no modality subdirectories in " + dir.string());
    std::size_t count = sample.streams.begin()->second.frame_count();
    for (const auto& [m, seq] : sample.streams)
        if (seq.frame_count() != count)
            throw FormatError("sample " + id + ": modality '" + modality_name(m) + "' has " +
                              std::to_string(seq.frame_count()) + " frames, expected " +
                              std::to_string(count));
    for (const auto& e : manifest.entries)
        if (e.id == id) {
            sample.label = e.label;
            break;
        }
    return sample;
}

// --- temporal resampling ------------------------------------------------------
// Center-aligned nearest neighbor: output j takes input floor((j+0.5)*Tin/Tout).

template <typename T>
FrameSequence<T> resample_to(const FrameSequence<T>& seq, std::size_t t_out = 32) {
    if (seq.frames.empty()) throw ParameterError("resample_to: empty sequence");
    if (t_out < 1) throw ParameterError("resample_to: output length must be >= 1");
    const std::size_t t_in = seq.frame_count();
    FrameSequence<T> out;
    out.modality = seq.modality;
    out.frames.reserve(t_out);
    for (std::size_t j = 0; j < t_out; ++j) {
        std::size_t src = (std::size_t)(((double)j + 0.5) * (double)t_in / (double)t_out);
        if (src >= t_in) src = t_in - 1;
        out.frames.push_back(seq.frames[src]);
    }
    return out;
}

// --- volume construction -------------------------------------------------------
// Stacks frames t-15 .. t+16 of a 32-frame sequence into [C,32,H,W], clamping
// indices at the boundaries.

template <typename T>
Tensor<T> build_volume(const FrameSequence<T>& seq, int center) {
    constexpr int kVolume = 32;
    if ((int)seq.frame_count() != kVolume)
        throw ParameterError("build_volume: sequence must have exactly 32 frames, got " +
                             std::to_string(seq.frame_count()));
    if (center < 0 || center >= kVolume)
        throw ParameterError("build_volume: center " + std::to_string(center) +
                             " out of range [0,32)");
    const auto& f0 = seq.frames[0];
    const std::size_t C = f0.dim(0), H = f0.dim(1), W = f0.dim(2);
    Tensor<T> vol({C, (std::size_t)kVolume, H, W});
    const std::size_t plane = H * W;
    for (int k = 0; k < kVolume; ++k) {
        int idx = std::clamp(center - 15 + k, 0, kVolume - 1);
        const auto& fr = seq.frames[(std::size_t)idx];
        for (std::size_t c = 0; c < C; ++c)
            std::copy(fr.data() + c * plane, fr.data() + (c + 1) * plane,
                      vol.data() + (c * kVolume + (std::size_t)k) * plane);
    }
    return vol;
}

// --- augmentation ---------------------------------------------------------------

// Mirrors the width axis. For flow content the horizontal displacement
// channels (even channel indices) also change sign.
template <typename T>
Tensor<T> hflip(const Tensor<T>& frame, bool is_flow = false) {
    if (frame.rank() != 3) throw ShapeError("hflip: expected [C,H,W]");
    const std::size_t C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
    Tensor<T> out(frame.shape());
    for (std::size_t c = 0; c < C; ++c) {
        const bool negate = is_flow && (c % 2 == 0);
        for (std::size_t y = 0; y < H; ++y) {
            const T* src = frame.data() + (c * H + y) * W;
            T* dst = out.data() + (c * H + y) * W;
            for (std::size_t x = 0; x < W; ++x)
                dst[x] = negate ? -src[W - 1 - x] : src[W - 1 - x];
        }
    }
    return out;
}

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& frame, std::size_t out_h, std::size_t out_w) {
    if (frame.rank() != 3) throw ShapeError("bilinear_resize: expected [C,H,W]");
    const std::size_t C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
    if (out_h < 1 || out_w < 1) throw ParameterError("bilinear_resize: empty output");
    if (out_h == H && out_w == W) return frame;
    Tensor<T> out({C, out_h, out_w});
    const double sy = (double)H / (double)out_h;
    const double sx = (double)W / (double)out_w;
    for (std::size_t c = 0; c < C; ++c) {
        const T* src = frame.data() + c * H * W;
        T* dst = out.data() + c * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            double fy = ((double)oy + 0.5) * sy - 0.5;
            long y0 = (long)std::floor(fy);
            double wy = fy - (double)y0;
            long y1 = std::min<long>((long)H - 1, std::max<long>(0, y0 + 1));
            y0 = std::min<long>((long)H - 1, std::max<long>(0, y0));
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                double fx = ((double)ox + 0.5) * sx - 0.5;
                long x0 = (long)std::floor(fx);
                double wx = fx - (double)x0;
                long x1 = std::min<long>((long)W - 1, std::max<long>(0, x0 + 1));
                long x0c = std::min<long>((long)W - 1, std::max<long>(0, x0));
                double v00 = (double)src[y0 * (long)W + x0c];
                double v01 = (double)src[y0 * (long)W + x1];
                double v10 = (double)src[y1 * (long)W + x0c];
                double v11 = (double)src[y1 * (long)W + x1];
                dst[oy * out_w + ox] =
                    (T)((1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11));
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& frame, std::size_t top, std::size_t left, std::size_t h,
               std::size_t w) {
    const std::size_t C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
    if (top + h > H || left + w > W)
        throw ParameterError("crop: window exceeds frame bounds");
    Tensor<T> out({C, h, w});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < h; ++y)
            std::copy(frame.data() + (c * H + top + y) * W + left,
                      frame.data() + (c * H + top + y) * W + left + w,
                      out.data() + (c * h + y) * w);
    return out;
}

// Uniform-random crop window of crop_h x crop_w, resized to out_h x out_w.
template <typename T>
Tensor<T> random_crop(const Tensor<T>& frame, std::size_t crop_h, std::size_t crop_w,
                      std::size_t out_h, std::size_t out_w, Rng& rng) {
    const std::size_t H = frame.dim(1), W = frame.dim(2);
    if (crop_h > H || crop_w > W)
        throw ParameterError("random_crop: crop " + std::to_string(crop_h) + "x" +
                             std::to_string(crop_w) + " larger than frame " + std::to_string(H) +
                             "x" + std::to_string(W));
    std::size_t top = (std::size_t)rng.uniform_int(H - crop_h + 1);
    std::size_t left = (std::size_t)rng.uniform_int(W - crop_w + 1);
    return bilinear_resize(crop(frame, top, left, crop_h, crop_w), out_h, out_w);
}

// Scale-and-aspect-ratio jittered crop: samples a scale and an aspect ratio
// from the configured sets, crops a window of that geometry at a uniform
// position, then resizes to the network input size.
template <typename T>
Tensor<T> scale_jitter_crop(const Tensor<T>& frame, const std::vector<double>& scales,
                            const std::vector<double>& ratios, std::size_t out_h,
                            std::size_t out_w, Rng& rng) {
    if (scales.empty() || ratios.empty())
        throw ParameterError("scale_jitter_crop: empty scale or ratio set");
    const std::size_t H = frame.dim(1), W = frame.dim(2);
    const double s = scales[rng.uniform_int(scales.size())];
    const double r = ratios[rng.uniform_int(ratios.size())];
    const double base = (double)std::min(H, W) * s;
    auto clamp_dim = [](double v, std::size_t hi) {
        if (v < 1.0) v = 1.0;
        if (v > (double)hi) v = (double)hi;
        return (std::size_t)v;
    };
    std::size_t ch = clamp_dim(base / std::sqrt(r), H);
    std::size_t cw = clamp_dim(base * std::sqrt(r), W);
    std::size_t top = (std::size_t)rng.uniform_int(H - ch + 1);
    std::size_t left = (std::size_t)rng.uniform_int(W - cw + 1);
    return bilinear_resize(crop(frame, top, left, ch, cw), out_h, out_w);
}

} // namespace mmgr
