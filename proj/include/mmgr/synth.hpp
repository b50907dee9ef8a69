#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "mmgr/error.hpp"
#include "mmgr/image_io.hpp"
#include "mmgr/parallel.hpp"
#include "mmgr/rng.hpp"
#include "mmgr/tensor.hpp"
#include "mmgr/video.hpp"

namespace mmgr {

// Synthetic gesture dataset: each class is a motion pattern of a bright blob
// (8 directions, classes past 8 reuse the directions at half speed). The blob
// position at the central frame is uniform over the same box for every class,
// so a single frame carries no class information and temporal models have to
// beat static ones. Per sample: rgb (blob over a textured background), depth
// (blob nearer than background, inverse-depth coded) and saliency (clean blob
// mask).
struct SynthSpec {
    int classes = 8;        // in [2,16]
    int per_class = 10;
    int frames = 32;        // >= 8
    int height = 64;
    int width = 64;
    std::uint64_t seed = 0;
    std::string split = "train";
    double blob_radius = 0.0;       // 0 = min(h,w) * 0.11
    double speed = 0.0;             // px/frame, 0 = min(h,w) / 64
    double texture_contrast = 0.3;  // rgb background amplitude
};

namespace detail {

struct SynthTexture {
    // small bank of low-frequency cosines per color channel
    double amp[3][4], fx[3][4], fy[3][4], phase[3][4];

    static SynthTexture draw(Rng& rng) {
        SynthTexture t;
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 4; ++i) {
                t.amp[c][i] = rng.uniform(0.3, 1.0);
                t.fx[c][i] = rng.uniform(0.5, 3.0);
                t.fy[c][i] = rng.uniform(0.5, 3.0);
                t.phase[c][i] = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            }
        return t;
    }

    double value(int c, double xn, double yn) const {
        double s = 0.0, norm = 0.0;
        for (int i = 0; i < 4; ++i) {
            s += amp[c][i] *
                 std::cos(2.0 * 3.14159265358979323846 * (fx[c][i] * xn + fy[c][i] * yn) +
                          phase[c][i]);
            norm += amp[c][i];
        }
        return s / norm;  // in [-1,1]
    }
};

// Compactly supported blob profile; zero at and beyond the radius.
inline double blob_bump(double dx, double dy, double radius) {
    double q = (dx * dx + dy * dy) / (radius * radius);
    return q >= 1.0 ? 0.0 : 1.0 - q;
}

} // namespace detail

struct SynthMotion {
    double vx, vy;  // px/frame
};

inline SynthMotion synth_class_motion(int cls, double base_speed) {
    const double speed = cls < 8 ? base_speed : base_speed * 0.5;
    const int dir = cls % 8;
    const double theta = (double)dir * (2.0 * 3.14159265358979323846 / 8.0);
    return {speed * std::cos(theta), speed * std::sin(theta)};
}

inline DatasetManifest gen_synthetic(const std::filesystem::path& root, const SynthSpec& spec) {
    if (spec.classes < 2 || spec.classes > 16)
        throw ParameterError("gen_synthetic: class count must be in [2,16], got " +
                             std::to_string(spec.classes));
    if (spec.frames < 8)
        throw ParameterError("gen_synthetic: need at least 8 frames, got " +
                             std::to_string(spec.frames));
    if (spec.per_class < 1) throw ParameterError("gen_synthetic: samples per class must be >= 1");

    const double radius =
        spec.blob_radius > 0 ? spec.blob_radius : 0.11 * (double)std::min(spec.height, spec.width);
    const double speed =
        spec.speed > 0 ? spec.speed : (double)std::min(spec.height, spec.width) / 64.0;

    // the same start box for every class keeps the center frame uninformative
    const double reach = 0.5 * (double)spec.frames * speed;
    const double margin = radius + reach + 1.0;
    const double x_lo = margin, x_hi = (double)spec.width - 1.0 - margin;
    const double y_lo = margin, y_hi = (double)spec.height - 1.0 - margin;
    if (x_hi <= x_lo || y_hi <= y_lo)
        throw ParameterError("gen_synthetic: frame too small for blob radius " +
                             std::to_string(radius) + " and speed " + std::to_string(speed));

    DatasetManifest manifest;
    manifest.root = root;
    manifest.split = spec.split;
    manifest.class_count = spec.classes;
    for (int cls = 0; cls < spec.classes; ++cls)
        for (int i = 0; i < spec.per_class; ++i) {
            char id[32];
            std::snprintf(id, sizeof(id), "c%02d_s%03d", cls, i);
            manifest.entries.push_back({id, cls});
        }

    std::filesystem::create_directories(manifest.split_dir());
    Rng root_rng = Rng(spec.seed).split(spec.split);

    parallel_for(manifest.entries.size(), [&](std::size_t idx) {
        const auto& entry = manifest.entries[idx];
        const int cls = entry.label;
        Rng rng = root_rng.split((std::uint64_t)cls).split((std::uint64_t)(idx % (std::size_t)spec.per_class));

        const SynthMotion motion = synth_class_motion(cls, speed);
        const double cx = rng.uniform(x_lo, x_hi);
        const double cy = rng.uniform(y_lo, y_hi);
        const auto texture = detail::SynthTexture::draw(rng);
        const double blob_r = rng.uniform(0.7, 1.0);  // warm blob color, slight variety
        const double blob_g = rng.uniform(0.6, 0.9);
        const double blob_b = rng.uniform(0.2, 0.5);

        const auto dir = manifest.sample_dir(entry.id);
        std::filesystem::create_directories(dir / "rgb");
        std::filesystem::create_directories(dir / "depth");
        std::filesystem::create_directories(dir / "saliency");

        const double t_center = 0.5 * (double)(spec.frames - 1);
        Tensor<double> rgb({3, (std::size_t)spec.height, (std::size_t)spec.width});
        Tensor<double> depth({1, (std::size_t)spec.height, (std::size_t)spec.width});
        Tensor<double> saliency({1, (std::size_t)spec.height, (std::size_t)spec.width});
        const std::size_t plane = (std::size_t)spec.height * (std::size_t)spec.width;

        for (int t = 0; t < spec.frames; ++t) {
            const double bx = cx + ((double)t - t_center) * motion.vx;
            const double by = cy + ((double)t - t_center) * motion.vy;
            for (int y = 0; y < spec.height; ++y)
                for (int x = 0; x < spec.width; ++x) {
                    const std::size_t p = (std::size_t)y * (std::size_t)spec.width + (std::size_t)x;
                    const double bump = detail::blob_bump((double)x - bx, (double)y - by, radius);
                    const double xn = (double)x / (double)spec.width;
                    const double yn = (double)y / (double)spec.height;
                    const double alpha = 0.85 * bump;
                    const double col[3] = {blob_r, blob_g, blob_b};
                    for (int c = 0; c < 3; ++c) {
                        double bg = 0.45 + spec.texture_contrast * texture.value(c, xn, yn);
                        rgb[(std::size_t)c * plane + p] = (1.0 - alpha) * bg + alpha * col[c];
                    }
                    depth[p] = 0.2 + 0.7 * bump;  // nearer is brighter
                    saliency[p] = bump > 0.0 ? 1.0 : 0.0;
                }
            write_ppm(dir / "rgb" / frame_name((std::size_t)t, "ppm"), rgb);
            write_pgm(dir / "depth" / frame_name((std::size_t)t, "pgm"), depth);
            write_pgm(dir / "saliency" / frame_name((std::size_t)t, "pgm"), saliency);
        }
    });

    save_manifest(manifest);
    return manifest;
}

} // namespace mmgr
