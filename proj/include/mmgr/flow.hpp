#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mmgr/error.hpp"
#include "mmgr/parallel.hpp"
#include "mmgr/tensor.hpp"
#include "mmgr/video.hpp"

namespace mmgr {

// Dense displacement field between two frames, in pixels per frame.
template <typename T>
struct FlowField {
    Tensor<T> u;  // horizontal, [H,W]
    Tensor<T> v;  // vertical, [H,W]
};

struct FlowParams {
    double alpha = 1.0;   // smoothness weight
    int iterations = 200;
};

// Luminance of an rgb frame; single-channel frames pass through.
template <typename T>
Tensor<T> to_gray(const Tensor<T>& frame) {
    if (frame.rank() == 2) return frame;
    if (frame.rank() != 3) throw ShapeError("to_gray: expected [C,H,W]");
    const std::size_t H = frame.dim(1), W = frame.dim(2);
    if (frame.dim(0) == 1) return frame.reshaped({H, W});
    if (frame.dim(0) != 3)
        throw ShapeError("to_gray: expected 1 or 3 channels, got " + std::to_string(frame.dim(0)));
    Tensor<T> g({H, W});
    const T* r = frame.data();
    const T* gc = r + H * W;
    const T* b = gc + H * W;
    for (std::size_t i = 0; i < H * W; ++i)
        g[i] = (T)(0.299 * (double)r[i] + 0.587 * (double)gc[i] + 0.114 * (double)b[i]);
    return g;
}

// Horn-Schunck optical flow: brightness-constancy data term plus an
// alpha^2-weighted smoothness term, solved by a fixed number of Jacobi
// iterations. Deterministic; no pyramid, so it favors small displacements.
template <typename T>
FlowField<T> compute_flow(const Tensor<T>& frame_a, const Tensor<T>& frame_b,
                          const FlowParams& params = {}) {
    if (frame_a.rank() != 2 || frame_b.rank() != 2)
        throw ShapeError("compute_flow: expected [H,W] grayscale frames");
    if (!frame_a.same_shape(frame_b))
        throw ShapeError("compute_flow: frame shapes differ: " + shape_str(frame_a.shape()) +
                         " vs " + shape_str(frame_b.shape()));
    if (params.iterations < 1) throw ParameterError("compute_flow: iterations must be >= 1");
    const long H = (long)frame_a.dim(0), W = (long)frame_a.dim(1);
    const T* a = frame_a.data();
    const T* b = frame_b.data();

    auto at = [&](const T* img, long y, long x) {
        y = std::clamp(y, 0L, H - 1);
        x = std::clamp(x, 0L, W - 1);
        return (double)img[y * W + x];
    };

    // derivatives averaged over both frames, replicated edges
    std::vector<double> ix((std::size_t)(H * W)), iy((std::size_t)(H * W)), it((std::size_t)(H * W));
    for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
            const std::size_t p = (std::size_t)(y * W + x);
            ix[p] = 0.25 * (at(a, y, x + 1) - at(a, y, x - 1) + at(b, y, x + 1) - at(b, y, x - 1));
            iy[p] = 0.25 * (at(a, y + 1, x) - at(a, y - 1, x) + at(b, y + 1, x) - at(b, y - 1, x));
            it[p] = (double)b[p] - (double)a[p];
        }

    std::vector<double> u((std::size_t)(H * W), 0.0), v((std::size_t)(H * W), 0.0);
    std::vector<double> un(u), vn(v);
    const double alpha2 = params.alpha * params.alpha;

    auto avg = [&](const std::vector<double>& f, long y, long x) {
        auto g = [&](long yy, long xx) {
            yy = std::clamp(yy, 0L, H - 1);
            xx = std::clamp(xx, 0L, W - 1);
            return f[(std::size_t)(yy * W + xx)];
        };
        return (g(y - 1, x) + g(y + 1, x) + g(y, x - 1) + g(y, x + 1)) / 6.0 +
               (g(y - 1, x - 1) + g(y - 1, x + 1) + g(y + 1, x - 1) + g(y + 1, x + 1)) / 12.0;
    };

    for (int iter = 0; iter < params.iterations; ++iter) {
        for (long y = 0; y < H; ++y)
            for (long x = 0; x < W; ++x) {
                const std::size_t p = (std::size_t)(y * W + x);
                const double ub = avg(u, y, x);
                const double vb = avg(v, y, x);
                const double frac =
                    (ix[p] * ub + iy[p] * vb + it[p]) / (alpha2 + ix[p] * ix[p] + iy[p] * iy[p]);
                un[p] = ub - ix[p] * frac;
                vn[p] = vb - iy[p] * frac;
            }
        std::swap(u, un);
        std::swap(v, vn);
    }

    FlowField<T> out;
    out.u = Tensor<T>({(std::size_t)H, (std::size_t)W});
    out.v = Tensor<T>({(std::size_t)H, (std::size_t)W});
    for (std::size_t p = 0; p < (std::size_t)(H * W); ++p) {
        out.u[p] = (T)u[p];
        out.v[p] = (T)v[p];
    }
    return out;
}

// Packs a flow field into the storage layout used by the flow modality.
template <typename T>
Tensor<T> flow_to_frame(const FlowField<T>& f) {
    const std::size_t H = f.u.dim(0), W = f.u.dim(1);
    Tensor<T> out({2, H, W});
    std::copy(f.u.begin(), f.u.end(), out.begin());
    std::copy(f.v.begin(), f.v.end(), out.begin() + (long)(H * W));
    return out;
}

// Flow fields between consecutive frames of a sequence: fields[i] maps frame
// i to frame i+1; the last entry duplicates its predecessor so the flow
// modality keeps the frame count of its source.
template <typename T>
FrameSequence<T> compute_flow_sequence(const FrameSequence<T>& seq, const FlowParams& params = {}) {
    FrameSequence<T> out;
    out.modality = Modality::flow;
    const std::size_t n = seq.frame_count();
    out.frames.resize(n);
    if (n == 1) {
        const auto& f = seq.frames[0];
        out.frames[0] = Tensor<T>({2, f.dim(1), f.dim(2)});
        return out;
    }
    std::vector<Tensor<T>> gray(n);
    for (std::size_t i = 0; i < n; ++i) gray[i] = to_gray(seq.frames[i]);
    parallel_for(n - 1, [&](std::size_t i) {
        out.frames[i] = flow_to_frame(compute_flow(gray[i], gray[i + 1], params));
    });
    out.frames[n - 1] = out.frames[n - 2];
    return out;
}

// Adds an in-memory flow modality computed from rgb when none is present.
template <typename T>
void ensure_flow(VideoSample<T>& sample, const FlowParams& params = {}) {
    if (sample.has(Modality::flow)) return;
    sample.streams[Modality::flow] = compute_flow_sequence(sample.stream(Modality::rgb), params);
}

// Stacked-flow network input: channels u_t, v_t, u_{t+1}, v_{t+1}, ...,
// frame indices clamped at the sequence end, each plane standardized by
// subtracting its own mean. Accepts either a precomputed flow sequence or an
// rgb sequence (fields then computed on the fly).
template <typename T>
Tensor<T> stack_flow(const FrameSequence<T>& seq, int stack_depth, int anchor,
                     const FlowParams& params = {}) {
    if (stack_depth < 1)
        throw ParameterError("stack_flow: stack depth must be >= 1, got " +
                             std::to_string(stack_depth));
    const long t_in = (long)seq.frame_count();
    if (anchor < 0 || (long)anchor >= t_in)
        throw ParameterError("stack_flow: anchor " + std::to_string(anchor) + " out of range [0," +
                             std::to_string(t_in) + ")");
    const std::size_t H = seq.height(), W = seq.width();
    Tensor<T> out({(std::size_t)(2 * stack_depth), H, W});
    const std::size_t plane = H * W;

    for (int i = 0; i < stack_depth; ++i) {
        Tensor<T> field;  // [2,H,W]
        if (seq.modality == Modality::flow) {
            const long idx = std::min((long)(anchor + i), t_in - 1);
            field = seq.frames[(std::size_t)idx];
        } else {
            if (t_in < 2) {
                field = Tensor<T>({2, H, W});
            } else {
                const long idx = std::min((long)(anchor + i), t_in - 2);
                field = flow_to_frame(compute_flow(to_gray(seq.frames[(std::size_t)idx]),
                                                   to_gray(seq.frames[(std::size_t)idx + 1]),
                                                   params));
            }
        }
        for (int c = 0; c < 2; ++c) {
            const T* src = field.data() + (std::size_t)c * plane;
            T* dst = out.data() + (std::size_t)(2 * i + c) * plane;
            double mean = 0.0;
            for (std::size_t p = 0; p < plane; ++p) mean += (double)src[p];
            mean /= (double)plane;
            for (std::size_t p = 0; p < plane; ++p) dst[p] = (T)((double)src[p] - mean);
        }
    }
    return out;
}

} // namespace mmgr
