#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mmgr/error.hpp"
#include "mmgr/rng.hpp"
#include "mmgr/tensor.hpp"

namespace mmgr {

enum class Mode { train, eval };

enum class LayerKind {
    conv2d,
    conv3d,
    maxpool3d,
    relu,
    fully_connected,
    softmax,
    dropout,
    batch_norm,
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::conv3d: return "conv3d";
        case LayerKind::maxpool3d: return "maxpool3d";
        case LayerKind::relu: return "relu";
        case LayerKind::fully_connected: return "fully_connected";
        case LayerKind::softmax: return "softmax";
        case LayerKind::dropout: return "dropout";
        case LayerKind::batch_norm: return "batch_norm";
    }
    return "?";
}

// Axis order for kernel/stride/pad triples is (t, y, x); 2d layers ignore t.
struct LayerSpec {
    LayerKind kind;
    int in_channels = 0;
    int out_channels = 0;
    std::array<int, 3> kernel{1, 1, 1};
    std::array<int, 3> stride{1, 1, 1};
    std::array<int, 3> pad{0, 0, 0};
    int units = 0;              // fully_connected output width
    double keep_prob = 1.0;     // dropout
    double bn_momentum = 0.9;
    double bn_epsilon = 1e-5;

    void validate() const {
        for (int k : kernel)
            if (k < 1) throw ParameterError("layer spec: kernel dims must be >= 1");
        for (int s : stride)
            if (s < 1) throw ParameterError("layer spec: strides must be >= 1");
        for (int p : pad)
            if (p < 0) throw ParameterError("layer spec: padding must be >= 0");
        if (kind == LayerKind::dropout && (keep_prob <= 0.0 || keep_prob > 1.0))
            throw ParameterError("layer spec: dropout keep probability must be in (0,1]");
        if (kind == LayerKind::batch_norm && bn_epsilon <= 0.0)
            throw ParameterError("layer spec: batch norm epsilon must be > 0");
    }
};

inline LayerSpec make_conv2d(int in_ch, int out_ch, int k, int stride = 1, int pad = 0) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel = {1, k, k};
    s.stride = {1, stride, stride};
    s.pad = {0, pad, pad};
    return s;
}

inline LayerSpec make_conv3d(int in_ch, int out_ch, int kt, int k, int stride = 1, int pad_t = 1,
                             int pad_s = 1) {
    LayerSpec s;
    s.kind = LayerKind::conv3d;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel = {kt, k, k};
    s.stride = {stride, stride, stride};
    s.pad = {pad_t, pad_s, pad_s};
    return s;
}

inline LayerSpec make_maxpool3d(int wt, int wh, int ww) {
    LayerSpec s;
    s.kind = LayerKind::maxpool3d;
    s.kernel = {wt, wh, ww};
    s.stride = {wt, wh, ww};
    return s;
}

inline LayerSpec make_relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
}

inline LayerSpec make_fc(int units) {
    LayerSpec s;
    s.kind = LayerKind::fully_connected;
    s.units = units;
    return s;
}

inline LayerSpec make_softmax() {
    LayerSpec s;
    s.kind = LayerKind::softmax;
    return s;
}

inline LayerSpec make_dropout(double keep_prob) {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.keep_prob = keep_prob;
    return s;
}

inline LayerSpec make_batch_norm(int channels, double momentum = 0.9, double epsilon = 1e-5) {
    LayerSpec s;
    s.kind = LayerKind::batch_norm;
    s.in_channels = channels;
    s.out_channels = channels;
    s.bn_momentum = momentum;
    s.bn_epsilon = epsilon;
    return s;
}

namespace detail {

// Output extent of a convolution/pool axis; throws unless it divides evenly.
inline long conv_out_size(long in, long k, long stride, long pad, const char* what) {
    long span = in + 2 * pad - k;
    if (span < 0)
        throw ShapeError(std::string(what) + ": kernel extent " + std::to_string(k) +
                         " exceeds padded input " + std::to_string(in + 2 * pad));
    if (span % stride != 0)
        throw ShapeError(std::string(what) + ": output size not integral (in=" +
                         std::to_string(in) + " k=" + std::to_string(k) + " stride=" +
                         std::to_string(stride) + " pad=" + std::to_string(pad) + ")");
    return span / stride + 1;
}

// Truncating pool output size: trailing elements that do not fill a window
// are dropped.
inline long pool_out_size(long in, long w, long stride, const char* what) {
    if (w > in)
        throw ShapeError(std::string(what) + ": window " + std::to_string(w) +
                         " larger than input axis " + std::to_string(in));
    return (in - w) / stride + 1;
}

// Range of output indices o for which 0 <= o*stride + off < in.
inline void tap_bounds(long in, long off, long stride, long out, long& lo, long& hi) {
    lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
    long top = in - 1 - off;
    hi = top >= 0 ? std::min(out, top / stride + 1) : 0;
    lo = std::min(lo, hi);
}

} // namespace detail

// ---------------------------------------------------------------------------
// conv2d: input [C,H,W], weights [K,C,kh,kw], bias [K] -> [K,H',W']
// Cross-correlation (no kernel flip).
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b,
                         std::array<int, 2> stride = {1, 1}, std::array<int, 2> pad = {0, 0}) {
    if (in.rank() != 3) throw ShapeError("conv2d: input must be [C,H,W], got " + shape_str(in.shape()));
    if (w.rank() != 4) throw ShapeError("conv2d: weights must be [K,C,kh,kw], got " + shape_str(w.shape()));
    const long C = (long)in.dim(0), H = (long)in.dim(1), W = (long)in.dim(2);
    const long K = (long)w.dim(0), kh = (long)w.dim(2), kw = (long)w.dim(3);
    if ((long)w.dim(1) != C)
        throw ShapeError("conv2d: weight channels " + std::to_string(w.dim(1)) +
                         " != input channels " + std::to_string(C));
    if (b.rank() != 1 || (long)b.dim(0) != K)
        throw ShapeError("conv2d: bias must be [K]");
    const long sh = stride[0], sw = stride[1], ph = pad[0], pw = pad[1];
    const long Ho = detail::conv_out_size(H, kh, sh, ph, "conv2d");
    const long Wo = detail::conv_out_size(W, kw, sw, pw, "conv2d");

    Tensor<T> out({(std::size_t)K, (std::size_t)Ho, (std::size_t)Wo});
    const T* ind = in.data();
    const T* wd = w.data();
    T* od = out.data();
    for (long k = 0; k < K; ++k) {
        T* oc = od + k * Ho * Wo;
        std::fill(oc, oc + Ho * Wo, b[(std::size_t)k]);
        for (long c = 0; c < C; ++c) {
            const T* ic = ind + c * H * W;
            const T* wc = wd + (k * C + c) * kh * kw;
            for (long ky = 0; ky < kh; ++ky) {
                long ylo, yhi;
                detail::tap_bounds(H, ky - ph, sh, Ho, ylo, yhi);
                for (long kx = 0; kx < kw; ++kx) {
                    long xlo, xhi;
                    detail::tap_bounds(W, kx - pw, sw, Wo, xlo, xhi);
                    const T wv = wc[ky * kw + kx];
                    for (long oy = ylo; oy < yhi; ++oy) {
                        const long iy = oy * sh + ky - ph;
                        T* orow = oc + oy * Wo;
                        const T* irow = ic + iy * W + (kx - pw);
                        for (long ox = xlo; ox < xhi; ++ox) orow[ox] += wv * irow[ox * sw];
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
void conv2d_backward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& gout,
                     Tensor<T>* gin, Tensor<T>* gw, Tensor<T>* gb,
                     std::array<int, 2> stride = {1, 1}, std::array<int, 2> pad = {0, 0}) {
    const long C = (long)in.dim(0), H = (long)in.dim(1), W = (long)in.dim(2);
    const long K = (long)w.dim(0), kh = (long)w.dim(2), kw = (long)w.dim(3);
    const long sh = stride[0], sw = stride[1], ph = pad[0], pw = pad[1];
    const long Ho = (long)gout.dim(1), Wo = (long)gout.dim(2);

    const T* ind = in.data();
    const T* wd = w.data();
    const T* gd = gout.data();
    for (long k = 0; k < K; ++k) {
        const T* gc = gd + k * Ho * Wo;
        if (gb) {
            double acc = 0.0;
            for (long i = 0; i < Ho * Wo; ++i) acc += (double)gc[i];
            (*gb)[(std::size_t)k] += (T)acc;
        }
        for (long c = 0; c < C; ++c) {
            const T* ic = ind + c * H * W;
            const T* wc = wd + (k * C + c) * kh * kw;
            T* gwc = gw ? gw->data() + (k * C + c) * kh * kw : nullptr;
            T* gic = gin ? gin->data() + c * H * W : nullptr;
            for (long ky = 0; ky < kh; ++ky) {
                long ylo, yhi;
                detail::tap_bounds(H, ky - ph, sh, Ho, ylo, yhi);
                for (long kx = 0; kx < kw; ++kx) {
                    long xlo, xhi;
                    detail::tap_bounds(W, kx - pw, sw, Wo, xlo, xhi);
                    if (gwc) {
                        double acc = 0.0;
                        for (long oy = ylo; oy < yhi; ++oy) {
                            const long iy = oy * sh + ky - ph;
                            const T* __restrict grow = gc + oy * Wo;
                            const T* __restrict irow = ic + iy * W + (kx - pw);
                            T rowacc{0};
#pragma omp simd reduction(+ : rowacc)
                            for (long ox = xlo; ox < xhi; ++ox)
                                rowacc += grow[ox] * irow[ox * sw];
                            acc += (double)rowacc;
                        }
                        gwc[ky * kw + kx] += (T)acc;
                    }
                    if (gic) {
                        const T wv = wc[ky * kw + kx];
                        for (long oy = ylo; oy < yhi; ++oy) {
                            const long iy = oy * sh + ky - ph;
                            const T* __restrict grow = gc + oy * Wo;
                            T* __restrict irow = gic + iy * W + (kx - pw);
                            for (long ox = xlo; ox < xhi; ++ox) irow[ox * sw] += wv * grow[ox];
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// conv3d: input [C,T,H,W], weights [K,C,kt,kh,kw], bias [K] -> [K,T',H',W']
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b,
                         std::array<int, 3> stride = {1, 1, 1}, std::array<int, 3> pad = {0, 0, 0}) {
    if (in.rank() != 4)
        throw ShapeError("conv3d: input must be [C,T,H,W], got " + shape_str(in.shape()));
    if (w.rank() != 5)
        throw ShapeError("conv3d: weights must be [K,C,kt,kh,kw], got " + shape_str(w.shape()));
    const long C = (long)in.dim(0), Tn = (long)in.dim(1), H = (long)in.dim(2), W = (long)in.dim(3);
    const long K = (long)w.dim(0), kt = (long)w.dim(2), kh = (long)w.dim(3), kw = (long)w.dim(4);
    if ((long)w.dim(1) != C)
        throw ShapeError("conv3d: weight channels " + std::to_string(w.dim(1)) +
                         " != input channels " + std::to_string(C));
    if (b.rank() != 1 || (long)b.dim(0) != K) throw ShapeError("conv3d: bias must be [K]");
    const long st = stride[0], sh = stride[1], sw = stride[2];
    const long pt = pad[0], ph = pad[1], pw = pad[2];
    const long To = detail::conv_out_size(Tn, kt, st, pt, "conv3d");
    const long Ho = detail::conv_out_size(H, kh, sh, ph, "conv3d");
    const long Wo = detail::conv_out_size(W, kw, sw, pw, "conv3d");

    Tensor<T> out({(std::size_t)K, (std::size_t)To, (std::size_t)Ho, (std::size_t)Wo});
    const T* ind = in.data();
    const T* wd = w.data();
    T* od = out.data();
    const long in_plane = H * W, out_plane = Ho * Wo;
    for (long k = 0; k < K; ++k) {
        for (long ot = 0; ot < To; ++ot) {
            // one output plane kept hot across all taps
            T* op = od + (k * To + ot) * out_plane;
            std::fill(op, op + out_plane, b[(std::size_t)k]);
            for (long c = 0; c < C; ++c) {
                const T* icn = ind + c * Tn * in_plane;
                const T* wc = wd + (k * C + c) * kt * kh * kw;
                for (long dt = 0; dt < kt; ++dt) {
                    const long it = ot * st + dt - pt;
                    if (it < 0 || it >= Tn) continue;
                    const T* ip = icn + it * in_plane;
                    const T* wp = wc + dt * kh * kw;
                    for (long ky = 0; ky < kh; ++ky) {
                        long ylo, yhi;
                        detail::tap_bounds(H, ky - ph, sh, Ho, ylo, yhi);
                        for (long kx = 0; kx < kw; ++kx) {
                            long xlo, xhi;
                            detail::tap_bounds(W, kx - pw, sw, Wo, xlo, xhi);
                            const T wv = wp[ky * kw + kx];
                            for (long oy = ylo; oy < yhi; ++oy) {
                                const long iy = oy * sh + ky - ph;
                                T* orow = op + oy * Wo;
                                const T* irow = ip + iy * W + (kx - pw);
                                for (long ox = xlo; ox < xhi; ++ox) orow[ox] += wv * irow[ox * sw];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
void conv3d_backward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& gout,
                     Tensor<T>* gin, Tensor<T>* gw, Tensor<T>* gb,
                     std::array<int, 3> stride = {1, 1, 1}, std::array<int, 3> pad = {0, 0, 0}) {
    const long C = (long)in.dim(0), Tn = (long)in.dim(1), H = (long)in.dim(2), W = (long)in.dim(3);
    const long K = (long)w.dim(0), kt = (long)w.dim(2), kh = (long)w.dim(3), kw = (long)w.dim(4);
    const long st = stride[0], sh = stride[1], sw = stride[2];
    const long pt = pad[0], ph = pad[1], pw = pad[2];
    const long To = (long)gout.dim(1), Ho = (long)gout.dim(2), Wo = (long)gout.dim(3);
    const long in_plane = H * W, out_plane = Ho * Wo;

    const T* ind = in.data();
    const T* wd = w.data();
    const T* gd = gout.data();
    for (long k = 0; k < K; ++k) {
        if (gb) {
            const T* gk = gd + k * To * out_plane;
            double acc = 0.0;
            for (long i = 0; i < To * out_plane; ++i) acc += (double)gk[i];
            (*gb)[(std::size_t)k] += (T)acc;
        }
        for (long ot = 0; ot < To; ++ot) {
            const T* gp = gd + (k * To + ot) * out_plane;
            for (long c = 0; c < C; ++c) {
                const T* icn = ind + c * Tn * in_plane;
                const T* wc = wd + (k * C + c) * kt * kh * kw;
                T* gwc = gw ? gw->data() + (k * C + c) * kt * kh * kw : nullptr;
                T* gicn = gin ? gin->data() + c * Tn * in_plane : nullptr;
                for (long dt = 0; dt < kt; ++dt) {
                    const long it = ot * st + dt - pt;
                    if (it < 0 || it >= Tn) continue;
                    const T* ip = icn + it * in_plane;
                    T* gip = gicn ? gicn + it * in_plane : nullptr;
                    const T* wp = wc + dt * kh * kw;
                    T* gwp = gwc ? gwc + dt * kh * kw : nullptr;
                    for (long ky = 0; ky < kh; ++ky) {
                        long ylo, yhi;
                        detail::tap_bounds(H, ky - ph, sh, Ho, ylo, yhi);
                        for (long kx = 0; kx < kw; ++kx) {
                            long xlo, xhi;
                            detail::tap_bounds(W, kx - pw, sw, Wo, xlo, xhi);
                            if (gwp) {
                                double acc = 0.0;
                                for (long oy = ylo; oy < yhi; ++oy) {
                                    const long iy = oy * sh + ky - ph;
                                    const T* grow = gp + oy * Wo;
                                    const T* irow = ip + iy * W + (kx - pw);
                                    double rowacc = 0.0;
#pragma omp simd reduction(+ : rowacc)
                                    for (long ox = xlo; ox < xhi; ++ox)
                                        rowacc += (double)grow[ox] * (double)irow[ox * sw];
                                    acc += rowacc;
                                }
                                gwp[ky * kw + kx] += (T)acc;
                            }
                            if (gip) {
                                const T wv = wp[ky * kw + kx];
                                for (long oy = ylo; oy < yhi; ++oy) {
                                    const long iy = oy * sh + ky - ph;
                                    const T* grow = gp + oy * Wo;
                                    T* irow = gip + iy * W + (kx - pw);
                                    for (long ox = xlo; ox < xhi; ++ox) irow[ox * sw] += wv * grow[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// maxpool3d: input [C,T,H,W] (or [C,H,W], treated as T=1). Window maxima;
// trailing elements that do not fill a window are truncated. Ties resolve to
// the first element in scan order, recorded in argmax for the backward pass.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> maxpool3d_forward(const Tensor<T>& in, std::array<int, 3> window,
                            std::array<int, 3> stride_arg = {0, 0, 0},
                            std::vector<std::size_t>* argmax = nullptr) {
    const bool spatial_only = in.rank() == 3;
    if (in.rank() != 3 && in.rank() != 4)
        throw ShapeError("maxpool3d: input must be [C,T,H,W] or [C,H,W], got " +
                         shape_str(in.shape()));
    const long C = (long)in.dim(0);
    const long Tn = spatial_only ? 1 : (long)in.dim(1);
    const long H = (long)in.dim(spatial_only ? 1 : 2);
    const long W = (long)in.dim(spatial_only ? 2 : 3);
    const long wt = window[0], wh = window[1], ww = window[2];
    std::array<int, 3> stride = stride_arg;
    for (int i = 0; i < 3; ++i)
        if (stride[i] <= 0) stride[i] = window[i];
    if (wt < 1 || wh < 1 || ww < 1) throw ParameterError("maxpool3d: window dims must be >= 1");
    const long To = detail::pool_out_size(Tn, wt, stride[0], "maxpool3d");
    const long Ho = detail::pool_out_size(H, wh, stride[1], "maxpool3d");
    const long Wo = detail::pool_out_size(W, ww, stride[2], "maxpool3d");

    Shape out_shape = spatial_only
                          ? Shape{(std::size_t)C, (std::size_t)Ho, (std::size_t)Wo}
                          : Shape{(std::size_t)C, (std::size_t)To, (std::size_t)Ho, (std::size_t)Wo};
    Tensor<T> out(out_shape);
    if (argmax) argmax->assign(out.size(), 0);

    const T* ind = in.data();
    T* od = out.data();
    std::size_t oi = 0;
    for (long c = 0; c < C; ++c) {
        const T* icn = ind + c * Tn * H * W;
        for (long ot = 0; ot < To; ++ot)
            for (long oy = 0; oy < Ho; ++oy)
                for (long ox = 0; ox < Wo; ++ox, ++oi) {
                    const long t0 = ot * stride[0], y0 = oy * stride[1], x0 = ox * stride[2];
                    T best = icn[(t0 * H + y0) * W + x0];
                    std::size_t best_idx = (std::size_t)(c * Tn * H * W + (t0 * H + y0) * W + x0);
                    for (long dt = 0; dt < wt; ++dt)
                        for (long dy = 0; dy < wh; ++dy)
                            for (long dx = 0; dx < ww; ++dx) {
                                const std::size_t idx =
                                    (std::size_t)(c * Tn * H * W + ((t0 + dt) * H + y0 + dy) * W +
                                                  x0 + dx);
                                if (ind[idx] > best) {
                                    best = ind[idx];
                                    best_idx = idx;
                                }
                            }
                    od[oi] = best;
                    if (argmax) (*argmax)[oi] = best_idx;
                }
    }
    return out;
}

template <typename T>
void maxpool3d_backward(const std::vector<std::size_t>& argmax, const Tensor<T>& gout,
                        Tensor<T>& gin) {
    for (std::size_t i = 0; i < gout.size(); ++i) gin[argmax[i]] += gout[i];
}

// ---------------------------------------------------------------------------
// relu
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& in) {
    Tensor<T> out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T{0} ? in[i] : T{0};
    return out;
}

template <typename T>
void relu_backward(const Tensor<T>& in, const Tensor<T>& gout, Tensor<T>& gin) {
    for (std::size_t i = 0; i < in.size(); ++i) gin[i] += in[i] > T{0} ? gout[i] : T{0};
}

// ---------------------------------------------------------------------------
// fully_connected: input [n], weights [l,n], bias [l] -> [l]
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> fully_connected_forward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b) {
    if (w.rank() != 2) throw ShapeError("fully_connected: weights must be [l,n]");
    const std::size_t n = w.dim(1), l = w.dim(0);
    if (in.size() != n)
        throw ShapeError("fully_connected: input size " + std::to_string(in.size()) +
                         " != weight columns " + std::to_string(n));
    if (b.size() != l) throw ShapeError("fully_connected: bias size mismatch");
    Tensor<T> out({l});
    const T* x = in.data();
    for (std::size_t i = 0; i < l; ++i) {
        const T* row = w.data() + i * n;
        double acc = (double)b[i];
#pragma omp simd reduction(+ : acc)
        for (std::size_t j = 0; j < n; ++j) acc += (double)row[j] * (double)x[j];
        out[i] = (T)acc;
    }
    return out;
}

template <typename T>
void fully_connected_backward(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& gout,
                              Tensor<T>* gin, Tensor<T>* gw, Tensor<T>* gb) {
    const std::size_t n = w.dim(1), l = w.dim(0);
    const T* x = in.data();
    for (std::size_t i = 0; i < l; ++i) {
        const T g = gout[i];
        if (gb) (*gb)[i] += g;
        if (gw) {
            T* grow = gw->data() + i * n;
            for (std::size_t j = 0; j < n; ++j) grow[j] += g * x[j];
        }
        if (gin) {
            const T* row = w.data() + i * n;
            T* gi = gin->data();
            for (std::size_t j = 0; j < n; ++j) gi[j] += g * row[j];
        }
    }
}

// ---------------------------------------------------------------------------
// softmax (max-subtracted for stability)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& f) {
    Tensor<T> out(f.shape());
    T m = f[0];
    for (const auto& v : f) m = std::max(m, v);
    double z = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        double e = std::exp((double)(f[i] - m));
        out[i] = (T)e;
        z += e;
    }
    for (auto& v : out) v = (T)((double)v / z);
    return out;
}

// gin += J_softmax^T * gout, given s = softmax(f)
template <typename T>
void softmax_backward(const Tensor<T>& s, const Tensor<T>& gout, Tensor<T>& gin) {
    double dot = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) dot += (double)s[i] * (double)gout[i];
    for (std::size_t i = 0; i < s.size(); ++i)
        gin[i] += s[i] * (T)((double)gout[i] - dot);
}

// ---------------------------------------------------------------------------
// dropout (inverted scaling, so eval mode is the identity)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& in, double keep_prob, Mode mode, Rng& rng,
                          Tensor<T>* mask_out = nullptr) {
    if (keep_prob <= 0.0 || keep_prob > 1.0)
        throw ParameterError("dropout: keep probability must be in (0,1], got " +
                             std::to_string(keep_prob));
    if (mode == Mode::eval || keep_prob == 1.0) {
        if (mask_out) *mask_out = Tensor<T>(in.shape(), T{1});
        return in;
    }
    Tensor<T> out(in.shape());
    Tensor<T> mask(in.shape());
    const T inv = (T)(1.0 / keep_prob);
    for (std::size_t i = 0; i < in.size(); ++i) {
        mask[i] = rng.uniform() < keep_prob ? inv : T{0};
        out[i] = in[i] * mask[i];
    }
    if (mask_out) *mask_out = std::move(mask);
    return out;
}

template <typename T>
void dropout_backward(const Tensor<T>& mask, const Tensor<T>& gout, Tensor<T>& gin) {
    for (std::size_t i = 0; i < gout.size(); ++i) gin[i] += gout[i] * mask[i];
}

// ---------------------------------------------------------------------------
// batch_norm: per-channel (dim 0) statistics over batch x remaining dims.
// Train mode requires batch size >= 2 and updates running statistics;
// eval mode normalizes with the running statistics per sample.
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormCache {
    std::vector<Tensor<T>> xhat;    // normalized inputs per sample
    std::vector<double> inv_std;    // per channel
};

template <typename T>
void batch_norm_forward(const std::vector<Tensor<T>>& in, std::vector<Tensor<T>>& out,
                        const Tensor<T>& gamma, const Tensor<T>& beta, Tensor<T>& running_mean,
                        Tensor<T>& running_var, double momentum, double epsilon, Mode mode,
                        BatchNormCache<T>* cache = nullptr) {
    if (in.empty()) throw ParameterError("batch_norm: empty batch");
    const std::size_t C = in[0].dim(0);
    const std::size_t inner = in[0].size() / C;
    if (gamma.size() != C || beta.size() != C)
        throw ShapeError("batch_norm: parameter size != channel count");
    const std::size_t B = in.size();
    out.resize(B);

    if (mode == Mode::train) {
        if (B < 2)
            throw ParameterError("batch_norm: train mode requires batch size >= 2, got " +
                                 std::to_string(B));
        const double n = (double)(B * inner);
        if (cache) {
            cache->xhat.resize(B);
            cache->inv_std.assign(C, 0.0);
        }
        for (std::size_t s = 0; s < B; ++s) {
            out[s] = Tensor<T>(in[s].shape());
            if (cache) cache->xhat[s] = Tensor<T>(in[s].shape());
        }
        for (std::size_t c = 0; c < C; ++c) {
            double mean = 0.0;
            for (std::size_t s = 0; s < B; ++s) {
                const T* p = in[s].data() + c * inner;
                for (std::size_t i = 0; i < inner; ++i) mean += (double)p[i];
            }
            mean /= n;
            double var = 0.0;
            for (std::size_t s = 0; s < B; ++s) {
                const T* p = in[s].data() + c * inner;
                for (std::size_t i = 0; i < inner; ++i) {
                    double d = (double)p[i] - mean;
                    var += d * d;
                }
            }
            var /= n;
            const double inv_std = 1.0 / std::sqrt(var + epsilon);
            if (cache) cache->inv_std[c] = inv_std;
            const double g = (double)gamma[c], bt = (double)beta[c];
            for (std::size_t s = 0; s < B; ++s) {
                const T* p = in[s].data() + c * inner;
                T* q = out[s].data() + c * inner;
                T* xh = cache ? cache->xhat[s].data() + c * inner : nullptr;
                for (std::size_t i = 0; i < inner; ++i) {
                    double xhat = ((double)p[i] - mean) * inv_std;
                    if (xh) xh[i] = (T)xhat;
                    q[i] = (T)(g * xhat + bt);
                }
            }
            running_mean[c] = (T)(momentum * (double)running_mean[c] + (1.0 - momentum) * mean);
            running_var[c] = (T)(momentum * (double)running_var[c] + (1.0 - momentum) * var);
        }
    } else {
        for (std::size_t s = 0; s < B; ++s) {
            out[s] = Tensor<T>(in[s].shape());
            for (std::size_t c = 0; c < C; ++c) {
                const double inv_std = 1.0 / std::sqrt((double)running_var[c] + epsilon);
                const double mean = (double)running_mean[c];
                const double g = (double)gamma[c], bt = (double)beta[c];
                const T* p = in[s].data() + c * inner;
                T* q = out[s].data() + c * inner;
                for (std::size_t i = 0; i < inner; ++i)
                    q[i] = (T)(g * (((double)p[i] - mean) * inv_std) + bt);
            }
        }
    }
}

template <typename T>
void batch_norm_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma,
                         const std::vector<Tensor<T>>& gout, std::vector<Tensor<T>>& gin,
                         Tensor<T>* ggamma, Tensor<T>* gbeta) {
    const std::size_t B = gout.size();
    const std::size_t C = gout[0].dim(0);
    const std::size_t inner = gout[0].size() / C;
    const double n = (double)(B * inner);
    for (std::size_t c = 0; c < C; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t s = 0; s < B; ++s) {
            const T* g = gout[s].data() + c * inner;
            const T* xh = cache.xhat[s].data() + c * inner;
            for (std::size_t i = 0; i < inner; ++i) {
                sum_g += (double)g[i];
                sum_gx += (double)g[i] * (double)xh[i];
            }
        }
        if (gbeta) (*gbeta)[c] += (T)sum_g;
        if (ggamma) (*ggamma)[c] += (T)sum_gx;
        const double scale = (double)gamma[c] * cache.inv_std[c];
        for (std::size_t s = 0; s < B; ++s) {
            const T* g = gout[s].data() + c * inner;
            const T* xh = cache.xhat[s].data() + c * inner;
            T* gi = gin[s].data() + c * inner;
            for (std::size_t i = 0; i < inner; ++i)
                gi[i] += (T)(scale * ((double)g[i] - sum_g / n - (double)xh[i] * sum_gx / n));
        }
    }
}

} // namespace mmgr
