#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "melpc/common.hpp"

namespace melpc::nn {

// Tensor shapes are rank 1 (biases, scalars), rank 3 (C,H,W activations) or
// rank 4 (Cout,Cin,kh,kw kernels).
struct Shape {
    std::array<int, 4> d{1, 1, 1, 1};
    int rank = 0;

    static Shape vec(int n) { return Shape{{n, 1, 1, 1}, 1}; }
    static Shape chw(int c, int h, int w) { return Shape{{c, h, w, 1}, 3}; }
    static Shape kernel(int co, int ci, int kh, int kw) { return Shape{{co, ci, kh, kw}, 4}; }
    static Shape scalar() { return vec(1); }

    int64_t numel() const {
        int64_t n = 1;
        for (int i = 0; i < rank; ++i) n *= d[i];
        return n;
    }
    bool operator==(const Shape& o) const { return rank == o.rank && d == o.d; }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    std::string str() const {
        std::string s = "[";
        for (int i = 0; i < rank; ++i) s += (i ? "," : "") + std::to_string(d[i]);
        return s + "]";
    }
};

using Id = int32_t;
constexpr Id kNoId = -1;

// Define-by-run reverse-mode tape. Values are computed eagerly; when
// recording, each op pushes a closure that propagates gradients. A graph is
// built per training sequence (BPTT over all steps) and discarded afterwards.
template <typename S>
class Graph {
  public:
    explicit Graph(bool record = true) : record_(record) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const { return record_; }
    void set_check_finite(bool on) { check_finite_ = on; }

    // ---- node creation -------------------------------------------------

    Id leaf(const Shape& shape, const S* data, bool needs_grad) {
        Id id = new_node(shape, needs_grad && record_);
        std::copy(data, data + shape.numel(), nodes_[id].val.begin());
        finish(id);
        return id;
    }

    Id leaf(const Shape& shape, const std::vector<S>& data, bool needs_grad) {
        if (static_cast<int64_t>(data.size()) != shape.numel())
            throw NumericError("leaf data length does not match shape " + shape.str());
        return leaf(shape, data.data(), needs_grad);
    }

    Id zeros(const Shape& shape) {
        Id id = new_node(shape, false);
        return id;
    }

    // ---- ops -----------------------------------------------------------

    // 3x3 convolution, stride 1, zero padding 1. x: [Cin,H,W], w:
    // [Cout,Cin,3,3], optional bias [Cout]. Inner product runs as an Eigen
    // GEMM over im2col patches.
    Id conv2d(Id x, Id w, Id b = kNoId);

    // 2x2 max pooling, ceil mode; gradient goes to the first-found argmax.
    Id maxpool2(Id x);

    // Nearest-neighbour 2x upsampling cropped to (out_h, out_w) so odd input
    // dims round-trip pool -> upsample.
    Id upsample2(Id x, int out_h, int out_w);

    Id concat(Id a, Id b);                     // channel axis
    Id slice_ch(Id x, int c_begin, int c_end);  // channel axis, half-open

    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id hadamard(Id a, Id b);
    Id sigmoid(Id x);
    Id tanh(Id x);
    Id relu(Id x);
    Id clamp(Id x, S lo, S hi);
    Id scale(Id x, S k);
    Id mean(Id x);  // -> scalar

    // ---- access ----------------------------------------------------------

    const Shape& shape(Id id) const { return nodes_[id].shape; }
    const std::vector<S>& value(Id id) const { return nodes_[id].val; }
    std::vector<S>& mutable_value(Id id) { return nodes_[id].val; }

    // Gradient of the last backward() root w.r.t. this node (zeros if the
    // node was not reached).
    std::vector<S> grad(Id id) const {
        const Node& n = nodes_[id];
        if (n.grad.empty()) return std::vector<S>(n.shape.numel(), S(0));
        return n.grad;
    }

    void backward(Id root) {
        if (!record_) throw NumericError("backward on a non-recording graph");
        if (backward_done_) throw NumericError("backward called twice on one tape");
        if (nodes_[root].shape.numel() != 1)
            throw NumericError("backward root must be a scalar");
        backward_done_ = true;
        grad_buf(root)[0] = S(1);
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    }

  private:
    struct Node {
        Shape shape;
        std::vector<S> val;
        std::vector<S> grad;  // lazily allocated during backward
        bool needs_grad = false;
    };

    Id new_node(const Shape& shape, bool needs_grad) {
        nodes_.push_back(Node{shape, std::vector<S>(shape.numel(), S(0)), {}, needs_grad});
        return static_cast<Id>(nodes_.size() - 1);
    }

    void finish(Id id) {
        if (!check_finite_) return;
        for (S v : nodes_[id].val)
            if (!std::isfinite(static_cast<double>(v)))
                throw NumericError("non-finite value in tensor op output");
    }

    std::vector<S>& grad_buf(Id id) {
        Node& n = nodes_[id];
        if (n.grad.empty()) n.grad.assign(n.shape.numel(), S(0));
        return n.grad;
    }

    bool wants_grad(Id id) const { return nodes_[id].needs_grad; }

    void check_same_shape(Id a, Id b, const char* op) const {
        if (nodes_[a].shape != nodes_[b].shape)
            throw NumericError(std::string(op) + ": shape mismatch " + nodes_[a].shape.str() +
                               " vs " + nodes_[b].shape.str());
    }

    template <typename Fwd, typename BwdA, typename BwdB>
    Id binary_elementwise(Id a, Id b, const char* name, Fwd f, BwdA dfa, BwdB dfb);

    template <typename Fwd, typename Bwd>
    Id unary_elementwise(Id x, Fwd f, Bwd df);

    std::vector<Node> nodes_;
    std::vector<std::function<void()>> tape_;
    bool record_;
    bool backward_done_ = false;
#ifdef NDEBUG
    bool check_finite_ = false;
#else
    bool check_finite_ = true;
#endif
};

// ---- conv helpers ---------------------------------------------------------

namespace detail {

// patches: [Cin*9] x [H*W], row-major. Row (c*3+ky)*3+kx holds channel c of x
// shifted by (ky-1, kx-1) with zero fill.
template <typename S>
void im2col3x3(const S* x, int c_in, int h, int w, S* patches) {
    const int64_t hw = static_cast<int64_t>(h) * w;
    for (int c = 0; c < c_in; ++c) {
        const S* xc = x + static_cast<int64_t>(c) * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                S* row = patches + (static_cast<int64_t>(c * 9 + ky * 3 + kx)) * hw;
                for (int y = 0; y < h; ++y) {
                    S* dst = row + static_cast<int64_t>(y) * w;
                    int in_y = y + ky - 1;
                    if (in_y < 0 || in_y >= h) {
                        std::fill(dst, dst + w, S(0));
                        continue;
                    }
                    const S* src = xc + static_cast<int64_t>(in_y) * w;
                    if (kx == 1) {
                        std::copy(src, src + w, dst);
                    } else if (kx == 0) {
                        dst[0] = S(0);
                        std::copy(src, src + w - 1, dst + 1);
                    } else {
                        std::copy(src + 1, src + w, dst);
                        dst[w - 1] = S(0);
                    }
                }
            }
        }
    }
}

// Scatter-add transpose of im2col3x3.
template <typename S>
void col2im3x3_add(const S* patches, int c_in, int h, int w, S* dx) {
    const int64_t hw = static_cast<int64_t>(h) * w;
    for (int c = 0; c < c_in; ++c) {
        S* xc = dx + static_cast<int64_t>(c) * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const S* row = patches + (static_cast<int64_t>(c * 9 + ky * 3 + kx)) * hw;
                for (int y = 0; y < h; ++y) {
                    int in_y = y + ky - 1;
                    if (in_y < 0 || in_y >= h) continue;
                    const S* src = row + static_cast<int64_t>(y) * w;
                    S* dst = xc + static_cast<int64_t>(in_y) * w;
                    if (kx == 1) {
                        for (int i = 0; i < w; ++i) dst[i] += src[i];
                    } else if (kx == 0) {
                        for (int i = 1; i < w; ++i) dst[i - 1] += src[i];
                    } else {
                        for (int i = 0; i < w - 1; ++i) dst[i + 1] += src[i];
                    }
                }
            }
        }
    }
}

template <typename S>
std::vector<S>& conv_scratch() {
    thread_local std::vector<S> buf;
    return buf;
}

template <typename S>
std::vector<S>& conv_scratch2() {
    thread_local std::vector<S> buf;
    return buf;
}

template <typename S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace detail

template <typename S>
Id Graph<S>::conv2d(Id x, Id w, Id b) {
    const Shape& xs = nodes_[x].shape;
    const Shape& ws = nodes_[w].shape;
    if (xs.rank != 3 || ws.rank != 4 || ws.d[2] != 3 || ws.d[3] != 3)
        throw NumericError("conv2d: expected [C,H,W] input and [Co,Ci,3,3] kernel, got " +
                           xs.str() + " and " + ws.str());
    if (ws.d[1] != xs.d[0])
        throw NumericError("conv2d: kernel input channels " + std::to_string(ws.d[1]) +
                           " != tensor channels " + std::to_string(xs.d[0]));
    const int c_in = xs.d[0], h = xs.d[1], w_ = xs.d[2], c_out = ws.d[0];
    if (b != kNoId && nodes_[b].shape != Shape::vec(c_out))
        throw NumericError("conv2d: bias shape mismatch");
    const int64_t hw = static_cast<int64_t>(h) * w_;
    const int64_t k = static_cast<int64_t>(c_in) * 9;

    bool ng = wants_grad(x) || wants_grad(w) || (b != kNoId && wants_grad(b));
    Id out = new_node(Shape::chw(c_out, h, w_), ng);

    auto& patches = detail::conv_scratch<S>();
    patches.resize(static_cast<size_t>(k * hw));
    detail::im2col3x3(nodes_[x].val.data(), c_in, h, w_, patches.data());

    using Mat = detail::MatRM<S>;
    Eigen::Map<const Mat> wm(nodes_[w].val.data(), c_out, k);
    Eigen::Map<const Mat> pm(patches.data(), k, hw);
    Eigen::Map<Mat> ym(nodes_[out].val.data(), c_out, hw);
    ym.noalias() = wm * pm;
    if (b != kNoId) {
        const S* bias = nodes_[b].val.data();
        for (int c = 0; c < c_out; ++c) ym.row(c).array() += bias[c];
    }
    finish(out);

    if (ng && record_) {
        tape_.push_back([this, x, w, b, out, c_in, h, w_, c_out, hw, k]() {
            const std::vector<S>& dy = grad_buf(out);
            using Mat = detail::MatRM<S>;
            Eigen::Map<const Mat> dym(dy.data(), c_out, hw);

            auto& patches = detail::conv_scratch<S>();
            patches.resize(static_cast<size_t>(k * hw));
            detail::im2col3x3(nodes_[x].val.data(), c_in, h, w_, patches.data());
            Eigen::Map<const Mat> pm(patches.data(), k, hw);

            if (wants_grad(w)) {
                Eigen::Map<Mat> dwm(grad_buf(w).data(), c_out, k);
                dwm.noalias() += dym * pm.transpose();
            }
            if (b != kNoId && wants_grad(b)) {
                // Fixed-order sum; Eigen reductions peel by runtime pointer
                // alignment, which breaks bit-reproducibility across runs.
                S* db = grad_buf(b).data();
                for (int c = 0; c < c_out; ++c) {
                    S acc = S(0);
                    const S* row = dy.data() + static_cast<int64_t>(c) * hw;
                    for (int64_t i = 0; i < hw; ++i) acc += row[i];
                    db[c] += acc;
                }
            }
            if (wants_grad(x)) {
                auto& gcols = detail::conv_scratch2<S>();
                gcols.resize(static_cast<size_t>(k * hw));
                Eigen::Map<const Mat> wm(nodes_[w].val.data(), c_out, k);
                Eigen::Map<Mat> gm(gcols.data(), k, hw);
                gm.noalias() = wm.transpose() * dym;
                detail::col2im3x3_add(gcols.data(), c_in, h, w_, grad_buf(x).data());
            }
        });
    }
    return out;
}

template <typename S>
Id Graph<S>::maxpool2(Id x) {
    const Shape& xs = nodes_[x].shape;
    if (xs.rank != 3) throw NumericError("maxpool2: expected [C,H,W]");
    const int c = xs.d[0], h = xs.d[1], w = xs.d[2];
    const int oh = (h + 1) / 2, ow = (w + 1) / 2;
    bool ng = wants_grad(x);
    Id out = new_node(Shape::chw(c, oh, ow), ng);

    std::vector<int32_t> argmax(static_cast<size_t>(c) * oh * ow);
    const S* xv = nodes_[x].val.data();
    S* yv = nodes_[out].val.data();
    int64_t oi = 0;
    for (int ch = 0; ch < c; ++ch) {
        const S* xc = xv + static_cast<int64_t>(ch) * h * w;
        for (int y = 0; y < oh; ++y) {
            for (int xo = 0; xo < ow; ++xo, ++oi) {
                S best{};
                int32_t best_idx = -1;
                for (int dy = 0; dy < 2; ++dy) {
                    int iy = 2 * y + dy;
                    if (iy >= h) break;
                    for (int dx = 0; dx < 2; ++dx) {
                        int ix = 2 * xo + dx;
                        if (ix >= w) break;
                        S v = xc[static_cast<int64_t>(iy) * w + ix];
                        if (best_idx < 0 || v > best) {  // first-found tie-break
                            best = v;
                            best_idx = static_cast<int32_t>(iy * w + ix);
                        }
                    }
                }
                yv[oi] = best;
                argmax[oi] = static_cast<int32_t>(ch * h * w + best_idx);
            }
        }
    }
    finish(out);

    if (ng && record_) {
        tape_.push_back([this, x, out, argmax = std::move(argmax)]() {
            const std::vector<S>& dy = grad_buf(out);
            std::vector<S>& dx = grad_buf(x);
            for (size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += dy[i];
        });
    }
    return out;
}

template <typename S>
Id Graph<S>::upsample2(Id x, int out_h, int out_w) {
    const Shape& xs = nodes_[x].shape;
    if (xs.rank != 3) throw NumericError("upsample2: expected [C,H,W]");
    const int c = xs.d[0], h = xs.d[1], w = xs.d[2];
    if (out_h > 2 * h || out_w > 2 * w || out_h < 2 * h - 1 || out_w < 2 * w - 1)
        throw NumericError("upsample2: target dims must be 2x input, minus an optional crop of 1");
    bool ng = wants_grad(x);
    Id out = new_node(Shape::chw(c, out_h, out_w), ng);

    const S* xv = nodes_[x].val.data();
    S* yv = nodes_[out].val.data();
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < out_h; ++y)
            for (int xo = 0; xo < out_w; ++xo)
                yv[(static_cast<int64_t>(ch) * out_h + y) * out_w + xo] =
                    xv[(static_cast<int64_t>(ch) * h + y / 2) * w + xo / 2];
    finish(out);

    if (ng && record_) {
        tape_.push_back([this, x, out, c, h, w, out_h, out_w]() {
            const std::vector<S>& dy = grad_buf(out);
            std::vector<S>& dx = grad_buf(x);
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < out_h; ++y)
                    for (int xo = 0; xo < out_w; ++xo)
                        dx[(static_cast<int64_t>(ch) * h + y / 2) * w + xo / 2] +=
                            dy[(static_cast<int64_t>(ch) * out_h + y) * out_w + xo];
        });
    }
    return out;
}

template <typename S>
Id Graph<S>::concat(Id a, Id b) {
    const Shape& as = nodes_[a].shape;
    const Shape& bs = nodes_[b].shape;
    if (as.rank != 3 || bs.rank != 3 || as.d[1] != bs.d[1] || as.d[2] != bs.d[2])
        throw NumericError("concat: spatial dims differ: " + as.str() + " vs " + bs.str());
    const int64_t an = as.numel(), bn = bs.numel();
    bool ng = wants_grad(a) || wants_grad(b);
    Id out = new_node(Shape::chw(as.d[0] + bs.d[0], as.d[1], as.d[2]), ng);
    std::copy(nodes_[a].val.begin(), nodes_[a].val.end(), nodes_[out].val.begin());
    std::copy(nodes_[b].val.begin(), nodes_[b].val.end(), nodes_[out].val.begin() + an);

    if (ng && record_) {
        tape_.push_back([this, a, b, out, an, bn]() {
            const std::vector<S>& dy = grad_buf(out);
            if (wants_grad(a)) {
                std::vector<S>& da = grad_buf(a);
                for (int64_t i = 0; i < an; ++i) da[i] += dy[i];
            }
            if (wants_grad(b)) {
                std::vector<S>& db = grad_buf(b);
                for (int64_t i = 0; i < bn; ++i) db[i] += dy[an + i];
            }
        });
    }
    return out;
}

template <typename S>
Id Graph<S>::slice_ch(Id x, int c_begin, int c_end) {
    const Shape& xs = nodes_[x].shape;
    if (xs.rank != 3 || c_begin < 0 || c_end > xs.d[0] || c_begin >= c_end)
        throw NumericError("slice_ch: bad channel range");
    const int64_t plane = static_cast<int64_t>(xs.d[1]) * xs.d[2];
    const int64_t off = c_begin * plane, n = (c_end - c_begin) * plane;
    bool ng = wants_grad(x);
    Id out = new_node(Shape::chw(c_end - c_begin, xs.d[1], xs.d[2]), ng);
    std::copy(nodes_[x].val.begin() + off, nodes_[x].val.begin() + off + n,
              nodes_[out].val.begin());

    if (ng && record_) {
        tape_.push_back([this, x, out, off, n]() {
            const std::vector<S>& dy = grad_buf(out);
            std::vector<S>& dx = grad_buf(x);
            for (int64_t i = 0; i < n; ++i) dx[off + i] += dy[i];
        });
    }
    return out;
}

template <typename S>
template <typename Fwd, typename BwdA, typename BwdB>
Id Graph<S>::binary_elementwise(Id a, Id b, const char* name, Fwd f, BwdA dfa, BwdB dfb) {
    check_same_shape(a, b, name);
    bool ng = wants_grad(a) || wants_grad(b);
    Id out = new_node(nodes_[a].shape, ng);
    const int64_t n = nodes_[a].shape.numel();
    const S* av = nodes_[a].val.data();
    const S* bv = nodes_[b].val.data();
    S* yv = nodes_[out].val.data();
    for (int64_t i = 0; i < n; ++i) yv[i] = f(av[i], bv[i]);
    finish(out);

    if (ng && record_) {
        tape_.push_back([this, a, b, out, n, dfa, dfb]() {
            const std::vector<S>& dy = grad_buf(out);
            const S* av = nodes_[a].val.data();
            const S* bv = nodes_[b].val.data();
            if (wants_grad(a)) {
                std::vector<S>& da = grad_buf(a);
                for (int64_t i = 0; i < n; ++i) da[i] += dy[i] * dfa(av[i], bv[i]);
            }
            if (wants_grad(b)) {
                std::vector<S>& db = grad_buf(b);
                for (int64_t i = 0; i < n; ++i) db[i] += dy[i] * dfb(av[i], bv[i]);
            }
        });
    }
    return out;
}

template <typename S>
template <typename Fwd, typename Bwd>
Id Graph<S>::unary_elementwise(Id x, Fwd f, Bwd df) {
    bool ng = wants_grad(x);
    Id out = new_node(nodes_[x].shape, ng);
    const int64_t n = nodes_[x].shape.numel();
    const S* xv = nodes_[x].val.data();
    S* yv = nodes_[out].val.data();
    for (int64_t i = 0; i < n; ++i) yv[i] = f(xv[i]);
    finish(out);

    if (ng && record_) {
        tape_.push_back([this, x, out, n, df]() {
            const std::vector<S>& dy = grad_buf(out);
            const S* xv = nodes_[x].val.data();
            const S* yv = nodes_[out].val.data();
            std::vector<S>& dx = grad_buf(x);
            for (int64_t i = 0; i < n; ++i) dx[i] += dy[i] * df(xv[i], yv[i]);
        });
    }
    return out;
}

template <typename S>
Id Graph<S>::add(Id a, Id b) {
    return binary_elementwise(
        a, b, "add", [](S x, S y) { return x + y; }, [](S, S) { return S(1); },
        [](S, S) { return S(1); });
}

template <typename S>
Id Graph<S>::sub(Id a, Id b) {
    return binary_elementwise(
        a, b, "sub", [](S x, S y) { return x - y; }, [](S, S) { return S(1); },
        [](S, S) { return S(-1); });
}

template <typename S>
Id Graph<S>::hadamard(Id a, Id b) {
    return binary_elementwise(
        a, b, "hadamard", [](S x, S y) { return x * y; }, [](S, S y) { return y; },
        [](S x, S) { return x; });
}

template <typename S>
Id Graph<S>::sigmoid(Id x) {
    return unary_elementwise(
        x, [](S v) { return S(1) / (S(1) + std::exp(-v)); },
        [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Id Graph<S>::tanh(Id x) {
    return unary_elementwise(
        x, [](S v) { return std::tanh(v); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Id Graph<S>::relu(Id x) {
    return unary_elementwise(
        x, [](S v) { return v > S(0) ? v : S(0); },
        [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <typename S>
Id Graph<S>::clamp(Id x, S lo, S hi) {
    return unary_elementwise(
        x, [lo, hi](S v) { return v < lo ? lo : (v > hi ? hi : v); },
        [lo, hi](S v, S) { return (v > lo && v < hi) ? S(1) : S(0); });
}

template <typename S>
Id Graph<S>::scale(Id x, S k) {
    return unary_elementwise(
        x, [k](S v) { return k * v; }, [k](S, S) { return k; });
}

template <typename S>
Id Graph<S>::mean(Id x) {
    bool ng = wants_grad(x);
    Id out = new_node(Shape::scalar(), ng);
    const int64_t n = nodes_[x].shape.numel();
    const S* xv = nodes_[x].val.data();
    S acc = S(0);
    for (int64_t i = 0; i < n; ++i) acc += xv[i];
    nodes_[out].val[0] = acc / static_cast<S>(n);
    finish(out);

    if (ng && record_) {
        tape_.push_back([this, x, out, n]() {
            S g = grad_buf(out)[0] / static_cast<S>(n);
            std::vector<S>& dx = grad_buf(x);
            for (int64_t i = 0; i < n; ++i) dx[i] += g;
        });
    }
    return out;
}

}  // namespace melpc::nn
