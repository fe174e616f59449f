// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cessm/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cessm/errors.hpp"
#include "cessm/nn/gemm.hpp"

namespace cessm::nn {
namespace {

void require_same_size(Var a, Var b, const char* op) {
    if (a.size() != b.size()) {
        throw ShapeError(std::string(op) + ": size mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

// Adds `g` into input `id`'s gradient when that input needs one.
template <class F>
void accumulate(Tape& t, int id, F&& fill) {
    if (id < 0 || !t.needs_grad(id)) return;
    fill(t.grad(id));
}

// Geometry of one convolution: the "conv input" is C x H x W, the "conv output" positions Ho x Wo.
struct ConvGeom {
    int C, H, W, K, stride, pad, Ho, Wo;
};

void im2col(const double* img, const ConvGeom& g, double* cols) {
    const int hw = g.Ho * g.Wo;
    for (int c = 0; c < g.C; ++c) {
        for (int ki = 0; ki < g.K; ++ki) {
            for (int kj = 0; kj < g.K; ++kj) {
                double* row = cols + static_cast<long>((c * g.K + ki) * g.K + kj) * hw;
                for (int oh = 0; oh < g.Ho; ++oh) {
                    const int ih = oh * g.stride - g.pad + ki;
                    for (int ow = 0; ow < g.Wo; ++ow) {
                        const int iw = ow * g.stride - g.pad + kj;
                        row[oh * g.Wo + ow] = (ih >= 0 && ih < g.H && iw >= 0 && iw < g.W)
                                                  ? img[(static_cast<long>(c) * g.H + ih) * g.W + iw]
                                                  : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const double* cols, const ConvGeom& g, double* img) {
    const int hw = g.Ho * g.Wo;
    for (int c = 0; c < g.C; ++c) {
        for (int ki = 0; ki < g.K; ++ki) {
            for (int kj = 0; kj < g.K; ++kj) {
                const double* row = cols + static_cast<long>((c * g.K + ki) * g.K + kj) * hw;
                for (int oh = 0; oh < g.Ho; ++oh) {
                    const int ih = oh * g.stride - g.pad + ki;
                    if (ih < 0 || ih >= g.H) continue;
                    for (int ow = 0; ow < g.Wo; ++ow) {
                        const int iw = ow * g.stride - g.pad + kj;
                        if (iw >= 0 && iw < g.W) img[(static_cast<long>(c) * g.H + ih) * g.W + iw] += row[oh * g.Wo + ow];
                    }
                }
            }
        }
    }
}

} // namespace

Var add(Var a, Var b) {
    require_same_size(a, b, "add");
    const auto x = a.value();
    const auto y = b.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    const int ia = a.id(), ib = b.id();
    return a.tape().emit(a.shape(), std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
        const auto g = t.grad_view(self);
        accumulate(t, ia, [&](auto& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
        accumulate(t, ib, [&](auto& gb) { for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i]; });
    }, "add");
}

Var sub(Var a, Var b) {
    require_same_size(a, b, "sub");
    const auto x = a.value();
    const auto y = b.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
    const int ia = a.id(), ib = b.id();
    return a.tape().emit(a.shape(), std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
        const auto g = t.grad_view(self);
        accumulate(t, ia, [&](auto& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
        accumulate(t, ib, [&](auto& gb) { for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i]; });
    }, "sub");
}

Var mul(Var a, Var b) {
    require_same_size(a, b, "mul");
    const auto x = a.value();
    const auto y = b.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
    const int ia = a.id(), ib = b.id();
    return a.tape().emit(a.shape(), std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
        const auto g = t.grad_view(self);
        const auto x = t.value(ia);
        const auto y = t.value(ib);
        accumulate(t, ia, [&](auto& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i]; });
        accumulate(t, ib, [&](auto& gb) { for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i]; });
    }, "mul");
}

Var scale(Var a, double s) { return affine(a, s, 0.0); }

Var affine(Var a, double s, double c) {
    const auto x = a.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i] + c;
    const int ia = a.id();
    return a.tape().emit(a.shape(), std::move(out), {a}, [ia, s](Tape& t, int self) {
        const auto g = t.grad_view(self);
        accumulate(t, ia, [&](auto& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i]; });
    }, "affine");
}

Var lincomb(std::span<const Var> xs, std::span<const double> coeffs) {
    if (xs.empty() || xs.size() != coeffs.size()) throw ShapeError("lincomb: need matching non-empty inputs");
    for (const auto& x : xs) require_same_size(xs[0], x, "lincomb");
    const std::size_t n = xs[0].value().size();
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const auto x = xs[k].value();
        const double c = coeffs[k];
        for (std::size_t i = 0; i < n; ++i) out[i] += c * x[i];
    }
    std::vector<int> ids;
    for (const auto& x : xs) ids.push_back(x.id());
    std::vector<double> cs(coeffs.begin(), coeffs.end());
    return xs[0].tape().emit(xs[0].shape(), std::move(out), xs, [ids, cs](Tape& t, int self) {
        const auto g = t.grad_view(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            accumulate(t, ids[k], [&](auto& gx) { for (std::size_t i = 0; i < g.size(); ++i) gx[i] += cs[k] * g[i]; });
        }
    }, "lincomb");
}

Var tanh(Var a) {
    const auto x = a.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
    const int ia = a.id();
    return a.tape().emit(a.shape(), std::move(out), {a}, [ia](Tape& t, int self) {
        const auto g = t.grad_view(self);
        const auto y = t.value(self);
        accumulate(t, ia, [&](auto& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]); });
    }, "tanh");
}

Var sigmoid(Var a) {
    const auto x = a.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        if (v >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out[i] = e / (1.0 + e);
        }
    }
    const int ia = a.id();
    return a.tape().emit(a.shape(), std::move(out), {a}, [ia](Tape& t, int self) {
        const auto g = t.grad_view(self);
        const auto y = t.value(self);
        accumulate(t, ia, [&](auto& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]); });
    }, "sigmoid");
}

Var elu(Var a) {
    const auto x = a.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : std::expm1(x[i]);
    const int ia = a.id();
    return a.tape().emit(a.shape(), std::move(out), {a}, [ia](Tape& t, int self) {
        const auto g = t.grad_view(self);
        const auto y = t.value(self);
        const auto x = t.value(ia);
        accumulate(t, ia, [&](auto& ga) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (x[i] > 0.0 ? 1.0 : y[i] + 1.0);
        });
    }, "elu");
}

Var absolute(Var a) {
    const auto x = a.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::abs(x[i]);
    const int ia = a.id();
    return a.tape().emit(a.shape(), std::move(out), {a}, [ia](Tape& t, int self) {
        const auto g = t.grad_view(self);
        const auto x = t.value(ia);
        accumulate(t, ia, [&](auto& ga) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0);
        });
    }, "abs");
}

Var dense(Var x, Var W, Var b) {
    if (W.shape().size() != 2) throw ShapeError("dense: weight must be 2-D, got " + shape_string(W.shape()));
    const int out_dim = W.shape()[0];
    const int in_dim = W.shape()[1];
    if (x.size() % in_dim != 0 || x.shape().back() != in_dim) {
        throw ShapeError("dense: input " + shape_string(x.shape()) + " incompatible with weight " +
                         shape_string(W.shape()));
    }
    if (b.valid() && b.size() != out_dim) throw ShapeError("dense: bias size mismatch");
    const int batch = x.size() / in_dim;
    std::vector<double> out(static_cast<std::size_t>(batch) * out_dim, 0.0);
    if (b.valid()) {
        const auto bv = b.value();
        for (int r = 0; r < batch; ++r) std::copy(bv.begin(), bv.end(), out.begin() + static_cast<long>(r) * out_dim);
    }
    gemm::nt(batch, out_dim, in_dim, x.value().data(), W.value().data(), out.data());
    const int ix = x.id(), iw = W.id(), ib = b.valid() ? b.id() : -1;
    return x.tape().emit({batch, out_dim}, std::move(out), {x, W, b}, [=](Tape& t, int self) {
        const auto g = t.grad_view(self);
        accumulate(t, ix, [&](auto& gx) { gemm::nn(batch, in_dim, out_dim, g.data(), t.value(iw).data(), gx.data()); });
        accumulate(t, iw, [&](auto& gw) { gemm::tn(out_dim, in_dim, batch, g.data(), t.value(ix).data(), gw.data()); });
        accumulate(t, ib, [&](auto& gb) {
            for (int r = 0; r < batch; ++r) {
                for (int j = 0; j < out_dim; ++j) gb[j] += g[static_cast<long>(r) * out_dim + j];
            }
        });
    }, "dense");
}

Var conv2d(Var x, Var W, Var b, int stride, int pad) {
    const auto& xs = x.shape();
    const auto& ws = W.shape();
    if (xs.size() != 4 || ws.size() != 4 || ws[1] != xs[1] || ws[2] != ws[3]) {
        throw ShapeError("conv2d: input " + shape_string(xs) + " incompatible with weight " + shape_string(ws));
    }
    const int B = xs[0], C = xs[1], H = xs[2], Wd = xs[3], O = ws[0], K = ws[2];
    const ConvGeom g{C, H, Wd, K, stride, pad, (H + 2 * pad - K) / stride + 1, (Wd + 2 * pad - K) / stride + 1};
    if (g.Ho < 1 || g.Wo < 1) throw ShapeError("conv2d: empty output");
    if (b.valid() && b.size() != O) throw ShapeError("conv2d: bias size mismatch");
    const int hw = g.Ho * g.Wo, ckk = C * K * K;
    std::vector<double> out(static_cast<std::size_t>(B) * O * hw, 0.0);
    std::vector<double> cols(static_cast<std::size_t>(ckk) * hw);
    const double* xv = x.value().data();
    const double* wv = W.value().data();
    for (int n = 0; n < B; ++n) {
        double* ob = out.data() + static_cast<long>(n) * O * hw;
        if (b.valid()) {
            for (int o = 0; o < O; ++o) std::fill(ob + static_cast<long>(o) * hw, ob + static_cast<long>(o + 1) * hw, b.value()[o]);
        }
        im2col(xv + static_cast<long>(n) * C * H * Wd, g, cols.data());
        gemm::nn(O, hw, ckk, wv, cols.data(), ob);
    }
    const int ix = x.id(), iw = W.id(), ib = b.valid() ? b.id() : -1;
    return x.tape().emit({B, O, g.Ho, g.Wo}, std::move(out), {x, W, b}, [=](Tape& t, int self) {
        const auto gr = t.grad_view(self);
        const double* xv = t.value(ix).data();
        const double* wv = t.value(iw).data();
        std::vector<double> cols(static_cast<std::size_t>(ckk) * hw);
        const bool need_x = t.needs_grad(ix), need_w = t.needs_grad(iw);
        for (int n = 0; n < B; ++n) {
            const double* gb = gr.data() + static_cast<long>(n) * O * hw;
            if (need_w) {
                im2col(xv + static_cast<long>(n) * C * H * Wd, g, cols.data());
                gemm::nt(O, ckk, hw, gb, cols.data(), t.grad(iw).data());
            }
            if (need_x) {
                std::fill(cols.begin(), cols.end(), 0.0);
                gemm::tn(ckk, hw, O, wv, gb, cols.data());
                col2im(cols.data(), g, t.grad(ix).data() + static_cast<long>(n) * C * H * Wd);
            }
        }
        accumulate(t, ib, [&](auto& gbias) {
            for (int n = 0; n < B; ++n) {
                for (int o = 0; o < O; ++o) {
                    const double* p = gr.data() + (static_cast<long>(n) * O + o) * hw;
                    double s = 0.0;
                    for (int i = 0; i < hw; ++i) s += p[i];
                    gbias[o] += s;
                }
            }
        });
    }, "conv2d");
}

Var conv_transpose2d(Var x, Var W, Var b, int stride, int pad) {
    const auto& xs = x.shape();
    const auto& ws = W.shape();
    if (xs.size() != 4 || ws.size() != 4 || ws[0] != xs[1] || ws[2] != ws[3]) {
        throw ShapeError("conv_transpose2d: input " + shape_string(xs) + " incompatible with weight " +
                         shape_string(ws));
    }
    const int B = xs[0], C = xs[1], H = xs[2], Wd = xs[3], O = ws[1], K = ws[2];
    const int Ho = (H - 1) * stride - 2 * pad + K, Wo = (Wd - 1) * stride - 2 * pad + K;
    if (Ho < 1 || Wo < 1) throw ShapeError("conv_transpose2d: empty output");
    if (b.valid() && b.size() != O) throw ShapeError("conv_transpose2d: bias size mismatch");
    // The transposed conv is the adjoint of a conv from O x Ho x Wo onto H x W.
    const ConvGeom g{O, Ho, Wo, K, stride, pad, H, Wd};
    const int hw = H * Wd, okk = O * K * K, ohw = Ho * Wo;
    std::vector<double> out(static_cast<std::size_t>(B) * O * ohw, 0.0);
    std::vector<double> cols(static_cast<std::size_t>(okk) * hw);
    const double* xv = x.value().data();
    const double* wv = W.value().data();
    for (int n = 0; n < B; ++n) {
        std::fill(cols.begin(), cols.end(), 0.0);
        gemm::tn(okk, hw, C, wv, xv + static_cast<long>(n) * C * hw, cols.data());
        double* ob = out.data() + static_cast<long>(n) * O * ohw;
        col2im(cols.data(), g, ob);
        if (b.valid()) {
            for (int o = 0; o < O; ++o) {
                const double bo = b.value()[o];
                for (int i = 0; i < ohw; ++i) ob[static_cast<long>(o) * ohw + i] += bo;
            }
        }
    }
    const int ix = x.id(), iw = W.id(), ib = b.valid() ? b.id() : -1;
    return x.tape().emit({B, O, Ho, Wo}, std::move(out), {x, W, b}, [=](Tape& t, int self) {
        const auto gr = t.grad_view(self);
        const double* xv = t.value(ix).data();
        const double* wv = t.value(iw).data();
        std::vector<double> cols(static_cast<std::size_t>(okk) * hw);
        const bool need_x = t.needs_grad(ix), need_w = t.needs_grad(iw);
        if (need_x || need_w) {
            for (int n = 0; n < B; ++n) {
                im2col(gr.data() + static_cast<long>(n) * O * ohw, g, cols.data());
                if (need_x) gemm::nn(C, hw, okk, wv, cols.data(), t.grad(ix).data() + static_cast<long>(n) * C * hw);
                if (need_w) gemm::nt(C, okk, hw, xv + static_cast<long>(n) * C * hw, cols.data(), t.grad(iw).data());
            }
        }
        accumulate(t, ib, [&](auto& gbias) {
            for (int n = 0; n < B; ++n) {
                for (int o = 0; o < O; ++o) {
                    const double* p = gr.data() + (static_cast<long>(n) * O + o) * ohw;
                    double s = 0.0;
                    for (int i = 0; i < ohw; ++i) s += p[i];
                    gbias[o] += s;
                }
            }
        });
    }, "conv_transpose2d");
}

Var reshape(Var a, Shape shape) {
    if (shape_size(shape) != a.size()) {
        throw ShapeError("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
    }
    std::vector<double> out(a.value().begin(), a.value().end());
    const int ia = a.id();
    return a.tape().emit(std::move(shape), std::move(out), {a}, [ia](Tape& t, int self) {
        const auto g = t.grad_view(self);
        accumulate(t, ia, [&](auto& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
    }, "reshape");
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    Shape shape = parts[0].shape();
    const int trailing = parts[0].size() / parts[0].rows();
    int rows = 0;
    std::vector<double> out;
    std::vector<int> ids, offsets;
    for (const auto& p : parts) {
        if (p.size() / p.rows() != trailing || p.size() % p.rows() != 0) {
            throw ShapeError("concat_rows: trailing size mismatch " + shape_string(p.shape()));
        }
        ids.push_back(p.id());
        offsets.push_back(static_cast<int>(out.size()));
        out.insert(out.end(), p.value().begin(), p.value().end());
        rows += p.rows();
    }
    shape[0] = rows;
    return parts[0].tape().emit(std::move(shape), std::move(out), parts, [ids, offsets](Tape& t, int self) {
        const auto g = t.grad_view(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            accumulate(t, ids[k], [&](auto& gp) {
                for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[k] + i];
            });
        }
    }, "concat_rows");
}

Var slice_rows(Var a, int begin, int count) {
    if (begin < 0 || count < 1 || begin + count > a.rows()) {
        throw ShapeError("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") outside " +
                         shape_string(a.shape()));
    }
    const int trailing = a.size() / a.rows();
    Shape shape = a.shape();
    shape[0] = count;
    const auto v = a.value();
    std::vector<double> out(v.begin() + static_cast<long>(begin) * trailing,
                            v.begin() + static_cast<long>(begin + count) * trailing);
    const int ia = a.id();
    const long offset = static_cast<long>(begin) * trailing;
    return a.tape().emit(std::move(shape), std::move(out), {a}, [ia, offset](Tape& t, int self) {
        const auto g = t.grad_view(self);
        accumulate(t, ia, [&](auto& ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i]; });
    }, "slice_rows");
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const int rows = parts[0].rows();
    std::vector<int> widths, ids;
    int total = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
        widths.push_back(p.size() / rows);
        ids.push_back(p.id());
        total += widths.back();
    }
    std::vector<double> out(static_cast<std::size_t>(rows) * total);
    int col = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto v = parts[k].value();
        for (int r = 0; r < rows; ++r) {
            std::copy(v.begin() + static_cast<long>(r) * widths[k], v.begin() + static_cast<long>(r + 1) * widths[k],
                      out.begin() + static_cast<long>(r) * total + col);
        }
        col += widths[k];
    }
    return parts[0].tape().emit({rows, total}, std::move(out), parts, [ids, widths, rows, total](Tape& t, int self) {
        const auto g = t.grad_view(self);
        int col = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            accumulate(t, ids[k], [&](auto& gp) {
                for (int r = 0; r < rows; ++r) {
                    for (int j = 0; j < widths[k]; ++j) gp[static_cast<long>(r) * widths[k] + j] += g[static_cast<long>(r) * total + col + j];
                }
            });
            col += widths[k];
        }
    }, "concat_cols");
}

Var bce_rows(Var pred, std::span<const double> target) {
    if (static_cast<int>(target.size()) != pred.size()) throw ShapeError("bce: target size mismatch");
    const int rows = pred.rows();
    const int width = pred.size() / rows;
    const auto p = pred.value();
    std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int j = 0; j < width; ++j) {
            const long i = static_cast<long>(r) * width + j;
            const double pc = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
            acc -= target[i] * std::log(pc) + (1.0 - target[i]) * std::log(1.0 - pc);
        }
        out[r] = acc / width;
    }
    const int ip = pred.id();
    std::vector<double> tgt(target.begin(), target.end());
    return pred.tape().emit({rows}, std::move(out), {pred}, [ip, tgt = std::move(tgt), width](Tape& t, int self) {
        const auto g = t.grad_view(self);
        const auto p = t.value(ip);
        accumulate(t, ip, [&](auto& gp) {
            for (std::size_t i = 0; i < gp.size(); ++i) {
                const double pi = p[i];
                if (pi <= kBceClamp || pi >= 1.0 - kBceClamp) continue;
                gp[i] += g[i / width] * (-tgt[i] / pi + (1.0 - tgt[i]) / (1.0 - pi)) / width;
            }
        });
    }, "bce");
}

Var weighted_sum(Var v, std::span<const double> w) {
    if (static_cast<int>(w.size()) != v.size()) throw ShapeError("weighted_sum: weight count mismatch");
    const auto x = v.value();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * x[i];
    const int iv = v.id();
    std::vector<double> ws(w.begin(), w.end());
    return v.tape().emit({1}, {acc}, {v}, [iv, ws = std::move(ws)](Tape& t, int self) {
        const double g = t.grad_view(self)[0];
        accumulate(t, iv, [&](auto& gv) { for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g * ws[i]; });
    }, "weighted_sum");
}

Var sum(Var a) {
    std::vector<double> w(static_cast<std::size_t>(a.size()), 1.0);
    return weighted_sum(a, w);
}

Var mean(Var a) {
    std::vector<double> w(static_cast<std::size_t>(a.size()), 1.0 / a.size());
    return weighted_sum(a, w);
}

} // namespace cessm::nn
