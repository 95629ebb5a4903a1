// Copyright 2026 The aesthetic-vae Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "aest/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "aest/errors.hpp"

namespace aest::inline AEST_PREC {

namespace {

using Mat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<Mat>;
using CMapMat = Eigen::Map<const Mat>;

void require_same_dims(const Tensor& a, const Tensor& b, const char* op) {
  require(a.dims() == b.dims(), std::string(op) + ": shape mismatch " + shape_string(a.dims()) +
                                    " vs " + shape_string(b.dims()));
}

template <class F, class DF>
Var unary(Var x, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor y(xv.dims());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
  const int xid = x.id;
  return x.tape->record(std::move(y), {x}, [xid, df](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(xid);
    Tensor& gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i]);
  });
}

struct Spatial {
  std::size_t n, c, h, w;
  bool batched;
};

Spatial spatial_dims(const Tensor& t, const char* op) {
  require(t.rank() == 3 || t.rank() == 4,
          std::string(op) + ": expected [C,H,W] or [N,C,H,W], got " + shape_string(t.dims()));
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2), false};
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), true};
}

Shape spatial_shape(const Spatial& s, std::size_t c, std::size_t h, std::size_t w) {
  if (s.batched) return {s.n, c, h, w};
  return {c, h, w};
}

struct ConvGeom {
  std::size_t c, h, w, k, ho, wo;
  int stride, pad;
};

void im2col(const real* x, const ConvGeom& g, real* cols) {
  const std::size_t hw = g.ho * g.wo;
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        real* row = cols + ((c * g.k + ky) * g.k + kx) * hw;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ky);
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride - g.pad + static_cast<long>(kx);
            const bool inside = iy >= 0 && iy < static_cast<long>(g.h) && ix >= 0 &&
                                ix < static_cast<long>(g.w);
            row[oy * g.wo + ox] =
                inside ? x[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)]
                       : real(0);
          }
        }
      }
}

void col2im_add(const real* cols, const ConvGeom& g, real* x) {
  const std::size_t hw = g.ho * g.wo;
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const real* row = cols + ((c * g.k + ky) * g.k + kx) * hw;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(ky);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride - g.pad + static_cast<long>(kx);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            x[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] +=
                row[oy * g.wo + ox];
          }
        }
      }
}

bool is_pointwise(const ConvGeom& g) { return g.k == 1 && g.stride == 1 && g.pad == 0; }

}  // namespace

Var add(Var a, Var b) {
  require_same_dims(a.value(), b.value(), "add");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const int ai = a.id, bi = b.id;
  return a.tape->record(std::move(y), {a, b}, [ai, bi](Tape& t, const Tensor& g) {
    for (int id : {ai, bi}) {
      if (!t.requires_grad(id)) continue;
      Tensor& gx = t.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_dims(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const int ai = a.id, bi = b.id;
  return a.tape->record(std::move(y), {a, b}, [ai, bi](Tape& t, const Tensor& g) {
    if (t.requires_grad(ai)) {
      Tensor& ga = t.grad_buffer(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_dims(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const int ai = a.id, bi = b.id;
  return a.tape->record(std::move(y), {a, b}, [ai, bi](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(ai);
    const Tensor& bv = t.value(bi);
    if (t.requires_grad(ai)) {
      Tensor& ga = t.grad_buffer(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, real s) {
  return unary(a, [s](real v) { return s * v; }, [s](real) { return s; });
}

Var add_scalar(Var a, real s) {
  return unary(a, [s](real v) { return v + s; }, [](real) { return real(1); });
}

Var blend(Var a, Var b, real alpha) {
  require_same_dims(a.value(), b.value(), "blend");
  require(alpha >= 0 && alpha <= 1, "blend: alpha must lie in [0,1]");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor y(av.dims());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = (real(1) - alpha) * av[i] + alpha * bv[i];
  const int ai = a.id, bi = b.id;
  return a.tape->record(std::move(y), {a, b}, [ai, bi, alpha](Tape& t, const Tensor& g) {
    if (t.requires_grad(ai)) {
      Tensor& ga = t.grad_buffer(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += (real(1) - alpha) * g[i];
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += alpha * g[i];
    }
  });
}

Var leaky_relu(Var x, real slope) {
  require(slope >= 0 && slope < 1, "leaky_relu: slope must lie in [0,1)");
  return unary(
      x, [slope](real v) { return v >= 0 ? v : slope * v; },
      [slope](real v) { return v >= 0 ? real(1) : slope; });
}

Var sigmoid(Var x) {
  const Tensor& xv = x.value();
  Tensor y(xv.dims());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const real v = xv[i];
    y[i] = v >= 0 ? real(1) / (real(1) + std::exp(-v)) : std::exp(v) / (real(1) + std::exp(v));
  }
  const int xid = x.id;
  const int yid = static_cast<int>(x.tape->size());
  return x.tape->record(std::move(y), {x}, [xid, yid](Tape& t, const Tensor& g) {
    const Tensor& yv = t.value(yid);
    Tensor& gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yv[i] * (real(1) - yv[i]);
  });
}

Var exp(Var x) {
  return unary(x, [](real v) { return std::exp(v); }, [](real v) { return std::exp(v); });
}

Var log(Var x, real eps) {
  for (real v : x.value().values())
    require(v + eps > 0, "log: argument must be positive");
  return unary(
      x, [eps](real v) { return std::log(v + eps); }, [eps](real v) { return real(1) / (v + eps); });
}

Var abs(Var x) {
  return unary(
      x, [](real v) { return std::abs(v); },
      [](real v) { return v > 0 ? real(1) : (v < 0 ? real(-1) : real(0)); });
}

Var square(Var x) {
  return unary(x, [](real v) { return v * v; }, [](real v) { return real(2) * v; });
}

Var clamp(Var x, real lo, real hi) {
  require(lo <= hi, "clamp: lo > hi");
  return unary(
      x, [lo, hi](real v) { return std::clamp(v, lo, hi); },
      [lo, hi](real v) { return (v >= lo && v <= hi) ? real(1) : real(0); });
}

Var sum(Var x) {
  real s = 0;
  for (real v : x.value().values()) s += v;
  const int xid = x.id;
  return x.tape->record(Tensor::scalar(s), {x}, [xid](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(xid);
    const real gv = g[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gv;
  });
}

Var mean(Var x) {
  return scale(sum(x), real(1) / static_cast<real>(x.value().size()));
}

Var reshape(Var x, Shape dims) {
  Tensor y = x.value().reshaped(std::move(dims));
  const int xid = x.id;
  return x.tape->record(std::move(y), {x}, [xid](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var linear(Var x, Var w, Var b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  require(xv.rank() == 2 && wv.rank() == 2 && bv.rank() == 1, "linear: expected x[N,F], w[O,F], b[O]");
  require(wv.dim(1) == xv.dim(1), "linear: input features " + std::to_string(xv.dim(1)) +
                                      " do not match weight " + shape_string(wv.dims()));
  require(bv.dim(0) == wv.dim(0), "linear: bias length does not match output features");
  const std::size_t n = xv.dim(0), f = xv.dim(1), o = wv.dim(0);
  Tensor y({n, o});
  MapMat ym(y.data(), static_cast<long>(n), static_cast<long>(o));
  CMapMat xm(xv.data(), static_cast<long>(n), static_cast<long>(f));
  CMapMat wm(wv.data(), static_cast<long>(o), static_cast<long>(f));
  ym.noalias() = xm * wm.transpose();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < o; ++j) y[i * o + j] += bv[j];
  const int xi = x.id, wi = w.id, bi = b.id;
  return x.tape->record(std::move(y), {x, w, b}, [xi, wi, bi, n, f, o](Tape& t, const Tensor& g) {
    CMapMat gm(g.data(), static_cast<long>(n), static_cast<long>(o));
    if (t.requires_grad(xi)) {
      MapMat gx(t.grad_buffer(xi).data(), static_cast<long>(n), static_cast<long>(f));
      gx.noalias() += gm * CMapMat(t.value(wi).data(), static_cast<long>(o), static_cast<long>(f));
    }
    if (t.requires_grad(wi)) {
      MapMat gw(t.grad_buffer(wi).data(), static_cast<long>(o), static_cast<long>(f));
      gw.noalias() += gm.transpose() * CMapMat(t.value(xi).data(), static_cast<long>(n), static_cast<long>(f));
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad_buffer(bi);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < o; ++j) gb[j] += g[i * o + j];
    }
  });
}

Var softmax(Var x) {
  const Tensor& xv = x.value();
  require(xv.rank() >= 1, "softmax: empty shape");
  const std::size_t len = xv.dims().back();
  const std::size_t rows = xv.size() / len;
  Tensor y(xv.dims());
  for (std::size_t r = 0; r < rows; ++r) {
    const real* in = xv.data() + r * len;
    real* out = y.data() + r * len;
    const real mx = *std::max_element(in, in + len);
    real s = 0;
    for (std::size_t j = 0; j < len; ++j) s += (out[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < len; ++j) out[j] /= s;
  }
  const int xid = x.id;
  const int yid = static_cast<int>(x.tape->size());
  return x.tape->record(std::move(y), {x}, [xid, yid, len, rows](Tape& t, const Tensor& g) {
    const Tensor& yv = t.value(yid);
    Tensor& gx = t.grad_buffer(xid);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t o = r * len;
      real dot = 0;
      for (std::size_t j = 0; j < len; ++j) dot += g[o + j] * yv[o + j];
      for (std::size_t j = 0; j < len; ++j) gx[o + j] += yv[o + j] * (g[o + j] - dot);
    }
  });
}

Var slice_axis1(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  require(xv.rank() >= 2, "slice_axis1: rank must be at least 2");
  require(begin < end && end <= xv.dim(1), "slice_axis1: bad range");
  const std::size_t n = xv.dim(0), f = xv.dim(1);
  const std::size_t inner = xv.size() / (n * f);
  Shape dims = xv.dims();
  dims[1] = end - begin;
  Tensor y(dims);
  const std::size_t width = (end - begin) * inner;
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(xv.data() + (i * f + begin) * inner, width, y.data() + i * width);
  const int xid = x.id;
  return x.tape->record(std::move(y), {x}, [xid, n, f, inner, begin, width](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < n; ++i) {
      real* dst = gx.data() + (i * f + begin) * inner;
      const real* src = g.data() + i * width;
      for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
    }
  });
}

Var concat_axis1(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_axis1: no inputs");
  const Tensor& first = parts.front().value();
  require(first.rank() >= 2, "concat_axis1: rank must be at least 2");
  const std::size_t n = first.dim(0);
  const std::size_t inner = first.size() / (n * first.dim(1));
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    require(v.rank() == first.rank() && v.dim(0) == n, "concat_axis1: leading dims differ");
    for (std::size_t a = 2; a < v.rank(); ++a)
      require(v.dim(a) == first.dim(a), "concat_axis1: trailing dims differ");
    widths.push_back(v.dim(1) * inner);
    total += v.dim(1);
  }
  Shape dims = first.dims();
  dims[1] = total;
  Tensor y(dims);
  const std::size_t row = total * inner;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(v.data() + i * widths[k], widths[k], y.data() + i * row + offset);
    offset += widths[k];
  }
  std::vector<int> ids;
  for (const Var& p : parts) ids.push_back(p.id);
  return parts.front().tape->record(
      std::move(y), std::span<const Var>(parts), [ids, widths, n, row](Tape& t, const Tensor& g) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (t.requires_grad(ids[k])) {
            Tensor& gx = t.grad_buffer(ids[k]);
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < widths[k]; ++j) gx[i * widths[k] + j] += g[i * row + offset + j];
          }
          offset += widths[k];
        }
      });
}

Var expand_planes(Var a, std::size_t height, std::size_t width) {
  const Tensor& av = a.value();
  require(av.rank() == 2, "expand_planes: expected [N,A]");
  const std::size_t n = av.dim(0), na = av.dim(1), hw = height * width;
  Tensor y({n, na, height, width});
  for (std::size_t i = 0; i < n * na; ++i) std::fill_n(y.data() + i * hw, hw, av[i]);
  const int aid = a.id;
  return a.tape->record(std::move(y), {a}, [aid, n, na, hw](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(aid);
    for (std::size_t i = 0; i < n * na; ++i) {
      real s = 0;
      for (std::size_t j = 0; j < hw; ++j) s += g[i * hw + j];
      ga[i] += s;
    }
  });
}

Var conv2d(Var input, Var kernels, int stride, int pad) {
  const Tensor& x = input.value();
  const Tensor& w = kernels.value();
  const Spatial s = spatial_dims(x, "conv2d");
  require(w.rank() == 4 && w.dim(2) == w.dim(3), "conv2d: kernels must be [C_out,C_in,k,k]");
  require(w.dim(1) == s.c, "conv2d: input has " + std::to_string(s.c) + " channels, kernels expect " +
                               std::to_string(w.dim(1)));
  require(stride >= 1 && pad >= 0, "conv2d: stride must be >= 1 and pad >= 0");
  const std::size_t k = w.dim(2);
  require(k <= s.h + 2 * static_cast<std::size_t>(pad) && k <= s.w + 2 * static_cast<std::size_t>(pad),
          "conv2d: kernel larger than padded input");
  ConvGeom geom{s.c, s.h, s.w, k, (s.h + 2 * pad - k) / stride + 1, (s.w + 2 * pad - k) / stride + 1,
                stride, pad};
  const std::size_t o = w.dim(0), ckk = s.c * k * k, hw = geom.ho * geom.wo, in_sz = s.c * s.h * s.w;
  Tensor y(spatial_shape(s, o, geom.ho, geom.wo));
  CMapMat wm(w.data(), static_cast<long>(o), static_cast<long>(ckk));
  std::vector<real> cols(is_pointwise(geom) ? 0 : ckk * hw);
  for (std::size_t n = 0; n < s.n; ++n) {
    const real* src = x.data() + n * in_sz;
    if (!is_pointwise(geom)) {
      im2col(src, geom, cols.data());
      src = cols.data();
    }
    MapMat(y.data() + n * o * hw, static_cast<long>(o), static_cast<long>(hw)).noalias() =
        wm * CMapMat(src, static_cast<long>(ckk), static_cast<long>(hw));
  }
  const int xi = input.id, wi = kernels.id;
  const std::size_t batch = s.n;
  return input.tape->record(std::move(y), {input, kernels}, [=](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(xi);
    CMapMat wm(t.value(wi).data(), static_cast<long>(o), static_cast<long>(ckk));
    const bool need_x = t.requires_grad(xi), need_w = t.requires_grad(wi);
    std::vector<real> cols(ckk * hw);
    for (std::size_t n = 0; n < batch; ++n) {
      CMapMat gm(g.data() + n * o * hw, static_cast<long>(o), static_cast<long>(hw));
      if (need_w) {
        const real* src = xv.data() + n * in_sz;
        if (!is_pointwise(geom)) {
          im2col(src, geom, cols.data());
          src = cols.data();
        }
        MapMat gw(t.grad_buffer(wi).data(), static_cast<long>(o), static_cast<long>(ckk));
        gw.noalias() += gm * CMapMat(src, static_cast<long>(ckk), static_cast<long>(hw)).transpose();
      }
      if (need_x) {
        real* gx = t.grad_buffer(xi).data() + n * in_sz;
        if (is_pointwise(geom)) {
          MapMat(gx, static_cast<long>(ckk), static_cast<long>(hw)).noalias() += wm.transpose() * gm;
        } else {
          MapMat(cols.data(), static_cast<long>(ckk), static_cast<long>(hw)).noalias() = wm.transpose() * gm;
          col2im_add(cols.data(), geom, gx);
        }
      }
    }
  });
}

Var add_channel_bias(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Spatial s = spatial_dims(xv, "add_channel_bias");
  require(bias.value().rank() == 1 && bias.value().dim(0) == s.c,
          "add_channel_bias: bias length must equal channel count");
  const std::size_t hw = s.h * s.w;
  Tensor y = xv;
  const Tensor& bv = bias.value();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      real* p = y.data() + (n * s.c + c) * hw;
      for (std::size_t j = 0; j < hw; ++j) p[j] += bv[c];
    }
  const int xi = x.id, bi = bias.id;
  return x.tape->record(std::move(y), {x, bias}, [xi, bi, s, hw](Tape& t, const Tensor& g) {
    if (t.requires_grad(xi)) {
      Tensor& gx = t.grad_buffer(xi);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad_buffer(bi);
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c) {
          const real* p = g.data() + (n * s.c + c) * hw;
          real acc = 0;
          for (std::size_t j = 0; j < hw; ++j) acc += p[j];
          gb[c] += acc;
        }
    }
  });
}

Var avg_pool2d(Var input, int window) {
  const Tensor& x = input.value();
  const Spatial s = spatial_dims(x, "avg_pool2d");
  require(window >= 1, "avg_pool2d: window must be positive");
  const std::size_t k = static_cast<std::size_t>(window);
  require(s.h % k == 0 && s.w % k == 0, "avg_pool2d: window " + std::to_string(k) +
                                            " does not divide " + std::to_string(s.h) + "x" +
                                            std::to_string(s.w));
  const std::size_t ho = s.h / k, wo = s.w / k, planes = s.n * s.c;
  const real inv = real(1) / static_cast<real>(k * k);
  Tensor y(spatial_shape(s, s.c, ho, wo));
  for (std::size_t p = 0; p < planes; ++p) {
    const real* src = x.data() + p * s.h * s.w;
    real* dst = y.data() + p * ho * wo;
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        real acc = 0;
        for (std::size_t dy = 0; dy < k; ++dy)
          for (std::size_t dx = 0; dx < k; ++dx) acc += src[(oy * k + dy) * s.w + ox * k + dx];
        dst[oy * wo + ox] = acc * inv;
      }
  }
  const int xi = input.id;
  return input.tape->record(std::move(y), {input}, [=](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(xi);
    for (std::size_t p = 0; p < planes; ++p) {
      real* dst = gx.data() + p * s.h * s.w;
      const real* src = g.data() + p * ho * wo;
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) dst[y * s.w + x] += src[(y / k) * wo + x / k] * inv;
    }
  });
}

Var upsample_nearest(Var input, int factor) {
  const Tensor& x = input.value();
  const Spatial s = spatial_dims(x, "upsample_nearest");
  require(factor >= 1, "upsample_nearest: factor must be >= 1");
  const std::size_t f = static_cast<std::size_t>(factor);
  const std::size_t ho = s.h * f, wo = s.w * f, planes = s.n * s.c;
  Tensor y(spatial_shape(s, s.c, ho, wo));
  for (std::size_t p = 0; p < planes; ++p) {
    const real* src = x.data() + p * s.h * s.w;
    real* dst = y.data() + p * ho * wo;
    for (std::size_t yy = 0; yy < ho; ++yy)
      for (std::size_t xx = 0; xx < wo; ++xx) dst[yy * wo + xx] = src[(yy / f) * s.w + xx / f];
  }
  const int xi = input.id;
  return input.tape->record(std::move(y), {input}, [=](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(xi);
    for (std::size_t p = 0; p < planes; ++p) {
      real* dst = gx.data() + p * s.h * s.w;
      const real* src = g.data() + p * ho * wo;
      for (std::size_t yy = 0; yy < ho; ++yy)
        for (std::size_t xx = 0; xx < wo; ++xx) dst[(yy / f) * s.w + xx / f] += src[yy * wo + xx];
    }
  });
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int pad) {
  Tape tape;
  return conv2d(tape.constant(input), tape.constant(kernels), stride, pad).value();
}

Tensor avg_pool2d(const Tensor& input, int window) {
  Tape tape;
  return avg_pool2d(tape.constant(input), window).value();
}

Tensor upsample_nearest(const Tensor& input, int factor) {
  Tape tape;
  return upsample_nearest(tape.constant(input), factor).value();
}

Tensor leaky_relu(const Tensor& x, real slope) {
  Tape tape;
  return leaky_relu(tape.constant(x), slope).value();
}

Tensor softmax(const Tensor& x) {
  Tape tape;
  return softmax(tape.constant(x)).value();
}

}  // namespace aest::inline AEST_PREC
