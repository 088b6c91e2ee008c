#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace vasl::detail {

// Contiguous [channels][rows][cols] planes.
struct Planes {
  const double* data = nullptr;
  std::size_t channels = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  const double* row(std::size_t c, std::size_t r) const { return data + (c * rows + r) * cols; }
};

// src [channels][h][w] surrounded by a zero border of pad_h rows and pad_w
// columns. Borrows src when there is no border, otherwise owns a copy.
class PaddedPlanes {
 public:
  PaddedPlanes(const double* src, std::size_t channels, std::size_t h, std::size_t w, std::size_t pad_h,
               std::size_t pad_w);
  Planes planes() const { return view_; }

 private:
  std::vector<double> storage_;
  Planes view_;
};

// Copies src [channels][h][w] inside a zero border of pad_h rows and
// pad_w columns on each side.
inline std::vector<double> pad_planes(const double* src, std::size_t channels, std::size_t h, std::size_t w,
                                      std::size_t pad_h, std::size_t pad_w) {
  const std::size_t ph = h + 2 * pad_h, pw = w + 2 * pad_w;
  std::vector<double> out(channels * ph * pw, 0.0);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t r = 0; r < h; ++r) {
      const double* from = src + (c * h + r) * w;
      std::copy(from, from + w, out.data() + (c * ph + r + pad_h) * pw + pad_w);
    }
  return out;
}

// Four-double SIMD lane group (GCC/Clang vector extension).
typedef double vec4 __attribute__((vector_size(32)));

inline vec4 load4(const double* p) {
  vec4 v;
  __builtin_memcpy(&v, p, sizeof v);
  return v;
}

inline void store4(double* p, vec4 v) { __builtin_memcpy(p, &v, sizeof v); }

inline PaddedPlanes::PaddedPlanes(const double* src, std::size_t channels, std::size_t h, std::size_t w,
                                  std::size_t pad_h, std::size_t pad_w)
    : view_{src, channels, h + 2 * pad_h, w + 2 * pad_w} {
  if (pad_h == 0 && pad_w == 0) return;
  storage_ = pad_planes(src, channels, h, w, pad_h, pad_w);
  view_.data = storage_.data();
}

inline constexpr std::size_t kOcBlock = 4;
inline constexpr std::size_t kTileVecs = 4;
inline constexpr std::size_t kTileW = 4 * kTileVecs;

/// Stride-1 dilated correlation over pre-padded input planes:
///   out[oc][y][x] = init + sum_{ic,i,j} w[oc][ic][i][j] * in[ic][y + base + i*dil][x + base + j*dil]
/// where init is bias[oc] (or 0), or the existing out value when accumulating.
/// Every output element sums its terms in (ic, i, j) order regardless of
/// which tile path computes it.
inline void correlate(const Planes& in, std::size_t base, const double* w, std::size_t out_c, std::size_t kh,
                      std::size_t kw, std::size_t dil, std::size_t out_h, std::size_t out_w, const double* bias,
                      double* out, bool accumulate) {
  const std::size_t in_c = in.channels;
  const std::size_t wstride = in_c * kh * kw;
  const std::size_t plane = out_h * out_w;

  for (std::size_t oc0 = 0; oc0 < out_c; oc0 += kOcBlock) {
    const std::size_t nb = std::min(kOcBlock, out_c - oc0);
    const double* wb = w + oc0 * wstride;
    for (std::size_t y = 0; y < out_h; ++y) {
      std::size_t x0 = 0;
      if (nb == kOcBlock) {
        for (; x0 + kTileW <= out_w; x0 += kTileW) {
          vec4 acc[kOcBlock][kTileVecs];
#pragma GCC unroll 4
          for (std::size_t b = 0; b < kOcBlock; ++b) {
            const double* o = out + (oc0 + b) * plane + y * out_w + x0;
            const double init = bias ? bias[oc0 + b] : 0.0;
#pragma GCC unroll 4
            for (std::size_t v = 0; v < kTileVecs; ++v)
              acc[b][v] = accumulate ? load4(o + 4 * v) : vec4{init, init, init, init};
          }
          for (std::size_t ic = 0; ic < in_c; ++ic)
            for (std::size_t i = 0; i < kh; ++i) {
              const double* row = in.row(ic, y + base + i * dil) + x0 + base;
              const double* wk = wb + (ic * kh + i) * kw;
              for (std::size_t j = 0; j < kw; ++j) {
                const double* src = row + j * dil;
                vec4 sv[kTileVecs];
#pragma GCC unroll 4
                for (std::size_t v = 0; v < kTileVecs; ++v) sv[v] = load4(src + 4 * v);
#pragma GCC unroll 4
                for (std::size_t b = 0; b < kOcBlock; ++b) {
                  const double wv = wk[b * wstride + j];
#pragma GCC unroll 4
                  for (std::size_t v = 0; v < kTileVecs; ++v) acc[b][v] += wv * sv[v];
                }
              }
            }
#pragma GCC unroll 4
          for (std::size_t b = 0; b < kOcBlock; ++b) {
            double* o = out + (oc0 + b) * plane + y * out_w + x0;
#pragma GCC unroll 4
            for (std::size_t v = 0; v < kTileVecs; ++v) store4(o + 4 * v, acc[b][v]);
          }
        }
      }
      // Remaining columns (and partial channel blocks), same summation order.
      for (std::size_t b = 0; b < nb; ++b) {
        double* o = out + (oc0 + b) * plane + y * out_w;
        const double init = bias ? bias[oc0 + b] : 0.0;
        if (!accumulate)
          for (std::size_t x = x0; x < out_w; ++x) o[x] = init;
        for (std::size_t ic = 0; ic < in_c; ++ic)
          for (std::size_t i = 0; i < kh; ++i) {
            const double* row = in.row(ic, y + base + i * dil) + base;
            const double* wk = wb + b * wstride + (ic * kh + i) * kw;
            for (std::size_t j = 0; j < kw; ++j) {
              const double wv = wk[j];
              const double* src = row + j * dil;
              for (std::size_t x = x0; x < out_w; ++x) o[x] += wv * src[x];
            }
          }
      }
    }
  }
}

/// Weight gradient of `correlate` with base 0:
///   dw[oc][ic][i][j] += sum_{y,x} g[oc][y][x] * in[ic][y + i*dil][x + j*dil]
/// Column sums run in four lanes that are folded in a fixed order.
template <std::size_t KW, std::size_t OB>
inline void weight_grad_block(const Planes& in, const double* g, std::size_t oc0, std::size_t ic, std::size_t i,
                              std::size_t kh, std::size_t dil, std::size_t out_h, std::size_t out_w, double* dw) {
  const std::size_t plane = out_h * out_w;
  const std::size_t full = out_w / 4 * 4;
  vec4 acc[OB][KW];
  double tail[OB][KW];
  for (std::size_t b = 0; b < OB; ++b)
    for (std::size_t j = 0; j < KW; ++j) {
      acc[b][j] = vec4{0, 0, 0, 0};
      tail[b][j] = 0.0;
    }
  for (std::size_t y = 0; y < out_h; ++y) {
    const double* row = in.row(ic, y + i * dil);
    const double* grow = g + oc0 * plane + y * out_w;
    for (std::size_t x = 0; x < full; x += 4) {
      vec4 gv[OB];
#pragma GCC unroll 4
      for (std::size_t b = 0; b < OB; ++b) gv[b] = load4(grow + b * plane + x);
#pragma GCC unroll 7
      for (std::size_t j = 0; j < KW; ++j) {
        const vec4 sv = load4(row + x + j * dil);
#pragma GCC unroll 4
        for (std::size_t b = 0; b < OB; ++b) acc[b][j] += gv[b] * sv;
      }
    }
    for (std::size_t b = 0; b < OB; ++b)
      for (std::size_t j = 0; j < KW; ++j)
        for (std::size_t x = full; x < out_w; ++x) tail[b][j] += grow[b * plane + x] * row[x + j * dil];
  }
  const std::size_t in_c = in.channels;
  for (std::size_t b = 0; b < OB; ++b)
    for (std::size_t j = 0; j < KW; ++j) {
      const vec4 a = acc[b][j];
      dw[((oc0 + b) * in_c + ic) * kh * KW + i * KW + j] += ((a[0] + a[2]) + (a[1] + a[3])) + tail[b][j];
    }
}

template <std::size_t KW>
inline void correlate_weight_grad_fixed(const Planes& in, const double* g, std::size_t out_c, std::size_t kh,
                                        std::size_t dil, std::size_t out_h, std::size_t out_w, double* dw) {
  constexpr std::size_t OB = KW <= 4 ? 4 : 2;
  for (std::size_t ic = 0; ic < in.channels; ++ic)
    for (std::size_t i = 0; i < kh; ++i) {
      std::size_t oc0 = 0;
      for (; oc0 + OB <= out_c; oc0 += OB) weight_grad_block<KW, OB>(in, g, oc0, ic, i, kh, dil, out_h, out_w, dw);
      for (; oc0 < out_c; ++oc0) weight_grad_block<KW, 1>(in, g, oc0, ic, i, kh, dil, out_h, out_w, dw);
    }
}

inline void correlate_weight_grad_generic(const Planes& in, const double* g, std::size_t out_c, std::size_t kh,
                                          std::size_t kw, std::size_t dil, std::size_t out_h, std::size_t out_w,
                                          double* dw) {
  const std::size_t in_c = in.channels;
  const std::size_t plane = out_h * out_w;
  for (std::size_t oc = 0; oc < out_c; ++oc)
    for (std::size_t ic = 0; ic < in_c; ++ic)
      for (std::size_t i = 0; i < kh; ++i)
        for (std::size_t j = 0; j < kw; ++j) {
          double total = 0.0;
          for (std::size_t y = 0; y < out_h; ++y) {
            const double* gr = g + oc * plane + y * out_w;
            const double* src = in.row(ic, y + i * dil) + j * dil;
            for (std::size_t x = 0; x < out_w; ++x) total += gr[x] * src[x];
          }
          dw[((oc * in_c + ic) * kh + i) * kw + j] += total;
        }
}

inline void correlate_weight_grad(const Planes& in, const double* g, std::size_t out_c, std::size_t kh,
                                  std::size_t kw, std::size_t dil, std::size_t out_h, std::size_t out_w, double* dw) {
  switch (kw) {
    case 1: return correlate_weight_grad_fixed<1>(in, g, out_c, kh, dil, out_h, out_w, dw);
    case 3: return correlate_weight_grad_fixed<3>(in, g, out_c, kh, dil, out_h, out_w, dw);
    case 4: return correlate_weight_grad_fixed<4>(in, g, out_c, kh, dil, out_h, out_w, dw);
    case 7: return correlate_weight_grad_fixed<7>(in, g, out_c, kh, dil, out_h, out_w, dw);
    default: return correlate_weight_grad_generic(in, g, out_c, kh, kw, dil, out_h, out_w, dw);
  }
}

}  // namespace vasl::detail
