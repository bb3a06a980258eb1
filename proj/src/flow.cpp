// Copyright 2026 The VAP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vap/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vap {

Tensor grayscale(const Tensor& rgb) {
  const int r = rgb.rank();
  if ((r != 3 && r != 4) || rgb.shape()[r - 1] != 3) {
    throw ShapeError("grayscale: expected (T,H,W,3) or (H,W,3), got " +
                     rgb.shape().str());
  }
  std::vector<int64_t> out_dims;
  for (int i = 0; i < r - 1; ++i) out_dims.push_back(rgb.shape()[i]);
  Tensor out{Shape(out_dims)};
  const float* src = rgb.data();
  float* dst = out.data();
  const int64_t n = out.size();
  for (int64_t i = 0; i < n; ++i) {
    const float* px = src + 3 * i;
    dst[i] = 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2];
  }
  return out;
}

namespace {

void check_frame_pair(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape() != b.shape()) {
    throw ShapeError("horn_schunck: expected two (H,W) frames, got " +
                     a.shape().str() + " and " + b.shape().str());
  }
  if (!a.all_finite() || !b.all_finite()) {
    throw NumericError("horn_schunck: non-finite frame values");
  }
}

// Discrete energy of the current flow; used for the per-sweep trace.
double flow_energy(const std::vector<double>& ix, const std::vector<double>& iy,
                   const std::vector<double>& it, const std::vector<double>& u,
                   const std::vector<double>& v, int64_t h, int64_t w,
                   double alpha2) {
  double e = 0.0;
  for (int64_t i = 0; i < h * w; ++i) {
    const double r = ix[i] * u[i] + iy[i] * v[i] + it[i];
    e += r * r;
  }
  double s = 0.0;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const int64_t i = y * w + x;
      if (x + 1 < w) {
        const double du = u[i] - u[i + 1], dv = v[i] - v[i + 1];
        s += du * du + dv * dv;
      }
      if (y + 1 < h) {
        const double du = u[i] - u[i + w], dv = v[i] - v[i + w];
        s += du * du + dv * dv;
      }
    }
  }
  return e + alpha2 * s;
}

}  // namespace

FlowResult horn_schunck(const Tensor& a, const Tensor& b, double alpha,
                        int iterations) {
  check_frame_pair(a, b);
  if (!(alpha > 0.0)) {
    throw ArgumentError("horn_schunck: alpha must be positive");
  }
  if (iterations < 1) {
    throw ArgumentError("horn_schunck: iterations must be >= 1");
  }
  const int64_t h = a.shape()[0], w = a.shape()[1];
  const int64_t n = h * w;
  const double alpha2 = alpha * alpha;

  // Mean frame for the spatial gradient; central differences with
  // replicated borders.  Temporal difference is b - a.
  std::vector<double> ix(n), iy(n), it(n);
  auto mean_at = [&](int64_t y, int64_t x) {
    const int64_t i = y * w + x;
    return 0.5 * (static_cast<double>(a[i]) + b[i]);
  };
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const int64_t xm = std::max<int64_t>(x - 1, 0);
      const int64_t xp = std::min<int64_t>(x + 1, w - 1);
      const int64_t ym = std::max<int64_t>(y - 1, 0);
      const int64_t yp = std::min<int64_t>(y + 1, h - 1);
      const int64_t i = y * w + x;
      ix[i] = (mean_at(y, xp) - mean_at(y, xm)) / 2.0;
      iy[i] = (mean_at(yp, x) - mean_at(ym, x)) / 2.0;
      it[i] = static_cast<double>(b[i]) - a[i];
    }
  }

  std::vector<double> u(n, 0.0), v(n, 0.0);
  FlowResult res;
  res.energy.reserve(static_cast<size_t>(iterations) + 1);
  res.energy.push_back(flow_energy(ix, iy, it, u, v, h, w, alpha2));

  for (int iter = 0; iter < iterations; ++iter) {
    // Gauss-Seidel raster sweep.  Each pixel jointly minimizes the energy
    // over (u_p, v_p) with neighbors fixed:
    //   (Ix^2 + a2 n) u + Ix Iy v = a2 sum(u_q) - Ix It
    //   Ix Iy u + (Iy^2 + a2 n) v = a2 sum(v_q) - Iy It
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const int64_t i = y * w + x;
        double su = 0.0, sv = 0.0;
        int nn = 0;
        if (x > 0) { su += u[i - 1]; sv += v[i - 1]; ++nn; }
        if (x + 1 < w) { su += u[i + 1]; sv += v[i + 1]; ++nn; }
        if (y > 0) { su += u[i - w]; sv += v[i - w]; ++nn; }
        if (y + 1 < h) { su += u[i + w]; sv += v[i + w]; ++nn; }
        const double an = alpha2 * static_cast<double>(nn);
        const double gx = ix[i], gy = iy[i], gt = it[i];
        const double a11 = gx * gx + an;
        const double a22 = gy * gy + an;
        const double a12 = gx * gy;
        const double r1 = alpha2 * su - gx * gt;
        const double r2 = alpha2 * sv - gy * gt;
        const double det = a11 * a22 - a12 * a12;
        // det = an*(gx^2+gy^2+an) > 0 whenever the pixel has a neighbor.
        if (det > 0.0) {
          u[i] = (a22 * r1 - a12 * r2) / det;
          v[i] = (a11 * r2 - a12 * r1) / det;
        }
      }
    }
    res.energy.push_back(flow_energy(ix, iy, it, u, v, h, w, alpha2));
  }

  res.flow.vx = Tensor(Shape{h, w});
  res.flow.vy = Tensor(Shape{h, w});
  for (int64_t i = 0; i < n; ++i) {
    res.flow.vx[i] = static_cast<float>(u[i]);
    res.flow.vy[i] = static_cast<float>(v[i]);
  }
  return res;
}

Tensor compose_am(const Tensor& gray, double alpha, int iterations) {
  if (gray.rank() != 3) {
    throw ShapeError("compose_am: expected gray clip (T,H,W), got " +
                     gray.shape().str());
  }
  const int64_t t = gray.shape()[0], h = gray.shape()[1], w = gray.shape()[2];
  const int64_t plane = h * w;
  Tensor am(Shape{3, t, h, w});
  float* intensity = am.data();
  float* vx = am.data() + t * plane;
  float* vy = am.data() + 2 * t * plane;
  std::copy(gray.data(), gray.data() + t * plane, intensity);

  for (int64_t f = 0; f + 1 < t; ++f) {
    Tensor fa = Tensor::from_values(
        Shape{h, w},
        std::vector<float>(gray.data() + f * plane,
                           gray.data() + (f + 1) * plane));
    Tensor fb = Tensor::from_values(
        Shape{h, w},
        std::vector<float>(gray.data() + (f + 1) * plane,
                           gray.data() + (f + 2) * plane));
    FlowResult r = horn_schunck(fa, fb, alpha, iterations);
    std::copy(r.flow.vx.data(), r.flow.vx.data() + plane, vx + f * plane);
    std::copy(r.flow.vy.data(), r.flow.vy.data() + plane, vy + f * plane);
  }
  if (t >= 2) {  // last frame repeats the final pair's flow
    std::copy(vx + (t - 2) * plane, vx + (t - 1) * plane, vx + (t - 1) * plane);
    std::copy(vy + (t - 2) * plane, vy + (t - 1) * plane, vy + (t - 1) * plane);
  }
  return am;
}

namespace {
// Half-pixel-center source coordinate with clamped endpoints, plus the
// integer pair and blend weight for linear interpolation.
inline void lerp_coords(int64_t out_i, int64_t out_n, int64_t in_n,
                        int64_t& i0, int64_t& i1, double& frac) {
  const double src = (static_cast<double>(out_i) + 0.5) *
                         (static_cast<double>(in_n) / out_n) - 0.5;
  const double clamped = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
  i0 = static_cast<int64_t>(std::floor(clamped));
  i1 = std::min(i0 + 1, in_n - 1);
  frac = clamped - static_cast<double>(i0);
}
}  // namespace

Tensor resize_trilinear(const Tensor& vol, int64_t t, int64_t h, int64_t w) {
  if (vol.rank() != 4) {
    throw ShapeError("resize_trilinear: expected (C,T,H,W), got " +
                     vol.shape().str());
  }
  if (t < 1 || h < 1 || w < 1) {
    throw ArgumentError("resize_trilinear: target extents must be >= 1");
  }
  const int64_t C = vol.shape()[0], T = vol.shape()[1], H = vol.shape()[2],
                W = vol.shape()[3];
  Tensor out(Shape{C, t, h, w});

  std::vector<int64_t> t0(t), t1(t), h0(h), h1(h), w0(w), w1(w);
  std::vector<double> tf(t), hf(h), wf(w);
  for (int64_t i = 0; i < t; ++i) lerp_coords(i, t, T, t0[i], t1[i], tf[i]);
  for (int64_t i = 0; i < h; ++i) lerp_coords(i, h, H, h0[i], h1[i], hf[i]);
  for (int64_t i = 0; i < w; ++i) lerp_coords(i, w, W, w0[i], w1[i], wf[i]);

  const float* src = vol.data();
  float* dst = out.data();
  for (int64_t c = 0; c < C; ++c) {
    const float* cbase = src + c * T * H * W;
    for (int64_t ot = 0; ot < t; ++ot) {
      const float* p0 = cbase + t0[ot] * H * W;
      const float* p1 = cbase + t1[ot] * H * W;
      const double ft = tf[ot];
      for (int64_t oh = 0; oh < h; ++oh) {
        const int64_t r0 = h0[oh] * W, r1 = h1[oh] * W;
        const double fh = hf[oh];
        float* orow = dst + ((c * t + ot) * h + oh) * w;
        for (int64_t ow = 0; ow < w; ++ow) {
          const int64_t c0 = w0[ow], c1 = w1[ow];
          const double fw = wf[ow];
          const double v00 = (1 - fw) * p0[r0 + c0] + fw * p0[r0 + c1];
          const double v01 = (1 - fw) * p0[r1 + c0] + fw * p0[r1 + c1];
          const double v10 = (1 - fw) * p1[r0 + c0] + fw * p1[r0 + c1];
          const double v11 = (1 - fw) * p1[r1 + c0] + fw * p1[r1 + c1];
          const double v0 = (1 - fh) * v00 + fh * v01;
          const double v1 = (1 - fh) * v10 + fh * v11;
          orow[ow] = static_cast<float>((1 - ft) * v0 + ft * v1);
        }
      }
    }
  }
  return out;
}

Tensor warp_am(const Tensor& am, int64_t t, int64_t h, int64_t w) {
  if (am.rank() != 4 || am.shape()[0] != 3) {
    throw ShapeError("warp_am: expected (3,T,H,W) appearance-motion volume, "
                     "got " + am.shape().str());
  }
  const int64_t H = am.shape()[2], W = am.shape()[3];
  Tensor out = resize_trilinear(am, t, h, w);
  // Velocities are in pixels/frame of the source grid; rescale into the
  // output grid so a motion that crossed the frame still crosses it.
  const float sx = static_cast<float>(static_cast<double>(w) / W);
  const float sy = static_cast<float>(static_cast<double>(h) / H);
  float* vx = out.data() + t * h * w;
  float* vy = out.data() + 2 * t * h * w;
  for (int64_t i = 0; i < t * h * w; ++i) {
    vx[i] *= sx;
    vy[i] *= sy;
  }
  return out;
}

Tensor temporal_rescale(const Tensor& clip, int64_t new_t) {
  if (clip.rank() < 2) {
    throw ShapeError("temporal_rescale: clip must have a leading time axis, "
                     "got " + clip.shape().str());
  }
  if (new_t < 1) {
    throw ArgumentError("temporal_rescale: target length must be >= 1");
  }
  const int64_t T = clip.shape()[0];
  int64_t frame = 1;
  for (int i = 1; i < clip.rank(); ++i) frame *= clip.shape()[i];

  std::vector<int64_t> dims = clip.shape().dims;
  dims[0] = new_t;
  Tensor out{Shape(dims)};
  const float* src = clip.data();
  float* dst = out.data();
  for (int64_t ot = 0; ot < new_t; ++ot) {
    int64_t i0, i1;
    double f;
    lerp_coords(ot, new_t, T, i0, i1, f);
    const float* a = src + i0 * frame;
    const float* b = src + i1 * frame;
    float* o = dst + ot * frame;
    for (int64_t i = 0; i < frame; ++i) {
      o[i] = static_cast<float>((1.0 - f) * a[i] + f * b[i]);
    }
  }
  return out;
}

}  // namespace vap
