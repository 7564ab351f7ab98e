// Copyright 2026 The demoforge Authors
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

// AVX2 variants. This translation unit is compiled with -mavx2; nothing in it
// may run before the dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <bit>
#include <cmath>
#include <cstring>

#include "demoforge/kernels/kernels.hpp"

namespace demoforge::kernels {
namespace {

// 4 interleaved xyz points (12 doubles) -> X, Y, Z lanes.
inline void load_xyz4(const double* p, __m256d& x, __m256d& y, __m256d& z) {
  const __m256d in0 = _mm256_loadu_pd(p);      // x0 y0 z0 x1
  const __m256d in1 = _mm256_loadu_pd(p + 4);  // y1 z1 x2 y2
  const __m256d in2 = _mm256_loadu_pd(p + 8);  // z2 x3 y3 z3
  const __m256d a = _mm256_permute2f128_pd(in0, in1, 0x30);  // x0 y0 x2 y2
  const __m256d c = _mm256_permute2f128_pd(in0, in2, 0x21);  // z0 x1 z2 x3
  const __m256d d = _mm256_permute2f128_pd(in1, in2, 0x30);  // y1 z1 y3 z3
  x = _mm256_blend_pd(a, c, 0b1010);
  y = _mm256_shuffle_pd(a, d, 0b0101);
  z = _mm256_blend_pd(c, d, 0b1010);
}

inline void store_xyz4(double* p, __m256d x, __m256d y, __m256d z) {
  const __m256d a = _mm256_unpacklo_pd(x, y);  // x0 y0 x2 y2
  const __m256d b = _mm256_unpackhi_pd(x, y);  // x1 y1 x3 y3
  const __m256d c = _mm256_unpacklo_pd(z, b);  // z0 x1 z2 x3
  const __m256d d = _mm256_unpackhi_pd(b, z);  // y1 z1 y3 z3
  _mm256_storeu_pd(p, _mm256_permute2f128_pd(a, c, 0x20));
  _mm256_storeu_pd(p + 4, _mm256_permute2f128_pd(d, a, 0x30));
  _mm256_storeu_pd(p + 8, _mm256_permute2f128_pd(c, d, 0x31));
}

void unproject_row_avx2(const float* depth, std::size_t n, int u0, int v,
                        const UnprojectParams& p, double* xyz, std::uint8_t* valid) {
  const __m256d fx = _mm256_set1_pd(p.fx);
  const __m256d fy = _mm256_set1_pd(p.fy);
  const __m256d cx = _mm256_set1_pd(p.cx);
  const __m256d yc_num = _mm256_set1_pd(static_cast<double>(v) - p.cy);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d inf = _mm256_set1_pd(INFINITY);
  __m256d r[9];
  for (int k = 0; k < 9; ++k) r[k] = _mm256_set1_pd(p.rot[k]);
  const __m256d t0 = _mm256_set1_pd(p.trans[0]);
  const __m256d t1 = _mm256_set1_pd(p.trans[1]);
  const __m256d t2 = _mm256_set1_pd(p.trans[2]);
  const __m256d lane = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d z = _mm256_cvtps_pd(_mm_loadu_ps(depth + i));
    const __m256d u = _mm256_add_pd(
        _mm256_set1_pd(static_cast<double>(u0 + static_cast<int>(i))), lane);
    const __m256d ok = _mm256_and_pd(_mm256_cmp_pd(z, zero, _CMP_GT_OQ),
                                     _mm256_cmp_pd(z, inf, _CMP_LT_OQ));
    const int bits = _mm256_movemask_pd(ok);
    for (int k = 0; k < 4; ++k) valid[i + k] = static_cast<std::uint8_t>((bits >> k) & 1);

    const __m256d xc = _mm256_div_pd(_mm256_mul_pd(_mm256_sub_pd(u, cx), z), fx);
    const __m256d yc = _mm256_div_pd(_mm256_mul_pd(yc_num, z), fy);
    const __m256d wx = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(r[0], xc), _mm256_mul_pd(r[1], yc)),
                      _mm256_mul_pd(r[2], z)),
        t0);
    const __m256d wy = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(r[3], xc), _mm256_mul_pd(r[4], yc)),
                      _mm256_mul_pd(r[5], z)),
        t1);
    const __m256d wz = _mm256_add_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(r[6], xc), _mm256_mul_pd(r[7], yc)),
                      _mm256_mul_pd(r[8], z)),
        t2);
    store_xyz4(xyz + 3 * i, wx, wy, wz);
  }
  if (i < n) {
    scalar_table().unproject_row(depth + i, n - i, u0 + static_cast<int>(i), v, p, xyz + 3 * i,
                                 valid + i);
  }
}

std::size_t plane_inliers_avx2(const double* xyz, std::size_t n, const double normal[3],
                               double offset, double threshold, std::uint8_t* mask) {
  const __m256d n0 = _mm256_set1_pd(normal[0]);
  const __m256d n1 = _mm256_set1_pd(normal[1]);
  const __m256d n2 = _mm256_set1_pd(normal[2]);
  const __m256d off = _mm256_set1_pd(offset);
  const __m256d thr = _mm256_set1_pd(threshold);
  const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d x, y, z;
    load_xyz4(xyz + 3 * i, x, y, z);
    const __m256d d = _mm256_sub_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(n0, x), _mm256_mul_pd(n1, y)),
                      _mm256_mul_pd(n2, z)),
        off);
    const __m256d in = _mm256_cmp_pd(_mm256_and_pd(d, abs_mask), thr, _CMP_LT_OQ);
    const int bits = _mm256_movemask_pd(in);
    count += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(bits)));
    if (mask != nullptr) {
      for (int k = 0; k < 4; ++k) mask[i + k] = static_cast<std::uint8_t>((bits >> k) & 1);
    }
  }
  if (i < n) {
    count += scalar_table().plane_inliers(xyz + 3 * i, n - i, normal, offset, threshold,
                                          mask != nullptr ? mask + i : nullptr);
  }
  return count;
}

void voxel_index_avx2(const double* xyz, std::size_t n, const GridGeometry& g,
                      std::int64_t* index) {
  const __m256d ox = _mm256_set1_pd(g.origin[0]);
  const __m256d oy = _mm256_set1_pd(g.origin[1]);
  const __m256d oz = _mm256_set1_pd(g.origin[2]);
  const __m256d res = _mm256_set1_pd(g.resolution);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d nx = _mm256_set1_pd(g.dims[0]);
  const __m256d ny = _mm256_set1_pd(g.dims[1]);
  const __m256d nz = _mm256_set1_pd(g.dims[2]);
  const __m256i nx64 = _mm256_set1_epi64x(g.dims[0]);
  const __m256i ny64 = _mm256_set1_epi64x(g.dims[1]);
  const __m256i minus_one = _mm256_set1_epi64x(-1);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d x, y, z;
    load_xyz4(xyz + 3 * i, x, y, z);
    const __m256d fx = _mm256_floor_pd(_mm256_div_pd(_mm256_sub_pd(x, ox), res));
    const __m256d fy = _mm256_floor_pd(_mm256_div_pd(_mm256_sub_pd(y, oy), res));
    const __m256d fz = _mm256_floor_pd(_mm256_div_pd(_mm256_sub_pd(z, oz), res));
    __m256d inside = _mm256_and_pd(_mm256_cmp_pd(fx, zero, _CMP_GE_OQ),
                                   _mm256_cmp_pd(fx, nx, _CMP_LT_OQ));
    inside = _mm256_and_pd(inside, _mm256_cmp_pd(fy, zero, _CMP_GE_OQ));
    inside = _mm256_and_pd(inside, _mm256_cmp_pd(fy, ny, _CMP_LT_OQ));
    inside = _mm256_and_pd(inside, _mm256_cmp_pd(fz, zero, _CMP_GE_OQ));
    inside = _mm256_and_pd(inside, _mm256_cmp_pd(fz, nz, _CMP_LT_OQ));
    // Out-of-range lanes convert to garbage and are masked below.
    const __m256i ix = _mm256_cvtepi32_epi64(_mm256_cvttpd_epi32(_mm256_and_pd(fx, inside)));
    const __m256i iy = _mm256_cvtepi32_epi64(_mm256_cvttpd_epi32(_mm256_and_pd(fy, inside)));
    const __m256i iz = _mm256_cvtepi32_epi64(_mm256_cvttpd_epi32(_mm256_and_pd(fz, inside)));
    const __m256i inner = _mm256_add_epi64(iy, _mm256_mul_epi32(ny64, iz));
    const __m256i linear = _mm256_add_epi64(ix, _mm256_mul_epi32(nx64, inner));
    const __m256i result = _mm256_blendv_epi8(minus_one, linear, _mm256_castpd_si256(inside));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(index + i), result);
  }
  if (i < n) scalar_table().voxel_index(xyz + 3 * i, n - i, g, index + i);
}

void composite_avx2(const std::uint8_t* rgb, const std::uint8_t* mask, const std::uint8_t* plate,
                    const std::uint8_t* overlay, std::size_t pixels, std::uint8_t* out) {
  if (mask == nullptr || overlay == nullptr) {
    scalar_table().composite(rgb, mask, plate, overlay, pixels, out);
    return;
  }
  const __m128i to_rgbx = _mm_setr_epi8(0, 1, 2, -128, 3, 4, 5, -128, 6, 7, 8, -128, 9, 10, 11,
                                        -128);
  const __m128i from_rgbx = _mm_setr_epi8(0, 1, 2, 4, 5, 6, 8, 9, 10, 12, 13, 14, -128, -128,
                                          -128, -128);
  const __m128i alpha_bcast = _mm_setr_epi8(3, 3, 3, 3, 7, 7, 7, 7, 11, 11, 11, 11, 15, 15, 15,
                                            15);
  const __m256i c255 = _mm256_set1_epi16(255);
  const __m256i c128 = _mm256_set1_epi16(128);
  std::size_t i = 0;
  // Loads read 16 bytes of RGB starting at 3 * i; keep them inside the buffer.
  for (; i + 6 <= pixels; i += 4) {
    const __m128i src_rgb = _mm_shuffle_epi8(
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(rgb + 3 * i)), to_rgbx);
    const __m128i src_plate = _mm_shuffle_epi8(
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(plate + 3 * i)), to_rgbx);
    std::int32_t m4;
    std::memcpy(&m4, mask + i, 4);
    const __m128i keep = _mm_cmpeq_epi32(_mm_cvtepu8_epi32(_mm_cvtsi32_si128(m4)),
                                         _mm_setzero_si128());
    const __m128i src = _mm_blendv_epi8(src_plate, src_rgb, keep);
    const __m128i ov = _mm_loadu_si128(reinterpret_cast<const __m128i*>(overlay + 4 * i));
    const __m128i alpha = _mm_shuffle_epi8(ov, alpha_bcast);

    const __m256i s16 = _mm256_cvtepu8_epi16(src);
    const __m256i o16 = _mm256_cvtepu8_epi16(ov);
    const __m256i a16 = _mm256_cvtepu8_epi16(alpha);
    const __m256i x = _mm256_add_epi16(_mm256_mullo_epi16(s16, _mm256_sub_epi16(c255, a16)),
                                       _mm256_mullo_epi16(o16, a16));
    const __m256i t = _mm256_add_epi16(x, c128);
    const __m256i r = _mm256_srli_epi16(_mm256_add_epi16(t, _mm256_srli_epi16(t, 8)), 8);
    const __m256i packed = _mm256_permute4x64_epi64(_mm256_packus_epi16(r, r), 0b1000);
    const __m128i rgbx = _mm256_castsi256_si128(packed);
    alignas(16) std::uint8_t tmp[16];
    _mm_store_si128(reinterpret_cast<__m128i*>(tmp), _mm_shuffle_epi8(rgbx, from_rgbx));
    std::memcpy(out + 3 * i, tmp, 12);
  }
  if (i < pixels) {
    scalar_table().composite(rgb + 3 * i, mask + i, plate + 3 * i, overlay + 4 * i, pixels - i,
                             out + 3 * i);
  }
}

}  // namespace

const KernelTable& avx2_table_impl() {
  static const KernelTable table{"avx2", unproject_row_avx2, plane_inliers_avx2,
                                 voxel_index_avx2, composite_avx2};
  return table;
}

}  // namespace demoforge::kernels
