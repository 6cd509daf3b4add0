#pragma once

// Shared helpers for module tests: parameter collection and randomization.

#include <random>
#include <vector>

#include "hfur/hir.hpp"
#include "hfur/impfrequp.hpp"
#include "hfur/net.hpp"

namespace testutil {

inline void collect(hfur::TfBlockParams& p, std::vector<hfur::Tensor>& out) {
  for (hfur::Tensor* t : {&p.n1_gamma, &p.n1_beta, &p.n2_gamma, &p.n2_beta, &p.wq, &p.wk, &p.wv,
                          &p.wo, &p.mlp_w1, &p.mlp_b1, &p.mlp_w2, &p.mlp_b2})
    out.push_back(*t);
}

inline void collect(hfur::ImpFreqUpParams& p, std::vector<hfur::Tensor>& out) {
  for (auto& b : p.tf_pre) collect(b, out);
  for (auto& b : p.tf_pixel) collect(b, out);
  for (hfur::Tensor* t : {&p.pixel_w, &p.pixel_b, &p.delta_luma_w, &p.delta_luma_b,
                          &p.delta_chroma_w, &p.delta_chroma_b, &p.qam_luma.scale,
                          &p.qam_luma.shift, &p.qam_chroma.scale, &p.qam_chroma.shift, &p.fuse_w,
                          &p.fuse_b})
    out.push_back(*t);
}

inline void collect(hfur::RefineParams& p, std::vector<hfur::Tensor>& out) {
  for (hfur::Tensor* t :
       {&p.conv_in_w, &p.conv_in_b, &p.wq, &p.wk, &p.wv, &p.dw_w, &p.dw_b, &p.conv_out_w, &p.conv_out_b})
    out.push_back(*t);
}

inline void collect(hfur::HirParams& p, std::vector<hfur::Tensor>& out) {
  out.push_back(p.split_w);
  out.push_back(p.split_b);
  collect(p.dr, out);
  collect(p.nr, out);
  for (hfur::Tensor* t : {&p.d2l_w, &p.d2l_b, &p.l2d_w, &p.l2d_b, &p.merge_w, &p.merge_b})
    out.push_back(*t);
}

/// Overwrites every tensor with small uniform values so zero-initialized
/// branches also carry signal during gradient checks.
inline void randomize(std::vector<hfur::Tensor>& params, std::mt19937_64& rng, double amp = 0.2) {
  for (auto& t : params)
    for (auto& v : t.data())
      v = (static_cast<double>(rng() >> 11) / 9007199254740992.0 * 2.0 - 1.0) * amp;
}

inline void zero_all(std::vector<hfur::Tensor>& params) {
  for (auto& t : params)
    for (auto& v : t.data()) v = 0.0;
}

}  // namespace testutil
