#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "toatod/autograd.hpp"

namespace toatod {

// Bottleneck width h. Insertion point (after the feed-forward residual) and
// the trailing LayerNorm are fixed by the architecture.
struct AdapterSpec {
  int bottleneck_dim = 0;

  static AdapterSpec defaults_for(int d_model) { return AdapterSpec{d_model / 2}; }
  void validate(int d_model) const;
  bool operator==(const AdapterSpec&) const = default;
};

// LN(W_up * ReLU(W_down * H + b_down) + b_up + H), applied to each row of H.
struct AdapterLayer {
  ag::Parameter down_w;  // d x h
  ag::Parameter down_b;  // 1 x h
  ag::Parameter up_w;    // h x d
  ag::Parameter up_b;    // 1 x d
  ag::Parameter ln_gamma;
  ag::Parameter ln_beta;

  // Down-projection random with std 1/sqrt(d); up-projection zero, so a fresh
  // adapter computes LN(H).
  static AdapterLayer init(int d_model, int bottleneck, std::mt19937_64& rng, const std::string& prefix);

  int d_model() const { return static_cast<int>(down_w.value.rows()); }
  int bottleneck() const { return static_cast<int>(down_w.value.cols()); }

  std::vector<ag::Parameter*> parameters();
  std::vector<const ag::Parameter*> parameters() const;
};

// Per-block 2hd + d + h, plus 2d for the LayerNorm scale and shift.
std::size_t count_adapter_params(std::size_t d, std::size_t h, bool include_ln);

ag::Mat adapter_forward(const ag::Mat& H, const AdapterLayer& layer);
ag::Var adapter_forward(ag::Graph& g, ag::Var H, AdapterLayer& layer, bool trainable);

}  // namespace toatod
