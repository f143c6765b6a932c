#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "df/error.hpp"
#include "df/rng.hpp"
#include "df/tensor/ops.hpp"
#include "df/tensor/param_store.hpp"

namespace df::ddg {

using tensor::ParamStore;
using tensor::Tensor;

// Three-level encoder/decoder over [B,in,H,W] with residual blocks, a single
// self-attention block at the bottleneck and timestep conditioning injected as
// a per-sample channel bias in every residual block. Widths run base, 2*base,
// 4*base; H and W must be divisible by 4 (two stride-2 stages).
struct UNetConfig {
  int in_channels = 2;  // denoised target stacked with its conditioning map
  int out_channels = 1;
  int base = 16;
  int time_dim = 64;

  void validate() const {
    if (in_channels < 1 || out_channels < 1) throw ValidationError("unet: bad channel counts");
    if (base < 2) throw ValidationError("unet: base width must be >= 2");
    if (time_dim < 4 || time_dim % 2 != 0)
      throw ValidationError("unet: time_dim must be even and >= 4");
  }
};

namespace detail {

inline int norm_groups(int channels) {
  int g = channels < 8 ? channels : 8;
  while (channels % g != 0) --g;
  return g;
}

template <class T>
void add_conv(ParamStore<T>& ps, Prng& rng, const std::string& name, int f, int c, int k,
              bool zero_init = false) {
  auto w = Tensor<T>::zeros({f, c, k, k});
  if (!zero_init) tensor::fill_normal(w, rng, std::sqrt(2.0 / (static_cast<double>(c) * k * k)));
  ps.add(name + ".w", std::move(w));
  ps.add(name + ".b", Tensor<T>::zeros({f}));
}

template <class T>
void add_linear(ParamStore<T>& ps, Prng& rng, const std::string& name, int in, int out) {
  auto w = Tensor<T>::zeros({in, out});
  tensor::fill_normal(w, rng, std::sqrt(1.0 / in));
  ps.add(name + ".w", std::move(w));
  ps.add(name + ".b", Tensor<T>::zeros({out}));
}

template <class T>
void add_norm(ParamStore<T>& ps, const std::string& name, int c) {
  ps.add(name + ".g", Tensor<T>::full({c}, T(1)));
  ps.add(name + ".b", Tensor<T>::zeros({c}));
}

template <class T>
void add_res_block(ParamStore<T>& ps, Prng& rng, const std::string& p, int cin, int cout,
                   int time_dim) {
  add_norm(ps, p + ".gn1", cin);
  add_conv(ps, rng, p + ".conv1", cout, cin, 3);
  add_linear(ps, rng, p + ".temb", time_dim, cout);
  add_norm(ps, p + ".gn2", cout);
  add_conv(ps, rng, p + ".conv2", cout, cout, 3);
  if (cin != cout) add_conv(ps, rng, p + ".skip", cout, cin, 1);
}

}  // namespace detail

template <class T>
class UNet {
 public:
  explicit UNet(UNetConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const UNetConfig& config() const { return cfg_; }

  // Registers every parameter in forward order; registration order is the
  // checkpoint order. All randomness comes from the supplied generator.
  void init_params(ParamStore<T>& ps, Prng& rng) const {
    const int b = cfg_.base, td = cfg_.time_dim;
    detail::add_linear(ps, rng, "time.l1", td, td);
    detail::add_linear(ps, rng, "time.l2", td, td);
    detail::add_conv(ps, rng, "stem", b, cfg_.in_channels, 3);
    detail::add_res_block(ps, rng, "enc0", b, b, td);
    detail::add_conv(ps, rng, "down0", 2 * b, b, 3);
    detail::add_res_block(ps, rng, "enc1", 2 * b, 2 * b, td);
    detail::add_conv(ps, rng, "down1", 4 * b, 2 * b, 3);
    detail::add_res_block(ps, rng, "mid.res1", 4 * b, 4 * b, td);
    detail::add_norm(ps, "mid.attn.gn", 4 * b);
    detail::add_conv(ps, rng, "mid.attn.q", 4 * b, 4 * b, 1);
    detail::add_conv(ps, rng, "mid.attn.k", 4 * b, 4 * b, 1);
    detail::add_conv(ps, rng, "mid.attn.v", 4 * b, 4 * b, 1);
    detail::add_conv(ps, rng, "mid.attn.proj", 4 * b, 4 * b, 1, /*zero_init=*/true);
    detail::add_res_block(ps, rng, "mid.res2", 4 * b, 4 * b, td);
    detail::add_conv(ps, rng, "up1.conv", 2 * b, 4 * b, 3);
    detail::add_res_block(ps, rng, "dec1", 4 * b, 2 * b, td);
    detail::add_conv(ps, rng, "up0.conv", b, 2 * b, 3);
    detail::add_res_block(ps, rng, "dec0", 2 * b, b, td);
    detail::add_norm(ps, "head.gn", b);
    detail::add_conv(ps, rng, "head", cfg_.out_channels, b, 3, /*zero_init=*/true);
  }

  Tensor<T> forward(ParamStore<T>& ps, const Tensor<T>& x, const std::vector<int>& steps) const {
    if (x.ndim() != 4 || x.dim(1) != cfg_.in_channels)
      throw ValidationError("unet: expected [B," + std::to_string(cfg_.in_channels) + ",H,W], got " +
                            tensor::shape_str(x.shape()));
    if (x.dim(0) != static_cast<int>(steps.size()))
      throw ValidationError("unet: one timestep per batch item");
    if (x.dim(2) % 4 != 0 || x.dim(3) % 4 != 0)
      throw ValidationError("unet: H and W must be divisible by 4");

    auto temb = tensor::sinusoidal_embedding<T>(steps, cfg_.time_dim);
    temb = tensor::linear(temb, ps.get("time.l1.w"), ps.get("time.l1.b"));
    temb = tensor::linear(tensor::silu(temb), ps.get("time.l2.w"), ps.get("time.l2.b"));
    const auto tact = tensor::silu(temb);

    const int b = cfg_.base;
    auto h0 = tensor::conv2d(x, ps.get("stem.w"), ps.get("stem.b"), 1, 1);
    h0 = res_block(ps, "enc0", h0, tact, b, b);
    auto h1 = tensor::conv2d(h0, ps.get("down0.w"), ps.get("down0.b"), 2, 1);
    h1 = res_block(ps, "enc1", h1, tact, 2 * b, 2 * b);
    auto h2 = tensor::conv2d(h1, ps.get("down1.w"), ps.get("down1.b"), 2, 1);
    h2 = res_block(ps, "mid.res1", h2, tact, 4 * b, 4 * b);
    h2 = attention(ps, "mid.attn", h2);
    h2 = res_block(ps, "mid.res2", h2, tact, 4 * b, 4 * b);
    auto u1 = tensor::conv2d(tensor::upsample_nearest2x(h2), ps.get("up1.conv.w"),
                             ps.get("up1.conv.b"), 1, 1);
    u1 = res_block(ps, "dec1", tensor::concat_channels(u1, h1), tact, 4 * b, 2 * b);
    auto u0 = tensor::conv2d(tensor::upsample_nearest2x(u1), ps.get("up0.conv.w"),
                             ps.get("up0.conv.b"), 1, 1);
    u0 = res_block(ps, "dec0", tensor::concat_channels(u0, h0), tact, 2 * b, b);
    auto out = tensor::silu(
        tensor::group_norm(u0, ps.get("head.gn.g"), ps.get("head.gn.b"), detail::norm_groups(b)));
    return tensor::conv2d(out, ps.get("head.w"), ps.get("head.b"), 1, 1);
  }

 private:
  Tensor<T> res_block(ParamStore<T>& ps, const std::string& p, const Tensor<T>& x,
                      const Tensor<T>& tact, int cin, int cout) const {
    auto h = tensor::group_norm(x, ps.get(p + ".gn1.g"), ps.get(p + ".gn1.b"),
                                detail::norm_groups(cin));
    h = tensor::conv2d(tensor::silu(h), ps.get(p + ".conv1.w"), ps.get(p + ".conv1.b"), 1, 1);
    h = tensor::add_sample_channel_bias(
        h, tensor::linear(tact, ps.get(p + ".temb.w"), ps.get(p + ".temb.b")));
    h = tensor::group_norm(h, ps.get(p + ".gn2.g"), ps.get(p + ".gn2.b"),
                           detail::norm_groups(cout));
    h = tensor::conv2d(tensor::silu(h), ps.get(p + ".conv2.w"), ps.get(p + ".conv2.b"), 1, 1);
    if (cin == cout) return tensor::add(x, h);
    return tensor::add(tensor::conv2d(x, ps.get(p + ".skip.w"), ps.get(p + ".skip.b")), h);
  }

  Tensor<T> attention(ParamStore<T>& ps, const std::string& p, const Tensor<T>& x) const {
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int N = H * W;
    // Dense N*N weights; meant for the coarsest grid only.
    if (N > 1024) throw ValidationError("attention: " + std::to_string(N) + " tokens is too many");
    auto hn = tensor::group_norm(x, ps.get(p + ".gn.g"), ps.get(p + ".gn.b"),
                                 detail::norm_groups(C));
    auto q = tensor::reshape(tensor::conv2d(hn, ps.get(p + ".q.w"), ps.get(p + ".q.b")), {B, C, N});
    auto k = tensor::reshape(tensor::conv2d(hn, ps.get(p + ".k.w"), ps.get(p + ".k.b")), {B, C, N});
    auto v = tensor::reshape(tensor::conv2d(hn, ps.get(p + ".v.w"), ps.get(p + ".v.b")), {B, C, N});
    auto logits = tensor::scale(tensor::bmm(tensor::transpose_last2(q), k),
                                static_cast<T>(1.0 / std::sqrt(static_cast<double>(C))));
    auto attn = tensor::softmax_lastdim(logits);  // [B,N,N], rows are queries
    auto o = tensor::reshape(tensor::bmm(v, tensor::transpose_last2(attn)), {B, C, H, W});
    return tensor::add(x, tensor::conv2d(o, ps.get(p + ".proj.w"), ps.get(p + ".proj.b")));
  }

  UNetConfig cfg_;
};

}  // namespace df::ddg
