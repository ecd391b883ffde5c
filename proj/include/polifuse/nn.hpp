#ifndef POLIFUSE_NN_HPP_
#define POLIFUSE_NN_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "polifuse/autodiff.hpp"
#include "polifuse/common.hpp"
#include "polifuse/params.hpp"

namespace polifuse {

// Transformer building blocks. Every block comes as an init_* function that
// creates named parameters and a forward function that binds them; the
// forward throws on any name the init pass did not create, which keeps the
// two in lockstep.

inline constexpr double kInitStd = 0.02;

template <typename S>
void init_linear(ParameterSet<S>& p, const std::string& name, int in, int out, Rng& rng) {
  p.create_gaussian(name + "/w", in, out, rng, kInitStd);
  p.create_constant(name + "/b", 1, out, 0.0);
}

template <typename S>
int linear(Tape<S>& t, ParameterSet<S>& p, const std::string& name, int x) {
  return t.add_rowwise(t.matmul(x, p.bind(t, name + "/w")), p.bind(t, name + "/b"));
}

template <typename S>
void init_norm(ParameterSet<S>& p, const std::string& name, int d) {
  p.create_constant(name + "/gain", 1, d, 1.0);
  p.create_constant(name + "/bias", 1, d, 0.0);
}

template <typename S>
int norm(Tape<S>& t, ParameterSet<S>& p, const std::string& name, int x) {
  return t.layer_norm(x, p.bind(t, name + "/gain"), p.bind(t, name + "/bias"));
}

// Additive attention mask: 0 where a query may look, a large negative number
// where it may not. Softmax turns the blocked entries into exact zeros.
template <typename S>
MatrixX<S> attention_mask(Eigen::Index n_q, Eigen::Index n_k,
                          const std::vector<char>& key_valid, bool causal) {
  MatrixX<S> m = MatrixX<S>::Zero(n_q, n_k);
  constexpr S kBlocked = S(-1e30);
  for (Eigen::Index q = 0; q < n_q; ++q)
    for (Eigen::Index k = 0; k < n_k; ++k) {
      const bool pad = !key_valid.empty() && !key_valid[static_cast<std::size_t>(k)];
      if (pad || (causal && k > q)) m(q, k) = kBlocked;
    }
  return m;
}

// d_kv is the width of the key/value input stream when it differs from the
// query stream (cross-attention between unequal encoders).
template <typename S>
void init_attention(ParameterSet<S>& p, const std::string& name, int d_model, Rng& rng,
                    int d_kv = -1) {
  if (d_kv < 0) d_kv = d_model;
  init_linear(p, name + "/q", d_model, d_model, rng);
  init_linear(p, name + "/k", d_kv, d_model, rng);
  init_linear(p, name + "/v", d_kv, d_model, rng);
  init_linear(p, name + "/o", d_model, d_model, rng);
}

// Multi-head scaled dot-product attention. Queries come from q_in, keys and
// values from kv_in; pass mask=nullptr for unmasked attention.
template <typename S>
int attention(Tape<S>& t, ParameterSet<S>& p, const std::string& name, int q_in, int kv_in,
              int n_heads, int d_model, const MatrixX<S>* mask) {
  if (d_model % n_heads != 0) throw ValidationError("head count must divide d_model");
  const int dh = d_model / n_heads;
  const int q = linear(t, p, name + "/q", q_in);
  const int k = linear(t, p, name + "/k", kv_in);
  const int v = linear(t, p, name + "/v", kv_in);
  std::vector<int> heads;
  heads.reserve(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    const int qh = t.slice_cols(q, h * dh, dh);
    const int kh = t.slice_cols(k, h * dh, dh);
    const int vh = t.slice_cols(v, h * dh, dh);
    int scores = t.cmul(t.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    if (mask) scores = t.add_const(scores, *mask);
    heads.push_back(t.matmul(t.softmax_rows(scores), vh));
  }
  return linear(t, p, name + "/o", t.concat_cols(heads));
}

template <typename S>
void init_ffn(ParameterSet<S>& p, const std::string& name, int d_model, Rng& rng) {
  init_linear(p, name + "/up", d_model, 4 * d_model, rng);
  init_linear(p, name + "/down", 4 * d_model, d_model, rng);
}

template <typename S>
int ffn(Tape<S>& t, ParameterSet<S>& p, const std::string& name, int x) {
  return linear(t, p, name + "/down", t.gelu(linear(t, p, name + "/up", x)));
}

// Shared knobs for the forward pass; dropout only fires when train is set.
struct ForwardOptions {
  bool train = false;
  double dropout_rate = 0.0;
  Rng* rng = nullptr;
};

template <typename S>
int maybe_dropout(Tape<S>& t, int x, const ForwardOptions& fwd) {
  return t.dropout(x, fwd.dropout_rate, fwd.train, fwd.rng);
}

template <typename S>
void init_prenorm_block(ParameterSet<S>& p, const std::string& name, int d_model, Rng& rng) {
  init_norm(p, name + "/norm1", d_model);
  init_attention(p, name + "/attn", d_model, rng);
  init_norm(p, name + "/norm2", d_model);
  init_ffn(p, name + "/ffn", d_model, rng);
}

// Pre-norm self-attention block: x + attn(LN(x)), then x + ffn(LN(x)).
template <typename S>
int prenorm_block(Tape<S>& t, ParameterSet<S>& p, const std::string& name, int x, int n_heads,
                  int d_model, const MatrixX<S>* mask, const ForwardOptions& fwd) {
  int n1 = norm(t, p, name + "/norm1", x);
  int a = attention(t, p, name + "/attn", n1, n1, n_heads, d_model, mask);
  x = t.add(x, maybe_dropout(t, a, fwd));
  int f = ffn(t, p, name + "/ffn", norm(t, p, name + "/norm2", x));
  return t.add(x, maybe_dropout(t, f, fwd));
}

// Decoder block: causal self-attention, cross-attention to a memory sequence,
// then the feed-forward, all pre-norm.
template <typename S>
void init_decoder_block(ParameterSet<S>& p, const std::string& name, int d_model, Rng& rng) {
  init_norm(p, name + "/norm1", d_model);
  init_attention(p, name + "/self", d_model, rng);
  init_norm(p, name + "/norm2", d_model);
  init_attention(p, name + "/cross", d_model, rng);
  init_norm(p, name + "/norm3", d_model);
  init_ffn(p, name + "/ffn", d_model, rng);
}

template <typename S>
int decoder_block(Tape<S>& t, ParameterSet<S>& p, const std::string& name, int x, int memory,
                  int n_heads, int d_model, const MatrixX<S>& causal_mask,
                  const ForwardOptions& fwd) {
  int n1 = norm(t, p, name + "/norm1", x);
  x = t.add(x, maybe_dropout(t, attention(t, p, name + "/self", n1, n1, n_heads, d_model,
                                          &causal_mask),
                             fwd));
  int c = attention(t, p, name + "/cross", norm(t, p, name + "/norm2", x), memory, n_heads,
                    d_model, static_cast<const MatrixX<S>*>(nullptr));
  x = t.add(x, maybe_dropout(t, c, fwd));
  int f = ffn(t, p, name + "/ffn", norm(t, p, name + "/norm3", x));
  return t.add(x, maybe_dropout(t, f, fwd));
}

}  // namespace polifuse

#endif  // POLIFUSE_NN_HPP_
