#ifndef POLIFUSE_CAPTIONER_HPP_
#define POLIFUSE_CAPTIONER_HPP_

#include <algorithm>
#include <string>
#include <vector>

#include "polifuse/nn.hpp"
#include "polifuse/text_encoder.hpp"

namespace polifuse {

struct CaptionConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int max_seq_len = 128;
  int vocab_size = 2048;
  double dropout_rate = 0.1;
};

inline void validate(const CaptionConfig& c) {
  TextConfig t{c.d_model, c.n_layers, c.n_heads, c.max_seq_len, c.vocab_size, c.dropout_rate};
  validate(t);
}

enum class CaptionDirection { kForward, kBackward };

// Each direction owns a full parameter bank: the backward decoder is not a
// reparameterization of the forward one.
inline std::string caption_prefix(CaptionDirection dir) {
  return dir == CaptionDirection::kForward ? "cap_fwd" : "cap_bwd";
}

template <typename S>
void init_caption_decoder(ParameterSet<S>& p, const CaptionConfig& c, Rng& rng,
                          const std::string& prefix) {
  validate(c);
  p.create_gaussian(prefix + "/tok_emb", c.vocab_size, c.d_model, rng, kInitStd);
  p.create_gaussian(prefix + "/pos_emb", c.max_seq_len, c.d_model, rng, kInitStd);
  for (int l = 0; l < c.n_layers; ++l)
    init_decoder_block(p, prefix + "/layer" + std::to_string(l), c.d_model, rng);
  init_norm(p, prefix + "/final_norm", c.d_model);
  init_linear(p, prefix + "/out", c.d_model, c.vocab_size, rng);
}

template <typename S>
void init_caption_decoders(ParameterSet<S>& p, const CaptionConfig& c, Rng& rng) {
  init_caption_decoder(p, c, rng, caption_prefix(CaptionDirection::kForward));
  init_caption_decoder(p, c, rng, caption_prefix(CaptionDirection::kBackward));
}

// Next-token logits over the caption, conditioned on image states through
// cross-attention. Row t holds the logits for position t+1 of the sequence the
// decoder actually read; the backward direction reads the reversed caption
// with its own parameter bank, so row t predicts the preceding token instead.
template <typename S>
int decode_caption_logits(Tape<S>& t, ParameterSet<S>& p, const CaptionConfig& c,
                          int image_states, const std::vector<int>& caption_ids,
                          CaptionDirection dir, const ForwardOptions& fwd) {
  if (caption_ids.empty()) throw ValidationError("caption must not be empty");
  if (static_cast<int>(caption_ids.size()) > c.max_seq_len)
    throw ValidationError("caption length exceeds max_seq_len");
  std::vector<int> ids = caption_ids;
  if (dir == CaptionDirection::kBackward) std::reverse(ids.begin(), ids.end());
  const std::string prefix = caption_prefix(dir);

  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= c.vocab_size)
      throw ValidationError("caption token id out of vocab range");
    positions[i] = static_cast<int>(i);
  }
  int x = t.add(t.embedding(p.bind(t, prefix + "/tok_emb"), ids),
                t.embedding(p.bind(t, prefix + "/pos_emb"), positions));
  x = maybe_dropout(t, x, fwd);
  const MatrixX<S> causal = attention_mask<S>(static_cast<Eigen::Index>(ids.size()),
                                              static_cast<Eigen::Index>(ids.size()), {},
                                              /*causal=*/true);
  for (int l = 0; l < c.n_layers; ++l)
    x = decoder_block(t, p, prefix + "/layer" + std::to_string(l), x, image_states, c.n_heads,
                      c.d_model, causal, fwd);
  x = norm(t, p, prefix + "/final_norm", x);
  return linear(t, p, prefix + "/out", x);
}

}  // namespace polifuse

#endif  // POLIFUSE_CAPTIONER_HPP_
