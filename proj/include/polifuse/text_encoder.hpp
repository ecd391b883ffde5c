#ifndef POLIFUSE_TEXT_ENCODER_HPP_
#define POLIFUSE_TEXT_ENCODER_HPP_

#include <cctype>
#include <string>
#include <vector>

#include "polifuse/nn.hpp"

namespace polifuse {

// Reserved token ids shared by the tokenizer and every text model.
inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kReservedIds = 4;

struct TextConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int max_seq_len = 128;
  int vocab_size = 2048;
  double dropout_rate = 0.1;
};

inline void validate(const TextConfig& c) {
  if (c.d_model <= 0 || c.n_layers <= 0 || c.n_heads <= 0 || c.max_seq_len < 2)
    throw ValidationError("text config dimensions must be positive");
  if (c.d_model % c.n_heads != 0) throw ValidationError("n_heads must divide d_model");
  if (c.vocab_size <= kReservedIds) throw ValidationError("vocab_size too small");
  if (c.dropout_rate < 0 || c.dropout_rate >= 1)
    throw ValidationError("dropout_rate must lie in [0,1)");
}

// Hashing tokenizer: lowercase, split on anything that is not a letter or
// digit, hash each word into [4, vocab_size). Output is bos + words + eos,
// truncated to max_seq_len.
inline std::vector<int> tokenize(const std::string& text, int vocab_size, int max_seq_len) {
  if (vocab_size <= kReservedIds) throw ValidationError("vocab_size too small");
  std::vector<int> ids;
  ids.push_back(kBosId);
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    const std::uint64_t h = fnv1a64(word);
    ids.push_back(kReservedIds + static_cast<int>(h % (vocab_size - kReservedIds)));
    word.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c))
      word.push_back(static_cast<char>(std::tolower(c)));
    else
      flush();
  }
  flush();
  ids.push_back(kEosId);
  if (static_cast<int>(ids.size()) > max_seq_len) ids.resize(max_seq_len);
  return ids;
}

// Graph-level encoder result: tape node ids for the state sequence and the
// pooled vector, plus the per-position validity mask.
struct EncoderNodes {
  int states = -1;
  int pooled = -1;
  std::vector<char> mask;
};

template <typename S>
void init_text_encoder(ParameterSet<S>& p, const TextConfig& c, Rng& rng,
                       const std::string& prefix = "text") {
  validate(c);
  p.create_gaussian(prefix + "/tok_emb", c.vocab_size, c.d_model, rng, kInitStd);
  p.create_gaussian(prefix + "/pos_emb", c.max_seq_len, c.d_model, rng, kInitStd);
  for (int l = 0; l < c.n_layers; ++l)
    init_prenorm_block(p, prefix + "/layer" + std::to_string(l), c.d_model, rng);
  init_norm(p, prefix + "/final_norm", c.d_model);
}

// Pre-norm transformer over a single id sequence. Padding ids are masked out
// of every attention step; the pooled vector is the bos-position state.
template <typename S>
EncoderNodes encode_text(Tape<S>& t, ParameterSet<S>& p, const TextConfig& c,
                         const std::vector<int>& ids, const ForwardOptions& fwd,
                         const std::string& prefix = "text") {
  if (ids.empty() || static_cast<int>(ids.size()) > c.max_seq_len)
    throw ValidationError("token sequence length out of range");
  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= c.vocab_size)
      throw ValidationError("token id out of vocab range");
    positions[i] = static_cast<int>(i);
  }

  EncoderNodes out;
  out.mask.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out.mask[i] = ids[i] != kPadId;

  int x = t.add(t.embedding(p.bind(t, prefix + "/tok_emb"), ids),
                t.embedding(p.bind(t, prefix + "/pos_emb"), positions));
  x = maybe_dropout(t, x, fwd);
  const MatrixX<S> mask = attention_mask<S>(static_cast<Eigen::Index>(ids.size()),
                                            static_cast<Eigen::Index>(ids.size()), out.mask,
                                            /*causal=*/false);
  for (int l = 0; l < c.n_layers; ++l)
    x = prenorm_block(t, p, prefix + "/layer" + std::to_string(l), x, c.n_heads, c.d_model,
                      &mask, fwd);
  x = norm(t, p, prefix + "/final_norm", x);
  out.states = x;
  out.pooled = t.slice_rows(x, 0, 1);
  return out;
}

}  // namespace polifuse

#endif  // POLIFUSE_TEXT_ENCODER_HPP_
