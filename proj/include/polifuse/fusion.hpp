#pragma once
// Combining text and image representations into a joint vector, plus the
// linear classification head that consumes it. Three pooled-vector fusers
// (concat, hadamard, gated) operate on the two encoders' pooled outputs; the
// co-attention fuser exchanges information between the full token and patch
// sequences; early fusion skips the separate encoders entirely and runs one
// transformer over the concatenated token and patch embeddings.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "image_encoder.hpp"
#include "nn.hpp"
#include "params.hpp"
#include "text_encoder.hpp"

namespace polifuse {

enum class FusionMethod { kConcat, kHadamard, kGated, kCoattention, kEarly };

inline const char* to_string(FusionMethod m) {
  switch (m) {
    case FusionMethod::kConcat: return "concat";
    case FusionMethod::kHadamard: return "hadamard";
    case FusionMethod::kGated: return "gated";
    case FusionMethod::kCoattention: return "coattention";
    case FusionMethod::kEarly: return "early";
  }
  throw std::logic_error("unreachable fusion method");
}

inline FusionMethod parse_fusion_method(const std::string& s) {
  if (s == "concat") return FusionMethod::kConcat;
  if (s == "hadamard") return FusionMethod::kHadamard;
  if (s == "gated") return FusionMethod::kGated;
  if (s == "coattention") return FusionMethod::kCoattention;
  if (s == "early") return FusionMethod::kEarly;
  throw ValidationError("unknown fusion method: " + s);
}

struct FusionConfig {
  FusionMethod method = FusionMethod::kConcat;
  int n_cross_layers = 6;
  int d_joint = 64;
  int n_classes = 2;

  void validate() const {
    if (n_cross_layers < 1) throw ValidationError("n_cross_layers must be positive");
    if (d_joint < 1) throw ValidationError("d_joint must be positive");
    if (n_classes != 2 && n_classes != 3 && n_classes != 5)
      throw ValidationError("n_classes must be 2, 3, or 5");
  }
};

// ---------------------------------------------------------------------------
// Pooled-vector fusion: concat, hadamard, gated.
// ---------------------------------------------------------------------------

template <typename S>
void init_fuse_pooled(ParameterSet<S>& p, const FusionConfig& c, int d_text, int d_image,
                      Rng& rng) {
  switch (c.method) {
    case FusionMethod::kConcat:
      init_linear(p, "fusion/join", d_text + d_image, c.d_joint, rng);
      return;
    case FusionMethod::kHadamard:
      if (d_text != d_image)
        throw ValidationError("hadamard fusion needs equal pooled dimensions");
      init_linear(p, "fusion/join", d_text, c.d_joint, rng);
      return;
    case FusionMethod::kGated:
      if (d_text != d_image)
        throw ValidationError("gated fusion needs equal pooled dimensions");
      init_linear(p, "fusion/gate", d_text + d_image, d_image, rng);
      init_linear(p, "fusion/join", d_text, c.d_joint, rng);
      return;
    default:
      throw ValidationError("fuse_pooled handles concat, hadamard, and gated only");
  }
}

// h_text and h_image are 1 x d pooled rows. The gated form keeps the text
// vector intact and adds a sigmoid-gated fraction of the image vector, so a
// gate stuck at zero degrades gracefully to a text-only model.
template <typename S>
int fuse_pooled(Tape<S>& t, ParameterSet<S>& p, const FusionConfig& c, int h_text,
                int h_image) {
  switch (c.method) {
    case FusionMethod::kConcat:
      return linear(t, p, "fusion/join", t.concat_cols({h_text, h_image}));
    case FusionMethod::kHadamard:
      return linear(t, p, "fusion/join", t.hadamard(h_text, h_image));
    case FusionMethod::kGated: {
      const int lambda =
          t.sigmoid(linear(t, p, "fusion/gate", t.concat_cols({h_text, h_image})));
      return linear(t, p, "fusion/join", t.add(h_text, t.hadamard(lambda, h_image)));
    }
    default:
      throw ValidationError("fuse_pooled handles concat, hadamard, and gated only");
  }
}

// ---------------------------------------------------------------------------
// Co-attention fusion over full state sequences.
// ---------------------------------------------------------------------------

template <typename S>
void init_coattend(ParameterSet<S>& p, const FusionConfig& c, int d_text, int d_image,
                   Rng& rng) {
  for (int l = 0; l < c.n_cross_layers; ++l) {
    const std::string base = "fusion/co" + std::to_string(l);
    init_attention(p, base + "/text/attn", d_text, rng, d_image);
    init_norm(p, base + "/text/norm1", d_text);
    init_ffn(p, base + "/text/ffn", d_text, rng);
    init_norm(p, base + "/text/norm2", d_text);
    init_attention(p, base + "/img/attn", d_image, rng, d_text);
    init_norm(p, base + "/img/norm1", d_image);
    init_ffn(p, base + "/img/ffn", d_image, rng);
    init_norm(p, base + "/img/norm2", d_image);
  }
  init_linear(p, "fusion/join", d_text + d_image, c.d_joint, rng);
}

struct CoattendNodes {
  int joint = -1;
  int text_states = -1;
  int image_states = -1;
  int layers_applied = 0;
};

namespace detail {

// One post-norm sublayer pair: cross-attention into the other stream, then a
// position-wise feed-forward, each wrapped in residual + normalization.
template <typename S>
int coattention_stream(Tape<S>& t, ParameterSet<S>& p, const std::string& base, int x,
                       int other, int n_heads, int d_model, const MatrixX<S>& mask,
                       const ForwardOptions& fwd) {
  const int a = attention(t, p, base + "/attn", x, other, n_heads, d_model, &mask);
  x = norm(t, p, base + "/norm1", t.add(x, maybe_dropout(t, a, fwd)));
  const int f = ffn(t, p, base + "/ffn", x);
  return norm(t, p, base + "/norm2", t.add(x, maybe_dropout(t, f, fwd)));
}

}  // namespace detail

// Runs n_cross_layers rounds in which the text stream queries the image
// stream and the image stream queries the text stream, both reading the
// previous round's states. There is no intra-modal self-attention; all mixing
// within a stream happens through the feed-forward sublayers. The joint
// vector concatenates the two pooled streams (text: leading position, image:
// mean over patches) and projects to d_joint.
template <typename S>
CoattendNodes coattend(Tape<S>& t, ParameterSet<S>& p, const FusionConfig& c,
                       const EncoderNodes& text, const EncoderNodes& image, int n_heads,
                       const ForwardOptions& fwd = {}) {
  const int d_text = static_cast<int>(t.val(text.states).cols());
  const int d_image = static_cast<int>(t.val(image.states).cols());
  const Eigen::Index n_tok = t.val(text.states).rows();
  const Eigen::Index n_patch = t.val(image.states).rows();
  const MatrixX<S> text_to_img = attention_mask<S>(n_tok, n_patch, image.mask, false);
  const MatrixX<S> img_to_text = attention_mask<S>(n_patch, n_tok, text.mask, false);

  CoattendNodes out;
  int tx = text.states;
  int ix = image.states;
  for (int l = 0; l < c.n_cross_layers; ++l) {
    const std::string base = "fusion/co" + std::to_string(l);
    const int tx_next = detail::coattention_stream(t, p, base + "/text", tx, ix, n_heads,
                                                   d_text, text_to_img, fwd);
    const int ix_next = detail::coattention_stream(t, p, base + "/img", ix, tx, n_heads,
                                                   d_image, img_to_text, fwd);
    tx = tx_next;
    ix = ix_next;
    ++out.layers_applied;
  }
  out.text_states = tx;
  out.image_states = ix;
  const int pooled_text = t.slice_rows(tx, 0, 1);
  const int pooled_image = t.mean_rows(ix, image.mask);
  out.joint = linear(t, p, "fusion/join", t.concat_cols({pooled_text, pooled_image}));
  return out;
}

// ---------------------------------------------------------------------------
// Early fusion: one transformer over [cls] + token embeddings + patch
// embeddings.
// ---------------------------------------------------------------------------

inline int early_patch_count(const ImageConfig& ic) {
  const int grid = ic.resolution / ic.patch_size;
  return grid * grid;
}

template <typename S>
void init_early_fuse(ParameterSet<S>& p, const TextConfig& tc, const ImageConfig& ic,
                     const FusionConfig& fc, Rng& rng) {
  const int d = tc.d_model;
  p.create_gaussian("early/cls", 1, d, rng, kInitStd);
  p.create_gaussian("early/tok_emb", tc.vocab_size, d, rng, kInitStd);
  p.create_gaussian("early/text_pos", tc.max_seq_len, d, rng, kInitStd);
  init_linear(p, "early/patch_embed", 3 * ic.patch_size * ic.patch_size, d, rng);
  p.create_gaussian("early/img_pos", early_patch_count(ic), d, rng, kInitStd);
  p.create_gaussian("early/type_emb", 2, d, rng, kInitStd);
  for (int l = 0; l < tc.n_layers; ++l)
    init_prenorm_block(p, "early/layer" + std::to_string(l), d, rng);
  init_norm(p, "early/final_norm", d);
  init_linear(p, "early/join", d, fc.d_joint, rng);
}

// The combined sequence is [cls], then the text ids, then the image patches.
// Every position gets a modality-type embedding (row 0 of type_emb for the
// cls slot and the text ids, row 1 for the patches) plus a positional
// embedding local to its own modality; the cls slot's own parameter doubles
// as its positional signal. The joint vector is the final cls state projected
// to d_joint. Face-restricted variants are produced upstream by preprocessing
// the image before it reaches this function.
template <typename S>
EncoderNodes early_fuse(Tape<S>& t, ParameterSet<S>& p, const TextConfig& tc,
                        const ImageConfig& ic, const FusionConfig& fc,
                        const std::vector<int>& ids, const Image<float>& img,
                        const ForwardOptions& fwd = {}) {
  if (ids.empty()) throw ValidationError("early fusion needs a tokenized text");
  if (static_cast<int>(ids.size()) > tc.max_seq_len)
    throw ValidationError("combined sequence exceeds the early fusion length limit");
  for (int id : ids)
    if (id < 0 || id >= tc.vocab_size) throw ValidationError("token id out of range");
  if (img.height != ic.resolution || img.width != ic.resolution)
    throw ValidationError("image does not match the configured resolution");

  const int n_tok = static_cast<int>(ids.size());
  const int n_patch = early_patch_count(ic);
  const int type_text = t.slice_rows(p.bind(t, "early/type_emb"), 0, 1);
  const int type_image = t.slice_rows(p.bind(t, "early/type_emb"), 1, 1);

  const int cls = t.add(p.bind(t, "early/cls"), type_text);
  int toks = t.add(t.embedding(p.bind(t, "early/tok_emb"), ids),
                   t.slice_rows(p.bind(t, "early/text_pos"), 0, n_tok));
  toks = t.add_rowwise(toks, type_text);
  int patches = t.add(linear(t, p, "early/patch_embed",
                             t.constant(patchify<S>(img, ic.patch_size))),
                      p.bind(t, "early/img_pos"));
  patches = t.add_rowwise(patches, type_image);

  EncoderNodes out;
  out.mask.assign(static_cast<std::size_t>(1 + n_tok + n_patch), 1);
  for (int i = 0; i < n_tok; ++i)
    out.mask[static_cast<std::size_t>(1 + i)] = ids[static_cast<std::size_t>(i)] != kPadId;

  int x = maybe_dropout(t, t.concat_rows({cls, toks, patches}), fwd);
  const Eigen::Index n = t.val(x).rows();
  const MatrixX<S> mask = attention_mask<S>(n, n, out.mask, false);
  for (int l = 0; l < tc.n_layers; ++l)
    x = prenorm_block(t, p, "early/layer" + std::to_string(l), x, tc.n_heads, tc.d_model,
                      &mask, fwd);
  x = norm(t, p, "early/final_norm", x);
  out.states = x;
  out.pooled = linear(t, p, "early/join", t.slice_rows(x, 0, 1));
  return out;
}

// ---------------------------------------------------------------------------
// Classification head.
// ---------------------------------------------------------------------------

template <typename S>
void init_classifier(ParameterSet<S>& p, const FusionConfig& c, Rng& rng) {
  init_linear(p, "head/out", c.d_joint, c.n_classes, rng);
}

template <typename S>
int classify(Tape<S>& t, ParameterSet<S>& p, int joint) {
  return linear(t, p, "head/out", joint);
}

// Ties break toward the lowest class index.
template <typename S>
int argmax_row(const MatrixX<S>& logits) {
  if (logits.rows() != 1 || logits.cols() < 1)
    throw ValidationError("argmax expects a single logit row");
  int best = 0;
  for (int j = 1; j < logits.cols(); ++j)
    if (logits(0, j) > logits(0, best)) best = j;
  return best;
}

}  // namespace polifuse
