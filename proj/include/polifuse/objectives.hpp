#pragma once
// The three continued-pretraining losses plus the fine-tuning classification
// loss. Each builder adds a scalar loss node to the caller's tape; gradients
// flow to whatever leaves the input nodes depend on.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "captioner.hpp"
#include "common.hpp"
#include "params.hpp"

namespace polifuse {

struct TripletConfig {
  double margin = 1.0;

  void validate() const {
    if (!(margin >= 0)) throw ValidationError("triplet margin must be nonnegative");
  }
};

// Sum over rows of max(|a_r - p_r| - |a_r - n_r| + margin, 0) with Euclidean
// row distances. Callers that want comparable per-step logging divide by the
// row count; unit-normalizing the rows beforehand is the trainer's job.
template <typename S>
int triplet_margin_loss(Tape<S>& t, int a, int p, int n, double margin) {
  if (!(margin >= 0)) throw ValidationError("triplet margin must be nonnegative");
  // Copy the dimensions out: growing the tape below reallocates its node
  // storage, so references returned by val() must not be held across ops.
  const Eigen::Index rows = t.val(a).rows();
  const Eigen::Index cols = t.val(a).cols();
  if (rows != t.val(p).rows() || cols != t.val(p).cols() || rows != t.val(n).rows() ||
      cols != t.val(n).cols())
    throw ValidationError("triplet inputs must share one shape");

  MatrixX<S> m(1, 1);
  m(0, 0) = static_cast<S>(margin);
  std::vector<int> terms;
  terms.reserve(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int ar = t.slice_rows(a, static_cast<int>(r), 1);
    const int pr = t.slice_rows(p, static_cast<int>(r), 1);
    const int nr = t.slice_rows(n, static_cast<int>(r), 1);
    const int gap = t.sub(t.euclid(ar, pr), t.euclid(ar, nr));
    terms.push_back(t.relu(t.add_const(gap, m)));
  }
  return t.sum_all(t.concat_rows(terms));
}

inline constexpr const char* kLogTauName = "contrastive/log_tau";
inline constexpr double kInitTemperature = 0.07;

template <typename S>
void init_contrastive(ParameterSet<S>& p) {
  p.create_constant(kLogTauName, 1, 1, std::log(kInitTemperature));
}

// Symmetric InfoNCE over matched rows: S[i][j] = cosine(text_i, image_j)/tau,
// averaged cross-entropy against the diagonal in both the text-to-image and
// image-to-text directions. log_tau is a 1x1 node (usually the learnable
// temperature parameter).
template <typename S>
int info_nce_loss(Tape<S>& t, int text, int image, int log_tau) {
  const Eigen::Index n = t.val(text).rows();
  if (n != t.val(image).rows() || t.val(text).cols() != t.val(image).cols())
    throw ValidationError("contrastive batch must pair equal-shaped embeddings");
  if (n < 1) throw ValidationError("contrastive batch must not be empty");
  for (Eigen::Index r = 0; r < n; ++r)
    if (t.val(text).row(r).norm() < S(1e-12) || t.val(image).row(r).norm() < S(1e-12))
      throw ValidationError("contrastive batch has a zero-norm embedding row");

  const int sims = t.matmul_nt(t.l2_normalize_rows(text), t.l2_normalize_rows(image));
  const int scaled = t.mul_scalar(sims, t.exp_(t.neg(log_tau)));
  std::vector<int> diagonal(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < diagonal.size(); ++i) diagonal[i] = static_cast<int>(i);
  const int row_ce = t.cross_entropy_mean(scaled, diagonal);
  const int col_ce = t.cross_entropy_mean(t.transpose(scaled), diagonal);
  return t.cmul(t.add(row_ce, col_ce), 0.5);
}

// Mean next-token cross-entropy of the forward decoder plus the same for the
// backward decoder on the reversed caption. Positions whose target is padding
// are excluded from both means.
template <typename S>
int captioning_loss(Tape<S>& t, ParameterSet<S>& p, const CaptionConfig& c,
                    int image_states, const std::vector<int>& caption_ids,
                    const ForwardOptions& fwd = {}) {
  if (caption_ids.size() < 2)
    throw ValidationError("caption needs at least two tokens to score");

  auto direction_ce = [&](CaptionDirection dir) {
    const int logits = decode_caption_logits(t, p, c, image_states, caption_ids, dir, fwd);
    // The decoder reverses the ids itself in the backward direction, so the
    // prediction targets follow the sequence it actually read.
    std::vector<int> read = caption_ids;
    if (dir == CaptionDirection::kBackward) std::reverse(read.begin(), read.end());
    const int n_pred = static_cast<int>(read.size()) - 1;
    std::vector<int> targets(read.begin() + 1, read.end());
    std::vector<char> valid(static_cast<std::size_t>(n_pred));
    for (int i = 0; i < n_pred; ++i)
      valid[static_cast<std::size_t>(i)] = targets[static_cast<std::size_t>(i)] != kPadId;
    return t.cross_entropy_mean(t.slice_rows(logits, 0, n_pred), targets, valid);
  };
  return t.add(direction_ce(CaptionDirection::kForward),
               direction_ce(CaptionDirection::kBackward));
}

// Softmax cross-entropy of one logit row against its gold class.
template <typename S>
int classification_loss(Tape<S>& t, int logits, int gold) {
  if (t.val(logits).rows() != 1)
    throw ValidationError("classification expects one logit row");
  if (gold < 0 || gold >= t.val(logits).cols())
    throw ValidationError("gold class index out of range");
  return t.cross_entropy_mean(logits, {gold});
}

}  // namespace polifuse
