#ifndef POLIFUSE_IMAGE_ENCODER_HPP_
#define POLIFUSE_IMAGE_ENCODER_HPP_

#include <string>
#include <vector>

#include "polifuse/nn.hpp"
#include "polifuse/pngio.hpp"
#include "polifuse/text_encoder.hpp"

namespace polifuse {

struct ImageConfig {
  int resolution = 64;
  int patch_size = 4;
  int window_size = 4;
  int n_stages = 2;
  int base_dim = 32;  // channel width doubles at every stage boundary
  int n_heads = 4;
  double dropout_rate = 0.1;
};

inline int stage_grid(const ImageConfig& c, int stage) {
  return (c.resolution / c.patch_size) >> stage;
}

inline int stage_dim(const ImageConfig& c, int stage) { return c.base_dim << stage; }

inline void validate(const ImageConfig& c) {
  if (c.resolution <= 0 || c.patch_size <= 0 || c.window_size <= 0 || c.n_stages <= 0 ||
      c.base_dim <= 0 || c.n_heads <= 0)
    throw ValidationError("image config dimensions must be positive");
  if (c.resolution % c.patch_size != 0)
    throw ValidationError("resolution must be divisible by patch_size");
  if (c.window_size % 2 != 0) throw ValidationError("window_size must be even");
  for (int s = 0; s < c.n_stages; ++s) {
    const int grid = stage_grid(c, s);
    if (grid <= 0 || grid % c.window_size != 0)
      throw ValidationError("grid side must stay divisible by window_size at every stage");
    if (stage_dim(c, s) % c.n_heads != 0)
      throw ValidationError("n_heads must divide every stage dim");
  }
  if (c.dropout_rate < 0 || c.dropout_rate >= 1)
    throw ValidationError("dropout_rate must lie in [0,1)");
}

// Row-major patch matrix: one row per patch, columns ordered (y, x, channel)
// within the patch.
template <typename S>
MatrixX<S> patchify(const Image<float>& img, int patch_size) {
  if (img.empty() || img.height != img.width || img.height % patch_size != 0)
    throw ValidationError("image must be square with side divisible by patch_size");
  const int grid = img.height / patch_size;
  MatrixX<S> out(grid * grid, 3 * patch_size * patch_size);
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx) {
      const int row = gy * grid + gx;
      for (int py = 0; py < patch_size; ++py)
        for (int px = 0; px < patch_size; ++px)
          for (int ch = 0; ch < 3; ++ch)
            out(row, (py * patch_size + px) * 3 + ch) =
                static_cast<S>(img.at(gy * patch_size + py, gx * patch_size + px, ch));
    }
  return out;
}

// Attention groups over a grid of side `grid`. Regular partition cuts the grid
// into window×window cells; the shifted partition offsets the cut lines by
// window/2 in both axes. Border cells of the shifted partition are smaller
// than a full window; there is no wraparound.
inline std::vector<std::vector<int>> window_groups(int grid, int window, bool shifted) {
  auto band = [&](int r) { return shifted ? (r + window / 2) / window : r / window; };
  const int n_bands = band(grid - 1) + 1;
  std::vector<std::vector<int>> groups(n_bands * n_bands);
  for (int r = 0; r < grid; ++r)
    for (int c = 0; c < grid; ++c)
      groups[band(r) * n_bands + band(c)].push_back(r * grid + c);
  std::vector<std::vector<int>> out;
  out.reserve(groups.size());
  for (auto& g : groups)
    if (!g.empty()) out.push_back(std::move(g));
  return out;
}

template <typename S>
void init_image_encoder(ParameterSet<S>& p, const ImageConfig& c, Rng& rng,
                        const std::string& prefix = "image") {
  validate(c);
  const int grid0 = stage_grid(c, 0);
  init_linear(p, prefix + "/patch_embed", 3 * c.patch_size * c.patch_size, c.base_dim, rng);
  p.create_gaussian(prefix + "/pos_emb", grid0 * grid0, c.base_dim, rng, kInitStd);
  for (int s = 0; s < c.n_stages; ++s) {
    const std::string stage = prefix + "/stage" + std::to_string(s);
    init_prenorm_block(p, stage + "/block0", stage_dim(c, s), rng);
    init_prenorm_block(p, stage + "/block1", stage_dim(c, s), rng);
    if (s + 1 < c.n_stages) {
      init_norm(p, stage + "/merge", 4 * stage_dim(c, s));
      init_linear(p, stage + "/merge", 4 * stage_dim(c, s), 2 * stage_dim(c, s), rng);
    }
  }
  init_norm(p, prefix + "/final_norm", stage_dim(c, c.n_stages - 1));
}

namespace detail {

// Window attention block: the attention runs independently inside each group
// with shared projections, then the rows are stitched back in grid order.
template <typename S>
int window_block(Tape<S>& t, ParameterSet<S>& p, const std::string& name, int x,
                 const std::vector<std::vector<int>>& groups, int n_heads, int d,
                 const ForwardOptions& fwd) {
  const int n1 = norm(t, p, name + "/norm1", x);
  std::vector<int> outs;
  std::vector<int> perm;
  for (const auto& g : groups) {
    const int xg = t.gather_rows(n1, g);
    outs.push_back(attention(t, p, name + "/attn", xg, xg, n_heads, d,
                             static_cast<const MatrixX<S>*>(nullptr)));
    perm.insert(perm.end(), g.begin(), g.end());
  }
  std::vector<int> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = static_cast<int>(i);
  const int stitched = t.gather_rows(t.concat_rows(outs), inverse);
  x = t.add(x, maybe_dropout(t, stitched, fwd));
  const int f = ffn(t, p, name + "/ffn", norm(t, p, name + "/norm2", x));
  return t.add(x, maybe_dropout(t, f, fwd));
}

// 2x2 patch merging: concatenate each quad's features, normalize, project to
// twice the width. Quad order is row-major within the quad.
template <typename S>
int patch_merge(Tape<S>& t, ParameterSet<S>& p, const std::string& name, int x, int grid) {
  const int half = grid / 2;
  std::vector<int> i00, i01, i10, i11;
  for (int r = 0; r < half; ++r)
    for (int c = 0; c < half; ++c) {
      i00.push_back((2 * r) * grid + 2 * c);
      i01.push_back((2 * r) * grid + 2 * c + 1);
      i10.push_back((2 * r + 1) * grid + 2 * c);
      i11.push_back((2 * r + 1) * grid + 2 * c + 1);
    }
  const int cat = t.concat_cols({t.gather_rows(x, i00), t.gather_rows(x, i01),
                                 t.gather_rows(x, i10), t.gather_rows(x, i11)});
  return linear(t, p, name, norm(t, p, name, cat));
}

}  // namespace detail

// Hierarchical windowed encoder: patch embedding with learned positions, then
// per stage a regular-window block followed by a shifted-window block, with
// 2x2 merging between stages. Pooled output is the mean over final patches.
template <typename S>
EncoderNodes encode_image(Tape<S>& t, ParameterSet<S>& p, const ImageConfig& c,
                          const Image<float>& img, const ForwardOptions& fwd,
                          const std::string& prefix = "image") {
  if (img.height != c.resolution || img.width != c.resolution)
    throw ValidationError("image size does not match configured resolution");
  const int grid0 = stage_grid(c, 0);
  std::vector<int> positions(grid0 * grid0);
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);

  int x = t.matmul(t.constant(patchify<S>(img, c.patch_size)),
                   p.bind(t, prefix + "/patch_embed/w"));
  x = t.add_rowwise(x, p.bind(t, prefix + "/patch_embed/b"));
  x = t.add(x, t.embedding(p.bind(t, prefix + "/pos_emb"), positions));
  x = maybe_dropout(t, x, fwd);

  for (int s = 0; s < c.n_stages; ++s) {
    const std::string stage = prefix + "/stage" + std::to_string(s);
    const int grid = stage_grid(c, s);
    const int d = stage_dim(c, s);
    x = detail::window_block(t, p, stage + "/block0", x,
                             window_groups(grid, c.window_size, false), c.n_heads, d, fwd);
    x = detail::window_block(t, p, stage + "/block1", x,
                             window_groups(grid, c.window_size, true), c.n_heads, d, fwd);
    if (s + 1 < c.n_stages) x = detail::patch_merge(t, p, stage + "/merge", x, grid);
  }
  x = norm(t, p, prefix + "/final_norm", x);

  EncoderNodes out;
  out.states = x;
  out.pooled = t.mean_rows(x);
  const int final_grid = stage_grid(c, c.n_stages - 1);
  out.mask.assign(static_cast<std::size_t>(final_grid) * final_grid, 1);
  return out;
}

}  // namespace polifuse

#endif  // POLIFUSE_IMAGE_ENCODER_HPP_
