#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "polifuse/captioner.hpp"
#include "polifuse/image_encoder.hpp"
#include "polifuse/text_encoder.hpp"
#include "testutil.hpp"

using namespace polifuse;
using testutil::param_fd_check;
using Taped = Tape<double>;

namespace {

TextConfig tiny_text() {
  TextConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.max_seq_len = 16;
  c.vocab_size = 32;
  c.dropout_rate = 0.0;
  return c;
}

ImageConfig tiny_image() {
  ImageConfig c;
  c.resolution = 8;
  c.patch_size = 2;
  c.window_size = 2;
  c.n_stages = 2;
  c.base_dim = 8;
  c.n_heads = 2;
  c.dropout_rate = 0.0;
  return c;
}

Image<float> gradient_image(int res) {
  Image<float> img(res, res);
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = (y * res + x + c) / static_cast<float>(res * res + 3);
  return img;
}

}  // namespace

TEST_CASE("tokenizer basics") {
  CHECK(tokenize("", 2048, 128) == std::vector<int>{kBosId, kEosId});
  CHECK(tokenize("Vote now", 2048, 128) == tokenize("Vote now", 2048, 128));

  auto ids = tokenize("Vote vote VOTE", 2048, 128);
  REQUIRE(ids.size() == 5);
  CHECK(ids[1] == ids[2]);
  CHECK(ids[2] == ids[3]);
  CHECK(ids[1] >= kReservedIds);
  CHECK(ids[1] < 2048);

  // Punctuation splits words; interior ids never collide with reserved ones.
  auto punct = tokenize("don't stop, believing!", 64, 128);
  CHECK(punct.size() == 2 + 4);  // don / t / stop / believing
  for (std::size_t i = 1; i + 1 < punct.size(); ++i) CHECK(punct[i] >= kReservedIds);

  // Truncation keeps the limit exactly.
  std::string longtext;
  for (int i = 0; i < 40; ++i) longtext += "word" + std::to_string(i) + " ";
  CHECK(tokenize(longtext, 2048, 16).size() == 16);
}

TEST_CASE("text encoder shapes and pooling") {
  TextConfig c = tiny_text();
  c.d_model = 32;
  c.n_layers = 2;
  c.n_heads = 4;
  ParameterSet<double> params;
  Rng rng(3);
  init_text_encoder(params, c, rng);

  std::vector<int> ids = {kBosId, 5, 6, 7, 8, 9, 10, 11, 12, kEosId};
  Taped t;
  auto out = encode_text(t, params, c, ids, {});
  CHECK(t.val(out.states).rows() == 10);
  CHECK(t.val(out.states).cols() == 32);
  CHECK(t.val(out.pooled).rows() == 1);
  CHECK(t.val(out.pooled).cols() == 32);
  CHECK(out.mask == std::vector<char>(10, 1));
}

TEST_CASE("padding does not disturb the pooled text state") {
  TextConfig c = tiny_text();
  ParameterSet<double> params;
  Rng rng(5);
  init_text_encoder(params, c, rng);

  std::vector<int> ids = {kBosId, 7, 9, 21, kEosId};
  std::vector<int> padded = ids;
  padded.insert(padded.end(), 4, kPadId);

  Taped t1, t2;
  auto a = encode_text(t1, params, c, ids, {});
  auto b = encode_text(t2, params, c, padded, {});
  CHECK((t1.val(a.pooled) - t2.val(b.pooled)).cwiseAbs().maxCoeff() < 1e-6);
  for (std::size_t i = ids.size(); i < padded.size(); ++i) CHECK(b.mask[i] == 0);

  // Perturbing the pad token's embedding row moves no real position's state.
  Matrixd before = t2.val(b.states).topRows(static_cast<Eigen::Index>(ids.size()));
  params.value("text/tok_emb").row(kPadId).array() += 0.37;
  Taped t3;
  auto after = encode_text(t3, params, c, padded, {});
  Matrixd delta =
      t3.val(after.states).topRows(static_cast<Eigen::Index>(ids.size())) - before;
  CHECK(delta.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("positional embeddings make token order matter") {
  TextConfig c = tiny_text();
  ParameterSet<double> params;
  Rng rng(7);
  init_text_encoder(params, c, rng);
  std::vector<int> ids = {kBosId, 5, 9, kEosId};
  std::vector<int> swapped = {kBosId, 9, 5, kEosId};
  Taped t1, t2;
  auto a = encode_text(t1, params, c, ids, {});
  auto b = encode_text(t2, params, c, swapped, {});
  CHECK((t1.val(a.pooled) - t2.val(b.pooled)).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("text encoder is deterministic and rejects bad input") {
  TextConfig c = tiny_text();
  ParameterSet<double> params;
  Rng rng(11);
  init_text_encoder(params, c, rng);
  std::vector<int> ids = {kBosId, 4, 5, kEosId};
  Taped t1, t2;
  auto a = encode_text(t1, params, c, ids, {});
  auto b = encode_text(t2, params, c, ids, {});
  CHECK(t1.val(a.pooled) == t2.val(b.pooled));

  Taped t3;
  CHECK_THROWS_AS(encode_text(t3, params, c, {kBosId, 99, kEosId}, {}), ValidationError);
  CHECK_THROWS_AS(encode_text(t3, params, c, std::vector<int>(17, 5), {}), ValidationError);
}

TEST_CASE("text encoder gradients match finite differences") {
  TextConfig c = tiny_text();
  ParameterSet<double> params;
  Rng rng(13);
  init_text_encoder(params, c, rng);
  std::vector<int> ids = {kBosId, 4, 9, 17, kEosId, kPadId};
  const double worst = param_fd_check(
      params,
      [&](Taped& t, ParameterSet<double>& p) {
        auto out = encode_text(t, p, c, ids, {});
        return t.cross_entropy_mean(out.pooled, {3});
      },
      1e-4, 4);
  CHECK(worst <= 1e-3);
}

TEST_CASE("window partition matches the boundary-interval oracle") {
  // Oracle: two patches share a group iff no partition boundary separates
  // them on either axis. Boundaries sit at multiples of the window size,
  // offset by half a window for the shifted variant.
  const int grid = 16, window = 4;
  for (bool shifted : {false, true}) {
    std::vector<int> bounds;
    for (int b = shifted ? window / 2 : window; b < grid; b += window) bounds.push_back(b);
    auto same_band = [&](int a, int b) {
      for (int x : bounds)
        if ((a < x) != (b < x)) return false;
      return true;
    };

    auto groups = window_groups(grid, window, shifted);

    // The groups partition the grid exactly.
    std::set<int> seen;
    for (const auto& g : groups)
      for (int i : g) CHECK(seen.insert(i).second);
    CHECK(seen.size() == static_cast<std::size_t>(grid * grid));
    CHECK(groups.size() == (shifted ? 25u : 16u));

    // Same-group membership agrees with the oracle for every patch pair.
    std::vector<int> group_of(grid * grid, -1);
    for (std::size_t gi = 0; gi < groups.size(); ++gi)
      for (int i : groups[gi]) group_of[i] = static_cast<int>(gi);
    for (int a = 0; a < grid * grid; ++a)
      for (int b = 0; b < grid * grid; ++b) {
        const bool together = group_of[a] == group_of[b];
        const bool want =
            same_band(a / grid, b / grid) && same_band(a % grid, b % grid);
        if (together != want) {
          INFO("patches " << a << " and " << b << " shifted=" << shifted);
          CHECK(together == want);
        }
      }
  }
}

TEST_CASE("image encoder shapes and determinism") {
  ImageConfig c;
  c.resolution = 32;
  c.patch_size = 4;
  c.window_size = 4;
  c.n_stages = 2;
  c.base_dim = 32;
  c.n_heads = 4;
  c.dropout_rate = 0.0;
  ParameterSet<double> params;
  Rng rng(17);
  init_image_encoder(params, c, rng);

  Image<float> img = gradient_image(32);
  Taped t;
  auto out = encode_image(t, params, c, img, {});
  CHECK(t.val(out.states).rows() == 16);  // 8x8 grid merged once -> 4x4
  CHECK(t.val(out.states).cols() == 64);
  CHECK(t.val(out.pooled).cols() == 64);

  Image<float> zero(32, 32);
  Taped t1, t2;
  auto z1 = encode_image(t1, params, c, zero, {});
  auto z2 = encode_image(t2, params, c, zero, {});
  CHECK(t1.val(z1.pooled) == t2.val(z2.pooled));

  Taped t3;
  CHECK_THROWS_AS(encode_image(t3, params, c, gradient_image(16), {}), ValidationError);
}

TEST_CASE("image config validation") {
  ImageConfig c = tiny_image();
  c.resolution = 9;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = tiny_image();
  c.window_size = 3;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = tiny_image();
  c.n_stages = 3;  // grid would shrink to 1, not divisible by window 2
  CHECK_THROWS_AS(validate(c), ValidationError);
}

TEST_CASE("image encoder gradients match finite differences") {
  ImageConfig c = tiny_image();
  ParameterSet<double> params;
  Rng rng(19);
  init_image_encoder(params, c, rng);
  Image<float> img = gradient_image(8);
  const double worst = param_fd_check(
      params,
      [&](Taped& t, ParameterSet<double>& p) {
        auto out = encode_image(t, p, c, img, {});
        return t.cross_entropy_mean(out.pooled, {2});
      },
      1e-4, 4);
  CHECK(worst <= 1e-3);
}

TEST_CASE("caption decoder shapes and causality") {
  CaptionConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.max_seq_len = 16;
  c.vocab_size = 32;
  c.dropout_rate = 0.0;
  ParameterSet<double> params;
  Rng rng(23);
  init_caption_decoders(params, c, rng);

  Matrixd memory = testutil::random_matrix(6, 8, rng);
  std::vector<int> ids = {kBosId, 5, 9, 12, kEosId};

  Taped t;
  int logits = decode_caption_logits(t, params, c, t.constant(memory), ids,
                                     CaptionDirection::kForward, {});
  CHECK(t.val(logits).rows() == 5);
  CHECK(t.val(logits).cols() == 32);

  // Changing a later token never changes earlier rows.
  std::vector<int> altered = ids;
  altered[3] = 20;
  Taped t2;
  int logits2 = decode_caption_logits(t2, params, c, t2.constant(memory), altered,
                                      CaptionDirection::kForward, {});
  Matrixd d = t.val(logits) - t2.val(logits2);
  CHECK(d.topRows(3).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(d.bottomRows(2).cwiseAbs().maxCoeff() > 1e-8);

  Taped t3;
  CHECK_THROWS_AS(
      decode_caption_logits(t3, params, c, t3.constant(memory), {}, CaptionDirection::kForward, {}),
      ValidationError);
}

TEST_CASE("backward decoding is forward decoding of the reversed caption") {
  CaptionConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.max_seq_len = 16;
  c.vocab_size = 32;
  c.dropout_rate = 0.0;

  // Give both banks identical weights so the equality is observable through
  // the public entry point alone.
  ParameterSet<double> params;
  Rng rng(29);
  init_caption_decoder(params, c, rng, caption_prefix(CaptionDirection::kForward));
  for (const auto& name : params.names()) {
    const std::string bwd = "cap_bwd" + name.substr(std::string("cap_fwd").size());
    params.get_or_create(bwd, params.value(name).rows(), params.value(name).cols(),
                         [&](Matrixd& m) { m = params.value(name); });
  }

  Rng mrng(31);
  Matrixd memory = testutil::random_matrix(5, 8, mrng);
  std::vector<int> ids = {kBosId, 7, 11, 13, kEosId};
  std::vector<int> reversed(ids.rbegin(), ids.rend());

  Taped t1, t2;
  int bwd = decode_caption_logits(t1, params, c, t1.constant(memory), ids,
                                  CaptionDirection::kBackward, {});
  int fwd_on_reversed = decode_caption_logits(t2, params, c, t2.constant(memory), reversed,
                                              CaptionDirection::kForward, {});
  CHECK((t1.val(bwd) - t2.val(fwd_on_reversed)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("cross-attention is invariant to memory row order") {
  CaptionConfig c;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.max_seq_len = 16;
  c.vocab_size = 32;
  c.dropout_rate = 0.0;
  ParameterSet<double> params;
  Rng rng(37);
  init_caption_decoders(params, c, rng);

  Matrixd memory = testutil::random_matrix(6, 8, rng);
  Matrixd shuffled(6, 8);
  const int perm[6] = {3, 0, 5, 1, 4, 2};
  for (int i = 0; i < 6; ++i) shuffled.row(i) = memory.row(perm[i]);

  std::vector<int> ids = {kBosId, 9, 4, kEosId};
  Taped t1, t2;
  int a = decode_caption_logits(t1, params, c, t1.constant(memory), ids,
                                CaptionDirection::kForward, {});
  int b = decode_caption_logits(t2, params, c, t2.constant(shuffled), ids,
                                CaptionDirection::kForward, {});
  CHECK((t1.val(a) - t2.val(b)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("caption decoder gradients match finite differences") {
  CaptionConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.max_seq_len = 16;
  c.vocab_size = 16;
  c.dropout_rate = 0.0;
  ParameterSet<double> params;
  Rng rng(41);
  init_caption_decoders(params, c, rng);
  Rng mrng(43);
  Matrixd memory = testutil::random_matrix(4, 8, mrng);
  std::vector<int> ids = {kBosId, 5, 9, kEosId};

  const double worst = param_fd_check(
      params,
      [&](Taped& t, ParameterSet<double>& p) {
        int logits = decode_caption_logits(t, p, c, t.constant(memory), ids,
                                           CaptionDirection::kForward, {});
        return t.cross_entropy_mean(logits, {5, 9, kEosId, 1});
      },
      1e-4, 3, "cap_fwd");
  CHECK(worst <= 1e-3);
}
