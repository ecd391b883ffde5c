#ifndef POLIFUSE_SYNTH_HPP_
#define POLIFUSE_SYNTH_HPP_

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "polifuse/common.hpp"
#include "polifuse/corpus.hpp"
#include "polifuse/pngio.hpp"

namespace polifuse {

// Planted-signal corpus generator. Each class plants a word signature in the
// text and a colored-block pattern in the image; signal strengths control how
// often the planted evidence is genuine. In complementary mode the class is a
// product code: the text only carries class mod 2 and the image only carries
// class div 2, so neither modality alone can separate all classes (for two
// classes the factors degenerate, so text and image carry two independent
// bits whose XOR is the class).
struct SyntheticConfig {
  int n_records = 100;
  int n_classes = 5;
  int resolution = 64;
  int vocab_size = 2048;
  double signal_strength_text = 0.9;
  double signal_strength_image = 0.9;
  bool complementary = false;
  std::uint64_t seed = 1;
};

namespace detail {

inline void validate(const SyntheticConfig& c) {
  if (c.n_records <= 0) throw ValidationError("n_records must be positive");
  if (c.n_classes != 2 && c.n_classes != 3 && c.n_classes != 5)
    throw ValidationError("n_classes must be 2, 3, or 5");
  if (c.n_records % c.n_classes != 0)
    throw ValidationError("n_records must be divisible by n_classes");
  if (c.resolution <= 0) throw ValidationError("resolution must be positive");
  if (c.vocab_size <= 8) throw ValidationError("vocab_size too small");
  if (c.signal_strength_text < 0 || c.signal_strength_text > 1 ||
      c.signal_strength_image < 0 || c.signal_strength_image > 1)
    throw ValidationError("signal strengths must lie in [0,1]");
}

// Deterministic pronounceable pseudo-words, distinct across (bank, index).
inline std::string pseudo_word(int bank, int index) {
  static const char* const onsets[] = {"br", "cl", "dr", "fl", "gr", "pl", "st", "tr",
                                       "m",  "n",  "s",  "v"};
  static const char* const nuclei[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
  static const char* const codas[] = {"n", "r", "l", "st", "nd", "m", "ck", "sh"};
  std::uint64_t h = fnv1a64(&bank, sizeof bank);
  h = fnv1a64(&index, sizeof index, h);
  std::string w;
  for (int syl = 0; syl < 2; ++syl) {
    w += onsets[h % 12];
    h /= 12;
    w += nuclei[h % 8];
    h /= 8;
  }
  w += codas[h % 8];
  return w;
}

inline const char* color_name(int v) {
  static const char* const names[] = {"red", "blue", "green", "gold", "purple", "teal"};
  return names[v];
}

inline void block_color(int v, float rgb[3]) {
  static const float table[6][3] = {{0.85f, 0.15f, 0.15f}, {0.15f, 0.25f, 0.85f},
                                    {0.15f, 0.72f, 0.25f}, {0.92f, 0.76f, 0.10f},
                                    {0.60f, 0.20f, 0.75f}, {0.10f, 0.70f, 0.70f}};
  for (int c = 0; c < 3; ++c) rgb[c] = table[v][c];
}

inline const char* place_name(int v) {
  static const char* const names[] = {"upper left",  "upper middle", "upper right",
                                     "lower left",  "lower middle", "lower right"};
  return names[v];
}

// Colored block in cell v of a 2x3 layout over a noisy gray background.
inline Image<float> pattern_image(int v, int resolution, Rng& rng) {
  Image<float> img(resolution, resolution);
  std::uniform_real_distribution<float> noise(-0.04f, 0.04f);
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = std::clamp(0.78f + noise(rng), 0.0f, 1.0f);
  float rgb[3];
  block_color(v, rgb);
  const int cell_h = resolution / 2, cell_w = resolution / 3;
  const int cy = (v / 3) * cell_h, cx = (v % 3) * cell_w;
  const int pad_y = cell_h / 6, pad_x = cell_w / 6;
  for (int y = cy + pad_y; y < cy + cell_h - pad_y && y < resolution; ++y)
    for (int x = cx + pad_x; x < cx + cell_w - pad_x && x < resolution; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = std::clamp(rgb[c] + noise(rng), 0.0f, 1.0f);
  return img;
}

}  // namespace detail

inline std::pair<std::vector<DocumentRecord>, std::vector<StoryCluster>> generate_synthetic(
    const SyntheticConfig& config) {
  detail::validate(config);
  Rng rng(config.seed);

  const int k = config.n_classes;
  const LabelScheme scheme = scheme_for_classes(k);
  // Factor domains for the signals each modality carries.
  const int text_values = config.complementary ? 2 : k;
  const int image_values = config.complementary ? (k == 2 ? 2 : (k + 1) / 2) : k;

  constexpr int kWordsPerValue = 6;
  constexpr int kCommonWords = 40;
  constexpr int kContentWords = 16;

  std::vector<DocumentRecord> records;
  records.reserve(config.n_records);
  const int n_clusters = config.n_records / k;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int cluster = 0; cluster < n_clusters; ++cluster) {
    char story[32];
    std::snprintf(story, sizeof story, "story-%05d", cluster);
    for (int cls = 0; cls < k; ++cls) {
      DocumentRecord r;
      char id[32];
      std::snprintf(id, sizeof id, "synth-%06d", cluster * k + cls);
      r.id = id;
      r.source = "synthetic-press";
      r.label = label_for_class(cls, scheme);
      r.story_id = story;

      int text_value, image_value;
      if (!config.complementary) {
        text_value = cls;
        image_value = cls;
      } else if (k == 2) {
        const int a = unit(rng) < 0.5 ? 0 : 1;  // text bit, uniform
        text_value = a;
        image_value = a ^ cls;  // image bit; XOR recovers the class
      } else {
        text_value = cls % 2;
        image_value = cls / 2;
      }

      std::string text;
      for (int w = 0; w < kContentWords; ++w) {
        if (!text.empty()) text.push_back(' ');
        if (unit(rng) < config.signal_strength_text) {
          std::uniform_int_distribution<int> pick(0, kWordsPerValue - 1);
          text += detail::pseudo_word(100 + text_value, pick(rng));
        } else {
          std::uniform_int_distribution<int> pick(0, kCommonWords - 1);
          text += detail::pseudo_word(0, pick(rng));
        }
      }
      text.push_back('.');
      r.text = std::move(text);

      // The drawn pattern: genuine with probability signal_strength_image,
      // otherwise a decoy value. The caption describes what was drawn.
      int drawn = image_value;
      if (image_values > 1 && unit(rng) >= config.signal_strength_image) {
        std::uniform_int_distribution<int> pick(0, image_values - 2);
        int d = pick(rng);
        drawn = d >= image_value ? d + 1 : d;
      }
      r.image = detail::pattern_image(drawn, config.resolution, rng);
      r.caption = std::string("A large ") + detail::color_name(drawn) + " block fills the " +
                  detail::place_name(drawn) + " part of an otherwise plain gray frame.";
      records.push_back(std::move(r));
    }
  }
  std::vector<StoryCluster> clusters = build_clusters(records);
  return {std::move(records), std::move(clusters)};
}

// Writes a corpus under `dir` as records.jsonl plus one PNG per record in an
// img/ subdirectory, filling in each record's image_path.
inline void write_corpus_tree(std::vector<DocumentRecord>& records, const std::string& dir) {
  std::filesystem::create_directories(dir + "/img");
  for (auto& r : records) {
    if (r.image) {
      const std::string rel = "img/" + r.id + ".png";
      write_png(dir + "/" + rel, *r.image);
      r.image_path = rel;
    }
  }
  save_corpus(dir + "/records.jsonl", records);
}

}  // namespace polifuse

#endif  // POLIFUSE_SYNTH_HPP_
