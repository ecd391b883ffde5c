#pragma once
// Whole-model assembly: one configuration object covering both encoders, the
// fusion stage, and the head, plus the forward pass from raw text and pixels
// to the joint vector and class logits. The unimodal variants reuse the
// fusion join projection so a fused model with its cross-modal path disabled
// computes exactly the same function.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "captioner.hpp"
#include "corpus.hpp"
#include "fusion.hpp"
#include "image_encoder.hpp"
#include "jsonutil.hpp"
#include "text_encoder.hpp"

namespace polifuse {

enum class ModelKind {
  kTextOnly,
  kImageOnly,
  kConcat,
  kHadamard,
  kGated,
  kCoattention,
  kEarly,
};

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kTextOnly: return "text_only";
    case ModelKind::kImageOnly: return "image_only";
    case ModelKind::kConcat: return "concat";
    case ModelKind::kHadamard: return "hadamard";
    case ModelKind::kGated: return "gated";
    case ModelKind::kCoattention: return "coattention";
    case ModelKind::kEarly: return "early";
  }
  throw std::logic_error("unreachable model kind");
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "text_only") return ModelKind::kTextOnly;
  if (s == "image_only") return ModelKind::kImageOnly;
  if (s == "concat") return ModelKind::kConcat;
  if (s == "hadamard") return ModelKind::kHadamard;
  if (s == "gated") return ModelKind::kGated;
  if (s == "coattention") return ModelKind::kCoattention;
  if (s == "early") return ModelKind::kEarly;
  throw ValidationError("unknown model kind: " + s);
}

inline bool uses_text(ModelKind k) { return k != ModelKind::kImageOnly; }
inline bool uses_image(ModelKind k) { return k != ModelKind::kTextOnly; }

// The early variant runs one fused stack with no standalone stream encoders,
// so objectives that train an encoder in isolation cannot reach it.
inline bool has_text_encoder(ModelKind k) {
  return uses_text(k) && k != ModelKind::kEarly;
}
inline bool has_image_encoder(ModelKind k) {
  return uses_image(k) && k != ModelKind::kEarly;
}

inline FusionMethod fusion_method_for(ModelKind k) {
  switch (k) {
    case ModelKind::kConcat: return FusionMethod::kConcat;
    case ModelKind::kHadamard: return FusionMethod::kHadamard;
    case ModelKind::kGated: return FusionMethod::kGated;
    case ModelKind::kCoattention: return FusionMethod::kCoattention;
    case ModelKind::kEarly: return FusionMethod::kEarly;
    default:
      throw ValidationError("unimodal model kinds have no fusion method");
  }
}

struct ModelConfig {
  ModelKind kind = ModelKind::kConcat;
  TextConfig text;
  ImageConfig image;
  CaptionConfig caption;
  FusionConfig fusion;  // method is derived from kind for fused variants

  int image_dim() const { return stage_dim(image, image.n_stages - 1); }

  // Fusion config with its method slaved to the model kind.
  FusionConfig fused() const {
    FusionConfig f = fusion;
    if (uses_text(kind) && uses_image(kind)) f.method = fusion_method_for(kind);
    return f;
  }

  LabelScheme scheme() const { return scheme_for_classes(fusion.n_classes); }

  void validate() const {
    polifuse::validate(text);
    polifuse::validate(image);
    polifuse::validate(caption);
    fusion.validate();
    if (kind == ModelKind::kEarly && image.resolution % image.patch_size != 0)
      throw ValidationError("early fusion needs resolution divisible by patch_size");
  }
};

template <typename S>
void init_model(ParameterSet<S>& p, const ModelConfig& c, Rng& rng) {
  c.validate();
  const FusionConfig fc = c.fused();
  switch (c.kind) {
    case ModelKind::kTextOnly:
      init_text_encoder(p, c.text, rng);
      init_linear(p, "fusion/join", c.text.d_model, fc.d_joint, rng);
      break;
    case ModelKind::kImageOnly:
      init_image_encoder(p, c.image, rng);
      init_linear(p, "fusion/join", c.image_dim(), fc.d_joint, rng);
      break;
    case ModelKind::kConcat:
    case ModelKind::kHadamard:
    case ModelKind::kGated:
      init_text_encoder(p, c.text, rng);
      init_image_encoder(p, c.image, rng);
      init_fuse_pooled(p, fc, c.text.d_model, c.image_dim(), rng);
      break;
    case ModelKind::kCoattention:
      init_text_encoder(p, c.text, rng);
      init_image_encoder(p, c.image, rng);
      init_coattend(p, fc, c.text.d_model, c.image_dim(), rng);
      break;
    case ModelKind::kEarly:
      init_early_fuse(p, c.text, c.image, fc, rng);
      break;
  }
  init_classifier(p, fc, rng);
}

// Joint representation (1 x d_joint) for one document. Image-using variants
// require a raster; the caller preprocesses and resizes it beforehand.
template <typename S>
int forward_joint(Tape<S>& t, ParameterSet<S>& p, const ModelConfig& c,
                  const std::vector<int>& ids, const Image<float>* img,
                  const ForwardOptions& fwd = {}) {
  if (uses_image(c.kind) && (img == nullptr || img->empty()))
    throw ValidationError("model kind needs an image but the record has none");
  const FusionConfig fc = c.fused();
  switch (c.kind) {
    case ModelKind::kTextOnly:
      return linear(t, p, "fusion/join", encode_text(t, p, c.text, ids, fwd).pooled);
    case ModelKind::kImageOnly:
      return linear(t, p, "fusion/join", encode_image(t, p, c.image, *img, fwd).pooled);
    case ModelKind::kConcat:
    case ModelKind::kHadamard:
    case ModelKind::kGated: {
      const auto text = encode_text(t, p, c.text, ids, fwd);
      const auto image = encode_image(t, p, c.image, *img, fwd);
      return fuse_pooled(t, p, fc, text.pooled, image.pooled);
    }
    case ModelKind::kCoattention: {
      const auto text = encode_text(t, p, c.text, ids, fwd);
      const auto image = encode_image(t, p, c.image, *img, fwd);
      return coattend(t, p, fc, text, image, c.text.n_heads, fwd).joint;
    }
    case ModelKind::kEarly:
      return early_fuse(t, p, c.text, c.image, fc, ids, *img, fwd).pooled;
  }
  throw std::logic_error("unreachable model kind");
}

template <typename S>
int forward_logits(Tape<S>& t, ParameterSet<S>& p, const ModelConfig& c,
                   const std::vector<int>& ids, const Image<float>* img,
                   const ForwardOptions& fwd = {}) {
  return classify(t, p, forward_joint(t, p, c, ids, img, fwd));
}

// ---------------------------------------------------------------------------
// Config serialization. Parsers reject unknown keys so a typo in a run config
// fails loudly instead of silently using a default.
// ---------------------------------------------------------------------------

inline nlohmann::json text_config_to_json(const TextConfig& c) {
  return {{"d_model", c.d_model},       {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},       {"max_seq_len", c.max_seq_len},
          {"vocab_size", c.vocab_size}, {"dropout_rate", c.dropout_rate}};
}

inline TextConfig text_config_from_json(const nlohmann::json& j, const std::string& where) {
  detail::expect_keys(j, where, {"d_model", "n_layers", "n_heads", "max_seq_len",
                                 "vocab_size", "dropout_rate"});
  TextConfig c;
  detail::read_field(j, "d_model", c.d_model);
  detail::read_field(j, "n_layers", c.n_layers);
  detail::read_field(j, "n_heads", c.n_heads);
  detail::read_field(j, "max_seq_len", c.max_seq_len);
  detail::read_field(j, "vocab_size", c.vocab_size);
  detail::read_field(j, "dropout_rate", c.dropout_rate);
  return c;
}

inline nlohmann::json image_config_to_json(const ImageConfig& c) {
  return {{"resolution", c.resolution},   {"patch_size", c.patch_size},
          {"window_size", c.window_size}, {"n_stages", c.n_stages},
          {"base_dim", c.base_dim},       {"n_heads", c.n_heads},
          {"dropout_rate", c.dropout_rate}};
}

inline ImageConfig image_config_from_json(const nlohmann::json& j,
                                          const std::string& where) {
  detail::expect_keys(j, where, {"resolution", "patch_size", "window_size", "n_stages",
                                 "base_dim", "n_heads", "dropout_rate"});
  ImageConfig c;
  detail::read_field(j, "resolution", c.resolution);
  detail::read_field(j, "patch_size", c.patch_size);
  detail::read_field(j, "window_size", c.window_size);
  detail::read_field(j, "n_stages", c.n_stages);
  detail::read_field(j, "base_dim", c.base_dim);
  detail::read_field(j, "n_heads", c.n_heads);
  detail::read_field(j, "dropout_rate", c.dropout_rate);
  return c;
}

inline nlohmann::json caption_config_to_json(const CaptionConfig& c) {
  return {{"d_model", c.d_model},       {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},       {"max_seq_len", c.max_seq_len},
          {"vocab_size", c.vocab_size}, {"dropout_rate", c.dropout_rate}};
}

inline CaptionConfig caption_config_from_json(const nlohmann::json& j,
                                              const std::string& where) {
  const TextConfig t = text_config_from_json(j, where);
  return CaptionConfig{t.d_model, t.n_layers, t.n_heads,
                       t.max_seq_len, t.vocab_size, t.dropout_rate};
}

inline nlohmann::json fusion_config_to_json(const FusionConfig& c) {
  return {{"n_cross_layers", c.n_cross_layers},
          {"d_joint", c.d_joint},
          {"n_classes", c.n_classes}};
}

inline FusionConfig fusion_config_from_json(const nlohmann::json& j,
                                            const std::string& where) {
  detail::expect_keys(j, where, {"n_cross_layers", "d_joint", "n_classes"});
  FusionConfig c;
  detail::read_field(j, "n_cross_layers", c.n_cross_layers);
  detail::read_field(j, "d_joint", c.d_joint);
  detail::read_field(j, "n_classes", c.n_classes);
  return c;
}

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"text", text_config_to_json(c.text)},
          {"image", image_config_to_json(c.image)},
          {"caption", caption_config_to_json(c.caption)},
          {"fusion", fusion_config_to_json(c.fusion)}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j,
                                          const std::string& where = "model") {
  detail::expect_keys(j, where, {"kind", "text", "image", "caption", "fusion"});
  ModelConfig c;
  if (j.contains("kind")) c.kind = parse_model_kind(j.at("kind").get<std::string>());
  if (j.contains("text")) c.text = text_config_from_json(j.at("text"), where + ".text");
  if (j.contains("image"))
    c.image = image_config_from_json(j.at("image"), where + ".image");
  if (j.contains("caption"))
    c.caption = caption_config_from_json(j.at("caption"), where + ".caption");
  if (j.contains("fusion"))
    c.fusion = fusion_config_from_json(j.at("fusion"), where + ".fusion");
  return c;
}

}  // namespace polifuse
