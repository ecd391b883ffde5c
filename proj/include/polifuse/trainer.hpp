#pragma once
// Training loops and evaluation: pretraining on one of the three auxiliary
// objectives, fine-tuning with early stopping on validation accuracy, and the
// metrics report. Everything is deterministic given (corpus, config, seed);
// there is no hidden global state.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "checkpoint.hpp"
#include "model.hpp"
#include "objectives.hpp"

namespace polifuse {

enum class Objective { kInfoNce, kCaptioning, kTriplet, kClassify };

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::kInfoNce: return "infonce";
    case Objective::kCaptioning: return "captioning";
    case Objective::kTriplet: return "triplet";
    case Objective::kClassify: return "classify";
  }
  throw std::logic_error("unreachable objective");
}

inline Objective parse_objective(const std::string& s) {
  if (s == "infonce") return Objective::kInfoNce;
  if (s == "captioning") return Objective::kCaptioning;
  if (s == "triplet") return Objective::kTriplet;
  if (s == "classify") return Objective::kClassify;
  throw ValidationError("unknown objective: " + s);
}

enum class Component { kTextEncoder, kImageEncoder, kFusion, kHead };

inline const char* to_string(Component c) {
  switch (c) {
    case Component::kTextEncoder: return "text_encoder";
    case Component::kImageEncoder: return "image_encoder";
    case Component::kFusion: return "fusion";
    case Component::kHead: return "head";
  }
  throw std::logic_error("unreachable component");
}

inline Component parse_component(const std::string& s) {
  if (s == "text_encoder") return Component::kTextEncoder;
  if (s == "image_encoder") return Component::kImageEncoder;
  if (s == "fusion") return Component::kFusion;
  if (s == "head") return Component::kHead;
  throw ValidationError("unknown component: " + s);
}

// Which model component owns a parameter, by name prefix. Objective-owned
// tensors (caption decoders, contrastive temperature) belong to no component
// and train only while their objective is active.
inline std::optional<Component> component_of_param(const std::string& name) {
  const std::string prefix = name.substr(0, name.find('/'));
  if (prefix == "text") return Component::kTextEncoder;
  if (prefix == "image") return Component::kImageEncoder;
  if (prefix == "fusion" || prefix == "early") return Component::kFusion;
  if (prefix == "head") return Component::kHead;
  return std::nullopt;
}

// Components each pretraining objective updates. Contrastive alignment moves
// both encoders toward each other, captioning shapes the image encoder
// through the decoding heads, and the triplet objective trains everything
// that feeds the joint representation.
inline std::set<Component> pretrain_components(Objective o) {
  switch (o) {
    case Objective::kInfoNce:
      return {Component::kTextEncoder, Component::kImageEncoder};
    case Objective::kCaptioning:
      return {Component::kImageEncoder};
    case Objective::kTriplet:
      return {Component::kTextEncoder, Component::kImageEncoder, Component::kFusion};
    case Objective::kClassify:
      return {Component::kTextEncoder, Component::kImageEncoder, Component::kFusion,
              Component::kHead};
  }
  throw std::logic_error("unreachable objective");
}

struct TrainConfig {
  int max_epochs = 20;
  int patience = 4;
  int pretrain_steps = 2500;
  int batch_size = 16;
  double learning_rate = 3e-4;
  std::uint64_t seed = 0;
  Objective objective = Objective::kClassify;
  // Empty means "the objective's own component set" (all four for classify).
  std::set<Component> trainable_components;

  std::set<Component> components() const {
    return trainable_components.empty() ? pretrain_components(objective)
                                        : trainable_components;
  }

  void validate() const {
    if (max_epochs <= 0) throw ValidationError("max_epochs must be positive");
    if (patience <= 0) throw ValidationError("patience must be positive");
    if (patience > max_epochs) throw ValidationError("patience must not exceed max_epochs");
    if (pretrain_steps < 0) throw ValidationError("pretrain_steps must be nonnegative");
    if (batch_size <= 0) throw ValidationError("batch_size must be positive");
    if (learning_rate <= 0) throw ValidationError("learning_rate must be positive");
  }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json comps = nlohmann::json::array();
  for (Component comp : c.trainable_components) comps.push_back(to_string(comp));
  return {{"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"pretrain_steps", c.pretrain_steps},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"objective", to_string(c.objective)},
          {"trainable_components", comps}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j,
                                          const std::string& where = "train") {
  detail::expect_keys(j, where,
                      {"max_epochs", "patience", "pretrain_steps", "batch_size",
                       "learning_rate", "seed", "objective", "trainable_components"});
  TrainConfig c;
  detail::read_field(j, "max_epochs", c.max_epochs);
  detail::read_field(j, "patience", c.patience);
  detail::read_field(j, "pretrain_steps", c.pretrain_steps);
  detail::read_field(j, "batch_size", c.batch_size);
  detail::read_field(j, "learning_rate", c.learning_rate);
  detail::read_field(j, "seed", c.seed);
  if (j.contains("objective"))
    c.objective = parse_objective(j.at("objective").get<std::string>());
  if (j.contains("trainable_components"))
    for (const auto& s : j.at("trainable_components"))
      c.trainable_components.insert(parse_component(s.get<std::string>()));
  return c;
}

// Parameter names the optimizer may touch for this run.
template <typename S>
std::vector<std::string> trainable_names(const ParameterSet<S>& params, Objective obj,
                                         const std::set<Component>& comps) {
  std::vector<std::string> out;
  for (const auto& name : params.names()) {
    if (const auto comp = component_of_param(name)) {
      if (comps.count(*comp)) out.push_back(name);
      continue;
    }
    const std::string prefix = name.substr(0, name.find('/'));
    const bool caption_bank = prefix == "cap_fwd" || prefix == "cap_bwd";
    if ((caption_bank && obj == Objective::kCaptioning) ||
        (prefix == "contrastive" && obj == Objective::kInfoNce))
      out.push_back(name);
  }
  return out;
}

// Adaptive moment estimation with decoupled weight decay. Decay touches only
// genuine matrices (both dims > 1); biases, gains, and scalars are exempt.
// Gradients are rescaled once per step so their global norm stays within
// clip_norm before the moments see them.
template <typename S>
class AdamW {
 public:
  struct Config {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
  };

  explicit AdamW(const Config& c = {}) : c_(c) {}

  void step(ParameterSet<S>& params, const std::vector<std::string>& names) {
    double sq = 0;
    for (const auto& name : names) sq += params.grad(name).squaredNorm();
    const double norm = std::sqrt(sq);
    const double scale = norm > c_.clip_norm ? c_.clip_norm / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(c_.beta1, t_);
    const double bc2 = 1.0 - std::pow(c_.beta2, t_);
    for (const auto& name : names) {
      auto& value = params.value(name);
      const MatrixX<S> g = params.grad(name) * static_cast<S>(scale);
      auto& slot = moments_[name];
      if (slot.m.size() == 0) {
        slot.m = MatrixX<S>::Zero(g.rows(), g.cols());
        slot.v = MatrixX<S>::Zero(g.rows(), g.cols());
      }
      slot.m = static_cast<S>(c_.beta1) * slot.m + static_cast<S>(1 - c_.beta1) * g;
      slot.v = static_cast<S>(c_.beta2) * slot.v +
               static_cast<S>(1 - c_.beta2) * g.cwiseProduct(g);
      const MatrixX<S> m_hat = slot.m / static_cast<S>(bc1);
      const MatrixX<S> v_hat = slot.v / static_cast<S>(bc2);
      if (value.rows() > 1 && value.cols() > 1)
        value -= static_cast<S>(c_.learning_rate * c_.weight_decay) * value;
      value -= static_cast<S>(c_.learning_rate) *
               (m_hat.array() / (v_hat.array().sqrt() + static_cast<S>(c_.eps))).matrix();
    }
  }

 private:
  struct Moments {
    MatrixX<S> m, v;
  };
  Config c_;
  long t_ = 0;
  std::map<std::string, Moments> moments_;
};

// True once the best validation score sits at least `patience` epochs behind
// the most recent one.
inline bool early_stop_check(const std::vector<double>& history, int patience) {
  if (history.empty()) throw ValidationError("early_stop_check needs a non-empty history");
  int best = 0;
  for (int i = 1; i < static_cast<int>(history.size()); ++i)
    if (history[i] > history[best]) best = i;
  return static_cast<int>(history.size()) - 1 - best >= patience;
}

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double validation_accuracy = 0;
};

struct MetricsReport {
  double overall_accuracy = 0;
  double macro_f1 = 0;
  std::vector<double> per_class_recall;
  Eigen::MatrixXi confusion;  // rows gold, cols predicted
};

inline MetricsReport compute_metrics(const Eigen::MatrixXi& confusion) {
  if (confusion.rows() != confusion.cols() || confusion.rows() == 0)
    throw ValidationError("confusion matrix must be square and non-empty");
  if ((confusion.array() < 0).any())
    throw ValidationError("confusion matrix entries must be nonnegative");
  const int n = static_cast<int>(confusion.rows());
  const long total = confusion.sum();
  if (total == 0) throw ValidationError("confusion matrix must not be all zero");

  MetricsReport r;
  r.confusion = confusion;
  r.overall_accuracy = static_cast<double>(confusion.trace()) / static_cast<double>(total);
  double f1_sum = 0;
  for (int c = 0; c < n; ++c) {
    const long gold = confusion.row(c).sum();
    const long pred = confusion.col(c).sum();
    const long tp = confusion(c, c);
    const double recall = gold > 0 ? static_cast<double>(tp) / gold : 0.0;
    const double precision = pred > 0 ? static_cast<double>(tp) / pred : 0.0;
    const double f1 =
        precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    r.per_class_recall.push_back(recall);
    f1_sum += f1;
  }
  r.macro_f1 = f1_sum / n;
  return r;
}

namespace detail {

// Shared dropout knob for a whole forward pass; the image rate only matters
// when no text stream exists to carry one.
inline double model_dropout_rate(const ModelConfig& c) {
  return uses_text(c.kind) ? c.text.dropout_rate : c.image.dropout_rate;
}

inline const Image<float>* record_image(const DocumentRecord& rec) {
  return rec.image && !rec.image->empty() ? &*rec.image : nullptr;
}

inline std::vector<int> record_ids(const DocumentRecord& rec, const TextConfig& c) {
  return tokenize(rec.text, c.vocab_size, c.max_seq_len);
}

}  // namespace detail

// Deterministic forward passes over labeled records; parameters are read-only
// here. Labels the scheme filters out are an error: evaluation sets must be
// constructed under the same scheme as the model head.
template <typename S>
MetricsReport evaluate(ParameterSet<S>& params, const ModelConfig& mc,
                       const std::vector<DocumentRecord>& records) {
  if (records.empty()) throw ValidationError("evaluate needs at least one record");
  const LabelScheme scheme = mc.scheme();
  Eigen::MatrixXi confusion =
      Eigen::MatrixXi::Zero(mc.fusion.n_classes, mc.fusion.n_classes);
  for (const DocumentRecord& rec : records) {
    const auto gold = class_index(rec.label, scheme);
    if (!gold)
      throw ValidationError("record " + rec.id + " has no class under scheme " +
                            to_string(scheme));
    Tape<S> t;
    const int logits = forward_logits(t, params, mc, detail::record_ids(rec, mc.text),
                                      detail::record_image(rec), ForwardOptions{});
    const MatrixX<S> row = t.val(logits);
    confusion(*gold, argmax_row(row)) += 1;
  }
  return compute_metrics(confusion);
}

struct PretrainResult {
  std::vector<double> step_losses;
  double final_loss = 0;
};

namespace detail {

template <typename S>
double infonce_step(Tape<S>& t, ParameterSet<S>& params, const ModelConfig& mc,
                    const std::vector<const DocumentRecord*>& batch,
                    const ForwardOptions& fwd) {
  std::vector<int> text_rows, image_rows;
  for (const DocumentRecord* rec : batch) {
    const auto ids = tokenize(*rec->caption, mc.text.vocab_size, mc.text.max_seq_len);
    text_rows.push_back(encode_text(t, params, mc.text, ids, fwd).pooled);
    image_rows.push_back(encode_image(t, params, mc.image, *rec->image, fwd).pooled);
  }
  const int loss = info_nce_loss(t, t.concat_rows(text_rows), t.concat_rows(image_rows),
                                 params.bind(t, kLogTauName));
  t.backward(loss);
  return static_cast<double>(t.val(loss)(0, 0));
}

template <typename S>
double captioning_step(Tape<S>& t, ParameterSet<S>& params, const ModelConfig& mc,
                       const std::vector<const DocumentRecord*>& batch,
                       const ForwardOptions& fwd) {
  std::vector<int> terms;
  for (const DocumentRecord* rec : batch) {
    const auto ids = tokenize(*rec->caption, mc.caption.vocab_size, mc.caption.max_seq_len);
    const int states = encode_image(t, params, mc.image, *rec->image, fwd).states;
    terms.push_back(captioning_loss(t, params, mc.caption, states, ids, fwd));
  }
  const int loss =
      t.cmul(t.sum_all(t.concat_rows(terms)), 1.0 / static_cast<double>(terms.size()));
  t.backward(loss);
  return static_cast<double>(t.val(loss)(0, 0));
}

template <typename S>
double triplet_step(Tape<S>& t, ParameterSet<S>& params, const ModelConfig& mc,
                    const std::vector<const NewsTriplet*>& batch,
                    const std::map<std::string, const DocumentRecord*>& by_id,
                    const ForwardOptions& fwd) {
  auto joint_row = [&](const std::string& id) {
    const DocumentRecord& rec = *by_id.at(id);
    return forward_joint(t, params, mc, record_ids(rec, mc.text), record_image(rec),
                         fwd);
  };
  std::vector<int> a_rows, p_rows, n_rows;
  for (const NewsTriplet* trip : batch) {
    a_rows.push_back(joint_row(trip->anchor));
    p_rows.push_back(joint_row(trip->positive));
    n_rows.push_back(joint_row(trip->negative));
  }
  const int a = t.l2_normalize_rows(t.concat_rows(a_rows));
  const int p = t.l2_normalize_rows(t.concat_rows(p_rows));
  const int n = t.l2_normalize_rows(t.concat_rows(n_rows));
  const int loss = triplet_margin_loss(t, a, p, n, TripletConfig{}.margin);
  t.backward(loss);
  // The optimizer sees the summed loss; report the mean for comparability
  // across batch sizes.
  return static_cast<double>(t.val(loss)(0, 0)) / static_cast<double>(batch.size());
}

}  // namespace detail

// Runs exactly config.pretrain_steps optimization steps of the configured
// objective, shuffling the eligible records each pass. Objective-owned
// parameters are created on first use; existing tensors are left untouched so
// staged pretraining composes.
template <typename S>
PretrainResult pretrain(ParameterSet<S>& params, const ModelConfig& mc,
                        const TrainConfig& tc,
                        const std::vector<DocumentRecord>& records) {
  mc.validate();
  tc.validate();
  if (tc.objective == Objective::kClassify)
    throw ValidationError("classify is a fine-tuning objective, not a pretraining one");
  if (tc.objective == Objective::kInfoNce &&
      !(has_text_encoder(mc.kind) && has_image_encoder(mc.kind)))
    throw ValidationError("contrastive pretraining needs both stream encoders");
  if (tc.objective == Objective::kCaptioning && !has_image_encoder(mc.kind))
    throw ValidationError("captioning pretraining needs the image stream encoder");
  const bool needs_caption = tc.objective != Objective::kTriplet;
  const bool needs_image = tc.objective != Objective::kTriplet || uses_image(mc.kind);
  if (tc.objective == Objective::kInfoNce && mc.text.d_model != mc.image_dim())
    throw ValidationError(
        "contrastive alignment needs matching text and image embedding widths");
  if (tc.objective == Objective::kCaptioning && mc.caption.d_model != mc.image_dim())
    throw ValidationError(
        "caption decoder width must match the image encoder output width");

  std::vector<const DocumentRecord*> eligible;
  for (const DocumentRecord& rec : records) {
    if (needs_caption && (!rec.caption || rec.caption->empty())) continue;
    if (needs_image && (!rec.image || rec.image->empty())) continue;
    if (tc.objective == Objective::kTriplet && !rec.story_id) continue;
    eligible.push_back(&rec);
  }
  if (eligible.empty())
    throw ValidationError(std::string("no records usable for objective ") +
                          to_string(tc.objective));

  Rng rng(tc.seed);
  if (tc.objective == Objective::kCaptioning) init_caption_decoders(params, mc.caption, rng);
  if (tc.objective == Objective::kInfoNce) init_contrastive(params);
  const auto names = trainable_names(params, tc.objective, tc.components());

  typename AdamW<S>::Config oc;
  oc.learning_rate = tc.learning_rate;
  AdamW<S> opt(oc);
  ForwardOptions fwd{true, detail::model_dropout_rate(mc), &rng};

  std::map<std::string, const DocumentRecord*> by_id;
  std::vector<StoryCluster> clusters;
  if (tc.objective == Objective::kTriplet) {
    std::vector<DocumentRecord> view;
    view.reserve(eligible.size());
    for (const DocumentRecord* rec : eligible) {
      by_id[rec->id] = rec;
      view.push_back(*rec);
    }
    clusters = build_clusters(view);
    if (sample_triplets(clusters, tc.seed).empty())
      throw ValidationError(
          "triplet pretraining needs a story cluster with two records of the same label");
  }

  PretrainResult result;
  while (static_cast<int>(result.step_losses.size()) < tc.pretrain_steps) {
    std::vector<NewsTriplet> triplets;
    std::vector<std::size_t> order(eligible.size());
    if (tc.objective == Objective::kTriplet) {
      triplets = sample_triplets(clusters, rng());
      order.resize(triplets.size());
    }
    if (order.empty()) throw ValidationError("pretraining pass produced no examples");
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    detail::seeded_shuffle(order, rng);

    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      if (static_cast<int>(result.step_losses.size()) >= tc.pretrain_steps) break;
      const std::size_t stop = std::min(order.size(), start + tc.batch_size);
      Tape<S> t;
      params.zero_grad();
      double loss = 0;
      if (tc.objective == Objective::kTriplet) {
        std::vector<const NewsTriplet*> batch;
        for (std::size_t i = start; i < stop; ++i) batch.push_back(&triplets[order[i]]);
        loss = detail::triplet_step(t, params, mc, batch, by_id, fwd);
      } else {
        std::vector<const DocumentRecord*> batch;
        for (std::size_t i = start; i < stop; ++i) batch.push_back(eligible[order[i]]);
        loss = tc.objective == Objective::kInfoNce
                   ? detail::infonce_step(t, params, mc, batch, fwd)
                   : detail::captioning_step(t, params, mc, batch, fwd);
      }
      opt.step(params, names);
      result.step_losses.push_back(loss);
    }
  }
  if (!result.step_losses.empty()) result.final_loss = result.step_losses.back();
  return result;
}

// Checkpoint payload for a finished pretraining run.
inline nlohmann::json pretrain_checkpoint_config(const ModelConfig& mc,
                                                 const TrainConfig& tc,
                                                 double final_loss) {
  return {{"model", model_config_to_json(mc)},
          {"train", train_config_to_json(tc)},
          {"final_loss", final_loss}};
}

struct FinetuneResult {
  std::vector<EpochStats> history;
  int best_epoch = 0;  // 1-based epoch whose parameters were kept
  double best_accuracy = 0;
};

// Classification training with per-epoch validation. The parameters left in
// `params` on return are those of the best validation epoch.
template <typename S>
FinetuneResult finetune(ParameterSet<S>& params, const ModelConfig& mc,
                        const TrainConfig& tc,
                        const std::vector<DocumentRecord>& train_records,
                        const std::vector<DocumentRecord>& validation_records) {
  mc.validate();
  tc.validate();
  if (tc.objective != Objective::kClassify)
    throw ValidationError("finetune trains with the classify objective");
  if (train_records.empty()) throw ValidationError("finetune needs a non-empty train split");
  if (validation_records.empty())
    throw ValidationError("finetune needs a non-empty validation split");

  const LabelScheme scheme = mc.scheme();
  std::vector<int> golds;
  for (const DocumentRecord& rec : train_records) {
    const auto gold = class_index(rec.label, scheme);
    if (!gold)
      throw ValidationError("record " + rec.id + " has no class under scheme " +
                            to_string(scheme));
    golds.push_back(*gold);
  }

  Rng rng(tc.seed);
  const auto names = trainable_names(params, tc.objective, tc.components());
  typename AdamW<S>::Config oc;
  oc.learning_rate = tc.learning_rate;
  AdamW<S> opt(oc);
  ForwardOptions fwd{true, detail::model_dropout_rate(mc), &rng};

  FinetuneResult result;
  std::map<std::string, MatrixX<S>> best_values;
  std::vector<double> scores;
  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    std::vector<std::size_t> order(train_records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    detail::seeded_shuffle(order, rng);

    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t stop = std::min(order.size(), start + tc.batch_size);
      Tape<S> t;
      params.zero_grad();
      std::vector<int> logit_rows;
      std::vector<int> batch_golds;
      for (std::size_t i = start; i < stop; ++i) {
        const DocumentRecord& rec = train_records[order[i]];
        logit_rows.push_back(forward_logits(t, params, mc,
                                            detail::record_ids(rec, mc.text),
                                            detail::record_image(rec), fwd));
        batch_golds.push_back(golds[order[i]]);
      }
      const int loss = t.cross_entropy_mean(t.concat_rows(logit_rows), batch_golds);
      t.backward(loss);
      opt.step(params, names);
      loss_sum += static_cast<double>(t.val(loss)(0, 0)) * (stop - start);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / train_records.size();
    stats.validation_accuracy = evaluate(params, mc, validation_records).overall_accuracy;
    result.history.push_back(stats);
    scores.push_back(stats.validation_accuracy);

    if (stats.validation_accuracy > result.best_accuracy || result.best_epoch == 0) {
      result.best_epoch = epoch;
      result.best_accuracy = stats.validation_accuracy;
      best_values.clear();
      for (const auto& name : params.names()) best_values[name] = params.value(name);
    }
    if (early_stop_check(scores, tc.patience)) break;
  }

  for (auto& [name, value] : best_values) params.value(name) = value;
  return result;
}

inline std::string history_to_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_loss,validation_accuracy\n";
  for (const EpochStats& e : history)
    out += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
           format_double(e.validation_accuracy) + "\n";
  return out;
}

// Stable content hash of a config document, for run metadata.
inline std::string config_hash(const nlohmann::json& config) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(config.dump());
  return out.str();
}

inline nlohmann::json metrics_to_json(const MetricsReport& r, LabelScheme scheme,
                                      const std::string& config_hash_hex,
                                      std::uint64_t seed, double wall_seconds) {
  nlohmann::json recall = nlohmann::json::object();
  for (std::size_t c = 0; c < r.per_class_recall.size(); ++c)
    recall[to_string(label_for_class(static_cast<int>(c), scheme))] =
        r.per_class_recall[c];
  nlohmann::json confusion = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) row.push_back(r.confusion(i, j));
    confusion.push_back(row);
  }
  return {{"overall_accuracy", r.overall_accuracy},
          {"macro_f1", r.macro_f1},
          {"per_class_recall", recall},
          {"confusion", confusion},
          {"config_hash", config_hash_hex},
          {"seed", seed},
          {"wall_seconds", wall_seconds}};
}

}  // namespace polifuse
