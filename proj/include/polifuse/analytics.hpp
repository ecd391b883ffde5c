#pragma once
// Descriptive statistics over precomputed image annotations: face-count and
// image-class tables, the facial emotion distribution, named-figure
// co-occurrence, and annotator agreement. No detector runs here; annotation
// records arrive as JSON lines produced by human labeling or any external
// tool.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "jsonutil.hpp"

namespace polifuse {

enum class ImageClass { kRegular, kRemoved, kBanner, kCartoon, kCollage, kComposite };

inline const char* to_string(ImageClass c) {
  switch (c) {
    case ImageClass::kRegular: return "regular";
    case ImageClass::kRemoved: return "removed";
    case ImageClass::kBanner: return "banner";
    case ImageClass::kCartoon: return "cartoon";
    case ImageClass::kCollage: return "collage";
    case ImageClass::kComposite: return "composite";
  }
  throw ValidationError("bad image class");
}

inline ImageClass parse_image_class(const std::string& s) {
  if (s == "regular") return ImageClass::kRegular;
  if (s == "removed") return ImageClass::kRemoved;
  if (s == "banner") return ImageClass::kBanner;
  if (s == "cartoon") return ImageClass::kCartoon;
  if (s == "collage") return ImageClass::kCollage;
  if (s == "composite") return ImageClass::kComposite;
  throw ValidationError("unknown image class '" + s + "'");
}

enum class Emotion { kPositive, kNegative, kNeutral };

inline const char* to_string(Emotion e) {
  switch (e) {
    case Emotion::kPositive: return "positive";
    case Emotion::kNegative: return "negative";
    case Emotion::kNeutral: return "neutral";
  }
  throw ValidationError("bad emotion");
}

inline Emotion parse_emotion(const std::string& s) {
  if (s == "positive") return Emotion::kPositive;
  if (s == "negative") return Emotion::kNegative;
  if (s == "neutral") return Emotion::kNeutral;
  throw ValidationError("unknown emotion '" + s + "'");
}

struct AnnotationRecord {
  std::string record_id;
  IdeologyLabel label = IdeologyLabel::kCenter;
  int face_count = 0;
  ImageClass image_class = ImageClass::kRegular;
  std::vector<Emotion> emotions;  // one entry per annotated face
  std::vector<std::string> figures;

  void validate() const {
    if (face_count < 0) throw ValidationError("face_count must be nonnegative");
    if (static_cast<int>(emotions.size()) > face_count)
      throw ValidationError("more emotions than faces on record " + record_id);
  }
};

inline nlohmann::json annotation_to_json(const AnnotationRecord& r) {
  nlohmann::json emotions = nlohmann::json::array();
  for (Emotion e : r.emotions) emotions.push_back(to_string(e));
  return {{"record_id", r.record_id},   {"label", to_string(r.label)},
          {"face_count", r.face_count}, {"image_class", to_string(r.image_class)},
          {"emotions", emotions},       {"figures", r.figures}};
}

inline AnnotationRecord annotation_from_json(const nlohmann::json& j,
                                             const std::string& where = "annotation") {
  detail::expect_keys(
      j, where, {"record_id", "label", "face_count", "image_class", "emotions", "figures"});
  AnnotationRecord r;
  detail::read_field(j, "record_id", r.record_id);
  if (j.contains("label")) r.label = parse_ideology(j.at("label").get<std::string>());
  detail::read_field(j, "face_count", r.face_count);
  if (j.contains("image_class"))
    r.image_class = parse_image_class(j.at("image_class").get<std::string>());
  if (j.contains("emotions"))
    for (const auto& e : j.at("emotions")) r.emotions.push_back(parse_emotion(e.get<std::string>()));
  detail::read_field(j, "figures", r.figures);
  r.validate();
  return r;
}

inline std::vector<AnnotationRecord> load_annotations(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open " + path);
  std::vector<AnnotationRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ValidationError(path + ":" + std::to_string(lineno) + ": invalid JSON");
    out.push_back(annotation_from_json(j, path + ":" + std::to_string(lineno)));
  }
  return out;
}

// One aggregation result: named rows by named ideology columns. Columns cover
// only ideologies that contributed data, in scale order.
struct StatTable {
  std::vector<std::string> rows;
  std::vector<std::string> columns;
  Matrixd values;
};

inline std::string table_to_csv(const StatTable& t, const std::string& corner) {
  std::string out = corner;
  for (const auto& c : t.columns) out += "," + c;
  out += "\n";
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out += t.rows[i];
    for (Eigen::Index j = 0; j < t.values.cols(); ++j)
      out += "," + format_double(t.values(static_cast<Eigen::Index>(i), j));
    out += "\n";
  }
  return out;
}

namespace detail {

template <typename Pred>
std::vector<IdeologyLabel> contributing_labels(const std::vector<AnnotationRecord>& a,
                                               Pred contributes) {
  std::vector<IdeologyLabel> out;
  for (int i = 0; i < 5; ++i) {
    const auto l = static_cast<IdeologyLabel>(i);
    for (const auto& r : a)
      if (r.label == l && contributes(r)) {
        out.push_back(l);
        break;
      }
  }
  return out;
}

inline void check_annotations(const std::vector<AnnotationRecord>& a) {
  if (a.empty()) throw ValidationError("no annotation records");
  for (const auto& r : a) r.validate();
}

}  // namespace detail

inline constexpr int kFaceBins = 6;  // 0, 1, 2, 3, 4, 5+

inline int face_bin(int face_count) { return face_count >= 5 ? 5 : face_count; }

// Percentage of images per face-count bin, by ideology, with a final row
// holding the mean over exact counts rather than bins.
inline StatTable face_count_table(const std::vector<AnnotationRecord>& annotations) {
  detail::check_annotations(annotations);
  StatTable t;
  t.rows = {"0", "1", "2", "3", "4", "5+", "mean_faces"};
  const auto labels =
      detail::contributing_labels(annotations, [](const AnnotationRecord&) { return true; });
  t.values = Matrixd::Zero(kFaceBins + 1, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t c = 0; c < labels.size(); ++c) {
    t.columns.push_back(to_string(labels[c]));
    long count = 0, face_sum = 0;
    for (const auto& r : annotations) {
      if (r.label != labels[c]) continue;
      ++count;
      face_sum += r.face_count;
      t.values(face_bin(r.face_count), static_cast<Eigen::Index>(c)) += 1;
    }
    for (int b = 0; b < kFaceBins; ++b)
      t.values(b, static_cast<Eigen::Index>(c)) *= 100.0 / count;
    t.values(kFaceBins, static_cast<Eigen::Index>(c)) =
        static_cast<double>(face_sum) / count;
  }
  return t;
}

// Percentage of images per image class, by ideology.
inline StatTable image_class_table(const std::vector<AnnotationRecord>& annotations) {
  detail::check_annotations(annotations);
  StatTable t;
  for (int k = 0; k < 6; ++k) t.rows.push_back(to_string(static_cast<ImageClass>(k)));
  const auto labels =
      detail::contributing_labels(annotations, [](const AnnotationRecord&) { return true; });
  t.values = Matrixd::Zero(6, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t c = 0; c < labels.size(); ++c) {
    t.columns.push_back(to_string(labels[c]));
    long count = 0;
    for (const auto& r : annotations) {
      if (r.label != labels[c]) continue;
      ++count;
      t.values(static_cast<int>(r.image_class), static_cast<Eigen::Index>(c)) += 1;
    }
    t.values.col(static_cast<Eigen::Index>(c)) *= 100.0 / count;
  }
  return t;
}

// Proportion of annotated faces per emotion, by ideology. Records without
// emotion entries contribute nothing; ideologies without any annotated face
// are omitted.
inline StatTable emotion_distribution(const std::vector<AnnotationRecord>& annotations) {
  detail::check_annotations(annotations);
  StatTable t;
  t.rows = {"positive", "negative", "neutral"};
  const auto labels = detail::contributing_labels(
      annotations, [](const AnnotationRecord& r) { return !r.emotions.empty(); });
  t.values = Matrixd::Zero(3, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t c = 0; c < labels.size(); ++c) {
    t.columns.push_back(to_string(labels[c]));
    long faces = 0;
    for (const auto& r : annotations) {
      if (r.label != labels[c]) continue;
      for (Emotion e : r.emotions) {
        ++faces;
        t.values(static_cast<int>(e), static_cast<Eigen::Index>(c)) += 1;
      }
    }
    t.values.col(static_cast<Eigen::Index>(c)) /= static_cast<double>(faces);
  }
  return t;
}

// Share of images listing the figure, and the mean number of other people in
// those images. Ideologies where the figure never appears report zero on both
// rows.
inline StatTable figure_cooccurrence(const std::vector<AnnotationRecord>& annotations,
                                     const std::string& figure_name) {
  detail::check_annotations(annotations);
  StatTable t;
  t.rows = {"containment_pct", "mean_co_persons"};
  const auto labels =
      detail::contributing_labels(annotations, [](const AnnotationRecord&) { return true; });
  t.values = Matrixd::Zero(2, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t c = 0; c < labels.size(); ++c) {
    t.columns.push_back(to_string(labels[c]));
    long count = 0, containing = 0, co_sum = 0;
    for (const auto& r : annotations) {
      if (r.label != labels[c]) continue;
      ++count;
      const bool contains =
          std::find(r.figures.begin(), r.figures.end(), figure_name) != r.figures.end();
      if (contains) {
        ++containing;
        co_sum += r.face_count - 1;
      }
    }
    t.values(0, static_cast<Eigen::Index>(c)) = 100.0 * containing / count;
    t.values(1, static_cast<Eigen::Index>(c)) =
        containing > 0 ? static_cast<double>(co_sum) / containing : 0.0;
  }
  return t;
}

// Agreement between two annotators over the same items. Chance agreement of 1
// only happens when both annotators are constant on the same label, where the
// convention fixes kappa at 1.
inline double cohens_kappa(const std::vector<std::string>& a,
                           const std::vector<std::string>& b) {
  if (a.size() != b.size())
    throw ValidationError("kappa needs two label vectors of equal length");
  if (a.empty()) throw ValidationError("kappa needs at least one item");
  const double n = static_cast<double>(a.size());
  std::map<std::string, double> count_a, count_b;
  double agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) ++agree;
    ++count_a[a[i]];
    ++count_b[b[i]];
  }
  const double p_o = agree / n;
  if (count_a.size() == 1 && count_b.size() == 1 &&
      count_a.begin()->first == count_b.begin()->first)
    return 1.0;
  double p_e = 0;
  for (const auto& [label, ca] : count_a) {
    const auto it = count_b.find(label);
    if (it != count_b.end()) p_e += (ca / n) * (it->second / n);
  }
  if (1.0 - p_e <= 0)
    throw ValidationError("kappa undefined: chance agreement is 1 without full agreement");
  return (p_o - p_e) / (1.0 - p_e);
}

}  // namespace polifuse
