#ifndef POLIFUSE_CORPUS_HPP_
#define POLIFUSE_CORPUS_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "polifuse/common.hpp"
#include "polifuse/pngio.hpp"

namespace polifuse {

// ---- labels ----

enum class IdeologyLabel { kLeft = 0, kLeanLeft, kCenter, kLeanRight, kRight };
enum class CoarseLabel { kLeft = 0, kCenter, kRight };
enum class LabelScheme { kFive, kThree, kBinary };

inline const char* to_string(IdeologyLabel l) {
  switch (l) {
    case IdeologyLabel::kLeft: return "left";
    case IdeologyLabel::kLeanLeft: return "lean_left";
    case IdeologyLabel::kCenter: return "center";
    case IdeologyLabel::kLeanRight: return "lean_right";
    case IdeologyLabel::kRight: return "right";
  }
  throw ValidationError("bad ideology label");
}

inline const char* to_string(CoarseLabel l) {
  switch (l) {
    case CoarseLabel::kLeft: return "left";
    case CoarseLabel::kCenter: return "center";
    case CoarseLabel::kRight: return "right";
  }
  throw ValidationError("bad coarse label");
}

inline IdeologyLabel parse_ideology(const std::string& s) {
  if (s == "left") return IdeologyLabel::kLeft;
  if (s == "lean_left") return IdeologyLabel::kLeanLeft;
  if (s == "center") return IdeologyLabel::kCenter;
  if (s == "lean_right") return IdeologyLabel::kLeanRight;
  if (s == "right") return IdeologyLabel::kRight;
  throw ValidationError("unknown label '" + s + "'");
}

inline LabelScheme parse_scheme(const std::string& s) {
  if (s == "five") return LabelScheme::kFive;
  if (s == "three") return LabelScheme::kThree;
  if (s == "binary") return LabelScheme::kBinary;
  throw ValidationError("unknown label scheme '" + s + "'");
}

inline const char* to_string(LabelScheme s) {
  switch (s) {
    case LabelScheme::kFive: return "five";
    case LabelScheme::kThree: return "three";
    case LabelScheme::kBinary: return "binary";
  }
  throw ValidationError("bad label scheme");
}

// Collapses the five-point scale into the target scheme. Center has no home in
// the binary scheme, so it maps to nothing there.
inline std::optional<IdeologyLabel> map_labels(IdeologyLabel l, LabelScheme scheme) {
  switch (scheme) {
    case LabelScheme::kFive:
      return l;
    case LabelScheme::kThree:
      if (l == IdeologyLabel::kLeft || l == IdeologyLabel::kLeanLeft)
        return IdeologyLabel::kLeft;
      if (l == IdeologyLabel::kCenter) return IdeologyLabel::kCenter;
      return IdeologyLabel::kRight;
    case LabelScheme::kBinary:
      if (l == IdeologyLabel::kCenter) return std::nullopt;
      return (l == IdeologyLabel::kLeft || l == IdeologyLabel::kLeanLeft)
                 ? IdeologyLabel::kLeft
                 : IdeologyLabel::kRight;
  }
  throw ValidationError("bad label scheme");
}

inline int scheme_classes(LabelScheme s) {
  return s == LabelScheme::kFive ? 5 : s == LabelScheme::kThree ? 3 : 2;
}

// Dense class index of a label under a scheme, or nothing if filtered out.
inline std::optional<int> class_index(IdeologyLabel l, LabelScheme scheme) {
  auto mapped = map_labels(l, scheme);
  if (!mapped) return std::nullopt;
  switch (scheme) {
    case LabelScheme::kFive:
      return static_cast<int>(*mapped);
    case LabelScheme::kThree:
      return *mapped == IdeologyLabel::kLeft ? 0 : *mapped == IdeologyLabel::kCenter ? 1 : 2;
    case LabelScheme::kBinary:
      return *mapped == IdeologyLabel::kLeft ? 0 : 1;
  }
  throw ValidationError("bad label scheme");
}

inline IdeologyLabel label_for_class(int index, LabelScheme scheme) {
  static const IdeologyLabel five[] = {IdeologyLabel::kLeft, IdeologyLabel::kLeanLeft,
                                       IdeologyLabel::kCenter, IdeologyLabel::kLeanRight,
                                       IdeologyLabel::kRight};
  static const IdeologyLabel three[] = {IdeologyLabel::kLeft, IdeologyLabel::kCenter,
                                        IdeologyLabel::kRight};
  static const IdeologyLabel two[] = {IdeologyLabel::kLeft, IdeologyLabel::kRight};
  if (index < 0 || index >= scheme_classes(scheme))
    throw ValidationError("class index out of range");
  switch (scheme) {
    case LabelScheme::kFive: return five[index];
    case LabelScheme::kThree: return three[index];
    case LabelScheme::kBinary: return two[index];
  }
  throw ValidationError("bad label scheme");
}

inline LabelScheme scheme_for_classes(int n) {
  if (n == 5) return LabelScheme::kFive;
  if (n == 3) return LabelScheme::kThree;
  if (n == 2) return LabelScheme::kBinary;
  throw ValidationError("class count must be 2, 3, or 5");
}

// ---- records ----

struct FaceBox {
  double x = 0, y = 0, w = 0, h = 0;
  int saliency_rank = 0;
};

struct DocumentRecord {
  std::string id;
  std::string text;
  std::optional<std::string> caption;
  std::optional<std::string> image_path;
  std::optional<Image<float>> image;  // loaded raster, values in [0,1]
  std::string source;
  IdeologyLabel label = IdeologyLabel::kCenter;
  std::optional<std::string> story_id;
  std::vector<FaceBox> face_boxes;
  std::optional<std::string> url;
};

struct ClusterMember {
  std::string id;
  IdeologyLabel label = IdeologyLabel::kCenter;
};

struct StoryCluster {
  std::string story_id;
  std::vector<ClusterMember> members;
};

struct NewsTriplet {
  std::string anchor;
  std::string positive;
  std::string negative;
};

struct PoliticianRecord {
  std::string handle;
  double dw_nominate = 0.0;
};

// ---- text cleaning ----

namespace detail {

inline std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xc0) != 0x80) ++n;
  return n;
}

inline std::string collapse_whitespace(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;  // leading whitespace is dropped
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(static_cast<char>(c));
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace detail

// Strips trailing photo-credit parentheticals of the form "(NAME/SOURCE)" and
// drops captions that end up shorter than 30 characters. Only trailing
// segments whose parenthesized text contains a slash are touched; anything
// else is presumed to be real content.
inline std::optional<std::string> clean_caption(const std::string& raw) {
  std::string s = raw;
  for (;;) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    if (s.empty() || s.back() != ')') break;
    const std::size_t open = s.rfind('(');
    if (open == std::string::npos) break;
    const std::string inside = s.substr(open + 1, s.size() - open - 2);
    if (inside.find('/') == std::string::npos) break;
    s.erase(open);
  }
  s = detail::collapse_whitespace(s);
  if (detail::utf8_length(s) < 30) return std::nullopt;
  return s;
}

// ---- politician binning ----

inline CoarseLabel bin_dw_nominate(double score) {
  if (!std::isfinite(score)) throw ValidationError("dw_nominate score must be finite");
  if (score < -0.2) return CoarseLabel::kLeft;
  if (score <= 0.2) return CoarseLabel::kCenter;
  return CoarseLabel::kRight;
}

// ---- URL / leakage filtering ----

namespace detail {

// Host part of a URL, lowercased; empty when the URL cannot be parsed.
inline std::string url_host(const std::string& url) {
  std::size_t at = url.find("://");
  if (at == std::string::npos) return "";
  at += 3;
  std::size_t end = url.find_first_of("/?#", at);
  std::string authority = url.substr(at, end == std::string::npos ? std::string::npos : end - at);
  const std::size_t userinfo = authority.rfind('@');
  if (userinfo != std::string::npos) authority.erase(0, userinfo + 1);
  const std::size_t port = authority.find(':');
  if (port != std::string::npos) authority.erase(port);
  std::transform(authority.begin(), authority.end(), authority.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return authority;
}

// Two-level public suffixes common in news domains. A full suffix list is out
// of proportion here; unknown hosts fall back to the last two labels.
inline const std::set<std::string>& two_level_suffixes() {
  static const std::set<std::string> suffixes = {
      "co.uk", "org.uk", "ac.uk", "gov.uk", "net.uk", "me.uk", "ltd.uk",
      "com.au", "net.au", "org.au", "gov.au", "co.jp", "or.jp", "ne.jp",
      "co.nz", "org.nz", "net.nz", "com.br", "org.br", "com.mx", "co.in",
      "co.kr", "com.cn", "com.tw", "com.sg", "com.hk", "co.za", "com.ar"};
  return suffixes;
}

}  // namespace detail

// Registrable domain (eTLD+1) of a host: "video.foxnews.com" -> "foxnews.com",
// "news.bbc.co.uk" -> "bbc.co.uk". Hosts with one label map to themselves.
inline std::string registrable_domain(const std::string& host) {
  std::vector<std::string> labels;
  std::string cur;
  for (char c : host) {
    if (c == '.') {
      labels.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  labels.push_back(cur);
  if (labels.size() <= 1) return host;
  const std::string last2 = labels[labels.size() - 2] + "." + labels.back();
  if (labels.size() >= 3 && detail::two_level_suffixes().count(last2))
    return labels[labels.size() - 3] + "." + last2;
  return last2;
}

// Drops records whose origin URL points at a blocked source. Records with no
// URL pass through; unparseable URLs pass through with a warning.
inline std::vector<DocumentRecord> filter_leakage(const std::vector<DocumentRecord>& records,
                                                  const std::set<std::string>& blocked_domains,
                                                  std::vector<std::string>* warnings = nullptr) {
  std::set<std::string> blocked;
  for (const auto& d : blocked_domains) {
    std::string dom = d;
    std::transform(dom.begin(), dom.end(), dom.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    blocked.insert(registrable_domain(dom));
  }
  std::vector<DocumentRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.url) {
      out.push_back(r);
      continue;
    }
    const std::string host = detail::url_host(*r.url);
    if (host.empty()) {
      if (warnings) warnings->push_back("record " + r.id + ": unparseable url " + *r.url);
      out.push_back(r);
      continue;
    }
    if (!blocked.count(registrable_domain(host))) out.push_back(r);
  }
  return out;
}

// ---- seeded sampling helpers ----

namespace detail {

template <typename T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

}  // namespace detail

// Retains min-class-count records per class, chosen uniformly without
// replacement; surviving records keep their original relative order.
inline std::vector<DocumentRecord> balance_subsample(const std::vector<DocumentRecord>& records,
                                                     std::uint64_t seed) {
  if (records.empty()) throw ValidationError("balance_subsample: empty input");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < records.size(); ++i)
    by_class[to_string(records[i].label)].push_back(i);
  std::size_t min_count = records.size();
  for (const auto& [name, idx] : by_class) min_count = std::min(min_count, idx.size());

  Rng rng(seed);
  std::vector<char> keep(records.size(), 0);
  for (auto& [name, idx] : by_class) {  // map iteration: deterministic class order
    detail::seeded_shuffle(idx, rng);
    for (std::size_t i = 0; i < min_count; ++i) keep[idx[i]] = 1;
  }
  std::vector<DocumentRecord> out;
  out.reserve(min_count * by_class.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(records[i]);
  return out;
}

// Emits every ordered same-label (anchor, positive) pair within each cluster,
// paired with one uniformly drawn differently-labeled member. Clusters with no
// label diversity contribute nothing unless cross-cluster negatives are
// enabled, in which case the negative comes from the other clusters' pool.
inline std::vector<NewsTriplet> sample_triplets(const std::vector<StoryCluster>& clusters,
                                                std::uint64_t seed,
                                                bool cross_cluster_negatives = false) {
  Rng rng(seed);
  std::vector<NewsTriplet> out;
  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    const auto& members = clusters[ci].members;
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = 0; j < members.size(); ++j) {
        if (i == j || members[i].label != members[j].label) continue;
        std::vector<const ClusterMember*> negatives;
        for (const auto& m : members)
          if (m.label != members[i].label) negatives.push_back(&m);
        if (negatives.empty() && cross_cluster_negatives) {
          for (std::size_t cj = 0; cj < clusters.size(); ++cj) {
            if (cj == ci) continue;
            for (const auto& m : clusters[cj].members)
              if (m.label != members[i].label) negatives.push_back(&m);
          }
        }
        if (negatives.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, negatives.size() - 1);
        out.push_back({members[i].id, members[j].id, negatives[pick(rng)]->id});
      }
    }
  }
  return out;
}

// Groups records by story_id, preserving first-appearance order. Records
// without a story become single-member clusters named after their id.
inline std::vector<StoryCluster> build_clusters(const std::vector<DocumentRecord>& records) {
  std::vector<StoryCluster> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : records) {
    const std::string key = r.story_id ? *r.story_id : ("solo:" + r.id);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.size());
      out.push_back({key, {}});
      it = index.find(key);
    }
    out[it->second].members.push_back({r.id, r.label});
  }
  return out;
}

// ---- image preprocessing ----

enum class FaceMode { kFull, kWithFace, kOnlyFace };

inline FaceMode parse_face_mode(const std::string& s) {
  if (s == "full") return FaceMode::kFull;
  if (s == "with_face") return FaceMode::kWithFace;
  if (s == "only_face") return FaceMode::kOnlyFace;
  throw ValidationError("unknown face mode '" + s + "'");
}

// Face-aware view of a record's image. `full` passes the raster through;
// `with_face` blanks faceless images; `only_face` isolates the most salient
// face, resized to the working resolution.
inline Image<float> preprocess_image(const DocumentRecord& record, FaceMode mode,
                                     int resolution) {
  if (!record.image || record.image->empty())
    throw ValidationError("record " + record.id + " has no image; supply a placeholder");
  const Image<float>& img = *record.image;
  switch (mode) {
    case FaceMode::kFull:
      return img;
    case FaceMode::kWithFace:
      if (!record.face_boxes.empty()) return img;
      return Image<float>(img.height, img.width);
    case FaceMode::kOnlyFace: {
      if (record.face_boxes.empty()) return Image<float>(resolution, resolution);
      const FaceBox* best = nullptr;
      for (const auto& b : record.face_boxes)
        if (!best || b.saliency_rank < best->saliency_rank) best = &b;
      Image<float> c = crop(img, static_cast<int>(std::lround(best->y)),
                            static_cast<int>(std::lround(best->x)),
                            static_cast<int>(std::lround(best->h)),
                            static_cast<int>(std::lround(best->w)));
      return bilinear_resize(c, resolution, resolution);
    }
  }
  throw ValidationError("bad face mode");
}

// ---- JSONL corpus I/O ----

namespace detail {

inline std::string dirname_of(const std::string& path) {
  const std::size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

}  // namespace detail

inline nlohmann::json record_to_json(const DocumentRecord& r) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : r.face_boxes)
    boxes.push_back({b.x, b.y, b.w, b.h, b.saliency_rank});
  nlohmann::json j;
  j["id"] = r.id;
  j["text"] = r.text;
  j["caption"] = r.caption ? nlohmann::json(*r.caption) : nlohmann::json();
  j["image_path"] = r.image_path ? nlohmann::json(*r.image_path) : nlohmann::json();
  j["source"] = r.source;
  j["label"] = to_string(r.label);
  j["story_id"] = r.story_id ? nlohmann::json(*r.story_id) : nlohmann::json();
  j["face_boxes"] = boxes;
  j["url"] = r.url ? nlohmann::json(*r.url) : nlohmann::json();
  return j;
}

inline DocumentRecord record_from_json(const nlohmann::json& j) {
  DocumentRecord r;
  r.id = j.at("id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  if (j.contains("caption") && !j["caption"].is_null())
    r.caption = j["caption"].get<std::string>();
  if (j.contains("image_path") && !j["image_path"].is_null())
    r.image_path = j["image_path"].get<std::string>();
  r.source = j.value("source", std::string());
  r.label = parse_ideology(j.at("label").get<std::string>());
  if (j.contains("story_id") && !j["story_id"].is_null())
    r.story_id = j["story_id"].get<std::string>();
  if (j.contains("face_boxes") && j["face_boxes"].is_array()) {
    for (const auto& b : j["face_boxes"]) {
      if (!b.is_array() || b.size() != 5)
        throw ValidationError("record " + r.id + ": face box must be [x, y, w, h, rank]");
      r.face_boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                              b[3].get<double>(), b[4].get<int>()});
    }
  }
  if (j.contains("url") && !j["url"].is_null()) r.url = j["url"].get<std::string>();
  return r;
}

inline void save_corpus(const std::string& path, const std::vector<DocumentRecord>& records) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot open " + path + " for writing");
  for (const auto& r : records) f << record_to_json(r).dump() << "\n";
  if (!f) throw std::runtime_error("short write to " + path);
}

inline std::vector<DocumentRecord> load_corpus(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open corpus " + path);
  std::vector<DocumentRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ValidationError(path + ":" + std::to_string(lineno) + ": invalid JSON");
    out.push_back(record_from_json(j));
  }
  return out;
}

// Loads each record's PNG (path resolved against the corpus file's directory)
// and resizes to a square working resolution. Records without a path keep an
// absent image.
inline void load_images(std::vector<DocumentRecord>& records, const std::string& corpus_path,
                        int resolution) {
  const std::string base = detail::dirname_of(corpus_path);
  for (auto& r : records) {
    if (!r.image_path) continue;
    const std::string& p = *r.image_path;
    const std::string full = (!p.empty() && p[0] == '/') ? p : base + "/" + p;
    Image<float> img = read_png<float>(full);
    if (img.height != resolution || img.width != resolution)
      img = bilinear_resize(img, resolution, resolution);
    r.image = std::move(img);
  }
}

inline std::vector<PoliticianRecord> load_politicians(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open politician table " + path);
  std::vector<PoliticianRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("handle") || !j.contains("dw_nominate"))
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected {handle, dw_nominate}");
    out.push_back({j["handle"].get<std::string>(), j["dw_nominate"].get<double>()});
  }
  return out;
}

inline std::set<std::string> load_blocklist(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open blocklist " + path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(f, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
      line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start])))
      ++start;
    if (start > 0) line.erase(0, start);
    if (!line.empty()) out.insert(line);
  }
  return out;
}

// Deterministic cluster-level split, so one story never straddles two splits.
// Fractions are train/validation; the remainder is test.
struct CorpusSplit {
  std::vector<std::string> train_ids, validation_ids, test_ids;
};

inline CorpusSplit split_clusters(const std::vector<StoryCluster>& clusters, double train_frac,
                                  double validation_frac, std::uint64_t seed) {
  if (train_frac < 0 || validation_frac < 0 || train_frac + validation_frac > 1.0)
    throw ValidationError("split fractions must be nonnegative and sum to at most 1");
  std::vector<std::size_t> order(clusters.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  detail::seeded_shuffle(order, rng);
  const std::size_t n_train = static_cast<std::size_t>(clusters.size() * train_frac);
  const std::size_t n_val = static_cast<std::size_t>(clusters.size() * validation_frac);
  CorpusSplit split;
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& bucket = k < n_train              ? split.train_ids
                   : k < n_train + n_val    ? split.validation_ids
                                            : split.test_ids;
    for (const auto& m : clusters[order[k]].members) bucket.push_back(m.id);
  }
  return split;
}

}  // namespace polifuse

#endif  // POLIFUSE_CORPUS_HPP_
