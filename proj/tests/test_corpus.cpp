#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "polifuse/corpus.hpp"

using namespace polifuse;

TEST_CASE("clean_caption strips trailing credits and enforces minimum length") {
  CHECK(clean_caption(
            "Protesters gather outside the court on Monday morning. (TOM SMITH/NEW YORK TIMES)")
            .value() == "Protesters gather outside the court on Monday morning.");
  CHECK_FALSE(clean_caption("Flag at dawn").has_value());
  CHECK(clean_caption("The Senate chamber during the confirmation vote last week.").value() ==
        "The Senate chamber during the confirmation vote last week.");

  // Stacked credits are all removed; parentheses without a slash are content.
  CHECK(clean_caption("Supporters wave banners along the parade route downtown. "
                      "(JANE DOE/AP) (POOL/REUTERS)")
            .value() == "Supporters wave banners along the parade route downtown.");
  CHECK(clean_caption("The committee convened for a second round of hearings (again)").value() ==
        "The committee convened for a second round of hearings (again)");

  // Internal whitespace collapses after stripping.
  CHECK(clean_caption("  A   crowd  lines the avenue before the motorcade arrives.  ").value() ==
        "A crowd lines the avenue before the motorcade arrives.");

  // Length boundary sits exactly at 30 characters.
  const std::string s29(29, 'x');
  const std::string s30(30, 'x');
  CHECK_FALSE(clean_caption(s29).has_value());
  CHECK(clean_caption(s30).value() == s30);
}

TEST_CASE("clean_caption output is never shorter than 30 characters") {
  const char* fixtures[] = {
      "", "short", "(A/B)", "A fairly long caption that ends with a credit. (X/Y)",
      "Another ordinary caption without any trailing credit markers at all.",
      "Tiny. (AAAAAAAAAAAAAAAAAAAA/BBBBBBBBBBBBBBBBBBB)"};
  for (const char* raw : fixtures) {
    auto cleaned = clean_caption(raw);
    if (cleaned) CHECK(cleaned->size() >= 30);
  }
}

TEST_CASE("dw_nominate binning") {
  CHECK(bin_dw_nominate(0.403) == CoarseLabel::kRight);
  CHECK(bin_dw_nominate(-0.343) == CoarseLabel::kLeft);
  CHECK(bin_dw_nominate(-0.2) == CoarseLabel::kCenter);
  CHECK(bin_dw_nominate(0.2) == CoarseLabel::kCenter);
  CHECK(bin_dw_nominate(0.200001) == CoarseLabel::kRight);
  CHECK(bin_dw_nominate(-0.200001) == CoarseLabel::kLeft);
  CHECK(bin_dw_nominate(0.0) == CoarseLabel::kCenter);
  CHECK_THROWS_AS(bin_dw_nominate(std::nan("")), ValidationError);
  CHECK_THROWS_AS(bin_dw_nominate(INFINITY), ValidationError);
}

TEST_CASE("label mapping across schemes") {
  CHECK(map_labels(IdeologyLabel::kLeanLeft, LabelScheme::kThree) == IdeologyLabel::kLeft);
  CHECK_FALSE(map_labels(IdeologyLabel::kCenter, LabelScheme::kBinary).has_value());
  CHECK(map_labels(IdeologyLabel::kRight, LabelScheme::kFive) == IdeologyLabel::kRight);
  CHECK(map_labels(IdeologyLabel::kLeanRight, LabelScheme::kThree) == IdeologyLabel::kRight);
  CHECK(map_labels(IdeologyLabel::kLeanRight, LabelScheme::kBinary) == IdeologyLabel::kRight);

  // Dense class indices round-trip through label_for_class.
  for (LabelScheme scheme :
       {LabelScheme::kFive, LabelScheme::kThree, LabelScheme::kBinary}) {
    for (int c = 0; c < scheme_classes(scheme); ++c)
      CHECK(class_index(label_for_class(c, scheme), scheme).value() == c);
  }
  CHECK(scheme_classes(LabelScheme::kFive) == 5);
  CHECK_FALSE(class_index(IdeologyLabel::kCenter, LabelScheme::kBinary).has_value());
}

TEST_CASE("label serialization names are stable") {
  const char* names[] = {"left", "lean_left", "center", "lean_right", "right"};
  for (int i = 0; i < 5; ++i) {
    CHECK(to_string(static_cast<IdeologyLabel>(i)) == std::string(names[i]));
    CHECK(parse_ideology(names[i]) == static_cast<IdeologyLabel>(i));
  }
  CHECK_THROWS_AS(parse_ideology("far_left"), ValidationError);
}

TEST_CASE("registrable domain extraction") {
  CHECK(registrable_domain("foxnews.com") == "foxnews.com");
  CHECK(registrable_domain("video.foxnews.com") == "foxnews.com");
  CHECK(registrable_domain("news.bbc.co.uk") == "bbc.co.uk");
  CHECK(registrable_domain("bbc.co.uk") == "bbc.co.uk");
  CHECK(registrable_domain("localhost") == "localhost");
  CHECK(registrable_domain("a.b.c.example.org") == "example.org");
}

namespace {

DocumentRecord make_record(const std::string& id, IdeologyLabel label,
                           std::optional<std::string> url = std::nullopt) {
  DocumentRecord r;
  r.id = id;
  r.text = "body of " + id;
  r.source = "src";
  r.label = label;
  r.url = std::move(url);
  return r;
}

}  // namespace

TEST_CASE("leakage filtering matches on registrable domain") {
  std::vector<DocumentRecord> records;
  records.push_back(make_record("a", IdeologyLabel::kLeft, "https://video.foxnews.com/p/1"));
  records.push_back(make_record("b", IdeologyLabel::kRight, "http://example.org/x"));
  records.push_back(make_record("c", IdeologyLabel::kCenter));
  records.push_back(make_record("d", IdeologyLabel::kLeft, "not a url"));
  records.push_back(make_record("e", IdeologyLabel::kRight, "https://WWW.FOXNEWS.COM/y"));

  std::vector<std::string> warnings;
  auto kept = filter_leakage(records, {"foxnews.com"}, &warnings);
  REQUIRE(kept.size() == 3);
  CHECK(kept[0].id == "b");
  CHECK(kept[1].id == "c");
  CHECK(kept[2].id == "d");
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("d") != std::string::npos);

  // Empty blocklist is the identity.
  CHECK(filter_leakage(records, {}).size() == records.size());
}

TEST_CASE("balanced subsampling") {
  std::vector<DocumentRecord> records;
  for (int i = 0; i < 100; ++i)
    records.push_back(make_record("l" + std::to_string(i), IdeologyLabel::kLeft));
  for (int i = 0; i < 300; ++i)
    records.push_back(make_record("r" + std::to_string(i), IdeologyLabel::kRight));

  auto out = balance_subsample(records, 42);
  int left = 0, right = 0;
  for (const auto& r : out) (r.label == IdeologyLabel::kLeft ? left : right)++;
  CHECK(left == 100);
  CHECK(right == 100);

  // Relative order is preserved: surviving ids appear in input order.
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < records.size(); ++i) pos[records[i].id] = i;
  for (std::size_t i = 1; i < out.size(); ++i) CHECK(pos[out[i - 1].id] < pos[out[i].id]);

  // Determinism and the already-balanced identity.
  auto out2 = balance_subsample(records, 42);
  REQUIRE(out2.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].id == out2[i].id);

  auto identity = balance_subsample(out, 7);
  REQUIRE(identity.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(identity[i].id == out[i].id);
}

TEST_CASE("triplet sampling on the two-left one-right cluster") {
  StoryCluster c{"s1",
                 {{"d1", IdeologyLabel::kLeft},
                  {"d2", IdeologyLabel::kLeft},
                  {"d3", IdeologyLabel::kRight}}};
  auto triplets = sample_triplets({c}, 5);
  REQUIRE(triplets.size() == 2);
  CHECK(triplets[0].anchor == "d1");
  CHECK(triplets[0].positive == "d2");
  CHECK(triplets[0].negative == "d3");
  CHECK(triplets[1].anchor == "d2");
  CHECK(triplets[1].positive == "d1");
  CHECK(triplets[1].negative == "d3");
}

TEST_CASE("triplet sampling skips label-uniform clusters unless cross-cluster is on") {
  StoryCluster uniform{"s1", {{"a", IdeologyLabel::kLeft}, {"b", IdeologyLabel::kLeft}}};
  CHECK(sample_triplets({uniform}, 1).empty());
  CHECK(sample_triplets({}, 1).empty());

  StoryCluster other{"s2", {{"c", IdeologyLabel::kRight}}};
  auto cross = sample_triplets({uniform, other}, 1, /*cross_cluster_negatives=*/true);
  REQUIRE(cross.size() == 2);
  for (const auto& t : cross) CHECK(t.negative == "c");
}

TEST_CASE("triplet sampling on the 2x2 cluster matches brute-force enumeration") {
  StoryCluster c{"s1",
                 {{"a", IdeologyLabel::kLeft},
                  {"b", IdeologyLabel::kLeft},
                  {"x", IdeologyLabel::kRight},
                  {"y", IdeologyLabel::kRight}}};
  // Brute-force enumeration of valid (anchor, positive, negative) triples.
  std::set<std::tuple<std::string, std::string, std::string>> valid;
  for (const auto& a : c.members)
    for (const auto& p : c.members)
      for (const auto& n : c.members) {
        if (a.id == p.id) continue;
        if (a.label != p.label || a.label == n.label) continue;
        valid.insert({a.id, p.id, n.id});
      }
  auto triplets = sample_triplets({c}, 9);
  REQUIRE(triplets.size() == 4);  // 2 ordered pairs per label
  for (const auto& t : triplets)
    CHECK(valid.count({t.anchor, t.positive, t.negative}) == 1);
}

TEST_CASE("triplet invariants hold over randomized clusters") {
  Rng rng(77);
  std::uniform_int_distribution<int> size_dist(1, 6), label_dist(0, 4);
  std::vector<StoryCluster> clusters;
  std::unordered_map<std::string, IdeologyLabel> labels;
  for (int s = 0; s < 25; ++s) {
    StoryCluster c{"s" + std::to_string(s), {}};
    const int n = size_dist(rng);
    for (int m = 0; m < n; ++m) {
      ClusterMember member{"s" + std::to_string(s) + "m" + std::to_string(m),
                           static_cast<IdeologyLabel>(label_dist(rng))};
      labels[member.id] = member.label;
      c.members.push_back(member);
    }
    clusters.push_back(c);
  }
  auto triplets = sample_triplets(clusters, 123);
  auto again = sample_triplets(clusters, 123);
  REQUIRE(triplets.size() == again.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    CHECK(labels.at(t.anchor) == labels.at(t.positive));
    CHECK(labels.at(t.anchor) != labels.at(t.negative));
    CHECK(t.anchor != t.positive);
    CHECK(t.anchor != t.negative);
    CHECK(t.positive != t.negative);
    CHECK(t.anchor == again[i].anchor);
    CHECK(t.negative == again[i].negative);
  }
}

TEST_CASE("image preprocessing modes") {
  DocumentRecord r = make_record("img1", IdeologyLabel::kLeft);
  Image<float> img(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = (y * 16 + x) / 255.0f;
  r.image = img;

  SECTION("full passes the raster through, face boxes or not") {
    auto out = preprocess_image(r, FaceMode::kFull, 16);
    CHECK(out.data == img.data);
  }
  SECTION("with_face blanks faceless images") {
    auto out = preprocess_image(r, FaceMode::kWithFace, 16);
    CHECK(*std::max_element(out.data.begin(), out.data.end()) == 0.0f);
    r.face_boxes.push_back({2, 2, 4, 4, 1});
    auto kept = preprocess_image(r, FaceMode::kWithFace, 16);
    CHECK(kept.data == img.data);
  }
  SECTION("only_face crops the most salient box") {
    auto blank = preprocess_image(r, FaceMode::kOnlyFace, 16);
    CHECK(blank.height == 16);
    CHECK(*std::max_element(blank.data.begin(), blank.data.end()) == 0.0f);

    // A box covering the whole image at the working resolution is an identity.
    r.face_boxes.push_back({0, 0, 16, 16, 1});
    auto whole = preprocess_image(r, FaceMode::kOnlyFace, 16);
    for (std::size_t i = 0; i < whole.data.size(); ++i)
      CHECK(whole.data[i] == Catch::Approx(img.data[i]).margin(1e-6));

    // Rank 1 wins over a larger rank-2 box.
    r.face_boxes.clear();
    r.face_boxes.push_back({0, 0, 8, 8, 2});
    r.face_boxes.push_back({8, 8, 4, 4, 1});
    auto face = preprocess_image(r, FaceMode::kOnlyFace, 4);
    CHECK(face.height == 4);
    CHECK(face.at(0, 0, 0) == Catch::Approx(img.at(8, 8, 0)).margin(0.05));
  }
  SECTION("absent image is an error") {
    r.image.reset();
    CHECK_THROWS_AS(preprocess_image(r, FaceMode::kFull, 16), ValidationError);
  }
}

TEST_CASE("corpus JSONL round-trip") {
  std::vector<DocumentRecord> records;
  DocumentRecord full = make_record("r1", IdeologyLabel::kLeanRight, "https://example.com/a");
  full.caption = "A caption that is comfortably longer than thirty characters.";
  full.image_path = "img/r1.png";
  full.story_id = "story-1";
  full.face_boxes.push_back({1.5, 2.5, 10, 12, 1});
  full.face_boxes.push_back({4, 4, 6, 6, 2});
  records.push_back(full);
  records.push_back(make_record("r2", IdeologyLabel::kCenter));

  const std::string path = std::filesystem::temp_directory_path() / "corpus_rt.jsonl";
  save_corpus(path, records);
  auto loaded = load_corpus(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].id == "r1");
  CHECK(loaded[0].caption == full.caption);
  CHECK(loaded[0].image_path == full.image_path);
  CHECK(loaded[0].label == IdeologyLabel::kLeanRight);
  CHECK(loaded[0].story_id == full.story_id);
  CHECK(loaded[0].url == full.url);
  REQUIRE(loaded[0].face_boxes.size() == 2);
  CHECK(loaded[0].face_boxes[0].x == 1.5);
  CHECK(loaded[0].face_boxes[1].saliency_rank == 2);
  CHECK_FALSE(loaded[1].caption.has_value());
  CHECK_FALSE(loaded[1].story_id.has_value());
  CHECK_FALSE(loaded[1].url.has_value());

  // The line schema carries exactly the published fields; absent means null.
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  std::getline(f, line);
  auto j = nlohmann::json::parse(line);
  const std::set<std::string> want = {"id",    "text",     "caption",    "image_path", "source",
                                      "label", "story_id", "face_boxes", "url"};
  std::set<std::string> got;
  for (auto it = j.begin(); it != j.end(); ++it) got.insert(it.key());
  CHECK(got == want);
  CHECK(j["caption"].is_null());
  CHECK(j["url"].is_null());
  std::filesystem::remove(path);
}

TEST_CASE("politician table and blocklist loading") {
  namespace fs = std::filesystem;
  const std::string ppath = fs::temp_directory_path() / "pols.jsonl";
  {
    std::ofstream f(ppath);
    f << R"({"handle": "@trump", "dw_nominate": 0.403})" << "\n";
    f << R"({"handle": "@obama", "dw_nominate": -0.343})" << "\n";
  }
  auto pols = load_politicians(ppath);
  REQUIRE(pols.size() == 2);
  CHECK(bin_dw_nominate(pols[0].dw_nominate) == CoarseLabel::kRight);
  CHECK(bin_dw_nominate(pols[1].dw_nominate) == CoarseLabel::kLeft);
  fs::remove(ppath);

  const std::string bpath = fs::temp_directory_path() / "block.txt";
  {
    std::ofstream f(bpath);
    f << "foxnews.com\n\n  breitbart.com  \nmsnbc.com\n";
  }
  auto block = load_blocklist(bpath);
  CHECK(block == std::set<std::string>{"foxnews.com", "breitbart.com", "msnbc.com"});
  fs::remove(bpath);
}

TEST_CASE("cluster-level splits keep stories intact") {
  std::vector<DocumentRecord> records;
  for (int s = 0; s < 20; ++s)
    for (int m = 0; m < 3; ++m) {
      auto r = make_record("s" + std::to_string(s) + "m" + std::to_string(m),
                           static_cast<IdeologyLabel>(m));
      r.story_id = "story" + std::to_string(s);
      records.push_back(r);
    }
  auto clusters = build_clusters(records);
  REQUIRE(clusters.size() == 20);

  auto split = split_clusters(clusters, 0.7, 0.1, 3);
  CHECK(split.train_ids.size() == 42);
  CHECK(split.validation_ids.size() == 6);
  CHECK(split.test_ids.size() == 12);

  auto story_of = [](const std::string& id) { return id.substr(0, id.find('m')); };
  std::set<std::string> train_stories, other_stories;
  for (const auto& id : split.train_ids) train_stories.insert(story_of(id));
  for (const auto& id : split.validation_ids) other_stories.insert(story_of(id));
  for (const auto& id : split.test_ids) other_stories.insert(story_of(id));
  for (const auto& s : train_stories) CHECK(other_stories.count(s) == 0);
}
