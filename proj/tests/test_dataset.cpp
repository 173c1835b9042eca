// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "pairwise_vl/dataset.hpp"
#include "pairwise_vl/errors.hpp"
#include "support.hpp"

namespace pairwise_vl {
namespace {

using testing::TempDir;
using testing::write_text;

std::string record(std::int64_t id, const std::string& c0, const std::string& c1,
                   const std::string& i0 = "a.png", const std::string& i1 = "b.png",
                   const std::string& extra = "") {
  nlohmann::json j = {{"id", id}, {"caption_0", c0}, {"caption_1", c1}, {"image_0", i0},
                      {"image_1", i1}};
  auto s = j.dump();
  if (!extra.empty()) s.insert(s.size() - 1, "," + extra);
  return s + "\n";
}

class DatasetTest : public ::testing::Test {
 protected:
  void SetUp() override {
    write_text(dir_ / "a.png", testing::fake_png(1));
    write_text(dir_ / "b.png", testing::fake_png(2));
    write_text(dir_ / "c.jpg", std::string("\xff\xd8\xff\xe0rest", 8));
  }

  Dataset load(const std::string& contents) {
    write_text(dir_ / "d.jsonl", contents);
    return load_dataset(dir_ / "d.jsonl", dir_.path());
  }

  TempDir dir_;
};

TEST_F(DatasetTest, LoadsRecordsInFileOrder) {
  auto ds = load(record(5, "a dog bites a man", "a man bites a dog") +
                 record(2, "red over blue", "blue over red", "c.jpg", "a.png",
                        R"("tags":["Symbolic","Symbolic","Series"])"));
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.pairs[0].id, 5);
  EXPECT_EQ(ds.pairs[1].id, 2);
  EXPECT_EQ(ds.pairs[1].image_0.media_type, "image/jpeg");
  EXPECT_EQ(ds.pairs[0].image_0.media_type, "image/png");
  EXPECT_EQ(ds.pairs[1].tags, (std::vector<std::string>{"Symbolic", "Series"}));
  EXPECT_EQ(ds.pairs[0].image_0.digest, sha256(testing::fake_png(1)));
  EXPECT_EQ(ds.find(2), &ds.pairs[1]);
  EXPECT_EQ(ds.find(3), nullptr);
}

TEST_F(DatasetTest, EmptyFileGivesEmptyDataset) {
  EXPECT_EQ(load("").size(), 0u);
  EXPECT_EQ(load("\n  \n").size(), 0u);
}

TEST_F(DatasetTest, DuplicateIdRejected) {
  try {
    load(record(7, "x y", "y x") + record(7, "p q", "q p"));
    FAIL() << "expected DuplicateId";
  } catch (const DuplicateId& e) {
    EXPECT_EQ(e.id(), 7);
  }
}

TEST_F(DatasetTest, MalformedRecordsReportLine) {
  try {
    load(record(1, "x y", "y x") + "{not json\n");
    FAIL();
  } catch (const MalformedRecord& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load(record(1, "same", "same")), MalformedRecord);
  EXPECT_THROW(load(R"j({"id":1,"caption_0":"a","image_0":"a.png","image_1":"b.png"})j" "\n"),
               MalformedRecord);
  EXPECT_THROW(load(record(-1, "x y", "y x")), MalformedRecord);
  EXPECT_THROW(load(record(1, "", "y x")), MalformedRecord);
  EXPECT_THROW(load(record(1, "x y", "y x", "a.png", "b.png", R"("tags":"Symbolic")")),
               MalformedRecord);
}

TEST_F(DatasetTest, MissingImage) {
  try {
    load(record(1, "x y", "y x", "nope.png"));
    FAIL();
  } catch (const MissingImage& e) {
    EXPECT_EQ(e.locator(), "nope.png");
  }
}

TEST_F(DatasetTest, UnknownImageTypeIsMalformed) {
  write_text(dir_ / "weird.dat", "hello");
  EXPECT_THROW(load(record(1, "x y", "y x", "weird.dat")), MalformedRecord);
}

TEST_F(DatasetTest, DeterministicLoad) {
  auto text = record(1, "x y", "y x") + record(2, "p q", "q p", "b.png", "a.png");
  auto a = load(text);
  auto b = load(text);
  EXPECT_EQ(a.digest, b.digest);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.pairs[i].image_0.digest, b.pairs[i].image_0.digest);
    EXPECT_EQ(a.pairs[i].image_1.digest, b.pairs[i].image_1.digest);
  }
  EXPECT_EQ(a.digest, sha256(text));
}

TEST_F(DatasetTest, SkipImagesLeavesLocatorsOnly) {
  write_text(dir_ / "d.jsonl", record(1, "x y", "y x", "gone.png", "also-gone.png"));
  auto ds = load_dataset(dir_ / "d.jsonl", dir_.path(), LoadOptions{false});
  EXPECT_EQ(ds.pairs[0].image_0.locator, "gone.png");
}

TEST_F(DatasetTest, ImageBytesReverifiedOnRead) {
  auto ds = load(record(1, "x y", "y x"));
  EXPECT_EQ(read_image_bytes(ds.pairs[0].image_0), testing::fake_png(1));
  write_text(dir_ / "a.png", testing::fake_png(99));
  EXPECT_THROW(read_image_bytes(ds.pairs[0].image_0), MissingImage);
}

TEST(ValidatePair, SameWordsNoWarning) {
  ExamplePair p;
  p.caption_0 = "an old person kisses a young person";
  p.caption_1 = "a young person kisses an old person";
  EXPECT_TRUE(validate_pair(p).empty());
}

TEST(ValidatePair, DifferentWordsWarn) {
  ExamplePair p;
  p.id = 4;
  p.caption_0 = "a red cup";
  p.caption_1 = "a blue cup";
  auto w = validate_pair(p);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].kind, WarningKind::kWordMultisetMismatch);
  EXPECT_EQ(w[0].pair_id, 4);
}

TEST(ValidatePair, CaseAndCommasIgnored) {
  ExamplePair p;
  p.caption_0 = "The cat, the dog";
  p.caption_1 = "the dog the Cat";
  EXPECT_TRUE(validate_pair(p).empty());
}

TEST(ValidatePair, MultisetNotSet) {
  ExamplePair p;
  p.caption_0 = "a a b";
  p.caption_1 = "a b b";
  EXPECT_EQ(validate_pair(p).size(), 1u);
}

TEST(NormalizedWords, StripsUnicodePunctuation) {
  EXPECT_EQ(normalized_words("“Hello,” she said — twice!"),
            (std::vector<std::string>{"hello", "she", "said", "twice"}));
  EXPECT_EQ(normalized_words("CAFÉ  au\tlait"),
            (std::vector<std::string>{"café", "au", "lait"}));
}

TEST(Probes, BothSettingsYieldsFourWithFixedChoices) {
  ExamplePair p;
  p.id = 0;
  auto probes = probes_for(p, Setting::kBoth);
  ASSERT_EQ(probes.size(), 4u);
  EXPECT_EQ(probes[0].kind, ProbeKind::kText);
  EXPECT_EQ(probes[0].correct_choice, Choice::kA);
  EXPECT_EQ(probes[1].correct_choice, Choice::kB);
  EXPECT_EQ(probes[2].kind, ProbeKind::kImage);
  EXPECT_EQ(probes[2].correct_choice, Choice::kFirst);
  EXPECT_EQ(probes[3].correct_choice, Choice::kSecond);
}

TEST(Probes, BothIsUnionOfSingleSettings) {
  for (std::int64_t id = 0; id < 20; ++id) {
    ExamplePair p;
    p.id = id;
    auto text = probes_for(p, Setting::kText);
    auto image = probes_for(p, Setting::kImage);
    ASSERT_EQ(text.size(), 2u);
    ASSERT_EQ(image.size(), 2u);
    for (const auto& t : text) EXPECT_EQ(t.kind, ProbeKind::kText);
    for (const auto& t : image) EXPECT_EQ(t.kind, ProbeKind::kImage);
    text.insert(text.end(), image.begin(), image.end());
    EXPECT_EQ(text, probes_for(p, Setting::kBoth));
    for (const auto& probe : text) {
      EXPECT_EQ(probe.correct_choice, choice_for(probe.kind, probe.index));
      EXPECT_EQ(probe.pair_id, id);
    }
  }
}

TEST(Probes, LabelsRoundTrip) {
  for (const char* label : {"text-0", "text-1", "image-0", "image-1"}) {
    auto p = Probe::from_label(3, label);
    ASSERT_TRUE(p.has_value());
    EXPECT_EQ(p->label(), label);
  }
  EXPECT_FALSE(Probe::from_label(3, "text-2").has_value());
  EXPECT_FALSE(Probe::from_label(3, "caption-0").has_value());
}

TEST(Choices, FlipAndParse) {
  EXPECT_EQ(flip(Choice::kA), Choice::kB);
  EXPECT_EQ(flip(Choice::kSecond), Choice::kFirst);
  EXPECT_EQ(parse_choice("first"), Choice::kFirst);
  EXPECT_EQ(parse_choice("B"), Choice::kB);
  EXPECT_FALSE(parse_choice("C").has_value());
  EXPECT_EQ(parse_setting("both"), Setting::kBoth);
  EXPECT_TRUE(includes(Setting::kBoth, ProbeKind::kImage));
  EXPECT_FALSE(includes(Setting::kText, ProbeKind::kImage));
}

}  // namespace
}  // namespace pairwise_vl
