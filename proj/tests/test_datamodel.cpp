#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "creagen/records.hpp"
#include "creagen/types.hpp"
#include "creagen/vocab.hpp"
#include "support/fixtures.hpp"

using namespace creagen;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("datamodel") {

TEST_CASE("flatten_item_text without attributes is the title") {
  Item item{"i1", "red mug", {}};
  CHECK(flatten_item_text(item) == "red mug");
}

TEST_CASE("flatten_item_text joins attributes deterministically") {
  Item item{"i1", "mug", {{"color", "red"}}};
  CHECK(flatten_item_text(item) == "mug ; color: red");

  Item two{"i2", "mug", {{"color", "red"}, {"size", "large"}}};
  CHECK(flatten_item_text(two) == "mug ; color: red ; size: large");
}

TEST_CASE("flatten_item_text is injective over distinct fixtures") {
  const auto records = fixtures::make_records(12, 7);
  std::set<std::string> seen_items;
  std::set<std::string> seen_texts;
  for (const auto& r : records) {
    for (const auto& item : r.history) {
      const std::string key = flatten_item_text(item);
      if (seen_items.insert(item.item_id).second)
        CHECK_MESSAGE(seen_texts.insert(key).second == true,
                      "distinct item collided on: " << key);
    }
  }
}

TEST_CASE("record round-trip through json lines") {
  const auto records = fixtures::make_records(3, 11);
  const std::string path = temp_path("creagen_records_roundtrip.jsonl");
  write_records(records, path);
  const auto loaded = read_records(path);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(record_to_json_line(loaded[i]) == record_to_json_line(records[i]));
  }
  std::filesystem::remove(path);
}

TEST_CASE("empty records file reads as empty list") {
  const std::string path = temp_path("creagen_records_empty.jsonl");
  std::ofstream(path).close();
  CHECK(read_records(path).empty());
  std::filesystem::remove(path);
}

TEST_CASE("missing response field names the field and line") {
  const std::string line =
      R"({"user_id":"u","history":[{"item_id":"i","title":"t"}],)"
      R"("ad":{"ad_id":"a","original_title":"o"},"interest_text":"w"})";
  try {
    record_from_json_line(line, 7);
    FAIL("expected RecordParseError");
  } catch (const RecordParseError& e) {
    CHECK(e.field() == "response");
    CHECK(e.line() == 7);
    CHECK(std::string(e.what()).find("line 7") != std::string::npos);
  }
}

TEST_CASE("malformed json line carries its line number") {
  const std::string path = temp_path("creagen_records_bad.jsonl");
  {
    std::ofstream out(path);
    out << record_to_json_line(fixtures::make_records(1, 3)[0]) << '\n';
    out << "{not json\n";
  }
  CHECK_THROWS_AS(read_records(path), RecordParseError);
  try {
    read_records(path);
  } catch (const RecordParseError& e) {
    CHECK(e.line() == 2);
  }
  std::filesystem::remove(path);
}

TEST_CASE("streaming reader is called once per record") {
  const auto records = fixtures::make_records(5, 13);
  const std::string path = temp_path("creagen_records_stream.jsonl");
  write_records(records, path);
  int count = 0;
  for_each_record(path, [&](DatasetRecord&&) { ++count; });
  CHECK(count == 5);
  std::filesystem::remove(path);
}

TEST_CASE("vocabulary reserved ids are distinct and first") {
  const Vocabulary v = Vocabulary::build({"alpha beta"});
  CHECK(v.token_of(Vocabulary::kPad) == "[pad]");
  CHECK(v.token_of(Vocabulary::kUnk) == "[unk]");
  CHECK(v.token_of(Vocabulary::kBos) == "[bos]");
  CHECK(v.token_of(Vocabulary::kEos) == "[eos]");
  CHECK(v.token_of(Vocabulary::kItem) == "[item]");
  CHECK(v.token_of(Vocabulary::kUser) == "[user]");
  CHECK(v.token_of(Vocabulary::kSep) == "[sep]");
  std::set<int> ids{Vocabulary::kPad,  Vocabulary::kUnk,  Vocabulary::kBos,
                    Vocabulary::kEos,  Vocabulary::kItem, Vocabulary::kUser,
                    Vocabulary::kSep};
  CHECK(ids.size() == 7);
}

TEST_CASE("vocabulary id round-trip") {
  const Vocabulary v = Vocabulary::build({"alpha beta gamma ; delta"});
  for (int id = 0; id < v.size(); ++id) {
    CHECK(v.id_of(v.token_of(id)) == id);
  }
}

TEST_CASE("vocabulary file round-trip preserves ids") {
  const Vocabulary v = Vocabulary::build({"wireless mouse ; fast delivery"});
  const std::string path = temp_path("creagen_vocab.txt");
  v.save(path);
  const Vocabulary loaded = Vocabulary::load(path);
  CHECK(loaded.size() == v.size());
  CHECK(loaded.content_hash() == v.content_hash());
  for (int id = 0; id < v.size(); ++id) CHECK(loaded.token_of(id) == v.token_of(id));
  std::filesystem::remove(path);
}

TEST_CASE("tokenize empty text gives no tokens") {
  const Vocabulary v = Vocabulary::build({"a b"});
  CHECK(tokenize("", v, 8).empty());
}

TEST_CASE("tokenize truncates to the first max_len tokens") {
  std::string text;
  for (int i = 0; i < 100; ++i) text += "tok" + std::to_string(i) + " ";
  const Vocabulary v = Vocabulary::build({text});
  const auto all = tokenize(text, v, 1000);
  REQUIRE(all.size() == 100);
  const auto cut = tokenize(text, v, 64);
  REQUIRE(cut.size() == 64);
  for (int i = 0; i < 64; ++i)
    CHECK(cut[static_cast<std::size_t>(i)] == all[static_cast<std::size_t>(i)]);
}

TEST_CASE("out-of-vocabulary words map to the unknown id") {
  const Vocabulary v = Vocabulary::build({"known words"});
  const auto ids = tokenize("known mystery", v, 8);
  REQUIRE(ids.size() == 2);
  CHECK(ids[0] != Vocabulary::kUnk);
  CHECK(ids[1] == Vocabulary::kUnk);
}

TEST_CASE("detokenize inverts tokenize on canonical in-vocab text") {
  const Vocabulary v = Vocabulary::build({"soft wool blanket warm winter"});
  const std::string text = "soft wool blanket";
  CHECK(v.decode_text(tokenize(text, v, 16)) == text);
}

TEST_CASE("tokenize respects max_len over random strings") {
  creagen::Rng rng(99);
  const Vocabulary v = Vocabulary::build({"a b c d e f g h"});
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    const int words = static_cast<int>(rng.uniform(30));
    for (int i = 0; i < words; ++i)
      text += fixtures::pick(fixtures::nouns(), rng) + " ";
    const int max_len = 1 + static_cast<int>(rng.uniform(10));
    CHECK(tokenize(text, v, max_len).size() <=
          static_cast<std::size_t>(max_len));
  }
}

TEST_CASE("build honors the frequency cutoff") {
  const Vocabulary v = Vocabulary::build({"rare common common common"}, 2);
  CHECK(v.id_of("common") != Vocabulary::kUnk);
  CHECK(v.id_of("rare") == Vocabulary::kUnk);
}

}  // TEST_SUITE
