// Copyright 2026 The procforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <set>

#include "procforge/corpus.hpp"
#include "procforge/error.hpp"
#include "procforge/text.hpp"
#include "test_util.hpp"

using namespace procforge;
using corpus::ParallelRecord;
using corpus::TheoremRecord;

namespace {

ParallelRecord make_record(const std::string& id, std::size_t nl_chars, std::size_t formal_chars,
                           const std::string& path = "Mathlib/X.lean") {
  ParallelRecord r;
  r.id = id;
  // Split each budget across the two fields; multi-byte characters make sure
  // lengths are counted in code points.
  r.nl_question = std::string("ℚ") + std::string(nl_chars / 2 - 1, 'q');
  r.nl_answer = std::string(nl_chars - nl_chars / 2, 'a');
  if (formal_chars > 0) {
    TheoremRecord t;
    t.id = id;
    t.source_path = path;
    t.statement = "theorem x" + std::string(formal_chars / 2 - 9, 's');
    t.proof = std::string(formal_chars - formal_chars / 2, 'p');
    r.theorem = t;
  }
  return r;
}

}  // namespace

TEST_CASE("basic.lean fixture matches the hand-written extraction") {
  const auto src = text::read_file(testutil::fixtures() / "corpus/basic.lean");
  const auto got = corpus::extract_theorems(src, "basic.lean");
  const auto expected = testutil::load_json(testutil::fixtures() / "corpus/basic.expected.json");
  REQUIRE(got.size() == expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CAPTURE(i);
    CHECK(got[i].id == expected[i]["id"].get<std::string>());
    CHECK(got[i].statement == expected[i]["statement"].get<std::string>());
    CHECK(got[i].proof == expected[i]["proof"].get<std::string>());
    CHECK(got[i].env == expected[i]["env"].get<std::string>());
    CHECK(got[i].source_path == "basic.lean");
  }
}

TEST_CASE("extracted records round-trip to a contiguous source region") {
  const auto src = text::read_file(testutil::fixtures() / "corpus/basic.lean");
  const auto normalized_src = text::normalize_whitespace(src);
  for (const auto& t : corpus::extract_theorems(src, "basic.lean")) {
    CAPTURE(t.id);
    CHECK(normalized_src.find(text::normalize_whitespace(t.statement + " := " + t.proof)) != std::string::npos);
    CHECK(!t.proof.empty());
    CHECK((t.statement.starts_with("theorem") || t.statement.starts_with("lemma")));
    CHECK(t.char_count_formal == text::codepoint_length(t.statement) + text::codepoint_length(t.proof));
  }
}

TEST_CASE("three theorems with #align keep the align line in the proof") {
  const std::string src =
      "theorem a : 1 = 1 := rfl\n"
      "theorem b : 2 = 2 := by\n  rfl\n#align b_old b\n"
      "lemma c : 3 = 3 := rfl\n";
  const auto got = corpus::extract_theorems(src, "F.lean");
  REQUIRE(got.size() == 3);
  CHECK(got[1].proof == "by\n  rfl\n#align b_old b");
  CHECK(got[2].statement == "lemma c : 3 = 3");
}

TEST_CASE("declarations inside comments are skipped") {
  const std::string src =
      "/- theorem hidden : 1 = 1 := rfl -/\n"
      "-- theorem also_hidden : 1 = 1 := rfl\n"
      "/-\ntheorem nested /- inner -/ : 1 = 1 := rfl\n-/\n"
      "theorem shown : 1 = 1 := rfl\n";
  const auto got = corpus::extract_theorems(src, "F.lean");
  REQUIRE(got.size() == 1);
  CHECK(got[0].id == "F.lean::shown");
}

TEST_CASE("extraction edge cases") {
  SUBCASE("empty file gives no records") { CHECK(corpus::extract_theorems("", "E.lean").empty()); }
  SUBCASE("unbalanced source throws") {
    CHECK_THROWS_AS(corpus::extract_theorems("theorem a : (1 = 1 := rfl\n", "U.lean"), UnbalancedSource);
    CHECK_THROWS_AS(corpus::extract_theorems("theorem a : 1 = 1) := rfl\n", "U.lean"), UnbalancedSource);
  }
  SUBCASE("defs, examples and instances are not extracted") {
    const auto got = corpus::extract_theorems(
        "def f : ℕ := 1\nexample : 1 = 1 := rfl\ninstance : Inhabited ℕ := ⟨0⟩\n", "D.lean");
    CHECK(got.empty());
  }
  SUBCASE("equation-compiler declarations without := are skipped") {
    const auto got = corpus::extract_theorems("theorem f : ℕ → ℕ\n  | 0 => 0\n  | n+1 => n\n", "P.lean");
    CHECK(got.empty());
  }
  SUBCASE("modifiers and attributes are skipped, := inside brackets ignored") {
    const auto got = corpus::extract_theorems(
        "@[simp, norm_cast]\nprotected theorem t (h : (x := 1) = y) : y = y := rfl\n", "M.lean");
    REQUIRE(got.size() == 1);
    CHECK(got[0].statement == "theorem t (h : (x := 1) = y) : y = y");
    CHECK(got[0].proof == "rfl");
  }
  SUBCASE("duplicate names get a line suffix") {
    const auto got = corpus::extract_theorems(
        "namespace A\ntheorem t : 1 = 1 := rfl\nend A\nnamespace A\ntheorem t : 1 = 1 := rfl\nend A\n", "Dup.lean");
    REQUIRE(got.size() == 2);
    CHECK(got[0].id == "Dup.lean::A.t");
    CHECK(got[1].id != got[0].id);
    CHECK(got[1].id.starts_with("Dup.lean::A.t@"));
  }
  SUBCASE("open ... in applies to the next declaration only") {
    const auto got = corpus::extract_theorems(
        "import M\nopen Real in\ntheorem a : 1 = 1 := rfl\ntheorem b : 1 = 1 := rfl\n", "O.lean");
    REQUIRE(got.size() == 2);
    CHECK(got[0].env == "import M\nopen Real in");
    CHECK(got[1].env == "import M");
  }
}

TEST_CASE("ParallelRecord JSON uses exactly the documented field names") {
  ParallelRecord r = make_record("x", 410, 210);
  const nlohmann::json j = r;
  std::set<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.insert(k);
  CHECK(keys == std::set<std::string>{"id", "source_path", "env", "statement", "proof", "nl_question", "nl_answer"});
  const auto back = j.get<ParallelRecord>();
  CHECK(back.id == r.id);
  REQUIRE(back.theorem);
  CHECK(back.theorem->statement == r.theorem->statement);

  ParallelRecord nl_only;
  nl_only.id = "real";
  nl_only.nl_question = "q";
  nl_only.nl_answer = "a";
  CHECK_FALSE(nlohmann::json(nl_only).get<ParallelRecord>().theorem.has_value());
}

TEST_CASE("curation boundaries are strict: <= threshold rejects") {
  using corpus::RejectReason;
  auto reason_of = [](const ParallelRecord& r) -> std::optional<RejectReason> {
    const auto res = corpus::curate({r});
    if (res.rejected.empty()) return std::nullopt;
    return res.rejected[0].reason;
  };
  CHECK(make_record("a", 399, 300).char_count_nl() == 399);
  CHECK(reason_of(make_record("a", 399, 300)) == RejectReason::nl_too_short);
  CHECK(reason_of(make_record("b", 400, 300)) == RejectReason::nl_too_short);
  CHECK_FALSE(reason_of(make_record("c", 401, 300)).has_value());
  CHECK(make_record("d", 500, 200).char_count_formal() == 200);
  CHECK(reason_of(make_record("d", 500, 200)) == RejectReason::formal_too_short);
  CHECK_FALSE(reason_of(make_record("e", 500, 201)).has_value());
  CHECK_FALSE(reason_of(make_record("f", 401, 201)).has_value());
  // Natural-language-only records skip the formal threshold.
  CHECK_FALSE(reason_of(make_record("g", 401, 0)).has_value());

  auto empty = make_record("h", 500, 300);
  empty.nl_answer = "   ";
  CHECK(reason_of(empty) == RejectReason::empty_field);
  CHECK(corpus::to_string(RejectReason::nl_too_short) == "NL_TOO_SHORT");
}

TEST_CASE("curation of a 10-record batch with 4 violations") {
  std::vector<ParallelRecord> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(make_record("ok" + std::to_string(i), 450, 250));
  batch.push_back(make_record("short_nl", 300, 250));
  batch.push_back(make_record("short_formal", 450, 150));
  auto e = make_record("empty_q", 450, 250);
  e.nl_question.clear();
  batch.push_back(e);
  batch.push_back(make_record("manual", 450, 250));

  const auto res = corpus::curate(batch, {"manual"});
  CHECK(res.kept.size() == 6);
  CHECK(res.rejected.size() == 4);
  std::multiset<std::string> in, out;
  for (const auto& r : batch) in.insert(r.id);
  for (const auto& r : res.kept) out.insert(r.id);
  for (const auto& r : res.rejected) out.insert(r.record.id);
  CHECK(in == out);
  // Idempotent on the kept set.
  CHECK(corpus::curate(res.kept).rejected.empty());
}

TEST_CASE("split: determinism, disjointness, basic pool") {
  std::vector<ParallelRecord> recs;
  for (int i = 0; i < 1000; ++i) {
    const bool basic = i % 10 == 0;
    recs.push_back(make_record("r" + std::to_string(i), 450, 250,
                               basic ? "Mathlib/Foo/Basic.lean" : "Mathlib/Foo/Other.lean"));
  }
  for (int i = 0; i < 7; ++i) recs.push_back(make_record("nl" + std::to_string(i), 450, 0));

  corpus::SplitOptions opt;
  opt.ratios = {0.8, 0.2};
  opt.basic_size = 50;
  opt.seed = 7;
  const auto a = corpus::split(recs, opt);
  const auto b = corpus::split(recs, opt);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].ids == b[i].ids);

  // Input order does not matter.
  auto shuffled = recs;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto c = corpus::split(shuffled, opt);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].ids == c[i].ids);

  const auto& train = a[0].ids;
  const auto& random = a[1].ids;
  const auto& basic = a[2].ids;
  const auto& real = a[3].ids;
  CHECK(basic.size() == 50);
  CHECK(train.size() + random.size() == 950);
  CHECK(train.size() == 760);
  CHECK(real.size() == 7);
  std::set<std::string> seen;
  for (const auto* s : {&train, &random, &basic})
    for (const auto& id : *s) CHECK(seen.insert(id).second);
  for (const auto& id : basic) CHECK(std::stoi(id.substr(1)) % 10 == 0);

  opt.seed = 8;
  CHECK(corpus::split(recs, opt)[0].ids != train);
}

TEST_CASE("split errors and empty input") {
  corpus::SplitOptions opt;
  const auto empty = corpus::split({}, opt);
  REQUIRE(empty.size() == 4);
  for (const auto& m : empty) CHECK(m.ids.empty());

  opt.basic_size = 1;
  CHECK_THROWS_AS(corpus::split({make_record("x", 450, 250)}, opt), InsufficientBasicPool);
  opt.basic_size = 0;
  opt.ratios = {0.5, 0.4};
  CHECK_THROWS_AS(corpus::split({}, opt), InvalidInput);

  const nlohmann::json j = corpus::split({make_record("x", 450, 250)}, corpus::SplitOptions{})[0];
  CHECK(j.at("split_name") == "training");
  CHECK(j.get<corpus::SplitManifest>().ids == std::vector<std::string>{"x"});
}

TEST_CASE("informalization prompt matches the golden file") {
  TheoremRecord t;
  t.statement = "theorem t : 1 = 1";
  t.proof = "rfl";
  const auto prompt = corpus::build_informalization_prompt(t);
  CHECK(prompt == text::read_file(testutil::fixtures() / "prompts/informalization.txt"));
  CHECK(prompt.starts_with("You are a math expert familiar with the Lean 4 theorem prover"));
  CHECK(prompt.find("# Problem:") != std::string::npos);
  CHECK(prompt.find("# Proof:") != std::string::npos);
  CHECK(prompt.find("theorem t : 1 = 1 := rfl") != std::string::npos);
  CHECK(text::sha256_hex(prompt) == text::sha256_hex(corpus::build_informalization_prompt(t)));
}

TEST_CASE("informalization reply table") {
  const auto table = testutil::load_json(testutil::fixtures() / "corpus/informal_replies.json");
  REQUIRE(table.size() == 10);
  for (const auto& row : table) {
    CAPTURE(row["name"].get<std::string>());
    const auto reply = row["reply"].get<std::string>();
    if (row["expected"].is_null()) {
      CHECK_THROWS_AS(corpus::parse_informalization_reply(reply), MalformedReply);
    } else {
      const auto got = corpus::parse_informalization_reply(reply);
      CHECK(got.question == row["expected"][0].get<std::string>());
      CHECK(got.answer == row["expected"][1].get<std::string>());
    }
  }
}
