#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "fixtures.hpp"
#include "vpagent/error.hpp"
#include "vpagent/prompts.hpp"
#include "vpagent/util.hpp"

using namespace vpa;

TEST(Util, TrimAndLower) {
  EXPECT_EQ(trim("  a b \n"), "a b");
  EXPECT_EQ(trim(""), "");
  EXPECT_EQ(to_lower("AbC"), "abc");
  EXPECT_TRUE(contains_icase("Partially Correct", "partially"));
}

TEST(Util, DecimalLabels) {
  EXPECT_EQ(format_decimal1(2.5), "2.5");
  EXPECT_EQ(format_decimal1(18.0), "18.0");
  EXPECT_EQ(format_decimal1(0.04), "0.0");
}

TEST(Util, RenderTemplateLeavesUnknownKeys) {
  EXPECT_EQ(render_template("{a} and {b}", {{"a", "x"}}), "x and {b}");
  EXPECT_EQ(render_template("{\"json\": 1}", {}), "{\"json\": 1}");
}

TEST(Util, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(7, "s1"), derive_seed(7, "s1"));
  EXPECT_NE(derive_seed(7, "s1"), derive_seed(7, "s2"));
  EXPECT_NE(derive_seed(7, "s1"), derive_seed(8, "s1"));
  EXPECT_NE(derive_seed(7, "s1", 0), derive_seed(7, "s1", 1));
}

TEST(Util, Sha256KnownVector) {
  const std::string abc = "abc";
  const std::vector<std::uint8_t> bytes(abc.begin(), abc.end());
  EXPECT_EQ(sha256_hex(bytes), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(base64_encode(bytes), "YWJj");
}

TEST(Util, ExtractJsonObjectToleratesProse) {
  auto j = extract_json_object("Sure! ```json\n{\"is_valid\": true, \"note\": \"a } brace\"}\n``` done");
  ASSERT_TRUE(j);
  EXPECT_TRUE((*j)["is_valid"].get<bool>());
  EXPECT_FALSE(extract_json_object("no json here"));
  EXPECT_FALSE(extract_json_object("[1, 2]"));
}

TEST(Util, JsonlRoundTripAndBadLine) {
  test::TempDir dir;
  const auto p = dir / "r.jsonl";
  write_jsonl(p, {Json{{"a", 1}}, Json{{"b", 2}}});
  append_jsonl(p, Json{{"c", 3}});
  const auto rows = read_jsonl(p);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2]["c"], 3);
  write_file(p, "{\"a\": 1}\n\n{broken\n");
  try {
    read_jsonl(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
    EXPECT_NE(e.detail().find("3"), std::string::npos);
  }
}

TEST(Util, OrderedWriterCommitsInSlotOrder) {
  test::TempDir dir;
  const auto p = dir / "o.jsonl";
  OrderedJsonlWriter w(p, 5);
  w.submit(3, Json{{"i", 3}});
  w.submit(1, Json{{"i", 1}});
  EXPECT_EQ(w.committed(), 0u);
  w.submit(0, Json{{"i", 0}});
  EXPECT_EQ(w.committed(), 2u);
  w.submit(2, std::nullopt);
  w.submit(4, Json{{"i", 4}});
  const auto rows = read_jsonl(p);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0]["i"], 0);
  EXPECT_EQ(rows[1]["i"], 1);
  EXPECT_EQ(rows[2]["i"], 3);
  EXPECT_EQ(rows[3]["i"], 4);
}

TEST(Util, ParallelForBoundsConcurrencyAndRethrows) {
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  std::vector<int> seen(50, 0);
  parallel_for(seen.size(), 4, [&](std::size_t i) {
    const int now = ++in_flight;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::microseconds(200));
    seen[i] += 1;
    --in_flight;
  });
  EXPECT_LE(peak.load(), 4);
  for (int v : seen) EXPECT_EQ(v, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 5) throw std::runtime_error("boom");
               }),
               std::runtime_error);
  std::atomic<bool> stop{true};
  int calls = 0;
  parallel_for(10, 1, [&](std::size_t) { ++calls; }, &stop);
  EXPECT_EQ(calls, 0);
}

TEST(Prompts, BuiltinTemplatesPresent) {
  const auto& lib = PromptLibrary::builtin();
  for (const char* name : {"text_filter.system", "text_filter.user", "video_verify.system", "video_verify.user",
                           "rewrite.system", "rewrite.user", "judge.system", "judge.user", "tool_prompt", "question",
                           "direct_answer"}) {
    EXPECT_TRUE(lib.has(name)) << name;
  }
  EXPECT_THROW(lib.get("nope"), Error);
  const auto tool = lib.render("tool_prompt", {{"vp_path", "vp.png"}, {"fps", "1.0"}, {"t_max", "5"}});
  EXPECT_NE(tool.find("vp.png"), std::string::npos);
  EXPECT_EQ(tool.find("{vp_path}"), std::string::npos);
}

TEST(Errors, NamesAndClasses) {
  const Error e(ErrorCode::InvalidWindow, "start 10.0s >= end 5.0s");
  EXPECT_STREQ(e.what(), "InvalidWindow: start 10.0s >= end 5.0s");
  EXPECT_TRUE(is_environment_error(ErrorCode::ClientUnreachable));
  EXPECT_TRUE(is_environment_error(ErrorCode::PolicyUnreachable));
  EXPECT_FALSE(is_environment_error(ErrorCode::ConfigError));
  EXPECT_FALSE(is_environment_error(ErrorCode::ManifestInvalid));
}
