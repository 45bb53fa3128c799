#include <doctest.h>

#include "clinctx/claims.hpp"
#include "clinctx/prompts.hpp"
#include "clinctx/tasks.hpp"
#include "clinctx/text.hpp"
#include "test_support.hpp"

using namespace clinctx;

namespace {

const std::string kDir = testsupport::source_dir() + "/data/prompts/";

// Every byte of `tmpl` outside the placeholder must appear unchanged around the value.
void check_substitution(std::string_view tmpl, const std::string& placeholder, const std::string& rendered,
                        const std::string& value) {
  std::string token = "{" + placeholder + "}";
  auto at = tmpl.find(token);
  REQUIRE(at != std::string_view::npos);
  CHECK(tmpl.find(token, at + 1) == std::string_view::npos);
  CHECK(rendered.size() == tmpl.size() - token.size() + value.size());
  CHECK(rendered.substr(0, at) == tmpl.substr(0, at));
  CHECK(rendered.substr(at, value.size()) == value);
  CHECK(rendered.substr(at + value.size()) == tmpl.substr(at + token.size()));
}

}  // namespace

TEST_CASE("shipped prompts are byte exact") {
  CHECK(text::sha256_hex(prompts::chat_system()) == "a50b671a90df93c487fb6ec0fa54094c569f6deead05fee4af5c4073e80a0226");
  CHECK(text::sha256_hex(prompts::claim_classification()) ==
        "079eec4f0f691b9b7ef613736dea3d70bbcda312eb7877543ed16f234fb3b0b9");
  CHECK(text::sha256_hex(prompts::entailment()) == "593268424e6a913fa1fa7926321916a07a3f9eba9491df16e5b28165eaa49f17");
  CHECK(text::sha256_hex(prompts::linguistic_task()) ==
        "9a806457206b4defb95c8812e8893c3ce1c1d49a15dca5c03d23109f53109475");
  CHECK(text::sha256_hex(prompts::task_normalization()) ==
        "c5dbcc67a2db5323415075d4f11c2ec334dc61116df477737c148b4948cb2cba");
  CHECK(text::sha256_hex(prompts::task_catalog()) == "8ab5a229b60af6ee3fe9b471ab05aa95f94d45368ac9e3c8e099924156effd5a");
  CHECK(std::string(prompts::chat_system()) == testsupport::read_file(kDir + "chat_system.txt"));
  CHECK(std::string(prompts::entailment()) == testsupport::read_file(kDir + "entailment.txt"));
}

TEST_CASE("substitution leaves other bytes untouched") {
  // Values that look like placeholders must not be expanded again.
  const std::string tricky = "x {source_chunks} {USER_QUERY} \xE2\x82\xAC {{braces}}";
  std::string e = claims::entailment_prompt(tricky, "SRC");
  std::string tmpl(prompts::entailment());
  auto ai = tmpl.find("{ai_content}");
  auto src = tmpl.find("{source_chunks}");
  REQUIRE(ai < src);
  std::string expected = tmpl.substr(0, ai) + tricky + tmpl.substr(ai + 12, src - ai - 12) + "SRC" + tmpl.substr(src + 15);
  CHECK(e == expected);
  check_substitution(prompts::task_normalization(), "USER_QUERY", tasks::normalization_prompt(tricky), tricky);
  check_substitution(prompts::linguistic_task(), "user_question", tasks::linguistic_prompt(tricky), tricky);
}

TEST_CASE("catalog file parses to one entry per line") {
  auto c = tasks::TaskCatalog::builtin();
  auto lines = text::split_lines(prompts::task_catalog());
  std::size_t non_empty = 0;
  for (const auto& l : lines) non_empty += !text::trim(l).empty();
  CHECK(c.size() == non_empty);
}
