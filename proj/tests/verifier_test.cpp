#include "doctest.h"

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "claimcheck/error.hpp"
#include "claimcheck/provider.hpp"
#include "claimcheck/verifier.hpp"
#include "test_util.hpp"

using namespace claimcheck;
using testutil::error_code_of;

namespace {

std::vector<std::string> whitespace_tokens(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::unique_ptr<Gateway> scripted_gateway(std::map<std::string, std::string> script,
                                          std::vector<std::string> fail_keys = {}) {
  MockOptions opts;
  opts.script = std::move(script);
  opts.fail_keys = std::move(fail_keys);
  ProviderConfig cfg;
  cfg.embed_model = "e";
  cfg.chat_model = "c";
  return std::make_unique<Gateway>(cfg, std::make_shared<MockProvider>(std::move(opts)));
}

}  // namespace

TEST_CASE("evidence formatting numbers, titles and the empty case") {
  CHECK(format_evidence({}) == "(none)");

  std::vector<Document> docs{
      Document{"d1", "A Title", "first body"},
      Document{"d2", std::nullopt, "second body"},
      Document{"d3", "", "third body"},  // empty title behaves like no title
  };
  CHECK(format_evidence(docs) ==
        "[1] A Title: first body\n[2] second body\n[3] third body");
}

TEST_CASE("evidence lines are whitespace-flattened and capped at 300 tokens") {
  std::string messy = "line one\nline\ttwo   spaced";
  CHECK(format_evidence({Document{"d", std::nullopt, messy}}) ==
        "[1] line one line two spaced");

  std::string long_text;
  for (int i = 0; i < 305; ++i) long_text += "w" + std::to_string(i) + " ";
  auto line = format_evidence({Document{"d", std::nullopt, long_text}});
  auto tokens = whitespace_tokens(line);
  REQUIRE(tokens.size() == 301);  // "[1]" plus exactly 300 kept tokens
  CHECK(tokens[0] == "[1]");
  CHECK(tokens[1] == "w0");
  CHECK(tokens[300] == "w299");

  // the title counts against the same budget
  auto titled = format_evidence({Document{"d", "My Title", long_text}});
  auto ttokens = whitespace_tokens(titled);
  REQUIRE(ttokens.size() == 301);
  CHECK(ttokens[1] == "My");
  CHECK(ttokens[2] == "Title:");
  CHECK(ttokens[300] == "w297");
}

TEST_CASE("label parsing covers markers, boundaries and fallbacks") {
  const std::vector<std::string> classes{"Supported", "Refuted", "NotEnoughInfo"};
  auto parse = [&](const std::string& text) {
    return parse_label(text, classes, "NotEnoughInfo");
  };

  auto matched = [](const std::string& label) {
    return std::pair<std::string, ParseStatus>{label, ParseStatus::matched};
  };
  auto fallback = [](const std::string& label) {
    return std::pair<std::string, ParseStatus>{label, ParseStatus::fallback};
  };

  CHECK(parse("the claim should be classified as Supported.") == matched("Supported"));
  CHECK(parse("CLASSIFIED AS REFUTED") == matched("Refuted"));
  CHECK(parse("classified as supported") == matched("Supported"));  // canonical casing out
  CHECK(parse("classified as Refuted... wait, classified as Supported!") ==
        matched("Supported"));  // the last marker decides
  CHECK(parse("classified as (Refuted)") == matched("Refuted"));
  CHECK(parse("classified as: Supported") == matched("Supported"));
  CHECK(parse("classified as Refuted or Supported") == matched("Refuted"));  // earliest

  // word boundaries: embedded class names do not count
  CHECK(parse("classified as unsupported") == fallback("NotEnoughInfo"));
  CHECK(parse("classified as Supported2") == fallback("NotEnoughInfo"));
  CHECK(parse("it is unsupported nonsense") == fallback("NotEnoughInfo"));

  // no marker: the whole completion is scanned
  CHECK(parse("Clearly Supported by the documents.") == matched("Supported"));
  CHECK(parse("Refuted") == matched("Refuted"));
  // marker tail empty of classes, but the body names one
  CHECK(parse("It looks Supported overall, so I say classified as hogwash") ==
        matched("Supported"));

  CHECK(parse("") == fallback("NotEnoughInfo"));
  CHECK(parse("complete gibberish") == fallback("NotEnoughInfo"));
  CHECK(parse("classified as") == fallback("NotEnoughInfo"));
}

TEST_CASE("hyphenated class names beat their embedded words") {
  const std::vector<std::string> classes{"True", "Half-true", "False"};
  auto parse = [&](const std::string& text) {
    return parse_label(text, classes, "False").first;
  };
  CHECK(parse("classified as Half-true") == "Half-true");
  CHECK(parse("classified as half-TRUE today") == "Half-true");
  CHECK(parse("classified as true") == "True");
  CHECK(parse("classified as untrue") == "False");  // fallback, no boundary match
  CHECK(parse("half-true") == "Half-true");         // scan without marker
}

TEST_CASE("multi-word class names match as phrases") {
  const std::vector<std::string> classes{"Supported", "Not Enough Info"};
  auto got = parse_label("classified as not enough info", classes, "Supported");
  CHECK(got.first == "Not Enough Info");
  CHECK(got.second == ParseStatus::matched);
}

TEST_CASE("generate_argument routes each stance to its own instruction") {
  auto gw = scripted_gateway({
      {"that supports the claim", "  the supporting answer  "},
      {"that refutes the claim", "the refuting answer"},
  });
  Claim claim{"c1", "Some claim.", std::nullopt, std::nullopt};
  std::vector<Document> evidence{Document{"d1", std::nullopt, "a document"}};
  CHECK(generate_argument(claim, evidence, Stance::supporting, *gw) ==
        "the supporting answer");  // trimmed
  CHECK(generate_argument(claim, evidence, Stance::refuting, *gw) ==
        "the refuting answer");
}

TEST_CASE("predict_verdict parses scripted completions") {
  const std::vector<std::string> classes{"Supported", "Refuted", "NotEnoughInfo"};
  Claim claim{"c-9", "The tower is 300 meters tall.", std::nullopt, std::nullopt};
  ArgumentPair args;
  args.supporting = "sup text";
  args.refuting = "ref text";
  args.evidence_doc_ids = {"d-1", "d-2"};

  Demonstration demo;
  demo.claim = Claim{"c-demo", "Demo claim.", "Refuted", std::nullopt};
  demo.label = "Refuted";
  demo.supporting_arg = "demo sup";
  demo.refuting_arg = "demo ref";

  auto gw = scripted_gateway(
      {{"The tower is 300 meters tall.", "I think it should be classified as Refuted."}});
  auto verdict = predict_verdict(claim, {demo}, args, classes, "NotEnoughInfo", *gw);
  CHECK(verdict.claim_id == "c-9");
  CHECK(verdict.predicted_label == "Refuted");
  CHECK(verdict.parse_status == ParseStatus::matched);
  CHECK(verdict.raw_completion == "I think it should be classified as Refuted.");
  CHECK(verdict.demonstrations_used == std::vector<std::string>{"c-demo"});
  CHECK(verdict.arguments.supporting == "sup text");
  CHECK(verdict.arguments.evidence_doc_ids == std::vector<std::string>{"d-1", "d-2"});
  CHECK(verdict.explanation.empty());
}

TEST_CASE("a blank completion falls back instead of failing") {
  const std::vector<std::string> classes{"Supported", "Refuted"};
  Claim claim{"c-9", "Blank answer claim.", std::nullopt, std::nullopt};
  ArgumentPair args;
  args.supporting = "s";
  args.refuting = "r";

  auto gw = scripted_gateway({{"Blank answer claim.", "   \n  "}});
  auto verdict = predict_verdict(claim, {}, args, classes, "Refuted", *gw);
  CHECK(verdict.predicted_label == "Refuted");
  CHECK(verdict.parse_status == ParseStatus::fallback);
  CHECK(verdict.raw_completion.empty());
}

TEST_CASE("provider failures surface out of predict_verdict") {
  const std::vector<std::string> classes{"Supported", "Refuted"};
  Claim claim{"c-9", "Poisoned claim text.", std::nullopt, std::nullopt};
  ArgumentPair args;
  args.supporting = "s";
  args.refuting = "r";

  auto gw = scripted_gateway({}, {"Poisoned claim text."});
  CHECK(error_code_of([&] {
          predict_verdict(claim, {}, args, classes, "Refuted", *gw);
        }) == "ProviderError");
}

TEST_CASE("generate_explanation answers from its own prompt") {
  auto gw = scripted_gateway({{"In at most 5 sentences", "because the evidence agrees"}});
  Claim claim{"c-9", "Some claim.", std::nullopt, std::nullopt};
  ArgumentPair args;
  args.supporting = "s";
  args.refuting = "r";
  CHECK(generate_explanation(claim, args, "Supported", *gw) ==
        "because the evidence agrees");
  CHECK(gw->stats().generate_requests == 1);
}
