#include <gtest/gtest.h>

#include <random>

#include "finemotion/stepmark/pseudocode.hpp"
#include "finemotion/stepmark/stepmark.hpp"
#include "finemotion/stepmark/verdict.hpp"
#include "support/fixtures.hpp"
#include "support/reference_recognizer.hpp"

namespace sm = finemotion::stepmark;
using finemotion::testing::load_case_texts;

namespace {

sm::StepmarkErrc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const sm::StepmarkError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no StepmarkError thrown";
  return sm::StepmarkErrc::EmptyInput;
}

sm::StepMarkedText five_steps() {
  return sm::parse_stepmarks(finemotion::testing::case_text(load_case_texts(), "walk").fine);
}

}  // namespace

TEST(ParseStepmarks, SingleStep) {
  const auto s = sm::parse_stepmarks(
      "<step 1: beginning pose>The man stands upright with his feet together.</step 1: beginning pose>");
  ASSERT_EQ(s.size(), 1);
  EXPECT_EQ(s.steps[0].index, 1);
  EXPECT_EQ(s.steps[0].name, "beginning pose");
  EXPECT_EQ(s.steps[0].body, "The man stands upright with his feet together.");
}

TEST(ParseStepmarks, WalkCaseText) {
  const auto s = five_steps();
  ASSERT_EQ(s.size(), 5);
  const std::vector<std::string> names = {"beginning pose", "lift foot", "place foot", "swing foot", "end pose"};
  for (int i = 0; i < 5; ++i) EXPECT_EQ(s.steps[static_cast<std::size_t>(i)].name, names[static_cast<std::size_t>(i)]);
  EXPECT_NE(s.steps[4].body.find("He repeats steps 2-4"), std::string::npos);
}

TEST(ParseStepmarks, AllCaseTextsRoundTrip) {
  const auto cases = load_case_texts();
  ASSERT_EQ(cases.size(), 6u);
  for (const auto& c : cases) {
    const auto s = sm::parse_stepmarks(c.fine);
    EXPECT_EQ(sm::parse_stepmarks(sm::serialize(s)), s) << c.source_id;
    // The case texts are already canonical.
    EXPECT_EQ(sm::serialize(s), c.fine) << c.source_id;
  }
}

TEST(ParseStepmarks, WhitespaceAroundColonTolerated) {
  const auto s = sm::parse_stepmarks("  <STEP 1 :pose>a</step 1:  pose>\n\n<step  2:end>b</step 2 : end>  ");
  ASSERT_EQ(s.size(), 2);
  EXPECT_EQ(sm::serialize(s), "<step 1: pose>a</step 1: pose> <step 2: end>b</step 2: end>");
}

TEST(ParseStepmarks, Errors) {
  EXPECT_EQ(code_of([] { sm::parse_stepmarks("   "); }), sm::StepmarkErrc::EmptyInput);
  EXPECT_EQ(code_of([] { sm::parse_stepmarks("<step 1: a>x"); }), sm::StepmarkErrc::UnbalancedTags);
  EXPECT_EQ(code_of([] { sm::parse_stepmarks("<step 1: a>x<step 2: b>y</step 2: b></step 1: a>"); }),
            sm::StepmarkErrc::UnbalancedTags);
  EXPECT_EQ(code_of([] { sm::parse_stepmarks("</step 1: a>"); }), sm::StepmarkErrc::UnbalancedTags);
  EXPECT_EQ(code_of([] { sm::parse_stepmarks("<step 1: a>x</step 1: a><step 3: c>z</step 3: c>"); }),
            sm::StepmarkErrc::IndexGap);
  EXPECT_EQ(code_of([] { sm::parse_stepmarks("<step 1: a>x</step 1: a><step 1: a>y</step 1: a>"); }),
            sm::StepmarkErrc::DuplicateIndex);
  EXPECT_EQ(code_of([] { sm::parse_stepmarks("<step 1: a>x</step 1: b>"); }), sm::StepmarkErrc::TagPayloadMismatch);
  EXPECT_EQ(code_of([] { sm::parse_stepmarks("<step 1: a>x</step 2: a>"); }), sm::StepmarkErrc::TagPayloadMismatch);
  EXPECT_EQ(code_of([] { sm::parse_stepmarks("<step one: a>x</step one: a>"); }), sm::StepmarkErrc::MalformedTag);
  EXPECT_EQ(code_of([] { sm::parse_stepmarks("<p>some text</p>"); }), sm::StepmarkErrc::StrayText);
  EXPECT_EQ(code_of([] { sm::parse_stepmarks("<step 1: a>x</step 1: a> trailing note"); }),
            sm::StepmarkErrc::StrayText);
}

TEST(Serialize, SortsByIndex) {
  sm::StepMarkedText s;
  s.steps = {{2, "b", "second"}, {1, "a", "first"}};
  EXPECT_EQ(sm::serialize(s), "<step 1: a>first</step 1: a> <step 2: b>second</step 2: b>");
}

TEST(Serialize, OneStep) {
  sm::StepMarkedText s;
  s.steps = {{1, "pose", "..."}};
  EXPECT_EQ(sm::serialize(s), "<step 1: pose>...</step 1: pose>");
}

TEST(Serialize, RoundTripSweep) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 500; ++i) {
    const auto s = finemotion::testing::random_step_text(rng);
    const std::string once = sm::serialize(s);
    const auto parsed = sm::parse_stepmarks(once);
    ASSERT_EQ(parsed, s) << once;
    EXPECT_EQ(sm::serialize(parsed), once);
  }
}

TEST(StripSteps, Examples) {
  sm::StepMarkedText one;
  one.steps = {{1, "pose", "stand still"}};
  EXPECT_EQ(sm::strip_steps(one), std::vector<std::string>{"stand still"});

  const auto kick = sm::parse_stepmarks(finemotion::testing::case_text(load_case_texts(), "kick").fine);
  const auto bodies = sm::strip_steps(kick);
  ASSERT_EQ(bodies.size(), 4u);
  EXPECT_EQ(bodies[0].rfind("The man begins standing", 0), 0u);

  sm::StepMarkedText ragged;
  ragged.steps = {{1, "a", "line one\n  line\ttwo"}};
  EXPECT_EQ(sm::strip_steps(ragged)[0], "line one line two");
}

TEST(TruncateSteps, Modes) {
  const auto s = five_steps();
  const auto inner = sm::truncate_steps(s, sm::TruncateMode::DelFirstLast);
  ASSERT_EQ(inner.size(), 3);
  EXPECT_EQ(inner.steps[0].name, "lift foot");
  EXPECT_EQ(inner.steps[2].name, "swing foot");
  EXPECT_NO_THROW(inner.validate());

  const auto ends = sm::truncate_steps(s, sm::TruncateMode::DelInner);
  ASSERT_EQ(ends.size(), 2);
  EXPECT_EQ(ends.steps[0].body, s.steps[0].body);
  EXPECT_EQ(ends.steps[1].body, s.steps[4].body);
  EXPECT_EQ(ends.steps[1].index, 2);
  EXPECT_NO_THROW(ends.validate());

  sm::StepMarkedText two;
  two.steps = {{1, "a", "x"}, {2, "b", "y"}};
  EXPECT_EQ(code_of([&] { sm::truncate_steps(two, sm::TruncateMode::DelFirstLast); }),
            sm::StepmarkErrc::TooFewSteps);
  EXPECT_EQ(sm::truncate_steps(two, sm::TruncateMode::DelInner), two);

  sm::StepMarkedText three;
  three.steps = {{1, "a", "x"}, {2, "b", "y"}, {3, "c", "z"}};
  EXPECT_EQ(sm::truncate_steps(three, sm::TruncateMode::DelFirstLast).size(), 1);
}

TEST(TruncateSteps, AlwaysContiguous) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto s = finemotion::testing::random_step_text(rng);
    for (auto mode : {sm::TruncateMode::DelFirstLast, sm::TruncateMode::DelInner}) {
      try {
        sm::truncate_steps(s, mode).validate();
      } catch (const sm::StepmarkError& e) {
        EXPECT_EQ(e.code(), sm::StepmarkErrc::TooFewSteps);
      }
    }
  }
}

TEST(Pseudocode, Examples) {
  sm::StepMarkedText one;
  one.steps = {{1, "a", "x"}};
  const auto block = sm::validate_pseudocode("raise(arms, target=above_head)", one);
  ASSERT_EQ(block.call_count(), 1u);
  EXPECT_EQ(block.groups[0][0].verb, "raise");
  ASSERT_EQ(block.groups[0][0].args.size(), 2u);
  EXPECT_EQ(block.groups[0][0].args[1].key, "target");
  EXPECT_EQ(block.groups[0][0].args[1].value, "above_head");
  EXPECT_TRUE(finemotion::testing::reference_accepts_line("raise(arms, target=above_head)"));

  try {
    sm::validate_pseudocode("raise(arms", one);
    FAIL();
  } catch (const sm::PseudoCodeGrammarError& e) {
    EXPECT_EQ(e.line(), 1);
  }

  sm::StepMarkedText four;
  four.steps = {{1, "a", "x"}, {2, "b", "y"}, {3, "c", "z"}, {4, "d", "w"}};
  EXPECT_EQ(code_of([&] {
              sm::validate_pseudocode("step 1:\nstand()\nstep 2:\nbend(knees)\nstep 3:\nstand()", four);
            }),
            sm::StepmarkErrc::StepCountMismatch);
  EXPECT_EQ(code_of([&] { sm::validate_pseudocode(" \n\t\n", four); }), sm::StepmarkErrc::EmptyBlock);
  EXPECT_EQ(code_of([&] { sm::validate_pseudocode("stand()\nstep 1:\nsit()", one); }),
            sm::StepmarkErrc::GrammarError);
  EXPECT_EQ(sm::validate_pseudocode("Step 1: pose\r\nstand(feet=together);\r\n", one).call_count(), 1u);
}

TEST(Pseudocode, MatchesReferenceRecognizerOnFuzz) {
  std::mt19937_64 rng(99);
  const std::vector<std::string> seeds = {"raise(arms, target=above_head)", "squat(depth=0.5)", "walk(steps=-2);",
                                          "stand()", "kick(leg = left, height=high)", "step 2: go"};
  const std::string alphabet = "abz_09(),=.-; \tS:";
  std::uniform_int_distribution<int> pick_seed(0, static_cast<int>(seeds.size()) - 1),
      pick_char(0, static_cast<int>(alphabet.size()) - 1), op(0, 3), lines(1, 3);
  sm::StepMarkedText one;
  one.steps = {{1, "a", "x"}};
  int accepted = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string block;
    const int n = lines(rng);
    for (int l = 0; l < n; ++l) {
      std::string s = seeds[static_cast<std::size_t>(pick_seed(rng))];
      const int edits = op(rng);
      for (int e = 0; e < edits && !s.empty(); ++e) {
        std::uniform_int_distribution<std::size_t> at(0, s.size() - 1);
        const std::size_t p = at(rng);
        switch (op(rng)) {
          case 0: s.erase(p, 1); break;
          case 1: s.insert(p, 1, alphabet[static_cast<std::size_t>(pick_char(rng))]); break;
          default: s[p] = alphabet[static_cast<std::size_t>(pick_char(rng))]; break;
        }
      }
      block += s + "\n";
    }
    bool ours = true;
    try {
      sm::validate_pseudocode(block, one);
    } catch (const sm::StepmarkError&) {
      ours = false;
    }
    const bool ref = finemotion::testing::reference_accepts_block(block, 1);
    EXPECT_EQ(ours, ref) << block;
    accepted += ours ? 1 : 0;
  }
  // Both outcomes are exercised.
  EXPECT_GT(accepted, 100);
  EXPECT_LT(accepted, 900);
}

TEST(ClassifyResponse, Verdicts) {
  EXPECT_EQ(sm::classify_response("I'm sorry, but the description you provided is not detailed enough...").verdict,
            sm::Verdict::SorryLike);
  EXPECT_EQ(sm::classify_response("\"I\xE2\x80\x99m sorry\" said nobody").verdict, sm::Verdict::SorryLike);
  EXPECT_EQ(sm::classify_response("I apologize, I cannot").verdict, sm::Verdict::SorryLike);
  for (const auto& c : load_case_texts()) EXPECT_EQ(sm::classify_response(c.fine).verdict, sm::Verdict::Valid);
  EXPECT_EQ(sm::classify_response("<p>text</p>").verdict, sm::Verdict::NonConforming);
  EXPECT_EQ(sm::classify_response("<step 1: a>x</step 2: a>").verdict, sm::Verdict::NonConforming);
  EXPECT_EQ(sm::classify_response("").verdict, sm::Verdict::NonConforming);
}

TEST(ClassifyResponse, DescriptionWithCodeSection) {
  const std::string raw =
      "<step 1: pose>Stand.</step 1: pose> <step 2: squat>Bend knees.</step 2: squat>\n"
      "Pseudo-code:\n```\nstep 1:\nstand()\nstep 2:\nbend(knees, depth=0.5)\n```";
  EXPECT_EQ(sm::classify_response(raw).verdict, sm::Verdict::Valid);
  const auto split = sm::split_response(raw);
  ASSERT_TRUE(split.pseudocode.has_value());
  const auto block = sm::validate_pseudocode(*split.pseudocode, sm::parse_stepmarks(split.description));
  EXPECT_EQ(block.groups.size(), 2u);
}

TEST(ClassifyResponse, TotalOnGarbage) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 80);
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) s.push_back(static_cast<char>(byte(rng)));
    if (i % 3 == 0) s = "<step 1: a>" + s;
    const auto v = sm::classify_response(s);
    EXPECT_TRUE(v.verdict == sm::Verdict::Valid || v.verdict == sm::Verdict::SorryLike ||
                v.verdict == sm::Verdict::NonConforming);
  }
}
