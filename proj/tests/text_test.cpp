#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "finemotion/nn/optimizer.hpp"
#include "finemotion/text/fine_text.hpp"
#include "finemotion/text/positional.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

namespace nn = finemotion::nn;
namespace tx = finemotion::text;
namespace sm = finemotion::stepmark;

namespace {

// Returns exactly the rows registered for a text (no [S]/[E] added).
class ScriptedEncoder : public tx::TokenEncoder {
 public:
  explicit ScriptedEncoder(int width) : width_(width) {}
  void set(const std::string& text, nn::Matrix rows) { rows_[text] = std::move(rows); }
  int width() const override { return width_; }
  int max_tokens() const override { return 77; }
  bool frozen() const override { return true; }
  std::string profile() const override { return "scripted"; }
  tx::EncodedText encode(nn::Graph& g, std::string_view text, bool) const override {
    const nn::Matrix& m = rows_.at(std::string(text));
    tx::EncodedText e;
    e.count = static_cast<int>(m.rows());
    e.e_index = e.count - 1;
    e.rows = g.constant(m);
    return e;
  }

 private:
  int width_;
  std::map<std::string, nn::Matrix> rows_;
};

nn::Matrix random_matrix(int r, int c, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

nn::Matrix permute_rows(const nn::Matrix& m, const std::vector<int>& perm) {
  nn::Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(perm[i]);
  return out;
}

nn::Matrix run_self_attention(const tx::StepSelfAttention& block, const nn::Matrix& raw, bool pe) {
  nn::Graph g(false);
  return g.value(block.forward(g, g.constant(raw), nn::Segments::from_sizes({static_cast<int>(raw.rows())}), pe));
}

nn::Matrix run_cross(const tx::FineCoarseCrossAttention& block, const nn::Matrix& coarse, const nn::Matrix& fine) {
  nn::Graph g(false);
  return g.value(block.forward(g, g.constant(coarse), g.constant(fine),
                               nn::Segments::from_sizes({static_cast<int>(coarse.rows())}),
                               nn::Segments::from_sizes({static_cast<int>(fine.rows())})));
}

tx::BlockConfig small_block(int width = 8) { return {width, 2, 2, 16}; }

}  // namespace

TEST(PositionalEncoding, ClosedForm) {
  const auto pe = tx::positional_encoding(50, 16);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(pe(0, i), i % 2 == 0 ? 0.0 : 1.0);
  EXPECT_NEAR(pe(1, 0), 0.841471, 1e-6);
  for (int p = 0; p < 50; ++p)
    for (int i = 0; i < 8; ++i) {
      const double angle = p / std::pow(10000.0, 2.0 * i / 16.0);
      EXPECT_NEAR(pe(p, 2 * i), std::sin(angle), 1e-12);
      EXPECT_NEAR(pe(p, 2 * i + 1), std::cos(angle), 1e-12);
    }
  EXPECT_LE(pe.cwiseAbs().maxCoeff(), 1.0);
}

TEST(PositionalEncoding, OddDimension) {
  try {
    tx::positional_encoding(3, 5);
    FAIL();
  } catch (const tx::TextError& e) {
    EXPECT_EQ(e.code(), tx::TextErrc::OddDimension);
  }
}

TEST(PositionalEncoding, SegmentsRestart) {
  const auto pe = tx::segment_positional_encoding(nn::Segments::from_sizes({2, 3}), 4);
  const auto ref = tx::positional_encoding(3, 4);
  EXPECT_EQ(pe.row(2), ref.row(0));
  EXPECT_EQ(pe.row(4), ref.row(2));
}

TEST(Tokenize, SplitsPunctuation) {
  EXPECT_EQ(tx::tokenize("The man walks."), (std::vector<std::string>{"the", "man", "walks", "."}));
  EXPECT_EQ(tx::tokenize("  hip-width, (left) "),
            (std::vector<std::string>{"hip", "-", "width", ",", "(", "left", ")"}));
}

TEST(EncodeStep, SingleRowIsUnchanged) {
  ScriptedEncoder enc(4);
  const nn::Matrix e1 = random_matrix(1, 4, 1);
  enc.set("x", e1);
  nn::Graph g;
  EXPECT_EQ(g.value(tx::encode_step(g, "x", enc).row), e1);
}

TEST(EncodeStep, MeanOfTwoRows) {
  ScriptedEncoder enc(4);
  const nn::Matrix rows = random_matrix(2, 4, 2);
  enc.set("a b", rows);
  nn::Graph g;
  const nn::Matrix expected = (rows.row(0) + rows.row(1)) / 2.0;
  EXPECT_LE((g.value(tx::encode_step(g, "a b", enc).row) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EncodeStep, EqualsColumnMeanOfStubTokens) {
  tx::HashStubEncoder enc(6);
  for (const char* text : {"lift", "The man lifts his left leg.", "a, b; c"}) {
    nn::Graph g;
    const auto e = enc.encode(g, text);
    const nn::Matrix mean = g.value(e.rows).colwise().mean();
    EXPECT_LE((g.value(tx::encode_step(g, text, enc).row) - mean).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(EncodeStep, PaddingExcludedFromMean) {
  tx::HashStubEncoder enc(6, 10);
  nn::Graph g;
  const auto padded = enc.encode(g, "walk forward", true);
  ASSERT_EQ(g.value(padded.rows).rows(), 10);
  EXPECT_EQ(padded.count, 4);
  const nn::Matrix real_mean = g.value(padded.rows).topRows(4).colwise().mean();
  EXPECT_LE((g.value(tx::encode_step(g, "walk forward", enc).row) - real_mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EncodeStep, TruncationReportedAndMeanOverPrefix) {
  tx::HashStubEncoder enc(6, 6);
  const std::string text = "one two three four five six seven eight nine ten";
  nn::Graph g;
  const auto step = tx::encode_step(g, text, enc);
  EXPECT_TRUE(step.truncated);
  nn::RowVector hand = enc.token_vector("<|startoftext|>") + enc.token_vector("<|endoftext|>");
  for (const char* w : {"one", "two", "three", "four"}) hand += enc.token_vector(w);
  hand /= 6.0;
  EXPECT_LE((g.value(step.row) - hand).cwiseAbs().maxCoeff(), 1e-12);
  const auto e = enc.encode(g, text);
  EXPECT_EQ(e.dropped_tokens, 6);
  EXPECT_EQ(e.count, 6);
}

TEST(EncodeStep, EmptyStep) {
  tx::HashStubEncoder enc(4);
  nn::Graph g;
  try {
    tx::encode_step(g, " \n ", enc);
    FAIL();
  } catch (const tx::TextError& e) {
    EXPECT_EQ(e.code(), tx::TextErrc::EmptyStep);
  }
}

TEST(EncodeStep, EndTokenPooling) {
  tx::HashStubEncoder enc(4);
  nn::Graph g;
  EXPECT_EQ(g.value(tx::encode_step(g, "jump", enc, tx::StepPooling::EndToken).row),
            enc.token_vector("<|endoftext|>"));
}

TEST(EncodeFine, WalkCaseText) {
  tx::HashStubEncoder enc(8);
  const auto walk = sm::parse_stepmarks(finemotion::testing::case_text(finemotion::testing::load_case_texts(), "walk").fine);
  nn::Graph g;
  const auto raw = tx::encode_fine(g, walk, enc);
  const nn::Matrix m = g.value(raw.rows);
  ASSERT_EQ(m.rows(), 5);
  ASSERT_EQ(m.cols(), 8);
  const auto bodies = sm::strip_steps(walk);
  for (int k = 0; k < 5; ++k)
    EXPECT_EQ(m.row(k), g.value(tx::encode_step(g, bodies[static_cast<std::size_t>(k)], enc).row));

  auto swapped = walk;
  std::swap(swapped.steps[1].body, swapped.steps[3].body);
  const nn::Matrix s = g.value(tx::encode_fine(g, swapped, enc).rows);
  EXPECT_EQ(s.row(1), m.row(3));
  EXPECT_EQ(s.row(3), m.row(1));
  EXPECT_EQ(s.row(0), m.row(0));
}

TEST(EncodeFine, LongTextLosesNoStep) {
  tx::HashStubEncoder enc(4, 12);
  sm::StepMarkedText s;
  for (int k = 1; k <= 6; ++k) s.steps.push_back({k, "s" + std::to_string(k), "word " + std::to_string(k) + " more words"});
  nn::Graph g;
  const auto raw = tx::encode_fine(g, s, enc);
  EXPECT_EQ(g.value(raw.rows).rows(), 6);
  EXPECT_EQ(raw.truncated_steps, 0);
}

TEST(StepSelfAttention, Shapes) {
  nn::ParameterStore store;
  nn::Rng rng(1);
  const tx::StepSelfAttention block(store, "steps", small_block(), rng);
  for (int n : {1, 2, 7}) {
    const auto out = run_self_attention(block, random_matrix(n, 8, static_cast<std::uint64_t>(n)), true);
    EXPECT_EQ(out.rows(), n);
    EXPECT_EQ(out.cols(), 8);
  }
  nn::Graph g;
  EXPECT_THROW(block.forward(g, g.constant(random_matrix(2, 6, 0)), nn::Segments::from_sizes({2})), tx::TextError);
}

TEST(StepSelfAttention, SingleStepIgnoresQueryKeyWeights) {
  nn::ParameterStore store;
  nn::Rng rng(2);
  const tx::StepSelfAttention block(store, "steps", small_block(), rng);
  const nn::Matrix raw = random_matrix(1, 8, 3);
  const nn::Matrix before = run_self_attention(block, raw, true);
  store.at("steps.layer0.attn.q.weight").value.array() += 0.7;
  store.at("steps.layer1.attn.k.weight").value.array() -= 0.4;
  EXPECT_LE((run_self_attention(block, raw, true) - before).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StepSelfAttention, IdenticalRowsWithoutPositions) {
  nn::ParameterStore store;
  nn::Rng rng(3);
  const tx::StepSelfAttention block(store, "steps", small_block(), rng);
  const nn::Matrix raw = random_matrix(1, 8, 4).replicate(5, 1);
  const nn::Matrix out = run_self_attention(block, raw, false);
  for (int r = 1; r < 5; ++r) EXPECT_LE((out.row(r) - out.row(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StepSelfAttention, OrderSensitivity) {
  nn::ParameterStore store;
  nn::Rng rng(4);
  const tx::StepSelfAttention block(store, "steps", small_block(), rng);
  const nn::Matrix raw = random_matrix(5, 8, 5);
  const std::vector<int> perm = {3, 0, 4, 1, 2};
  const nn::Matrix shuffled = permute_rows(raw, perm);

  const nn::Matrix bare = run_self_attention(block, raw, false);
  EXPECT_LE((run_self_attention(block, shuffled, false) - permute_rows(bare, perm)).cwiseAbs().maxCoeff(), 1e-12);

  const nn::Matrix with_pe = run_self_attention(block, raw, true);
  EXPECT_GT((run_self_attention(block, shuffled, true) - permute_rows(with_pe, perm)).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(FineCoarseCrossAttention, OutputFollowsCoarseLength) {
  nn::ParameterStore store;
  nn::Rng rng(5);
  const tx::FineCoarseCrossAttention block(store, "fuse", small_block(), rng);
  const nn::Matrix coarse = random_matrix(6, 8, 6);
  for (int n : {1, 3, 9}) {
    const nn::Matrix out = run_cross(block, coarse, random_matrix(n, 8, static_cast<std::uint64_t>(10 + n)));
    EXPECT_EQ(out.rows(), 6);
    EXPECT_EQ(out.cols(), 8);
  }
  nn::Graph g;
  EXPECT_THROW(block.forward(g, g.constant(coarse), g.constant(random_matrix(2, 4, 0)), nn::Segments::from_sizes({6}),
                             nn::Segments::from_sizes({2})),
               tx::TextError);
}

TEST(FineCoarseCrossAttention, SingleStepIgnoresQueryKeyWeights) {
  nn::ParameterStore store;
  nn::Rng rng(6);
  const tx::FineCoarseCrossAttention block(store, "fuse", small_block(), rng);
  const nn::Matrix coarse = random_matrix(4, 8, 7), fine = random_matrix(1, 8, 8);
  const nn::Matrix before = run_cross(block, coarse, fine);
  store.at("fuse.layer0.attn.q.weight").value.array() += 0.5;
  store.at("fuse.layer1.attn.k.weight").value.array() *= -2.0;
  EXPECT_LE((run_cross(block, coarse, fine) - before).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FineCoarseCrossAttention, StepPermutationInvariance) {
  nn::ParameterStore store;
  nn::Rng rng(7);
  const tx::FineCoarseCrossAttention block(store, "fuse", small_block(), rng);
  const nn::Matrix coarse = random_matrix(5, 8, 9);
  const nn::Matrix constant_fine = random_matrix(1, 8, 10).replicate(4, 1);
  EXPECT_EQ(run_cross(block, coarse, constant_fine), run_cross(block, coarse, permute_rows(constant_fine, {2, 0, 3, 1})));
  const nn::Matrix fine = random_matrix(4, 8, 11);
  EXPECT_LE((run_cross(block, coarse, fine) - run_cross(block, coarse, permute_rows(fine, {2, 0, 3, 1})))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(TextEmbeddings, EEmbedIsCondRow) {
  nn::Graph g;
  const nn::Matrix cond = random_matrix(7, 4, 12);
  const auto te = tx::make_text_embeddings(g, g.constant(cond), nn::Segments::from_sizes({3, 4}), {2, 6});
  EXPECT_EQ(g.value(te.e_embed).row(0), cond.row(2));
  EXPECT_EQ(g.value(te.e_embed).row(1), cond.row(6));
  EXPECT_THROW(tx::make_text_embeddings(g, g.constant(cond), nn::Segments::from_sizes({3, 4}), {3, 6}), tx::TextError);
}

TEST(DiffusionStepEmbedding, DistinctAndDefinition) {
  nn::ParameterStore store;
  nn::Rng rng(8);
  const tx::DiffusionStepEmbedding emb(store, "temb", 4, rng);
  const nn::Matrix e = random_matrix(1, 4, 13);
  nn::Graph g;
  std::vector<nn::Matrix> outs;
  for (int t = 0; t < 50; ++t) outs.push_back(g.value(emb.forward(g, g.constant(e), {t}, 50)));
  for (int a = 0; a < 50; ++a)
    for (int b = a + 1; b < 50; ++b) EXPECT_GT((outs[static_cast<std::size_t>(a)] - outs[static_cast<std::size_t>(b)]).norm(), 1e-9);
  nn::RowVector pe0(4);
  pe0 << 0, 1, 0, 1;
  const nn::Matrix expected = (e + pe0) * store.at("temb.weight").value + store.at("temb.bias").value;
  EXPECT_LE((outs[0] - expected).cwiseAbs().maxCoeff(), 1e-14);
  try {
    emb.forward(g, g.constant(e), {50}, 50);
    FAIL();
  } catch (const tx::TextError& err) {
    EXPECT_EQ(err.code(), tx::TextErrc::TOutOfRange);
  }
  EXPECT_THROW(emb.forward(g, g.constant(e), {-1}, 50), tx::TextError);
}

TEST(DiffusionStepEmbedding, GradientReachesCrossAttention) {
  nn::ParameterStore store;
  nn::Rng rng(9);
  const tx::BlockConfig cfg{2, 1, 1, 4};
  const tx::FineCoarseCrossAttention fuse(store, "fuse", cfg, rng);
  const tx::DiffusionStepEmbedding emb(store, "temb", 2, rng);
  const nn::Matrix coarse = random_matrix(3, 2, 14), fine = random_matrix(2, 2, 15);
  auto loss = [&](nn::Graph& g) {
    const nn::NodeId cond = fuse.forward(g, g.constant(coarse), g.constant(fine), nn::Segments::from_sizes({3}),
                                         nn::Segments::from_sizes({2}));
    const auto te = tx::make_text_embeddings(g, cond, nn::Segments::from_sizes({3}), {2});
    const nn::NodeId out = emb.forward(g, te.e_embed, {7}, 50);
    return nn::sum_all(g, nn::mul(g, out, out));
  };
  const auto errors = finemotion::testing::gradient_check(store, loss, 1e-6, 64);
  for (const auto& [name, err] : errors) EXPECT_LT(err, 1e-5) << name;
  double v_grad = 0.0;
  store.for_each([&](const std::string& name, const nn::Parameter& p) {
    if (name.rfind("fuse.layer0.attn.v", 0) == 0) v_grad += p.grad.norm();
  });
  EXPECT_GT(v_grad, 0.0);
}

TEST(ToyClipEncoder, FrozenParametersUntouchedByAdam) {
  for (bool frozen : {true, false}) {
    nn::ParameterStore store;
    tx::ToyEncoderConfig cfg;
    cfg.width = 8;
    cfg.vocab_buckets = 64;
    cfg.heads = 2;
    cfg.frozen = frozen;
    const tx::ToyClipEncoder enc(store, "text_encoder", cfg);
    nn::Rng rng(1);
    const nn::Linear head(store, "head", 8, 1, rng);
    std::map<std::string, nn::Matrix> before;
    store.for_each([&](const std::string& n, const nn::Parameter& p) { before[n] = p.value; });
    nn::Adam adam;
    for (int step = 0; step < 3; ++step) {
      store.zero_grad();
      nn::Graph g;
      const auto e = enc.encode(g, "the man raises his left arm");
      g.backward(nn::sum_all(g, head.forward(g, e.rows)));
      adam.step(store);
    }
    bool encoder_changed = false, head_changed = false;
    store.for_each([&](const std::string& n, const nn::Parameter& p) {
      const bool changed = p.value != before[n];
      if (n.rfind("text_encoder.", 0) == 0) encoder_changed |= changed;
      else head_changed |= changed;
    });
    EXPECT_EQ(encoder_changed, !frozen);
    EXPECT_TRUE(head_changed);
  }
}

TEST(ToyClipEncoder, LayoutPaddingAndCache) {
  nn::ParameterStore store;
  tx::ToyEncoderConfig cfg;
  cfg.width = 8;
  cfg.heads = 2;
  cfg.max_tokens = 12;
  const tx::ToyClipEncoder enc(store, "text_encoder", cfg);
  nn::Graph g(false);
  const auto e = enc.encode(g, "A man kicks.");
  EXPECT_EQ(e.count, 6);
  EXPECT_EQ(e.s_index, 0);
  EXPECT_EQ(e.e_index, 5);
  const auto padded = enc.encode(g, "A man kicks.", true);
  EXPECT_EQ(g.value(padded.rows).rows(), 12);
  // Causal masking keeps the real rows identical under padding.
  EXPECT_LE((g.value(padded.rows).topRows(6) - g.value(e.rows)).cwiseAbs().maxCoeff(), 1e-12);

  tx::EncodingCache cache;
  const auto c1 = cache.encode(g, enc, "A man kicks.");
  const auto c2 = cache.encode(g, enc, "A man kicks.");
  EXPECT_EQ(cache.size(), 1u);
  EXPECT_EQ(g.value(c1.rows), g.value(e.rows));
  EXPECT_EQ(g.value(c2.rows), g.value(e.rows));
  EXPECT_TRUE(enc.encode(g, "a b c d e f g h i j k l m").truncated);
}

TEST(InstrumentedEncoder, RecordsTexts) {
  tx::HashStubEncoder stub(4);
  tx::InstrumentedEncoder probe(stub);
  nn::Graph g;
  probe.encode(g, "first");
  probe.encode(g, "second");
  EXPECT_EQ(probe.seen(), (std::vector<std::string>{"first", "second"}));
  probe.clear();
  EXPECT_TRUE(probe.seen().empty());
}
