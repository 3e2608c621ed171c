#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fixtures.hpp"
#include "sketchlang/grammar.hpp"
#include "sketchlang/prim_model.hpp"

using namespace sketchlang;

namespace {

CodebookSet tiny_books() {
  CodebookSet set;
  for (int t = 0; t < kParamTypeCount; ++t) {
    set.books[t].type = (ParamType)t;
    set.books[t].centers = {-0.5, 0.0, 0.5, 1.0};
    set.books[t].requested_k = 4;
  }
  set.of(ParamType::Radius).centers = {0.1, 0.2, 0.3, 0.4};
  set.of(ParamType::Rotation).centers = {-1.0, 1.0};
  return set;
}

Sketch two_points() {
  Sketch s;
  s.primitives.push_back(make_point({0.0, 0.0}));
  s.primitives.push_back(make_point({0.5, 0.5}));
  s.constraints.push_back(make_coincident(0, SubRef::Whole, 1, SubRef::Whole));
  return s;
}

PrimModelConfig small_config(uint64_t seed) {
  PrimModelConfig cfg;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.embed_dim = 32;
  cfg.context_len = 128;
  cfg.dropout = 0.0;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("untrained model is exactly uniform") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  TokenSequence seq = parse_sketch(fixtures::rectangle(), books, v);

  PrimModel<double> model(small_config(3), v);
  const double logv = std::log((double)v.size());
  CHECK(model.loss_forward_only(seq) == doctest::Approx(logv).epsilon(1e-12));

  auto nll = model.sequence_bits(seq);
  CHECK((int)nll.bits.size() == seq.size() - 1);
  CHECK(nll.clamped == 0);
  for (double b : nll.bits) {
    CHECK(b == doctest::Approx(std::log2((double)v.size())).epsilon(1e-12));
  }
}

TEST_CASE("teacher-forced gradients match finite differences") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  TokenSequence seq = parse_sketch(two_points(), books, v);

  PrimModelConfig cfg = small_config(11);
  cfg.embed_dim = 16;

  SUBCASE("plain loss") {
    PrimModel<double> model(cfg, v);
    Rng rng(99);
    auto res = nn::gradient_check<double>(
        model.params(), [&] { return model.loss_forward_only(seq); },
        [&] { model.loss(seq, nullptr); }, rng, 100);
    CHECK(res.checked == 100);
    CHECK(res.max_rel_error < 1e-4);
  }
  SUBCASE("legality-masked loss") {
    cfg.mask_values_at_train = true;
    PrimModel<double> model(cfg, v);
    Rng rng(100);
    auto res = nn::gradient_check<double>(
        model.params(), [&] { return model.loss_forward_only(seq); },
        [&] { model.loss(seq, nullptr); }, rng, 50);
    CHECK(res.max_rel_error < 1e-4);
  }
}

TEST_CASE("model overfits a single sketch and reproduces it greedily") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  TokenSequence seq = parse_sketch(fixtures::rectangle(), books, v);

  PrimModel<float> model(small_config(5), v);
  nn::Adam<float> opt;
  opt.lr = 3e-3;
  double last = 0;
  for (int step = 0; step < 400; ++step) {
    nn::zero_grads(model.params());
    last = model.loss(seq, nullptr);
    opt.step(model.params());
  }
  CHECK(last < 0.05);

  // greedy masked decoding (tiny nucleus keeps only the argmax) must walk
  // the memorized sequence, exercising the incremental kv-cache path
  Rng rng(1);
  auto sample = model.sample(1e-6, 128, rng, true);
  REQUIRE(!sample.truncated);
  CHECK(sample.seq.q == seq.q);
  CHECK(sample.seq.q3 == seq.q3);
  CHECK(sample.seq.q4 == seq.q4);
  CHECK(sample.seq.n_p == seq.n_p);
}

TEST_CASE("masked samples from an untrained model stay grammatical") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  PrimModel<float> model(small_config(17), v);

  Rng rng(42);
  int completed = 0;
  for (int i = 0; i < 20; ++i) {
    auto res = model.sample(0.95, 128, rng, true);
    CHECK(!res.derailed);
    if (res.truncated) continue;
    ++completed;
    SyntaxCheck chk = validate_syntax(res.seq.q, v);
    CHECK(chk.ok);
    TokenSequence derived = derive_side_sequences(res.seq.q, v);
    CHECK(derived.q3 == res.seq.q3);
    CHECK(derived.q4 == res.seq.q4);
    CHECK(derived.n_p == res.seq.n_p);
    CHECK_NOTHROW(interpret(res.seq.q, books, v));
  }
  CHECK(completed > 0);

  // same seeds, same tokens
  PrimModel<float> twin(small_config(17), v);
  Rng r1(7), r2(7);
  auto a = model.sample(0.9, 128, r1, true);
  auto b = twin.sample(0.9, 128, r2, true);
  CHECK(a.seq.q == b.seq.q);

  // the length cap marks truncation instead of overrunning
  Rng r3(3);
  auto t = model.sample(0.95, 4, r3, true);
  CHECK(t.truncated);
  CHECK(t.seq.size() <= 4);
}

TEST_CASE("nucleus sampling truncates to the smallest dominating prefix") {
  std::vector<double> probs = {0.5, 0.3, 0.15, 0.05};
  // p=0.8 keeps {0,1} renormalized to {0.625, 0.375}
  CHECK(nucleus_sample(probs, 0.8, 0.5) == 0);
  CHECK(nucleus_sample(probs, 0.8, 0.7) == 1);
  CHECK(nucleus_sample(probs, 0.8, 0.999) == 1);
  // p=1 keeps everything
  CHECK(nucleus_sample(probs, 1.0, 0.96) == 3);
  CHECK(nucleus_sample(probs, 1.0, 0.81) == 2);
  // vanishing p degenerates to argmax
  CHECK(nucleus_sample(probs, 1e-9, 0.99) == 0);
  std::vector<double> tied = {0.25, 0.25, 0.5};
  CHECK(nucleus_sample(tied, 1e-9, 0.99) == 2);
}

TEST_CASE("model rejects sequences beyond the context window") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  PrimModelConfig cfg = small_config(1);
  cfg.context_len = 16;
  PrimModel<double> model(cfg, v);
  TokenSequence seq;
  seq.q.assign(17, VocabLayout::kFiller);
  seq.q3.assign(17, q3_filler());
  seq.q4.assign(17, q4_filler());
  CHECK_THROWS_AS(model.loss_forward_only(seq), std::invalid_argument);
}

TEST_CASE("legality masking during training lowers the initial loss") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  TokenSequence seq = parse_sketch(two_points(), books, v);

  PrimModelConfig cfg = small_config(2);
  PrimModel<double> plain(cfg, v);
  cfg.mask_values_at_train = true;
  PrimModel<double> masked(cfg, v);

  nn::zero_grads(plain.params());
  nn::zero_grads(masked.params());
  double lu = plain.loss(seq, nullptr);
  double lm = masked.loss(seq, nullptr);
  CHECK(lm < lu);  // restricting to legal tokens concentrates the softmax
}

TEST_CASE("sequence bits agree with the training loss") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  TokenSequence seq = parse_sketch(two_points(), books, v);

  PrimModel<double> model(small_config(13), v);
  nn::Adam<double> opt;
  opt.lr = 1e-2;
  for (int step = 0; step < 30; ++step) {
    nn::zero_grads(model.params());
    model.loss(seq, nullptr);
    opt.step(model.params());
  }
  auto nll = model.sequence_bits(seq);
  double mean_nats = 0;
  for (double b : nll.bits) mean_nats += b * std::log(2.0);
  mean_nats /= (double)nll.bits.size();
  CHECK(model.loss_forward_only(seq) ==
        doctest::Approx(mean_nats).epsilon(1e-9));
}
