#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fixtures.hpp"
#include "sketchlang/constraint_model.hpp"
#include "sketchlang/grammar.hpp"

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

ConstraintModelConfig small_config(uint64_t seed) {
  ConstraintModelConfig cfg;
  cfg.encoder_layers = 2;
  cfg.pointer_layers = 2;
  cfg.heads = 2;
  cfg.embed_dim = 32;
  cfg.context_len = 64;
  cfg.dropout = 0.0;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("tokens map to pointer slots and back") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  ConstraintModel<double> model(small_config(1), v);

  const int n = 3;
  CHECK(model.slot_of(v.pointer_token(0), n) == 0);
  CHECK(model.slot_of(v.pointer_token(2), n) == 2);
  CHECK(model.slot_of(VocabLayout::kLambda, n) == 3);
  CHECK(model.slot_of(VocabLayout::kOmega, n) == 4);
  CHECK(model.slot_of(v.constr_token(ConstrKind::Coincident), n) == 5);
  CHECK(model.slot_of(v.constr_token(ConstrKind::Tangent), n) == 12);
  CHECK(model.slot_of(v.subref_token(SubRef::Start), n) == 13);
  CHECK(model.slot_of(v.subref_token(SubRef::Whole), n) == 16);
  for (int slot = 0; slot < n + kVirtualSlots; ++slot) {
    CHECK(model.slot_of(model.token_of_slot(slot, n), n) == slot);
  }
  CHECK_THROWS_AS(model.slot_of(v.pointer_token(3), n), std::invalid_argument);
  CHECK_THROWS_AS(model.slot_of(v.value_token(ParamType::Location, 0), n),
                  std::invalid_argument);
  CHECK_THROWS_AS(model.token_of_slot(n + kVirtualSlots, n),
                  std::invalid_argument);
}

TEST_CASE("untrained pointer distribution is exactly uniform over slots") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  TokenSequence seq = parse_sketch(fixtures::rectangle(), books, v);

  ConstraintModel<double> model(small_config(3), v);
  const double logm = std::log((double)(4 + kVirtualSlots));
  CHECK(model.loss_forward_only(seq) == doctest::Approx(logm).epsilon(1e-12));
}

TEST_CASE("primitive sums are additive and permutation-equivariant") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  ConstraintModel<double> model(small_config(5), v);

  auto prim_tokens = [&](const Sketch& s) {
    TokenSequence seq = parse_sketch(s, books, v);
    return std::make_pair(seq.q, seq.n_p);
  };

  // the radius-row difference is independent of every other field
  Sketch a1, a2, b1, b2;
  a1.primitives.push_back(make_circle({0.0, 0.0}, 0.1));
  a2.primitives.push_back(make_circle({0.0, 0.0}, 0.3));
  b1.primitives.push_back(make_circle({0.5, 1.0}, 0.1));
  b2.primitives.push_back(make_circle({0.5, 1.0}, 0.3));
  auto [qa1, na1] = prim_tokens(a1);
  auto [qa2, na2] = prim_tokens(a2);
  auto [qb1, nb1] = prim_tokens(b1);
  auto [qb2, nb2] = prim_tokens(b2);
  nn::Mat<double> da = model.primitive_sums(qa1, na1) - model.primitive_sums(qa2, na2);
  nn::Mat<double> db = model.primitive_sums(qb1, nb1) - model.primitive_sums(qb2, nb2);
  CHECK((da - db).cwiseAbs().maxCoeff() < 1e-14);  // summation rounding only
  CHECK(da.cwiseAbs().maxCoeff() > 0.0);

  // swapping primitives swaps the embedding columns
  Sketch fwd, rev;
  fwd.primitives.push_back(make_point({0.0, 0.0}));
  fwd.primitives.push_back(make_circle({0.5, 1.0}, 0.2));
  rev.primitives.push_back(make_circle({0.5, 1.0}, 0.2));
  rev.primitives.push_back(make_point({0.0, 0.0}));
  auto [qf, nf] = prim_tokens(fwd);
  auto [qr, nr] = prim_tokens(rev);
  nn::Mat<double> hf = model.primitive_sums(qf, nf);
  nn::Mat<double> hr = model.primitive_sums(qr, nr);
  CHECK((hf.col(0) - hr.col(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((hf.col(1) - hr.col(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity-initialized encoder returns the raw sums") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  ConstraintModel<double> model(small_config(7), v);
  TokenSequence seq = parse_sketch(fixtures::slot(), books, v);
  nn::Mat<double> sums = model.primitive_sums(seq.q, seq.n_p);
  nn::Mat<double> enc = model.encoded_primitives(seq.q, seq.n_p);
  CHECK((sums - enc).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pointer gradients match finite differences") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  TokenSequence seq = parse_sketch(two_points(), books, v);

  ConstraintModelConfig cfg = small_config(11);
  cfg.embed_dim = 16;

  SUBCASE("per-parameter dictionaries") {
    ConstraintModel<double> model(cfg, v);
    Rng rng(99);
    auto res = nn::gradient_check<double>(
        model.params(), [&] { return model.loss_forward_only(seq); },
        [&] { model.loss(seq, nullptr); }, rng, 100);
    CHECK(res.checked == 100);
    CHECK(res.max_rel_error < 1e-4);
  }
  SUBCASE("shared token dictionary") {
    cfg.shared_param_embeddings = false;
    ConstraintModel<double> model(cfg, v);
    Rng rng(100);
    auto res = nn::gradient_check<double>(
        model.params(), [&] { return model.loss_forward_only(seq); },
        [&] { model.loss(seq, nullptr); }, rng, 50);
    CHECK(res.max_rel_error < 1e-4);
  }
  SUBCASE("without the q4 channel") {
    cfg.use_q4 = false;
    ConstraintModel<double> model(cfg, v);
    Rng rng(101);
    auto res = nn::gradient_check<double>(
        model.params(), [&] { return model.loss_forward_only(seq); },
        [&] { model.loss(seq, nullptr); }, rng, 50);
    CHECK(res.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradient reaches the encoder once the projection is nonzero") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  TokenSequence seq = parse_sketch(two_points(), books, v);
  ConstraintModel<double> model(small_config(13), v);

  nn::Adam<double> opt;
  opt.lr = 1e-3;
  nn::zero_grads(model.params());
  model.loss(seq, nullptr);
  opt.step(model.params());

  nn::zero_grads(model.params());
  model.loss(seq, nullptr);
  double enc_norm = 0;
  for (auto* p : model.params()) {
    if (p->name.rfind("cm.enc", 0) == 0) enc_norm += p->g.squaredNorm();
  }
  CHECK(enc_norm > 0.0);
}

TEST_CASE("overfit model reproduces the ground-truth constraint set") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  Sketch rect = fixtures::rectangle();
  TokenSequence seq = parse_sketch(rect, books, v);

  ConstraintModel<float> model(small_config(17), v);
  nn::Adam<float> opt;
  opt.lr = 3e-3;
  double last = 0;
  for (int step = 0; step < 400; ++step) {
    nn::zero_grads(model.params());
    last = model.loss(seq, nullptr);
    opt.step(model.params());
  }
  CHECK(last < 0.05);

  auto acc = model.teacher_forced_accuracy(seq);
  CHECK(acc.total == seq.size() - seq.n_p - 1);
  CHECK(acc.correct == acc.total);

  std::vector<int> prim_tokens(seq.q.begin(), seq.q.begin() + seq.n_p);
  Rng rng(1);
  auto res = model.autoconstrain(prim_tokens, books, 1e-6, 64, rng);
  REQUIRE(!res.truncated);
  CHECK(res.q == seq.q);  // greedy decode walks the memorized section
  Sketch truth = interpret(seq.q, books, v);
  REQUIRE(res.constraints.size() == truth.constraints.size());
  for (size_t i = 0; i < res.constraints.size(); ++i) {
    CHECK(res.constraints[i].kind == truth.constraints[i].kind);
    REQUIRE(res.constraints[i].targets.size() ==
            truth.constraints[i].targets.size());
    for (size_t t = 0; t < res.constraints[i].targets.size(); ++t) {
      CHECK(res.constraints[i].targets[t].prim ==
            truth.constraints[i].targets[t].prim);
      CHECK(res.constraints[i].targets[t].sub ==
            truth.constraints[i].targets[t].sub);
    }
  }
}

TEST_CASE("autoconstrain stays grammatical and handles edge cases") {
  CodebookSet books = tiny_books();
  VocabLayout v = VocabLayout::from(books, 8);
  ConstraintModel<float> model(small_config(19), v);

  Rng r0(5);
  auto empty = model.autoconstrain({}, books, 0.9, 64, r0);
  CHECK(empty.q.empty());
  CHECK(empty.constraints.empty());

  TokenSequence seq = parse_sketch(fixtures::rectangle(), books, v);
  std::vector<int> prim_tokens(seq.q.begin(), seq.q.begin() + seq.n_p);

  for (uint64_t s = 0; s < 10; ++s) {
    Rng rng(s);
    auto res = model.autoconstrain(prim_tokens, books, 1.0, 64, rng);
    if (res.truncated) continue;
    CHECK(validate_syntax(res.q, v).ok);
    // no duplicate constraints survive
    for (size_t i = 0; i < res.constraints.size(); ++i) {
      for (size_t j = i + 1; j < res.constraints.size(); ++j) {
        bool same = res.constraints[i].kind == res.constraints[j].kind;
        if (same) {
          for (size_t t = 0; t < res.constraints[i].targets.size(); ++t) {
            same = same &&
                   res.constraints[i].targets[t].prim ==
                       res.constraints[j].targets[t].prim &&
                   res.constraints[i].targets[t].sub ==
                       res.constraints[j].targets[t].sub;
          }
        }
        CHECK(!same);
      }
    }
  }

  // fixed seed, fixed output
  ConstraintModel<float> twin(small_config(19), v);
  Rng ra(3), rb(3);
  auto a = model.autoconstrain(prim_tokens, books, 0.9, 64, ra);
  auto b = twin.autoconstrain(prim_tokens, books, 0.9, 64, rb);
  CHECK(a.q == b.q);

  // a malformed primitive section is rejected
  std::vector<int> bad = prim_tokens;
  bad.pop_back();
  Rng rc(4);
  CHECK_THROWS_AS(model.autoconstrain(bad, books, 0.9, 64, rc),
                  std::invalid_argument);
}
