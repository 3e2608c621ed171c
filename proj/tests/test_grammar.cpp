#include <doctest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "sketchlang/grammar.hpp"
#include "sketchlang/util.hpp"

using namespace sketchlang;

namespace {

// Tiny hand-made codebooks so token ids are small enough to freeze by hand.
CodebookSet tiny_books() {
  CodebookSet set;
  double lo[] = {0.0, 1.0};
  for (int t = 0; t < kParamTypeCount; ++t) {
    set.books[t].type = (ParamType)t;
    set.books[t].centers = {lo[0], lo[1]};
    set.books[t].requested_k = 2;
  }
  set.of(ParamType::Range).centers = {-0.5, 0.5};
  set.of(ParamType::Radius).centers = {0.1, 0.2};
  set.of(ParamType::Rotation).centers = {-1.0, 1.0};
  return set;
}

Sketch two_points() {
  Sketch s;
  s.primitives.push_back(make_point({0, 0}));
  s.primitives.push_back(make_point({1, 1}));
  s.constraints.push_back(
      make_coincident(0, SubRef::Whole, 1, SubRef::Whole));
  return s;
}

}  // namespace

TEST_CASE("vocabulary layout blocks") {
  VocabLayout v = VocabLayout::from(tiny_books(), 8);
  CHECK(v.value_base(ParamType::Location) == 21);
  CHECK(v.value_base(ParamType::Direction) == 23);
  CHECK(v.value_base(ParamType::Range) == 25);
  CHECK(v.value_base(ParamType::Radius) == 27);
  CHECK(v.value_base(ParamType::Rotation) == 29);
  CHECK(v.pointer_base() == 31);
  CHECK(v.size() == 39);

  CHECK(v.role(0) == TokenRole::Filler);
  CHECK(v.role(1) == TokenRole::Lambda);
  CHECK(v.role(2) == TokenRole::Omega);
  CHECK(v.role(3) == TokenRole::PrimType);
  CHECK(v.role(6) == TokenRole::PrimType);
  CHECK(v.role(7) == TokenRole::ConstrType);
  CHECK(v.role(14) == TokenRole::ConstrType);
  CHECK(v.role(15) == TokenRole::Construction);
  CHECK(v.role(17) == TokenRole::SubRefVal);
  CHECK(v.role(20) == TokenRole::SubRefVal);
  CHECK(v.role(21) == TokenRole::Value);
  CHECK(v.role(30) == TokenRole::Value);
  CHECK(v.role(31) == TokenRole::Pointer);
  CHECK(v.role(38) == TokenRole::Pointer);

  CHECK(v.prim_token(PrimKind::Arc) == 6);
  CHECK(v.constr_token(ConstrKind::Tangent) == 14);
  CHECK(v.subref_token(SubRef::Whole) == 20);
  CHECK(v.pointer_of(v.pointer_token(5)) == 5);
}

TEST_CASE("single point linearizes to the frozen token string") {
  CodebookSet cb = tiny_books();
  VocabLayout v = VocabLayout::from(cb, 8);
  Sketch s;
  s.primitives.push_back(make_point({0, 1}));

  TokenSequence seq = parse_sketch(s, cb, v);
  CHECK(seq.q == std::vector<int>{1, 3, 15, 21, 22, 2, 1, 2});
  CHECK(seq.q3 == std::vector<int>{0, 1, 1, 1, 1, 0, 0, 0});
  CHECK(seq.q4 == std::vector<int>{0, 0, 0, 1, 1, 0, 0, 0});
  CHECK(seq.n_p == 6);
}

TEST_CASE("two points plus coincidence: frozen tokens and side channels") {
  CodebookSet cb = tiny_books();
  VocabLayout v = VocabLayout::from(cb, 8);
  TokenSequence seq = parse_sketch(two_points(), cb, v);

  std::vector<int> want = {1, 3, 15, 21, 21, 1,  3,  15, 22,
                           22, 2, 1,  7,  31, 20, 32, 20, 2};
  CHECK(seq.q == want);
  CHECK(seq.n_p == 11);
  // constraint-section ancestors: coincident everywhere inside the body
  std::vector<int> q3_tail(seq.q3.begin() + seq.n_p, seq.q3.end());
  CHECK(q3_tail == std::vector<int>{0, 5, 5, 5, 5, 5, 0});
  std::vector<int> q4_tail(seq.q4.begin() + seq.n_p, seq.q4.end());
  CHECK(q4_tail == std::vector<int>{0, 0, 6, 7, 6, 7, 0});
}

TEST_CASE("legal_next walks the expected sets") {
  CodebookSet cb = tiny_books();
  VocabLayout v = VocabLayout::from(cb, 8);

  CHECK(legal_next({}, v) == std::vector<int>{1});
  CHECK(legal_next({1}, v) == std::vector<int>{3, 4, 5, 6});
  CHECK(legal_next({1, 3}, v) == std::vector<int>{15, 16});
  CHECK(legal_next({1, 3, 15}, v) == std::vector<int>{21, 22});
  CHECK(legal_next({1, 3, 15, 21}, v) == std::vector<int>{21, 22});
  CHECK(legal_next({1, 3, 15, 21, 22}, v) == std::vector<int>{1, 2});
  CHECK(legal_next({1, 3, 15, 21, 22, 2}, v) == std::vector<int>{1});
  // empty constraint section is legal: omega right after the opening lambda
  std::vector<int> at_first = legal_next({1, 3, 15, 21, 22, 2, 1}, v);
  CHECK(at_first == std::vector<int>{2, 7, 8, 9, 10, 11, 12, 13, 14});
  // one primitive so far: exactly one pointer is addressable
  CHECK(legal_next({1, 3, 15, 21, 22, 2, 1, 7}, v) == std::vector<int>{31});
  CHECK(legal_next({1, 3, 15, 21, 22, 2, 1, 7, 31}, v) ==
        std::vector<int>{17, 18, 19, 20});
  // complete sequence: nothing may follow
  CHECK(legal_next({1, 3, 15, 21, 22, 2, 1, 2}, v).empty());
  // illegal prefix: empty answer
  CHECK(legal_next({2}, v).empty());
}

TEST_CASE("sequences missing structure are rejected with a position") {
  CodebookSet cb = tiny_books();
  VocabLayout v = VocabLayout::from(cb, 8);
  std::vector<int> good = parse_sketch(two_points(), cb, v).q;

  SyntaxCheck ok = validate_syntax(good, v);
  CHECK(ok.ok);
  CHECK(ok.first_error == -1);

  // truncation reports one past the end
  std::vector<int> cut(good.begin(), good.end() - 1);
  SyntaxCheck c = validate_syntax(cut, v);
  CHECK_FALSE(c.ok);
  CHECK(c.first_error == (int)cut.size());

  // trailing junk after a complete derivation
  std::vector<int> extra = good;
  extra.push_back(1);
  c = validate_syntax(extra, v);
  CHECK_FALSE(c.ok);
  CHECK(c.first_error == (int)good.size());

  // role clash in the middle: a value token where kappa belongs
  std::vector<int> bad = good;
  bad[2] = 21;
  c = validate_syntax(bad, v);
  CHECK_FALSE(c.ok);
  CHECK(c.first_error == 2);
}

TEST_CASE("interpret round-trips the token string exactly") {
  std::vector<Sketch> corpus{fixtures::rectangle(), fixtures::slot()};
  KMeansOptions opts;
  opts.k = 32;
  CodebookSet cb = fit_codebooks(corpus, opts);
  VocabLayout v = VocabLayout::from(cb, 16);

  for (const Sketch& s : corpus) {
    TokenSequence seq = parse_sketch(s, cb, v);
    Sketch back = interpret(seq.q, cb, v);
    TokenSequence again = parse_sketch(back, cb, v);
    CHECK(seq.q == again.q);
    CHECK(seq.q3 == again.q3);
    CHECK(seq.q4 == again.q4);
    CHECK(seq.n_p == again.n_p);

    // decoded parameters are exactly the quantized ones
    Sketch quant = quantize_sketch(s, cb);
    REQUIRE(back.primitives.size() == quant.primitives.size());
    for (size_t i = 0; i < back.primitives.size(); ++i) {
      CHECK(back.primitives[i].params == quant.primitives[i].params);
      CHECK(back.primitives[i].construction == quant.primitives[i].construction);
    }
    CHECK(validate(back).empty());
  }
}

TEST_CASE("constraints linearize in canonical kind order, ties stable") {
  std::vector<Sketch> corpus{fixtures::slot()};
  KMeansOptions opts;
  opts.k = 16;
  CodebookSet cb = fit_codebooks(corpus, opts);
  VocabLayout v = VocabLayout::from(cb, 16);

  Sketch s = fixtures::slot();
  // scramble: move all tangents to the front
  std::stable_sort(s.constraints.begin(), s.constraints.end(),
                   [](const Constraint& a, const Constraint& b) {
                     return (a.kind == ConstrKind::Tangent) >
                            (b.kind == ConstrKind::Tangent);
                   });
  Sketch back = interpret(parse_sketch(s, cb, v).q, cb, v);
  REQUIRE(back.constraints.size() == s.constraints.size());
  for (size_t i = 1; i < back.constraints.size(); ++i) {
    CHECK((int)back.constraints[i - 1].kind <= (int)back.constraints[i].kind);
  }
  // stable within a kind: the four coincidences keep their relative order
  CHECK(back.constraints[0].targets[0].prim == 0);
  CHECK(back.constraints[1].targets[0].prim == 2);
  CHECK(back.constraints[2].targets[0].prim == 1);
  CHECK(back.constraints[3].targets[0].prim == 3);
}

TEST_CASE("interpret classifies failure modes") {
  CodebookSet cb = tiny_books();
  VocabLayout v = VocabLayout::from(cb, 8);
  std::vector<int> good = parse_sketch(two_points(), cb, v).q;

  // reference to a primitive that does not exist (only 2 were declared)
  std::vector<int> dangling = good;
  dangling[13] = v.pointer_token(5);
  CHECK_THROWS_AS((void)interpret(dangling, cb, v), InterpretError);
  try {
    (void)interpret(dangling, cb, v);
  } catch (const InterpretError& e) {
    CHECK(e.kind == InterpretError::Kind::DanglingRef);
    CHECK(e.position == 13);
  }
  // the syntax checker flags the same position
  CHECK(validate_syntax(dangling, v).first_error == 13);

  std::vector<int> cut(good.begin(), good.end() - 2);
  try {
    (void)interpret(cut, cb, v);
    CHECK(false);
  } catch (const InterpretError& e) {
    CHECK(e.kind == InterpretError::Kind::Truncated);
  }

  std::vector<int> bad = good;
  bad[1] = 7;  // constraint type in a primitive slot
  try {
    (void)interpret(bad, cb, v);
    CHECK(false);
  } catch (const InterpretError& e) {
    CHECK(e.kind == InterpretError::Kind::Syntax);
    CHECK(e.position == 1);
  }
}

TEST_CASE("empty constraint section") {
  CodebookSet cb = tiny_books();
  VocabLayout v = VocabLayout::from(cb, 8);
  Sketch s;
  s.primitives.push_back(make_point({0, 0}));
  TokenSequence seq = parse_sketch(s, cb, v);
  CHECK(seq.q.back() == VocabLayout::kOmega);
  CHECK(seq.q[seq.q.size() - 2] == VocabLayout::kLambda);
  Sketch back = interpret(seq.q, cb, v);
  CHECK(back.constraints.empty());
  CHECK(back.primitives.size() == 1);
}

TEST_CASE("layout capacity is enforced when linearizing") {
  CodebookSet cb = tiny_books();
  VocabLayout v = VocabLayout::from(cb, 4);
  Sketch s;
  for (int i = 0; i < 5; ++i) s.primitives.push_back(make_point({0, 0}));
  CHECK_THROWS_AS((void)parse_sketch(s, cb, v), std::invalid_argument);
}

TEST_CASE("derive_side_sequences agrees with parse and rejects bad input") {
  std::vector<Sketch> corpus{fixtures::rectangle()};
  KMeansOptions opts;
  opts.k = 8;
  CodebookSet cb = fit_codebooks(corpus, opts);
  VocabLayout v = VocabLayout::from(cb, 8);
  TokenSequence seq = parse_sketch(corpus[0], cb, v);
  TokenSequence derived = derive_side_sequences(seq.q, v);
  CHECK(derived.q3 == seq.q3);
  CHECK(derived.q4 == seq.q4);
  CHECK(derived.n_p == seq.n_p);
  CHECK_THROWS_AS((void)derive_side_sequences({1, 1}, v),
                  std::invalid_argument);
}

TEST_CASE("single-token role mutations never survive validation") {
  std::vector<Sketch> corpus{fixtures::rectangle(), fixtures::slot()};
  KMeansOptions opts;
  opts.k = 8;
  CodebookSet cb = fit_codebooks(corpus, opts);
  VocabLayout v = VocabLayout::from(cb, 8);
  Rng rng(99);

  for (const Sketch& s : corpus) {
    std::vector<int> q = parse_sketch(s, cb, v).q;
    // legal sets along the original derivation; a mutation into one of these
    // yields a valid *prefix* (e.g. omega closing a section early) whose
    // failure surfaces later, so it is not a role violation at the site
    std::vector<std::vector<int>> legal(q.size());
    GrammarCursor cur(v);
    for (size_t i = 0; i < q.size(); ++i) {
      legal[i] = cur.legal_next();
      REQUIRE(cur.advance(q[i]));
    }
    int tested = 0;
    for (int trial = 0; trial < 2000 && tested < 500; ++trial) {
      int pos = (int)uniform_index(rng, q.size());
      int tok = (int)uniform_index(rng, v.size());
      if (v.role(tok) == v.role(q[pos])) continue;
      if (std::find(legal[pos].begin(), legal[pos].end(), tok) !=
          legal[pos].end()) {
        continue;
      }
      ++tested;
      std::vector<int> mut = q;
      mut[pos] = tok;
      SyntaxCheck c = validate_syntax(mut, v);
      CHECK_FALSE(c.ok);
      CHECK(c.first_error == pos);
    }
    CHECK(tested == 500);
  }
}
