#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <string>

#include "fixtures.hpp"
#include "sketchlang/codebook.hpp"
#include "sketchlang/constraint_model.hpp"
#include "sketchlang/grammar.hpp"
#include "sketchlang/io.hpp"
#include "sketchlang/prim_model.hpp"
#include "sketchlang/vocab.hpp"

using namespace sketchlang;

namespace {

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("sketchlang_io_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string operator/(const char* name) const { return (dir / name).string(); }
};

CodebookSet tiny_books() {
  std::vector<Sketch> corpus = {fixtures::rectangle(), fixtures::slot()};
  KMeansOptions opt;
  opt.k = 4;
  opt.seed = 7;
  return fit_codebooks(corpus, opt);
}

bool same_sketch(const Sketch& a, const Sketch& b) {
  if (a.primitives.size() != b.primitives.size()) return false;
  if (a.constraints.size() != b.constraints.size()) return false;
  for (size_t i = 0; i < a.primitives.size(); ++i) {
    const Primitive &p = a.primitives[i], &q = b.primitives[i];
    if (p.kind != q.kind || p.construction != q.construction) return false;
    if (p.params.size() != q.params.size()) return false;
    for (size_t j = 0; j < p.params.size(); ++j)
      if (p.params[j] != q.params[j]) return false;  // bit-exact
  }
  for (size_t i = 0; i < a.constraints.size(); ++i) {
    const Constraint &c = a.constraints[i], &d = b.constraints[i];
    if (c.kind != d.kind || c.targets.size() != d.targets.size()) return false;
    for (size_t j = 0; j < c.targets.size(); ++j)
      if (c.targets[j].prim != d.targets[j].prim ||
          c.targets[j].sub != d.targets[j].sub)
        return false;
  }
  return true;
}

}  // namespace

TEST_CASE("sketch json round trip is bit-exact") {
  Sketch s = fixtures::slot();
  // Values that decimal printing would mangle.
  s.primitives[0].params[0] = 0.1 + 0.2;
  s.primitives[0].params[1] = -1.0 / 3.0;
  TempDir tmp;
  save_sketch(tmp / "s.json", s);
  Sketch r = load_sketch(tmp / "s.json");
  CHECK(same_sketch(s, r));

  SUBCASE("unknown enum names are rejected") {
    json j = sketch_to_json(s);
    j["primitives"][0]["kind"] = "blob";
    CHECK_THROWS_AS(sketch_from_json(j), std::invalid_argument);
  }
  SUBCASE("unsupported versions are rejected") {
    json j = sketch_to_json(s);
    j["version"] = 99;
    CHECK_THROWS(sketch_from_json(j));
  }
}

TEST_CASE("corpus jsonl preserves order and content") {
  std::vector<Sketch> corpus = {fixtures::rectangle(), fixtures::slot(),
                                fixtures::rectangle()};
  corpus[2].primitives[1].construction = true;
  TempDir tmp;
  save_corpus(tmp / "c.jsonl", corpus);
  std::vector<Sketch> r = load_corpus(tmp / "c.jsonl");
  REQUIRE(r.size() == corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) CHECK(same_sketch(corpus[i], r[i]));
}

TEST_CASE("codebooks survive a save/load cycle") {
  CodebookSet cb = tiny_books();
  TempDir tmp;
  save_codebooks(tmp / "cb.json", cb);
  CodebookSet r = load_codebooks(tmp / "cb.json");
  CHECK(r.digest() == cb.digest());
  CHECK(r.corpus_digest == cb.corpus_digest);
  for (int t = 0; t < kParamTypeCount; ++t) {
    CHECK(r.books[t].type == cb.books[t].type);
    CHECK(r.books[t].seed == cb.books[t].seed);
    CHECK(r.books[t].requested_k == cb.books[t].requested_k);
    CHECK(r.books[t].centers == cb.books[t].centers);
  }
}

TEST_CASE("token dumps round trip and carry the vocabulary") {
  CodebookSet cb = tiny_books();
  VocabLayout layout = VocabLayout::from(cb);
  std::vector<TokenSequence> seqs = {parse_sketch(fixtures::rectangle(), cb, layout),
                                     parse_sketch(fixtures::slot(), cb, layout)};
  TempDir tmp;
  save_token_dump(tmp / "t.json", layout, seqs);
  TokenDump d = load_token_dump(tmp / "t.json");
  CHECK(d.layout.digest() == layout.digest());
  REQUIRE(d.sequences.size() == seqs.size());
  for (size_t i = 0; i < seqs.size(); ++i) {
    CHECK(d.sequences[i].q == seqs[i].q);
    CHECK(d.sequences[i].q3 == seqs[i].q3);
    CHECK(d.sequences[i].q4 == seqs[i].q4);
    CHECK(d.sequences[i].n_p == seqs[i].n_p);
  }
}

TEST_CASE("prim checkpoint restores the exact model") {
  CodebookSet cb = tiny_books();
  VocabLayout layout = VocabLayout::from(cb);
  PrimModelConfig cfg;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.embed_dim = 32;
  cfg.context_len = 128;
  cfg.dropout = 0.0;
  cfg.seed = 11;
  PrimModel<double> m(cfg, layout);
  TokenSequence seq = parse_sketch(fixtures::rectangle(), cb, layout);

  // Perturb away from init so the blob is nontrivial.
  Rng rng(3);
  nn::Adam<double> opt;
  opt.lr = 1e-3;
  for (int it = 0; it < 5; ++it) {
    nn::zero_grads(m.params());
    m.loss(seq, nullptr);
    opt.step(m.params());
  }
  double want = m.loss_forward_only(seq);

  TempDir tmp;
  save_checkpoint(tmp / "m.ckpt", "prim", to_json(cfg), layout.digest(),
                  cb.digest(), m.params());

  CheckpointInfo info = read_checkpoint_header(tmp / "m.ckpt");
  CHECK(info.model_kind == "prim");
  verify_checkpoint(info, "prim", layout.digest(), cb.digest());
  PrimModelConfig cfg2 = prim_config_from_json(info.config);
  CHECK(cfg2.embed_dim == cfg.embed_dim);
  CHECK(cfg2.seed == cfg.seed);

  PrimModel<double> m2(cfg2, layout);
  CHECK(m2.loss_forward_only(seq) != doctest::Approx(want).epsilon(1e-12));
  load_checkpoint_weights(tmp / "m.ckpt", m2.params());
  CHECK(m2.loss_forward_only(seq) == want);  // bit-exact through float64 blob

  // Sampling is a deeper probe: it exercises every tensor.
  Rng ra(99), rb(99);
  auto sa = m.sample(0.9, 64, ra);
  auto sb = m2.sample(0.9, 64, rb);
  CHECK(sa.seq.q == sb.seq.q);

  SUBCASE("digest and kind mismatches are rejected") {
    CHECK_THROWS(verify_checkpoint(info, "constraint", layout.digest(),
                                   cb.digest()));
    CHECK_THROWS(verify_checkpoint(info, "prim", layout.digest() + 1,
                                   cb.digest()));
    CHECK_THROWS(verify_checkpoint(info, "prim", layout.digest(),
                                   cb.digest() + 1));
  }
  SUBCASE("shape mismatches are rejected") {
    PrimModelConfig small = cfg;
    small.embed_dim = 16;
    PrimModel<double> m3(small, layout);
    CHECK_THROWS(load_checkpoint_weights(tmp / "m.ckpt", m3.params()));
  }
}

TEST_CASE("constraint checkpoint restores the exact model") {
  CodebookSet cb = tiny_books();
  VocabLayout layout = VocabLayout::from(cb);
  ConstraintModelConfig cfg;
  cfg.encoder_layers = 2;
  cfg.pointer_layers = 2;
  cfg.heads = 2;
  cfg.embed_dim = 32;
  cfg.context_len = 64;
  cfg.dropout = 0.0;
  cfg.seed = 4;
  ConstraintModel<double> m(cfg, layout);
  TokenSequence seq = parse_sketch(fixtures::rectangle(), cb, layout);

  nn::Adam<double> opt;
  opt.lr = 1e-3;
  for (int it = 0; it < 5; ++it) {
    nn::zero_grads(m.params());
    m.loss(seq, nullptr);
    opt.step(m.params());
  }
  double want = m.loss_forward_only(seq);

  TempDir tmp;
  save_checkpoint(tmp / "c.ckpt", "constraint", to_json(cfg), layout.digest(),
                  cb.digest(), m.params());
  CheckpointInfo info = read_checkpoint_header(tmp / "c.ckpt");
  verify_checkpoint(info, "constraint", layout.digest(), cb.digest());

  ConstraintModel<double> m2(constraint_config_from_json(info.config), layout);
  load_checkpoint_weights(tmp / "c.ckpt", m2.params());
  CHECK(m2.loss_forward_only(seq) == want);

  std::vector<int> prim_tokens(seq.q.begin(), seq.q.begin() + seq.n_p);
  Rng ra(5), rb(5);
  auto aa = m.autoconstrain(prim_tokens, cb, 0.9, 64, ra);
  auto ab = m2.autoconstrain(prim_tokens, cb, 0.9, 64, rb);
  CHECK(aa.q == ab.q);
}

TEST_CASE("float models round trip through the float64 blob") {
  CodebookSet cb = tiny_books();
  VocabLayout layout = VocabLayout::from(cb);
  PrimModelConfig cfg;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.embed_dim = 16;
  cfg.context_len = 128;
  cfg.dropout = 0.0;
  PrimModel<float> m(cfg, layout);
  TokenSequence seq = parse_sketch(fixtures::rectangle(), cb, layout);
  double want = m.loss_forward_only(seq);

  TempDir tmp;
  save_checkpoint(tmp / "f.ckpt", "prim", to_json(cfg), layout.digest(),
                  cb.digest(), m.params());
  PrimModel<float> m2(cfg, layout);
  load_checkpoint_weights(tmp / "f.ckpt", m2.params());
  // float -> double -> float is exact
  CHECK(m2.loss_forward_only(seq) == want);
}
