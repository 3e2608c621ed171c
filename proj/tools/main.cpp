#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "sketchlang/codebook.hpp"
#include "sketchlang/constraint_model.hpp"
#include "sketchlang/data.hpp"
#include "sketchlang/grammar.hpp"
#include "sketchlang/io.hpp"
#include "sketchlang/metrics.hpp"
#include "sketchlang/prim_model.hpp"
#include "sketchlang/render.hpp"
#include "sketchlang/solver.hpp"
#include "sketchlang/synth.hpp"
#include "sketchlang/train.hpp"

namespace fs = std::filesystem;
using namespace sketchlang;

namespace {

// Exit code 1; every other failure maps to 2.
struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string join(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

// A .jsonl path is a corpus (pick `index`); anything else a single sketch.
Sketch load_one_sketch(const std::string& path, int index) {
  if (path.size() > 6 && path.substr(path.size() - 6) == ".jsonl") {
    std::vector<Sketch> corpus = load_corpus(path);
    if (index < 0 || index >= (int)corpus.size())
      throw ValidationFailure("--index out of range for " + path);
    return corpus[index];
  }
  return load_sketch(path);
}

VocabLayout checked_layout(const TokenDump& dump, const CodebookSet& books) {
  VocabLayout expect = VocabLayout::from(books, dump.layout.max_refs);
  if (expect.digest() != dump.layout.digest())
    throw ValidationFailure(
        "token dump was produced with a different codebook set");
  return dump.layout;
}

template <typename Model>
std::unique_ptr<Model> load_model(const std::string& path,
                                  const std::string& kind,
                                  const CodebookSet& books,
                                  const VocabLayout& layout) {
  CheckpointInfo info = read_checkpoint_header(path);
  verify_checkpoint(info, kind, layout.digest(), books.digest());
  std::unique_ptr<Model> m;
  if constexpr (std::is_same_v<Model, PrimModel<float>>) {
    m = std::make_unique<Model>(prim_config_from_json(info.config), layout);
  } else {
    m = std::make_unique<Model>(constraint_config_from_json(info.config),
                                layout);
  }
  load_checkpoint_weights(path, m->params());
  return m;
}

// --- synth -------------------------------------------------------------------

struct SynthOpts {
  int n = 1000;
  uint64_t seed = 0;
  std::string out;
  std::vector<double> mix;
};

int run_synth(const SynthOpts& o) {
  SynthMix mix;
  if (!o.mix.empty()) {
    if ((int)o.mix.size() != kNumRecipes)
      throw ValidationFailure("--mix needs exactly 5 weights");
    std::copy(o.mix.begin(), o.mix.end(), mix.weights.begin());
  }
  save_corpus(o.out, synth_corpus(o.n, o.seed, mix));
  std::cout << "wrote " << o.n << " sketches to " << o.out << "\n";
  return 0;
}

// --- ingest ------------------------------------------------------------------

struct IngestOpts {
  std::string input;
  std::string format = "jsonl";
  std::string out_dir;
  IngestFilters f;
};

int run_ingest(const IngestOpts& o) {
  CorpusManifest pre;
  std::vector<Sketch> raw;
  if (o.format == "jsonl") {
    raw = load_corpus_lenient(o.input, pre.malformed);
  } else if (o.format == "sketchgraphs-json") {
    raw = import_sketchgraphs(o.input, pre);
  } else {
    throw ValidationFailure("unknown --format '" + o.format + "'");
  }
  SplitCorpus split = ingest_filter(raw, o.f);
  CorpusManifest m = split.manifest;
  m.raw += pre.malformed;
  m.malformed = pre.malformed;
  m.stripped_primitives = pre.stripped_primitives;
  m.stripped_constraints = pre.stripped_constraints;
  fs::create_directories(o.out_dir);
  save_corpus(join(o.out_dir, "train.jsonl"), split.train);
  save_corpus(join(o.out_dir, "val.jsonl"), split.val);
  save_corpus(join(o.out_dir, "test.jsonl"), split.test);
  save_manifest(join(o.out_dir, "manifest.json"), m);
  std::cout << to_json(m).dump(2) << "\n";
  return 0;
}

// --- fit-codebooks -----------------------------------------------------------

struct FitBooksOpts {
  std::string input, out;
  KMeansOptions km;
};

int run_fit_codebooks(const FitBooksOpts& o) {
  std::vector<Sketch> corpus = load_corpus(o.input);
  if (corpus.empty()) throw ValidationFailure("empty corpus: " + o.input);
  CodebookSet books = fit_codebooks(corpus, o.km);
  save_codebooks(o.out, books);
  std::cout << "fit " << o.km.k << "-entry codebooks on " << corpus.size()
            << " sketches (digest " << hex_u64(books.digest()) << ")\n";
  return 0;
}

// --- tokenize ----------------------------------------------------------------

struct TokenizeOpts {
  std::string input, books, out;
  int max_refs = 128;
};

int run_tokenize(const TokenizeOpts& o) {
  std::vector<Sketch> corpus = load_corpus(o.input);
  CodebookSet books = load_codebooks(o.books);
  VocabLayout layout = VocabLayout::from(books, o.max_refs);
  std::vector<TokenSequence> seqs;
  seqs.reserve(corpus.size());
  for (const Sketch& s : corpus) seqs.push_back(parse_sketch(s, books, layout));
  save_token_dump(o.out, layout, seqs);
  std::cout << "tokenized " << seqs.size() << " sketches\n";
  return 0;
}

// --- validate ----------------------------------------------------------------

struct ValidateOpts {
  std::string tokens, input;
};

int run_validate(const ValidateOpts& o) {
  if (o.tokens.empty() && o.input.empty())
    throw ValidationFailure("validate needs --tokens and/or --input");
  if (!o.tokens.empty()) {
    TokenDump dump = load_token_dump(o.tokens);
    for (size_t i = 0; i < dump.sequences.size(); ++i) {
      SyntaxCheck r = validate_syntax(dump.sequences[i].q, dump.layout);
      if (!r.ok) {
        std::cout << "sequence " << i
                  << ": first_error_position=" << r.first_error << "\n";
        throw ValidationFailure("token dump failed the syntax check");
      }
    }
    std::cout << o.tokens << ": " << dump.sequences.size()
              << " sequences ok\n";
  }
  if (!o.input.empty()) {
    std::vector<Sketch> corpus = load_corpus(o.input);
    for (size_t i = 0; i < corpus.size(); ++i) {
      std::vector<Violation> v = validate(corpus[i]);
      if (!v.empty()) {
        std::cout << "sketch " << i << ": " << v.front().message << "\n";
        throw ValidationFailure("corpus failed validation");
      }
    }
    std::cout << o.input << ": " << corpus.size() << " sketches ok\n";
  }
  return 0;
}

// --- train -------------------------------------------------------------------

struct TrainCommonOpts {
  std::string tokens, val, books, out;
  TrainOptions t;
  bool quiet = false;
};

std::pair<TokenDump, std::vector<TokenSequence>> load_train_val(
    const TrainCommonOpts& o) {
  TokenDump train = load_token_dump(o.tokens);
  std::vector<TokenSequence> val;
  if (!o.val.empty()) {
    TokenDump v = load_token_dump(o.val);
    if (v.layout.digest() != train.layout.digest())
      throw ValidationFailure("train/val dumps use different vocabularies");
    val = std::move(v.sequences);
  }
  return {std::move(train), std::move(val)};
}

struct TrainPrimOpts {
  TrainCommonOpts common;
  PrimModelConfig cfg;
};

int run_train_prim(const TrainPrimOpts& o) {
  auto [train, val] = load_train_val(o.common);
  CodebookSet books = load_codebooks(o.common.books);
  VocabLayout layout = checked_layout(train, books);
  PrimModel<float> model(o.cfg, layout);
  TrainOptions t = o.common.t;
  if (!o.common.quiet) t.log = &std::cerr;
  TrainResult res = fit(model, train.sequences, val, t);
  save_checkpoint(o.common.out, "prim", to_json(o.cfg), layout.digest(),
                  books.digest(), model.params());
  std::cout << "epochs " << res.epochs << "  best val loss " << res.best_val
            << " nats" << (res.out_of_time ? "  (time budget hit)" : "")
            << "\n";
  return 0;
}

struct TrainConstraintOpts {
  TrainCommonOpts common;
  ConstraintModelConfig cfg;
};

int run_train_constraint(const TrainConstraintOpts& o) {
  auto [train, val] = load_train_val(o.common);
  CodebookSet books = load_codebooks(o.common.books);
  VocabLayout layout = checked_layout(train, books);
  ConstraintModel<float> model(o.cfg, layout);
  TrainOptions t = o.common.t;
  if (!o.common.quiet) t.log = &std::cerr;
  TrainResult res = fit(model, train.sequences, val, t);
  save_checkpoint(o.common.out, "constraint", to_json(o.cfg), layout.digest(),
                  books.digest(), model.params());
  std::cout << "epochs " << res.epochs << "  best val loss " << res.best_val
            << " nats" << (res.out_of_time ? "  (time budget hit)" : "")
            << "\n";
  return 0;
}

// --- sample ------------------------------------------------------------------

struct SampleOpts {
  std::string model, books, out, sketches_out;
  int n = 100;
  double nucleus_p = 0.9;
  uint64_t seed = 0;
  int max_len = 0;  // 0: the model's context length
  bool unmasked = false;
};

int run_sample(const SampleOpts& o) {
  CodebookSet books = load_codebooks(o.books);
  VocabLayout layout = VocabLayout::from(books);
  auto model = load_model<PrimModel<float>>(o.model, "prim", books, layout);
  int max_len = o.max_len > 0 ? o.max_len : model->config().context_len;
  Rng rng(o.seed);

  std::vector<TokenSequence> seqs;
  std::vector<Sketch> sketches;
  long interventions = 0, boundaries = 0, truncated = 0, derailed = 0;
  for (int i = 0; i < o.n; ++i) {
    auto r = model->sample(o.nucleus_p, max_len, rng, !o.unmasked);
    interventions += r.interventions;
    boundaries += r.boundary_positions;
    truncated += r.truncated;
    derailed += r.derailed;
    seqs.push_back(r.seq);
    if (!o.sketches_out.empty() && !r.truncated && !r.derailed)
      sketches.push_back(interpret(r.seq.q, books, layout));
  }
  save_token_dump(o.out, layout, seqs);
  if (!o.sketches_out.empty()) save_corpus(o.sketches_out, sketches);
  std::cout << "samples " << o.n << "  boundary positions " << boundaries
            << "  interventions " << interventions << "  truncated "
            << truncated << "  derailed " << derailed << "\n";
  return 0;
}

// --- autoconstrain -----------------------------------------------------------

struct AutoconstrainOpts {
  std::string model, books, input, out;
  double nucleus_p = 0.9;
  uint64_t seed = 0;
  int max_len = 256;
};

int run_autoconstrain(const AutoconstrainOpts& o) {
  CodebookSet books = load_codebooks(o.books);
  VocabLayout layout = VocabLayout::from(books);
  auto model =
      load_model<ConstraintModel<float>>(o.model, "constraint", books, layout);
  std::vector<Sketch> corpus = load_corpus(o.input);
  Rng rng(o.seed);
  long emitted = 0, truncated = 0;
  for (Sketch& s : corpus) {
    Sketch bare = s;
    bare.constraints.clear();
    TokenSequence seq = parse_sketch(bare, books, layout);
    std::vector<int> prim_tokens(seq.q.begin(), seq.q.begin() + seq.n_p);
    auto r = model->autoconstrain(prim_tokens, books, o.nucleus_p, o.max_len,
                                  rng);
    s.constraints = r.constraints;
    emitted += (long)r.constraints.size();
    truncated += r.truncated;
  }
  save_corpus(o.out, corpus);
  std::cout << "constrained " << corpus.size() << " sketches  (" << emitted
            << " constraints, " << truncated << " truncated)\n";
  return 0;
}

// --- solve -------------------------------------------------------------------

struct SolveOpts2 {
  std::string input, out, report;
  SolveOptions s;
};

int run_solve(const SolveOpts2& o) {
  std::vector<Sketch> corpus = load_corpus(o.input);
  json rows = json::array();
  long converged = 0;
  std::vector<Sketch> solved;
  solved.reserve(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    SolveResult r = solve(corpus[i], o.s);
    converged += r.report.converged;
    rows.push_back({{"index", i},
                    {"converged", r.report.converged},
                    {"iterations", r.report.iterations},
                    {"max_residual_before", r.report.max_residual_before},
                    {"max_residual_after", r.report.max_residual_after}});
    solved.push_back(std::move(r.sketch));
  }
  save_corpus(o.out, solved);
  if (!o.report.empty()) {
    json j = {{"total", corpus.size()}, {"converged", converged},
              {"sketches", rows}};
    std::ofstream out(o.report);
    if (!out) throw std::runtime_error("cannot open " + o.report);
    out << j.dump(2) << '\n';
  }
  std::cout << "solved " << converged << "/" << corpus.size() << "\n";
  return 0;
}

// --- metrics -----------------------------------------------------------------

struct MetricsOpts {
  std::string generated, reference, out;
  std::string prim_model, constraint_model, books, tokens;
  std::string stats_csv;
  int bins = 64;
  int syntax_samples = 0;
  double nucleus_p = 0.9;
  uint64_t seed = 0;
  int max_len = 256;
};

int run_metrics(const MetricsOpts& o) {
  std::vector<Sketch> gen = load_corpus(o.generated);
  std::vector<Sketch> ref = load_corpus(o.reference);
  MetricReport report;
  report.bins = o.bins;
  report.nucleus_p = o.nucleus_p;

  SketchStats gen_stats = collect_stats(gen, ref, o.bins);
  SketchStats ref_stats = collect_stats(ref, ref, o.bins);
  report.estat = e_stat(gen_stats, ref_stats);
  report.dof = dof_histogram(gen, o.bins);
  if (!o.stats_csv.empty()) save_stats_csv(o.stats_csv, gen_stats);

  const bool need_model =
      !o.prim_model.empty() || !o.constraint_model.empty();
  if (need_model && o.books.empty())
    throw ValidationFailure("--books is required with a model");
  if (!o.prim_model.empty()) {
    CodebookSet books = load_codebooks(o.books);
    VocabLayout layout = VocabLayout::from(books);
    auto model =
        load_model<PrimModel<float>>(o.prim_model, "prim", books, layout);
    if (!o.tokens.empty()) {
      TokenDump dump = load_token_dump(o.tokens);
      checked_layout(dump, books);
      report.nll = nll_report(*model, dump.sequences);
    }
    if (o.syntax_samples > 0) {
      Rng rng(o.seed);
      report.syntax = measure_syntax(*model, o.syntax_samples, o.nucleus_p,
                                     o.max_len, rng);
      report.samples = o.syntax_samples;
    }
  }
  if (!o.constraint_model.empty()) {
    if (o.tokens.empty())
      throw ValidationFailure("--constraint-model needs --tokens");
    CodebookSet books = load_codebooks(o.books);
    VocabLayout layout = VocabLayout::from(books);
    auto model = load_model<ConstraintModel<float>>(
        o.constraint_model, "constraint", books, layout);
    TokenDump dump = load_token_dump(o.tokens);
    checked_layout(dump, books);
    long correct = 0, total = 0;
    for (const TokenSequence& seq : dump.sequences) {
      auto acc = model->teacher_forced_accuracy(seq);
      correct += acc.correct;
      total += acc.total;
    }
    report.accuracy = total ? 100.0 * correct / total : 0.0;
  }

  save_report(o.out, report);
  std::cout << to_json(report).dump(2) << "\n";
  return 0;
}

// --- render ------------------------------------------------------------------

struct RenderOpts2 {
  std::string input, after, out;
  int index = 0, after_index = 0;
  RenderOptions r;
};

int run_render(const RenderOpts2& o) {
  Sketch s = load_one_sketch(o.input, o.index);
  std::string svg;
  if (o.after.empty()) {
    svg = render_svg(s, o.r);
  } else {
    svg = render_svg_pair(s, load_one_sketch(o.after, o.after_index), o.r);
  }
  std::ofstream out(o.out);
  if (!out) throw std::runtime_error("cannot open " + o.out);
  out << svg;
  std::cout << "wrote " << o.out << "\n";
  return 0;
}

void add_train_common(CLI::App* cmd, TrainCommonOpts& o) {
  cmd->add_option("--tokens", o.tokens, "training token dump")->required();
  cmd->add_option("--val", o.val, "validation token dump");
  cmd->add_option("--books", o.books, "codebook file")->required();
  cmd->add_option("--out", o.out, "checkpoint path")->required();
  cmd->add_option("--epochs", o.t.max_epochs, "epoch cap");
  cmd->add_option("--patience", o.t.patience, "early-stopping patience");
  cmd->add_option("--time-budget", o.t.time_budget_sec,
                  "wall-clock budget in seconds (0 = none)");
  cmd->add_option("--train-seed", o.t.seed, "shuffling/dropout seed");
  cmd->add_flag("--quiet", o.quiet, "suppress per-epoch logging");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sketchlang: a token language, generative models and a solver "
               "for constrained CAD sketches"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML-style config file; flags override it");

  SynthOpts synth_o;
  auto* synth_c = app.add_subcommand("synth", "generate a synthetic corpus");
  synth_c->add_option("--n", synth_o.n, "sketch count")->check(CLI::PositiveNumber);
  synth_c->add_option("--seed", synth_o.seed, "generator seed");
  synth_c->add_option("--out", synth_o.out, "output corpus (jsonl)")->required();
  synth_c->add_option("--mix", synth_o.mix,
                      "recipe weights: rectangle,slot,polyline,circle-in-box,hub")
      ->delimiter(',');

  IngestOpts ingest_o;
  auto* ingest_c = app.add_subcommand("ingest", "filter and split a corpus");
  ingest_c->add_option("--input", ingest_o.input, "raw corpus")->required();
  ingest_c->add_option("--format", ingest_o.format,
                       "jsonl | sketchgraphs-json");
  ingest_c->add_option("--out-dir", ingest_o.out_dir, "split output directory")
      ->required();
  ingest_c->add_option("--min-prims", ingest_o.f.min_primitives,
                       "drop sketches with fewer primitives");
  ingest_c->add_option("--max-constraint-tokens",
                       ingest_o.f.max_constraint_tokens,
                       "drop sketches beyond this constraint-section length");
  ingest_c->add_option("--train-frac", ingest_o.f.train_frac, "train share");
  ingest_c->add_option("--val-frac", ingest_o.f.val_frac, "validation share");
  ingest_c->add_option("--seed", ingest_o.f.seed, "split seed");

  FitBooksOpts books_o;
  auto* books_c =
      app.add_subcommand("fit-codebooks", "k-means parameter codebooks");
  books_c->add_option("--input", books_o.input, "training corpus")->required();
  books_c->add_option("--out", books_o.out, "codebook file")->required();
  books_c->add_option("--k", books_o.km.k, "entries per codebook");
  books_c->add_option("--seed", books_o.km.seed, "k-means seed");
  books_c->add_option("--n-init", books_o.km.n_init, "restarts");
  books_c->add_option("--max-iters", books_o.km.max_iters, "Lloyd iterations");

  TokenizeOpts tok_o;
  auto* tok_c = app.add_subcommand("tokenize", "linearize sketches to tokens");
  tok_c->add_option("--input", tok_o.input, "corpus (jsonl)")->required();
  tok_c->add_option("--books", tok_o.books, "codebook file")->required();
  tok_c->add_option("--out", tok_o.out, "token dump")->required();
  tok_c->add_option("--max-refs", tok_o.max_refs, "pointer vocabulary size");

  ValidateOpts val_o;
  auto* val_c = app.add_subcommand("validate", "check token dumps / corpora");
  val_c->add_option("--tokens", val_o.tokens, "token dump to syntax-check");
  val_c->add_option("--input", val_o.input, "corpus to validate semantically");

  TrainPrimOpts tp_o;
  auto* tp_c = app.add_subcommand("train-prim", "train the primitive model");
  add_train_common(tp_c, tp_o.common);
  tp_c->add_option("--layers", tp_o.cfg.layers);
  tp_c->add_option("--heads", tp_o.cfg.heads);
  tp_c->add_option("--embed", tp_o.cfg.embed_dim);
  tp_c->add_option("--context", tp_o.cfg.context_len);
  tp_c->add_option("--dropout", tp_o.cfg.dropout);
  tp_c->add_option("--lr", tp_o.cfg.learning_rate);
  tp_c->add_option("--batch", tp_o.cfg.batch_size);
  tp_c->add_option("--clip", tp_o.cfg.grad_clip_norm);
  tp_c->add_option("--seed", tp_o.cfg.seed, "weight init seed");
  tp_c->add_flag("--no-q3", [&](size_t) { tp_o.cfg.use_q3 = false; },
                 "drop the syntax-role channel");
  tp_c->add_flag("--no-q4", [&](size_t) { tp_o.cfg.use_q4 = false; },
                 "drop the parameter-role channel");
  tp_c->add_flag("--mask-values", tp_o.cfg.mask_values_at_train,
                 "legality-mask the training softmax");

  TrainConstraintOpts tc_o;
  auto* tc_c =
      app.add_subcommand("train-constraint", "train the constraint model");
  add_train_common(tc_c, tc_o.common);
  tc_c->add_option("--encoder-layers", tc_o.cfg.encoder_layers);
  tc_c->add_option("--pointer-layers", tc_o.cfg.pointer_layers);
  tc_c->add_option("--heads", tc_o.cfg.heads);
  tc_c->add_option("--embed", tc_o.cfg.embed_dim);
  tc_c->add_option("--context", tc_o.cfg.context_len);
  tc_c->add_option("--dropout", tc_o.cfg.dropout);
  tc_c->add_option("--lr", tc_o.cfg.learning_rate);
  tc_c->add_option("--batch", tc_o.cfg.batch_size);
  tc_c->add_option("--clip", tc_o.cfg.grad_clip_norm);
  tc_c->add_option("--seed", tc_o.cfg.seed, "weight init seed");
  tc_c->add_flag("--no-q4", [&](size_t) { tc_o.cfg.use_q4 = false; },
                 "drop the parameter-role channel");
  tc_c->add_flag("--no-shared-embeddings",
                 [&](size_t) { tc_o.cfg.shared_param_embeddings = false; },
                 "one dictionary over raw ids instead of per-parameter ones");

  SampleOpts sample_o;
  auto* sample_c = app.add_subcommand("sample", "draw sketches from a model");
  sample_c->add_option("--model", sample_o.model, "prim checkpoint")->required();
  sample_c->add_option("--books", sample_o.books, "codebook file")->required();
  sample_c->add_option("--out", sample_o.out, "token dump")->required();
  sample_c->add_option("--sketches-out", sample_o.sketches_out,
                       "also write decoded sketches (jsonl)");
  sample_c->add_option("--n", sample_o.n, "sample count");
  sample_c->add_option("--nucleus-p", sample_o.nucleus_p, "nucleus mass");
  sample_c->add_option("--seed", sample_o.seed, "sampling seed");
  sample_c->add_option("--max-len", sample_o.max_len,
                       "token cap (0 = context length)");
  sample_c->add_flag("--unmasked", sample_o.unmasked,
                     "raw sampling with boundary accounting");

  AutoconstrainOpts auto_o;
  auto* auto_c =
      app.add_subcommand("autoconstrain", "infer constraints for primitives");
  auto_c->add_option("--model", auto_o.model, "constraint checkpoint")
      ->required();
  auto_c->add_option("--books", auto_o.books, "codebook file")->required();
  auto_c->add_option("--input", auto_o.input, "corpus (constraints ignored)")
      ->required();
  auto_c->add_option("--out", auto_o.out, "corpus with inferred constraints")
      ->required();
  auto_c->add_option("--nucleus-p", auto_o.nucleus_p, "nucleus mass");
  auto_c->add_option("--seed", auto_o.seed, "sampling seed");
  auto_c->add_option("--max-len", auto_o.max_len, "constraint-section cap");

  SolveOpts2 solve_o;
  auto* solve_c = app.add_subcommand("solve", "run the constraint solver");
  solve_c->add_option("--input", solve_o.input, "corpus (jsonl)")->required();
  solve_c->add_option("--out", solve_o.out, "solved corpus")->required();
  solve_c->add_option("--report", solve_o.report, "per-sketch report (json)");
  solve_c->add_option("--max-iters", solve_o.s.max_iterations);
  solve_c->add_option("--tol", solve_o.s.residual_tol);

  MetricsOpts metrics_o;
  auto* metrics_c =
      app.add_subcommand("metrics", "compare a corpus against a reference");
  metrics_c->add_option("--generated", metrics_o.generated)->required();
  metrics_c->add_option("--reference", metrics_o.reference)->required();
  metrics_c->add_option("--out", metrics_o.out, "report json")->required();
  metrics_c->add_option("--stats-csv", metrics_o.stats_csv,
                        "dump the generated corpus' statistic histograms");
  metrics_c->add_option("--bins", metrics_o.bins);
  metrics_c->add_option("--prim-model", metrics_o.prim_model,
                        "adds NLL (with --tokens) / syntax sampling");
  metrics_c->add_option("--constraint-model", metrics_o.constraint_model,
                        "adds teacher-forced accuracy (needs --tokens)");
  metrics_c->add_option("--books", metrics_o.books, "codebook file");
  metrics_c->add_option("--tokens", metrics_o.tokens, "held-out token dump");
  metrics_c->add_option("--syntax-samples", metrics_o.syntax_samples,
                        "unmasked samples for the syntax error rate");
  metrics_c->add_option("--nucleus-p", metrics_o.nucleus_p);
  metrics_c->add_option("--seed", metrics_o.seed);
  metrics_c->add_option("--max-len", metrics_o.max_len);

  RenderOpts2 render_o;
  auto* render_c = app.add_subcommand("render", "draw a sketch as SVG");
  render_c->add_option("--input", render_o.input, "sketch json or corpus jsonl")
      ->required();
  render_c->add_option("--index", render_o.index, "record within a jsonl");
  render_c->add_option("--after", render_o.after,
                       "second sketch: side-by-side comparison");
  render_c->add_option("--after-index", render_o.after_index);
  render_c->add_option("--out", render_o.out, "svg path")->required();
  render_c->add_option("--size", render_o.r.size, "panel size in px");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth_c) return run_synth(synth_o);
    if (*ingest_c) return run_ingest(ingest_o);
    if (*books_c) return run_fit_codebooks(books_o);
    if (*tok_c) return run_tokenize(tok_o);
    if (*val_c) return run_validate(val_o);
    if (*tp_c) return run_train_prim(tp_o);
    if (*tc_c) return run_train_constraint(tc_o);
    if (*sample_c) return run_sample(sample_o);
    if (*auto_c) return run_autoconstrain(auto_o);
    if (*solve_c) return run_solve(solve_o);
    if (*metrics_c) return run_metrics(metrics_o);
    if (*render_c) return run_render(render_o);
  } catch (const ValidationFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
