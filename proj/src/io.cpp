#include "sketchlang/io.hpp"

#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "sketchlang/util.hpp"

namespace sketchlang {

namespace {

[[noreturn]] void bad_name(const char* what, const std::string& s) {
  throw std::invalid_argument(std::string(what) + ": unknown name '" + s + "'");
}

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

void expect_version(const json& j, int want, const char* what) {
  int got = j.at("version").get<int>();
  if (got != want)
    throw std::runtime_error(std::string(what) + ": unsupported version " +
                             std::to_string(got));
}

json doubles_to_hex(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(hexfloat(x));
  return a;
}

std::vector<double> doubles_from_hex(const json& a) {
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& s : a) v.push_back(parse_hexfloat(s.get<std::string>()));
  return v;
}

}  // namespace

PrimKind prim_kind_from_string(const std::string& s) {
  for (int i = 0; i < kPrimKindCount; ++i)
    if (s == to_string((PrimKind)i)) return (PrimKind)i;
  bad_name("prim_kind_from_string", s);
}

SubRef subref_from_string(const std::string& s) {
  for (int i = 0; i < kSubRefCount; ++i)
    if (s == to_string((SubRef)i)) return (SubRef)i;
  bad_name("subref_from_string", s);
}

ConstrKind constr_kind_from_string(const std::string& s) {
  for (int i = 0; i < kConstrKindCount; ++i)
    if (s == to_string((ConstrKind)i)) return (ConstrKind)i;
  bad_name("constr_kind_from_string", s);
}

ParamType param_type_from_string(const std::string& s) {
  for (int i = 0; i < kParamTypeCount; ++i)
    if (s == to_string((ParamType)i)) return (ParamType)i;
  bad_name("param_type_from_string", s);
}

json sketch_to_json(const Sketch& s) {
  json prims = json::array();
  for (const Primitive& p : s.primitives) {
    json jp;
    jp["kind"] = to_string(p.kind);
    if (p.construction) jp["construction"] = true;
    jp["params"] = doubles_to_hex(p.params);
    prims.push_back(std::move(jp));
  }
  json constrs = json::array();
  for (const Constraint& c : s.constraints) {
    json targets = json::array();
    for (const ConstraintTarget& t : c.targets)
      targets.push_back({{"prim", t.prim}, {"sub", to_string(t.sub)}});
    constrs.push_back({{"kind", to_string(c.kind)},
                       {"targets", std::move(targets)}});
  }
  return {{"version", 1},
          {"primitives", std::move(prims)},
          {"constraints", std::move(constrs)}};
}

Sketch sketch_from_json(const json& j) {
  expect_version(j, 1, "sketch");
  Sketch s;
  for (const auto& jp : j.at("primitives")) {
    Primitive p;
    p.kind = prim_kind_from_string(jp.at("kind").get<std::string>());
    p.construction = jp.value("construction", false);
    p.params = doubles_from_hex(jp.at("params"));
    s.primitives.push_back(std::move(p));
  }
  for (const auto& jc : j.at("constraints")) {
    Constraint c;
    c.kind = constr_kind_from_string(jc.at("kind").get<std::string>());
    for (const auto& jt : jc.at("targets"))
      c.targets.push_back({jt.at("prim").get<int>(),
                           subref_from_string(jt.at("sub").get<std::string>())});
    s.constraints.push_back(std::move(c));
  }
  return s;
}

void save_sketch(const std::string& path, const Sketch& s) {
  open_out(path) << sketch_to_json(s).dump(2) << '\n';
}

Sketch load_sketch(const std::string& path) {
  return sketch_from_json(json::parse(open_in(path)));
}

void save_corpus(const std::string& path, const std::vector<Sketch>& corpus) {
  std::ofstream out = open_out(path);
  for (const Sketch& s : corpus) out << sketch_to_json(s).dump() << '\n';
}

std::vector<Sketch> load_corpus(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<Sketch> corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    corpus.push_back(sketch_from_json(json::parse(line)));
  }
  return corpus;
}

std::vector<Sketch> load_corpus_lenient(const std::string& path,
                                        long& malformed) {
  std::ifstream in = open_in(path);
  std::vector<Sketch> corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      corpus.push_back(sketch_from_json(json::parse(line)));
    } catch (const std::exception&) {
      ++malformed;
    }
  }
  return corpus;
}

namespace {

Vec2 vec2_field(const json& j, const char* name) {
  const json& v = j.at(name);
  return {v.at(0).get<double>(), v.at(1).get<double>()};
}

// lower-cases ASCII so "COINCIDENT", "Coincident" and "coincident" all map
std::string folded(const json& j, const char* name) {
  std::string s = j.at(name).get<std::string>();
  for (char& c : s) c = (char)std::tolower((unsigned char)c);
  return s;
}

// Entities of a foreign record; unknown types yield nullopt.
std::optional<Primitive> import_entity(const json& e) {
  std::string type = folded(e, "type");
  if (type == "point") return make_point(vec2_field(e, "location"));
  if (type == "line") return make_line(vec2_field(e, "start"), vec2_field(e, "end"));
  if (type == "circle")
    return make_circle(vec2_field(e, "center"), e.at("radius").get<double>());
  if (type == "arc")
    return make_arc(vec2_field(e, "center"), e.at("radius").get<double>(),
                    e.at("start_angle").get<double>(),
                    e.at("sweep").get<double>());
  return std::nullopt;
}

std::optional<Sketch> import_record(const json& rec, CorpusManifest& m) {
  Sketch s;
  std::vector<int> remap;  // entity index -> primitive index or -1
  for (const json& e : rec.at("entities")) {
    if (std::optional<Primitive> p = import_entity(e)) {
      remap.push_back((int)s.primitives.size());
      s.primitives.push_back(*p);
    } else {
      remap.push_back(-1);
      ++m.stripped_primitives;
    }
  }
  if (!rec.contains("constraints")) return s;
  for (const json& c : rec.at("constraints")) {
    std::string type = folded(c, "type");
    ConstrKind kind;
    try {
      kind = constr_kind_from_string(type);
    } catch (const std::invalid_argument&) {
      ++m.stripped_constraints;
      continue;
    }
    Constraint out{kind, {}};
    bool ok = true;
    for (const json& r : c.at("refs")) {
      int ent = r.at(0).get<int>();
      if (ent < 0 || ent >= (int)remap.size() || remap[ent] < 0) {
        ok = false;
        break;
      }
      SubRef sub = r.size() > 1 ? subref_from_string(r.at(1).get<std::string>())
                                : SubRef::Whole;
      out.targets.push_back({remap[ent], sub});
    }
    if (ok && out.targets.size() == 2)
      s.constraints.push_back(out);
    else
      ++m.stripped_constraints;
  }
  return s;
}

}  // namespace

std::vector<Sketch> import_sketchgraphs(const std::string& path,
                                        CorpusManifest& m) {
  std::ifstream in = open_in(path);
  std::vector<Sketch> corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      if (std::optional<Sketch> s = import_record(json::parse(line), m))
        corpus.push_back(std::move(*s));
    } catch (const std::exception&) {
      ++m.malformed;
    }
  }
  return corpus;
}

json to_json(const CorpusManifest& m) {
  return {{"raw", m.raw},
          {"malformed", m.malformed},
          {"stripped_primitives", m.stripped_primitives},
          {"stripped_constraints", m.stripped_constraints},
          {"dropped_small", m.dropped_small},
          {"dropped_long", m.dropped_long},
          {"dropped_invalid", m.dropped_invalid},
          {"kept", m.kept},
          {"seed", hex_u64(m.seed)},
          {"train", m.train},
          {"val", m.val},
          {"test", m.test}};
}

void save_manifest(const std::string& path, const CorpusManifest& m) {
  open_out(path) << to_json(m).dump(2) << '\n';
}

json codebooks_to_json(const CodebookSet& cb) {
  json books = json::array();
  for (const Codebook& b : cb.books)
    books.push_back({{"type", to_string(b.type)},
                     {"seed", b.seed},
                     {"requested_k", b.requested_k},
                     {"centers", doubles_to_hex(b.centers)}});
  return {{"version", 1},
          {"corpus_digest", hex_u64(cb.corpus_digest)},
          {"books", std::move(books)}};
}

CodebookSet codebooks_from_json(const json& j) {
  expect_version(j, 1, "codebooks");
  CodebookSet cb;
  cb.corpus_digest = std::stoull(j.at("corpus_digest").get<std::string>(),
                                 nullptr, 16);
  const json& books = j.at("books");
  if ((int)books.size() != kParamTypeCount)
    throw std::runtime_error("codebooks: expected one book per param type");
  for (const auto& jb : books) {
    ParamType t = param_type_from_string(jb.at("type").get<std::string>());
    Codebook& b = cb.of(t);
    b.type = t;
    b.seed = jb.at("seed").get<uint64_t>();
    b.requested_k = jb.at("requested_k").get<int>();
    b.centers = doubles_from_hex(jb.at("centers"));
  }
  return cb;
}

void save_codebooks(const std::string& path, const CodebookSet& cb) {
  open_out(path) << codebooks_to_json(cb).dump(2) << '\n';
}

CodebookSet load_codebooks(const std::string& path) {
  return codebooks_from_json(json::parse(open_in(path)));
}

void save_token_dump(const std::string& path, const VocabLayout& layout,
                     const std::vector<TokenSequence>& seqs) {
  json seqarr = json::array();
  for (const TokenSequence& s : seqs)
    seqarr.push_back(
        {{"q", s.q}, {"q3", s.q3}, {"q4", s.q4}, {"n_p", s.n_p}});
  json j = {{"version", 1},
            {"vocab",
             {{"codebook_sizes", layout.codebook_sizes},
              {"max_refs", layout.max_refs},
              {"digest", hex_u64(layout.digest())}}},
            {"sequences", std::move(seqarr)}};
  open_out(path) << j.dump() << '\n';
}

TokenDump load_token_dump(const std::string& path) {
  json j = json::parse(open_in(path));
  expect_version(j, 1, "token dump");
  TokenDump d;
  const json& v = j.at("vocab");
  auto sizes = v.at("codebook_sizes").get<std::vector<int>>();
  if ((int)sizes.size() != kParamTypeCount)
    throw std::runtime_error("token dump: bad codebook_sizes length");
  std::copy(sizes.begin(), sizes.end(), d.layout.codebook_sizes.begin());
  d.layout.max_refs = v.at("max_refs").get<int>();
  uint64_t want = std::stoull(v.at("digest").get<std::string>(), nullptr, 16);
  if (d.layout.digest() != want)
    throw std::runtime_error("token dump: vocabulary digest mismatch");
  for (const auto& js : j.at("sequences")) {
    TokenSequence s;
    s.q = js.at("q").get<std::vector<int>>();
    s.q3 = js.at("q3").get<std::vector<int>>();
    s.q4 = js.at("q4").get<std::vector<int>>();
    s.n_p = js.at("n_p").get<int>();
    d.sequences.push_back(std::move(s));
  }
  return d;
}

namespace {

json histogram_to_json(const Histogram& h) {
  return {{"mass", h.mass}, {"lo", h.lo}, {"hi", h.hi}, {"n", h.n}};
}

}  // namespace

json to_json(const MetricReport& r) {
  json j = {{"samples", r.samples},
            {"nucleus_p", r.nucleus_p},
            {"bins", r.bins}};
  if (r.nll) {
    j["nll"] = {{"bits_per_sketch", r.nll->bits_per_sketch},
                {"bits_per_primitive", r.nll->bits_per_primitive},
                {"bits_per_constraint", r.nll->bits_per_constraint},
                {"bits_per_token", r.nll->bits_per_token},
                {"clamped", r.nll->clamped},
                {"sketches", r.nll->sketches},
                {"with_constraints", r.nll->with_constraints}};
  }
  if (r.syntax) {
    j["e_syntax"] = r.syntax->e_syntax;
    j["e_syntax_seq"] = r.syntax->e_syntax_seq;
    j["syntax_samples"] = r.syntax->samples;
    j["syntax_skipped"] = r.syntax->skipped;
  }
  if (r.estat) {
    j["e_stat_p"] = r.estat->p;
    j["e_stat_c"] = r.estat->c;
    j["e_stat"] = r.estat->total;
  }
  if (r.accuracy) j["accuracy"] = *r.accuracy;
  if (r.dof) j["dof"] = histogram_to_json(*r.dof);
  return j;
}

void save_report(const std::string& path, const MetricReport& r) {
  open_out(path) << to_json(r).dump(2) << '\n';
}

namespace {

void csv_rows(std::ostream& out, const std::string& section,
              const std::vector<StatisticGroup>& groups) {
  for (const StatisticGroup& g : groups)
    for (const Statistic& s : g.stats)
      for (size_t b = 0; b < s.hist.mass.size(); ++b)
        out << section << ',' << g.name << ',' << s.name << ',' << b << ','
            << s.hist.mass[b] << ',' << s.hist.lo << ',' << s.hist.hi << ','
            << s.hist.n << '\n';
}

}  // namespace

void save_stats_csv(const std::string& path, const SketchStats& stats) {
  std::ofstream out = open_out(path);
  out << "section,group,statistic,bin,mass,lo,hi,n\n";
  csv_rows(out, "primitive", stats.prim_groups);
  csv_rows(out, "constraint", stats.constr_groups);
}

void save_histogram_csv(const std::string& path, const Histogram& h) {
  std::ofstream out = open_out(path);
  out << "bin,mass,lo,hi,n\n";
  for (size_t b = 0; b < h.mass.size(); ++b)
    out << b << ',' << h.mass[b] << ',' << h.lo << ',' << h.hi << ',' << h.n
        << '\n';
}

json to_json(const PrimModelConfig& c) {
  return {{"layers", c.layers},
          {"heads", c.heads},
          {"embed_dim", c.embed_dim},
          {"context_len", c.context_len},
          {"dropout", c.dropout},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"grad_clip_norm", c.grad_clip_norm},
          {"seed", c.seed},
          {"use_q3", c.use_q3},
          {"use_q4", c.use_q4},
          {"mask_values_at_train", c.mask_values_at_train}};
}

PrimModelConfig prim_config_from_json(const json& j) {
  PrimModelConfig c;
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.context_len = j.at("context_len").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.use_q3 = j.at("use_q3").get<bool>();
  c.use_q4 = j.at("use_q4").get<bool>();
  c.mask_values_at_train = j.at("mask_values_at_train").get<bool>();
  return c;
}

json to_json(const ConstraintModelConfig& c) {
  return {{"encoder_layers", c.encoder_layers},
          {"pointer_layers", c.pointer_layers},
          {"heads", c.heads},
          {"embed_dim", c.embed_dim},
          {"context_len", c.context_len},
          {"dropout", c.dropout},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"grad_clip_norm", c.grad_clip_norm},
          {"seed", c.seed},
          {"use_q4", c.use_q4},
          {"shared_param_embeddings", c.shared_param_embeddings}};
}

ConstraintModelConfig constraint_config_from_json(const json& j) {
  ConstraintModelConfig c;
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.pointer_layers = j.at("pointer_layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.context_len = j.at("context_len").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.use_q4 = j.at("use_q4").get<bool>();
  c.shared_param_embeddings = j.at("shared_param_embeddings").get<bool>();
  return c;
}

template <typename S>
void save_checkpoint(const std::string& path, const std::string& model_kind,
                     const json& config, uint64_t vocab_digest,
                     uint64_t codebook_digest, const nn::ParamList<S>& params) {
  json manifest = json::array();
  for (const nn::Tensor<S>* t : params)
    manifest.push_back({{"name", t->name},
                        {"rows", (int)t->v.rows()},
                        {"cols", (int)t->v.cols()}});
  json header = {{"version", 1},
                 {"model_kind", model_kind},
                 {"vocab_digest", hex_u64(vocab_digest)},
                 {"codebook_digest", hex_u64(codebook_digest)},
                 {"config", config},
                 {"tensors", std::move(manifest)}};
  std::ofstream out = open_out(path, /*binary=*/true);
  out << kCheckpointMagic << '\n' << header.dump() << '\n';
  std::vector<double> buf;
  for (const nn::Tensor<S>* t : params) {
    buf.assign(t->v.data(), t->v.data() + t->v.size());
    out.write(reinterpret_cast<const char*>(buf.data()),
              (std::streamsize)(buf.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

namespace {

json read_header(std::istream& in, const std::string& path) {
  std::string magic, header;
  if (!std::getline(in, magic) || magic != kCheckpointMagic)
    throw std::runtime_error("not a checkpoint file: " + path);
  if (!std::getline(in, header))
    throw std::runtime_error("checkpoint header missing: " + path);
  json j = json::parse(header);
  expect_version(j, 1, "checkpoint");
  return j;
}

}  // namespace

CheckpointInfo read_checkpoint_header(const std::string& path) {
  std::ifstream in = open_in(path, /*binary=*/true);
  json j = read_header(in, path);
  CheckpointInfo info;
  info.version = j.at("version").get<int>();
  info.model_kind = j.at("model_kind").get<std::string>();
  info.vocab_digest =
      std::stoull(j.at("vocab_digest").get<std::string>(), nullptr, 16);
  info.codebook_digest =
      std::stoull(j.at("codebook_digest").get<std::string>(), nullptr, 16);
  info.config = j.at("config");
  return info;
}

template <typename S>
void load_checkpoint_weights(const std::string& path,
                             const nn::ParamList<S>& params) {
  std::ifstream in = open_in(path, /*binary=*/true);
  json j = read_header(in, path);
  const json& manifest = j.at("tensors");
  if (manifest.size() != params.size())
    throw std::runtime_error("checkpoint: tensor count mismatch");
  // A model of the same kind and config registers tensors in a fixed order,
  // so the manifest must line up one-to-one.
  std::vector<double> buf;
  size_t i = 0;
  for (const auto& jt : manifest) {
    nn::Tensor<S>* t = params[i++];
    if (jt.at("name").get<std::string>() != t->name)
      throw std::runtime_error("checkpoint: expected tensor '" + t->name +
                               "', file has '" +
                               jt.at("name").get<std::string>() + "'");
    int rows = jt.at("rows").get<int>(), cols = jt.at("cols").get<int>();
    if (rows != t->v.rows() || cols != t->v.cols())
      throw std::runtime_error("checkpoint: shape mismatch for '" + t->name +
                               "'");
    buf.resize((size_t)rows * cols);
    in.read(reinterpret_cast<char*>(buf.data()),
            (std::streamsize)(buf.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint truncated: " + path);
    for (Eigen::Index k = 0; k < t->v.size(); ++k)
      t->v.data()[k] = (S)buf[(size_t)k];
  }
}

void verify_checkpoint(const CheckpointInfo& info,
                       const std::string& expect_kind, uint64_t vocab_digest,
                       uint64_t codebook_digest) {
  if (info.model_kind != expect_kind)
    throw std::runtime_error("checkpoint holds a '" + info.model_kind +
                             "' model, expected '" + expect_kind + "'");
  if (info.vocab_digest != vocab_digest)
    throw std::runtime_error("checkpoint vocabulary digest mismatch");
  if (info.codebook_digest != codebook_digest)
    throw std::runtime_error("checkpoint codebook digest mismatch");
}

template void save_checkpoint<float>(const std::string&, const std::string&,
                                     const json&, uint64_t, uint64_t,
                                     const nn::ParamList<float>&);
template void save_checkpoint<double>(const std::string&, const std::string&,
                                      const json&, uint64_t, uint64_t,
                                      const nn::ParamList<double>&);
template void load_checkpoint_weights<float>(const std::string&,
                                             const nn::ParamList<float>&);
template void load_checkpoint_weights<double>(const std::string&,
                                              const nn::ParamList<double>&);

}  // namespace sketchlang
