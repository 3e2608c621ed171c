#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "sketchlang/codebook.hpp"
#include "sketchlang/constraint_model.hpp"
#include "sketchlang/data.hpp"
#include "sketchlang/metrics.hpp"
#include "sketchlang/nn.hpp"
#include "sketchlang/prim_model.hpp"
#include "sketchlang/types.hpp"
#include "sketchlang/vocab.hpp"

namespace sketchlang {

using nlohmann::json;

// Enum parsers matching to_string(); throw std::invalid_argument on unknown
// names.
PrimKind prim_kind_from_string(const std::string& s);
SubRef subref_from_string(const std::string& s);
ConstrKind constr_kind_from_string(const std::string& s);
ParamType param_type_from_string(const std::string& s);

// --- Sketch files ----------------------------------------------------------
// Parameters are stored as hex-float strings so a save/load round trip is
// bit-exact.

json sketch_to_json(const Sketch& s);
Sketch sketch_from_json(const json& j);

void save_sketch(const std::string& path, const Sketch& s);
Sketch load_sketch(const std::string& path);

// Corpora are JSON-lines: one compact sketch object per line.
void save_corpus(const std::string& path, const std::vector<Sketch>& corpus);
std::vector<Sketch> load_corpus(const std::string& path);

// Like load_corpus, but a record that fails to parse is counted in
// `malformed` and skipped instead of aborting the load.
std::vector<Sketch> load_corpus_lenient(const std::string& path,
                                        long& malformed);

// Best-effort import of a foreign JSON-lines corpus: per record, an
// "entities" array (objects with a "type" plus start/end, center/radius or
// location fields) and a "constraints" array ("type" plus "refs" as
// [entity, subref] pairs). Unsupported entity or constraint types are
// stripped, constraints referencing stripped entities dropped, and the
// surviving references reindexed; counts land in the manifest fields.
std::vector<Sketch> import_sketchgraphs(const std::string& path,
                                        CorpusManifest& m);

json to_json(const CorpusManifest& m);
void save_manifest(const std::string& path, const CorpusManifest& m);

// --- Codebooks --------------------------------------------------------------

json codebooks_to_json(const CodebookSet& cb);
CodebookSet codebooks_from_json(const json& j);

void save_codebooks(const std::string& path, const CodebookSet& cb);
CodebookSet load_codebooks(const std::string& path);

// --- Token dumps -------------------------------------------------------------
// The vocabulary layout travels with the sequences so a dump is
// self-describing; load verifies the digest when the caller supplies a layout.

struct TokenDump {
  VocabLayout layout;
  std::vector<TokenSequence> sequences;
};

void save_token_dump(const std::string& path, const VocabLayout& layout,
                     const std::vector<TokenSequence>& seqs);
TokenDump load_token_dump(const std::string& path);

// --- Reports --------------------------------------------------------------------

json to_json(const MetricReport& r);
void save_report(const std::string& path, const MetricReport& r);

// One row per bin: section,group,statistic,bin,mass (plus the raw-domain
// bounds), ready for plotting.
void save_stats_csv(const std::string& path, const SketchStats& stats);
void save_histogram_csv(const std::string& path, const Histogram& h);

// --- Model configs ------------------------------------------------------------

json to_json(const PrimModelConfig& c);
PrimModelConfig prim_config_from_json(const json& j);
json to_json(const ConstraintModelConfig& c);
ConstraintModelConfig constraint_config_from_json(const json& j);

// --- Model checkpoints --------------------------------------------------------
// Layout: a magic line, a single-line JSON header, then float64 tensor data
// (column-major, little-endian) in manifest order. Weights are always stored
// as doubles regardless of the in-memory scalar.

inline constexpr const char* kCheckpointMagic = "SKLCKPT1";

struct CheckpointInfo {
  int version = 0;
  std::string model_kind;  // "prim" | "constraint"
  uint64_t vocab_digest = 0;
  uint64_t codebook_digest = 0;
  json config;
};

template <typename S>
void save_checkpoint(const std::string& path, const std::string& model_kind,
                     const json& config, uint64_t vocab_digest,
                     uint64_t codebook_digest, const nn::ParamList<S>& params);

CheckpointInfo read_checkpoint_header(const std::string& path);

// Fills `params` by tensor name; throws if a tensor is missing from the file
// or its shape disagrees with the model.
template <typename S>
void load_checkpoint_weights(const std::string& path,
                             const nn::ParamList<S>& params);

// Guards a load against a model built over a different vocabulary or
// codebook set.
void verify_checkpoint(const CheckpointInfo& info,
                       const std::string& expect_kind, uint64_t vocab_digest,
                       uint64_t codebook_digest);

}  // namespace sketchlang
