#pragma once

#include <cstdint>
#include <vector>

#include "sketchlang/types.hpp"

namespace sketchlang {

struct IngestFilters {
  int min_primitives = 6;
  int max_constraint_tokens = 208;
  double train_frac = 0.8;
  double val_frac = 0.1;  // remainder is the test split
  uint64_t seed = 0;
};

struct CorpusManifest {
  long raw = 0;        // records offered to the filter
  long malformed = 0;  // unreadable records skipped upstream of the filter
  long stripped_primitives = 0;   // unsupported kinds removed by importers
  long stripped_constraints = 0;  // dropped with their primitives or unmapped
  long dropped_small = 0;         // fewer than min_primitives
  long dropped_long = 0;          // constraint token budget exceeded
  long dropped_invalid = 0;       // failed validate
  long kept = 0;
  uint64_t seed = 0;
  long train = 0, val = 0, test = 0;
};

struct SplitCorpus {
  std::vector<Sketch> train, val, test;
  CorpusManifest manifest;
};

// Length of the constraint section as the grammar emits it: four tokens per
// constraint plus one per leading sub-reference slot, plus the closing omega.
int constraint_token_count(const Sketch& s);

// Drops undersized / over-long / invalid sketches, then splits. The split
// orders survivors by content digest before the seeded shuffle, so it depends
// only on the corpus contents and the seed, never on input order.
SplitCorpus ingest_filter(const std::vector<Sketch>& raw,
                          const IngestFilters& f);

}  // namespace sketchlang
