#include "sketchlang/data.hpp"

#include <algorithm>
#include <stdexcept>

#include "sketchlang/util.hpp"

namespace sketchlang {

int constraint_token_count(const Sketch& s) {
  int n = 1;  // omega
  for (const Constraint& c : s.constraints) n += 4 + subref_slots(c.kind);
  return n;
}

SplitCorpus ingest_filter(const std::vector<Sketch>& raw,
                          const IngestFilters& f) {
  if (f.train_frac < 0 || f.val_frac < 0 || f.train_frac + f.val_frac > 1.0)
    throw std::invalid_argument("ingest_filter: bad split fractions");
  SplitCorpus out;
  CorpusManifest& m = out.manifest;
  m.raw = (long)raw.size();
  m.seed = f.seed;

  std::vector<std::pair<uint64_t, const Sketch*>> kept;
  for (const Sketch& s : raw) {
    if ((int)s.primitives.size() < f.min_primitives) {
      ++m.dropped_small;
      continue;
    }
    if (constraint_token_count(s) > f.max_constraint_tokens) {
      ++m.dropped_long;
      continue;
    }
    if (!validate(s).empty()) {
      ++m.dropped_invalid;
      continue;
    }
    kept.push_back({sketch_digest(s), &s});
  }
  m.kept = (long)kept.size();

  // Digest order makes the shuffle below see the same arrangement for any
  // permutation of the input (ties are identical sketches).
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  Rng rng(f.seed);
  shuffle_vec(kept, rng);

  long n_train = (long)(m.kept * f.train_frac + 0.5);
  long n_val = (long)(m.kept * f.val_frac + 0.5);
  n_train = std::min(n_train, m.kept);
  n_val = std::min(n_val, m.kept - n_train);
  for (long i = 0; i < m.kept; ++i) {
    const Sketch& s = *kept[i].second;
    if (i < n_train)
      out.train.push_back(s);
    else if (i < n_train + n_val)
      out.val.push_back(s);
    else
      out.test.push_back(s);
  }
  m.train = (long)out.train.size();
  m.val = (long)out.val.size();
  m.test = (long)out.test.size();
  return out;
}

}  // namespace sketchlang
