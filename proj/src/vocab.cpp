#include "sketchlang/vocab.hpp"

#include "sketchlang/util.hpp"

namespace sketchlang {

VocabLayout VocabLayout::from(const CodebookSet& cb, int max_refs) {
  VocabLayout v;
  for (int t = 0; t < kParamTypeCount; ++t) {
    v.codebook_sizes[t] = cb.books[t].k();
  }
  v.max_refs = max_refs;
  return v;
}

int VocabLayout::value_base(ParamType t) const {
  int base = kValueBase;
  for (int i = 0; i < (int)t; ++i) base += codebook_sizes[i];
  return base;
}

int VocabLayout::pointer_base() const {
  return value_base((ParamType)(kParamTypeCount - 1)) +
         codebook_sizes[kParamTypeCount - 1];
}

int VocabLayout::size() const { return pointer_base() + max_refs; }

TokenRole VocabLayout::role(int id) const {
  if (id == kFiller) return TokenRole::Filler;
  if (id == kLambda) return TokenRole::Lambda;
  if (id == kOmega) return TokenRole::Omega;
  if (id < kConstrTypeBase) return TokenRole::PrimType;
  if (id < kConstructionBase) return TokenRole::ConstrType;
  if (id < kSubRefBase) return TokenRole::Construction;
  if (id < kValueBase) return TokenRole::SubRefVal;
  if (id < pointer_base()) return TokenRole::Value;
  return TokenRole::Pointer;
}

uint64_t VocabLayout::digest() const {
  uint64_t h = kFnvOffset;
  for (int s : codebook_sizes) {
    int32_t v = s;
    h = fnv1a64(&v, sizeof v, h);
  }
  int32_t mr = max_refs;
  return fnv1a64(&mr, sizeof mr, h);
}

}  // namespace sketchlang
