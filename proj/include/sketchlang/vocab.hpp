#pragma once

#include <array>
#include <cstdint>

#include "sketchlang/codebook.hpp"

namespace sketchlang {

enum class TokenRole {
  Filler,
  Lambda,        // structure: opens a primitive/constraint or a section
  Omega,         // structure: closes a section
  PrimType,      // tau
  ConstrType,    // nu
  Construction,  // kappa
  SubRefVal,     // mu
  Value,         // quantized parameter bin
  Pointer,       // reference to a primitive by position
};

// One flat token id space shared by both generators:
//   [0]                    filler
//   [1,2]                  lambda, omega
//   [3..6]                 tau   (primitive kinds, PrimKind order)
//   [7..14]                nu    (constraint kinds, ConstrKind order)
//   [15,16]                kappa (regular, construction)
//   [17..20]               mu    (sub-references, SubRef order)
//   [21..)                 value bins, one block per ParamType in enum order
//   [pointer_base()..)     primitive pointers, max_refs slots
struct VocabLayout {
  static constexpr int kFiller = 0;
  static constexpr int kLambda = 1;
  static constexpr int kOmega = 2;
  static constexpr int kPrimTypeBase = 3;
  static constexpr int kConstrTypeBase = 7;
  static constexpr int kConstructionBase = 15;
  static constexpr int kSubRefBase = 17;
  static constexpr int kValueBase = 21;

  std::array<int, kParamTypeCount> codebook_sizes{256, 256, 256, 256, 2};
  int max_refs = 128;

  static VocabLayout from(const CodebookSet& cb, int max_refs = 128);

  int value_base(ParamType t) const;
  int pointer_base() const;
  int size() const;

  TokenRole role(int id) const;

  int prim_token(PrimKind k) const { return kPrimTypeBase + (int)k; }
  int constr_token(ConstrKind k) const { return kConstrTypeBase + (int)k; }
  int construction_token(bool flag) const { return kConstructionBase + (flag ? 1 : 0); }
  int subref_token(SubRef s) const { return kSubRefBase + (int)s; }
  int value_token(ParamType t, int bin) const { return value_base(t) + bin; }
  int pointer_token(int prim_index) const { return pointer_base() + prim_index; }

  PrimKind prim_of(int id) const { return (PrimKind)(id - kPrimTypeBase); }
  ConstrKind constr_of(int id) const { return (ConstrKind)(id - kConstrTypeBase); }
  bool construction_of(int id) const { return id == kConstructionBase + 1; }
  SubRef subref_of(int id) const { return (SubRef)(id - kSubRefBase); }
  int bin_of(int id, ParamType t) const { return id - value_base(t); }
  int pointer_of(int id) const { return id - pointer_base(); }

  uint64_t digest() const;
};

// Side-channel alphabets (ancestor non-terminals of each token).
// Level 3: the primitive/constraint the token belongs to.
constexpr int kQ3Size = 1 + kPrimKindCount + kConstrKindCount;
inline int q3_filler() { return 0; }
inline int q3_of(PrimKind k) { return 1 + (int)k; }
inline int q3_of(ConstrKind k) { return 1 + kPrimKindCount + (int)k; }

// Level 4: the parameter family / reference role below that.
constexpr int kQ4Ref = 1 + kParamTypeCount;      // 6
constexpr int kQ4Sub = 2 + kParamTypeCount;      // 7
constexpr int kQ4Size = 3 + kParamTypeCount;     // 8
inline int q4_filler() { return 0; }
inline int q4_of(ParamType t) { return 1 + (int)t; }

// A fully linearized sketch plus its side channels. The position channel is
// implicit (index within q). n_p is one past the omega closing the primitive
// section.
struct TokenSequence {
  std::vector<int> q;
  std::vector<int> q3;
  std::vector<int> q4;
  int n_p = 0;

  int size() const { return (int)q.size(); }
};

}  // namespace sketchlang
