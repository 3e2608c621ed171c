#include "sketchlang/grammar.hpp"

#include <algorithm>
#include <numeric>

namespace sketchlang {

namespace {

std::vector<BodySlot> make_prim_slots(PrimKind k) {
  std::vector<BodySlot> s;
  s.push_back({SlotKind::Construction, ParamType::Location});
  for (ParamType t : param_types_of(k)) s.push_back({SlotKind::Value, t});
  return s;
}

std::vector<BodySlot> make_constr_slots(ConstrKind k) {
  std::vector<BodySlot> s;
  int subs = subref_slots(k);
  for (int i = 0; i < 2; ++i) {
    s.push_back({SlotKind::Ref, ParamType::Location});
    if (i < subs) s.push_back({SlotKind::Sub, ParamType::Location});
  }
  return s;
}

}  // namespace

const std::vector<BodySlot>& prim_body_slots(PrimKind k) {
  static const std::vector<BodySlot> tables[kPrimKindCount] = {
      make_prim_slots(PrimKind::Point),
      make_prim_slots(PrimKind::Line),
      make_prim_slots(PrimKind::Circle),
      make_prim_slots(PrimKind::Arc),
  };
  return tables[(int)k];
}

const std::vector<BodySlot>& constr_body_slots(ConstrKind k) {
  static const std::vector<BodySlot> tables[kConstrKindCount] = {
      make_constr_slots(ConstrKind::Coincident),
      make_constr_slots(ConstrKind::Horizontal),
      make_constr_slots(ConstrKind::Vertical),
      make_constr_slots(ConstrKind::Parallel),
      make_constr_slots(ConstrKind::Perpendicular),
      make_constr_slots(ConstrKind::Midpoint),
      make_constr_slots(ConstrKind::Equal),
      make_constr_slots(ConstrKind::Tangent),
  };
  return tables[(int)k];
}

GrammarCursor::GrammarCursor(const VocabLayout& layout) : layout_(&layout) {}

void GrammarCursor::reset() {
  pos_ = Pos::SeqStart;
  prim_count_ = 0;
  slot_ = 0;
}

SlotKind GrammarCursor::slot_kind() const {
  switch (pos_) {
    case Pos::SeqStart:
    case Pos::ConstrSection: return SlotKind::Lambda;
    case Pos::PrimTypeSlot: return SlotKind::PrimType;
    case Pos::PrimBody: return prim_body_slots(body_prim_)[slot_].kind;
    case Pos::PrimBoundary:
    case Pos::ConstrBoundary: return SlotKind::LambdaOrOmega;
    case Pos::ConstrFirst: return SlotKind::ConstrTypeOrOmega;
    case Pos::ConstrTypeSlot: return SlotKind::ConstrType;
    case Pos::ConstrBody: return constr_body_slots(body_constr_)[slot_].kind;
    case Pos::Done: return SlotKind::End;
  }
  return SlotKind::End;
}

ParamType GrammarCursor::slot_param() const {
  return prim_body_slots(body_prim_)[slot_].param;
}

bool GrammarCursor::accepts(int t) const {
  const VocabLayout& v = *layout_;
  if (t < 0 || t >= v.size()) return false;
  switch (slot_kind()) {
    case SlotKind::Lambda: return t == VocabLayout::kLambda;
    case SlotKind::LambdaOrOmega:
      return t == VocabLayout::kLambda || t == VocabLayout::kOmega;
    case SlotKind::PrimType: return v.role(t) == TokenRole::PrimType;
    case SlotKind::ConstrTypeOrOmega:
      return v.role(t) == TokenRole::ConstrType || t == VocabLayout::kOmega;
    case SlotKind::ConstrType: return v.role(t) == TokenRole::ConstrType;
    case SlotKind::Construction: return v.role(t) == TokenRole::Construction;
    case SlotKind::Value: {
      if (v.role(t) != TokenRole::Value) return false;
      ParamType p = slot_param();
      int base = v.value_base(p);
      return t >= base && t < base + v.codebook_sizes[(int)p];
    }
    case SlotKind::Ref:
      return v.role(t) == TokenRole::Pointer && v.pointer_of(t) < prim_count_;
    case SlotKind::Sub: return v.role(t) == TokenRole::SubRefVal;
    case SlotKind::End: return false;
  }
  return false;
}

bool GrammarCursor::advance(int t) {
  if (!accepts(t)) return false;
  const VocabLayout& v = *layout_;
  switch (pos_) {
    case Pos::SeqStart: pos_ = Pos::PrimTypeSlot; break;
    case Pos::PrimTypeSlot:
      body_prim_ = v.prim_of(t);
      slot_ = 0;
      ++prim_count_;
      pos_ = Pos::PrimBody;
      break;
    case Pos::PrimBody:
      if (++slot_ >= (int)prim_body_slots(body_prim_).size()) {
        pos_ = Pos::PrimBoundary;
      }
      break;
    case Pos::PrimBoundary:
      pos_ = t == VocabLayout::kLambda ? Pos::PrimTypeSlot : Pos::ConstrSection;
      break;
    case Pos::ConstrSection: pos_ = Pos::ConstrFirst; break;
    case Pos::ConstrFirst:
      if (t == VocabLayout::kOmega) {
        pos_ = Pos::Done;
      } else {
        body_constr_ = v.constr_of(t);
        slot_ = 0;
        pos_ = Pos::ConstrBody;
      }
      break;
    case Pos::ConstrTypeSlot:
      body_constr_ = v.constr_of(t);
      slot_ = 0;
      pos_ = Pos::ConstrBody;
      break;
    case Pos::ConstrBody:
      if (++slot_ >= (int)constr_body_slots(body_constr_).size()) {
        pos_ = Pos::ConstrBoundary;
      }
      break;
    case Pos::ConstrBoundary:
      pos_ = t == VocabLayout::kLambda ? Pos::ConstrTypeSlot : Pos::Done;
      break;
    case Pos::Done: return false;
  }
  return true;
}

std::vector<int> GrammarCursor::legal_next() const {
  const VocabLayout& v = *layout_;
  std::vector<int> out;
  auto push_range = [&out](int base, int n) {
    for (int i = 0; i < n; ++i) out.push_back(base + i);
  };
  switch (slot_kind()) {
    case SlotKind::Lambda: out.push_back(VocabLayout::kLambda); break;
    case SlotKind::LambdaOrOmega:
      out.push_back(VocabLayout::kLambda);
      out.push_back(VocabLayout::kOmega);
      break;
    case SlotKind::PrimType:
      push_range(VocabLayout::kPrimTypeBase, kPrimKindCount);
      break;
    case SlotKind::ConstrTypeOrOmega:
      out.push_back(VocabLayout::kOmega);
      push_range(VocabLayout::kConstrTypeBase, kConstrKindCount);
      break;
    case SlotKind::ConstrType:
      push_range(VocabLayout::kConstrTypeBase, kConstrKindCount);
      break;
    case SlotKind::Construction:
      push_range(VocabLayout::kConstructionBase, 2);
      break;
    case SlotKind::Value: {
      ParamType p = slot_param();
      push_range(v.value_base(p), v.codebook_sizes[(int)p]);
      break;
    }
    case SlotKind::Ref:
      push_range(v.pointer_base(), std::min(prim_count_, v.max_refs));
      break;
    case SlotKind::Sub: push_range(VocabLayout::kSubRefBase, kSubRefCount); break;
    case SlotKind::End: break;
  }
  return out;
}

std::pair<int, int> GrammarCursor::side_of(int t) const {
  const VocabLayout& v = *layout_;
  switch (slot_kind()) {
    case SlotKind::PrimType: return {q3_of(v.prim_of(t)), q4_filler()};
    case SlotKind::Construction: return {q3_of(body_prim_), q4_filler()};
    case SlotKind::Value:
      return {q3_of(body_prim_), q4_of(slot_param())};
    case SlotKind::ConstrType: return {q3_of(v.constr_of(t)), q4_filler()};
    case SlotKind::ConstrTypeOrOmega:
      if (t == VocabLayout::kOmega) return {q3_filler(), q4_filler()};
      return {q3_of(v.constr_of(t)), q4_filler()};
    case SlotKind::Ref: return {q3_of(body_constr_), kQ4Ref};
    case SlotKind::Sub: return {q3_of(body_constr_), kQ4Sub};
    default: return {q3_filler(), q4_filler()};
  }
}

bool GrammarCursor::at_boundary() const {
  SlotKind k = slot_kind();
  return k == SlotKind::Lambda || k == SlotKind::LambdaOrOmega;
}

bool GrammarCursor::in_constraint_section() const {
  switch (pos_) {
    case Pos::ConstrSection:
    case Pos::ConstrFirst:
    case Pos::ConstrTypeSlot:
    case Pos::ConstrBody:
    case Pos::ConstrBoundary:
    case Pos::Done: return true;
    default: return false;
  }
}

SyntaxCheck validate_syntax(const std::vector<int>& q, const VocabLayout& v) {
  GrammarCursor cur(v);
  for (size_t i = 0; i < q.size(); ++i) {
    if (!cur.advance(q[i])) return {false, (int)i};
  }
  if (!cur.complete()) return {false, (int)q.size()};
  return {true, -1};
}

std::vector<int> legal_next(const std::vector<int>& prefix,
                            const VocabLayout& v) {
  GrammarCursor cur(v);
  for (int t : prefix) {
    if (!cur.advance(t)) return {};
  }
  return cur.legal_next();
}

TokenSequence derive_side_sequences(const std::vector<int>& q,
                                    const VocabLayout& v) {
  GrammarCursor cur(v);
  TokenSequence seq;
  seq.q = q;
  seq.q3.reserve(q.size());
  seq.q4.reserve(q.size());
  for (size_t i = 0; i < q.size(); ++i) {
    if (!cur.accepts(q[i])) {
      throw std::invalid_argument("token " + std::to_string(q[i]) +
                                  " illegal at position " + std::to_string(i));
    }
    auto [q3, q4] = cur.side_of(q[i]);
    seq.q3.push_back(q3);
    seq.q4.push_back(q4);
    bool was_prim_section = !cur.in_constraint_section();
    cur.advance(q[i]);
    if (was_prim_section && cur.in_constraint_section()) seq.n_p = (int)i + 1;
  }
  if (!cur.complete()) {
    throw std::invalid_argument("token sequence ends mid-derivation");
  }
  return seq;
}

TokenSequence parse_sketch(const Sketch& s, const CodebookSet& cb,
                           const VocabLayout& v) {
  if ((int)s.primitives.size() > v.max_refs) {
    throw std::invalid_argument("sketch has " +
                                std::to_string(s.primitives.size()) +
                                " primitives; layout addresses " +
                                std::to_string(v.max_refs));
  }
  if (s.primitives.empty()) {
    throw std::invalid_argument("cannot linearize an empty sketch");
  }
  std::vector<int> q;
  for (const Primitive& p : s.primitives) {
    if ((int)p.params.size() != param_count(p.kind)) {
      throw std::invalid_argument("primitive with wrong parameter count");
    }
    q.push_back(VocabLayout::kLambda);
    q.push_back(v.prim_token(p.kind));
    q.push_back(v.construction_token(p.construction));
    std::vector<ParamType> types = param_types_of(p.kind);
    for (size_t i = 0; i < types.size(); ++i) {
      q.push_back(v.value_token(types[i], cb.of(types[i]).encode(p.params[i])));
    }
  }
  q.push_back(VocabLayout::kOmega);

  std::vector<int> order(s.constraints.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&s](int a, int b) {
    return (int)s.constraints[a].kind < (int)s.constraints[b].kind;
  });

  q.push_back(VocabLayout::kLambda);
  bool first = true;
  for (int ci : order) {
    const Constraint& c = s.constraints[ci];
    if (c.targets.size() != 2) {
      throw std::invalid_argument("constraint with wrong target count");
    }
    if (!first) q.push_back(VocabLayout::kLambda);
    first = false;
    q.push_back(v.constr_token(c.kind));
    int subs = subref_slots(c.kind);
    for (int ti = 0; ti < 2; ++ti) {
      int prim = c.targets[ti].prim;
      if (prim < 0 || prim >= (int)s.primitives.size()) {
        throw std::invalid_argument("constraint references primitive " +
                                    std::to_string(prim));
      }
      q.push_back(v.pointer_token(prim));
      if (ti < subs) q.push_back(v.subref_token(c.targets[ti].sub));
    }
  }
  q.push_back(VocabLayout::kOmega);
  return derive_side_sequences(q, v);
}

Sketch interpret(const std::vector<int>& q, const CodebookSet& cb,
                 const VocabLayout& v) {
  GrammarCursor cur(v);
  Sketch out;
  for (size_t i = 0; i < q.size(); ++i) {
    int t = q[i];
    SlotKind slot = cur.slot_kind();
    if (!cur.accepts(t)) {
      if ((slot == SlotKind::Ref) && t >= 0 && t < v.size() &&
          v.role(t) == TokenRole::Pointer) {
        throw InterpretError(
            InterpretError::Kind::DanglingRef, (int)i,
            "position " + std::to_string(i) + ": reference to primitive " +
                std::to_string(v.pointer_of(t)) + " but only " +
                std::to_string(cur.primitive_count()) + " exist");
      }
      throw InterpretError(InterpretError::Kind::Syntax, (int)i,
                           "position " + std::to_string(i) + ": token " +
                               std::to_string(t) + " violates the grammar");
    }
    switch (slot) {
      case SlotKind::PrimType:
        out.primitives.push_back({v.prim_of(t), false, {}});
        break;
      case SlotKind::Construction:
        out.primitives.back().construction = v.construction_of(t);
        break;
      case SlotKind::Value: {
        ParamType pt = cur.slot_param();
        out.primitives.back().params.push_back(cb.of(pt).decode(v.bin_of(t, pt)));
        break;
      }
      case SlotKind::ConstrType:
      case SlotKind::ConstrTypeOrOmega:
        if (t != VocabLayout::kOmega) {
          out.constraints.push_back({v.constr_of(t), {}});
        }
        break;
      case SlotKind::Ref:
        out.constraints.back().targets.push_back(
            {v.pointer_of(t), SubRef::Whole});
        break;
      case SlotKind::Sub:
        out.constraints.back().targets.back().sub = v.subref_of(t);
        break;
      default: break;
    }
    cur.advance(t);
  }
  if (!cur.complete()) {
    throw InterpretError(InterpretError::Kind::Truncated, (int)q.size(),
                         "sequence ends mid-derivation");
  }
  return out;
}

}  // namespace sketchlang
