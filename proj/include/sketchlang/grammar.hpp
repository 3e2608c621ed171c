#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "sketchlang/vocab.hpp"

namespace sketchlang {

// What a grammar position expects next.
enum class SlotKind { Lambda, LambdaOrOmega, PrimType, ConstrTypeOrOmega,
                      ConstrType, Construction, Value, Ref, Sub, End };

// Incremental state machine over the token language. Feeding a legal token
// advances the state; the class also reports the legal-token set and the
// side-channel values a candidate token would carry at the current position.
// Pointer legality includes the range check: a reference may only name a
// primitive that already appeared.
class GrammarCursor {
 public:
  explicit GrammarCursor(const VocabLayout& layout);

  void reset();
  // false (state unchanged) if the token is illegal here
  bool advance(int token);
  bool accepts(int token) const;
  std::vector<int> legal_next() const;

  // (q3, q4) the candidate token would get at this position; token must be
  // legal here
  std::pair<int, int> side_of(int token) const;

  SlotKind slot_kind() const;
  ParamType slot_param() const;  // valid when slot_kind() == Value
  bool complete() const { return pos_ == Pos::Done; }
  // positions whose legal set is within {lambda, omega}
  bool at_boundary() const;
  bool in_constraint_section() const;
  int primitive_count() const { return prim_count_; }
  const VocabLayout& layout() const { return *layout_; }

 private:
  enum class Pos {
    SeqStart,       // expect the opening lambda of the primitive section
    PrimTypeSlot,   // expect tau
    PrimBody,
    PrimBoundary,   // expect lambda (next primitive) or omega (close section)
    ConstrSection,  // expect the opening lambda of the constraint section
    ConstrFirst,    // expect nu or omega (empty constraint section)
    ConstrTypeSlot, // expect nu
    ConstrBody,
    ConstrBoundary, // expect lambda (next constraint) or omega (finish)
    Done,
  };

  const VocabLayout* layout_;
  Pos pos_ = Pos::SeqStart;
  int prim_count_ = 0;
  PrimKind body_prim_ = PrimKind::Point;
  ConstrKind body_constr_ = ConstrKind::Coincident;
  int slot_ = 0;  // index into the active body's slot list
};

// Structural slot lists of the two body families (without the leading
// tau/nu). Primitive slots are construction flag + parameter family per
// parameter; constraint slots are ref/sub shapes.
struct BodySlot {
  SlotKind kind;
  ParamType param;  // for Value slots
};
const std::vector<BodySlot>& prim_body_slots(PrimKind k);
const std::vector<BodySlot>& constr_body_slots(ConstrKind k);

struct SyntaxCheck {
  bool ok = false;
  // index of the first offending token; size() when the sequence is merely
  // incomplete
  int first_error = -1;
};
SyntaxCheck validate_syntax(const std::vector<int>& q, const VocabLayout& v);

// Legal continuations of a valid prefix (empty if the prefix itself is bad).
std::vector<int> legal_next(const std::vector<int>& prefix,
                            const VocabLayout& v);

// Recompute q3/q4/n_p of a syntactically valid token string.
TokenSequence derive_side_sequences(const std::vector<int>& q,
                                    const VocabLayout& v);

// Sketch -> tokens. Constraints are linearized in canonical order (kind rank,
// then original position). Throws std::invalid_argument on sketches the
// language cannot express (too many primitives, dangling references, ...).
TokenSequence parse_sketch(const Sketch& s, const CodebookSet& cb,
                           const VocabLayout& v);

struct InterpretError : std::runtime_error {
  enum class Kind { Syntax, Truncated, DanglingRef };
  InterpretError(Kind k, int pos, const std::string& msg)
      : std::runtime_error(msg), kind(k), position(pos) {}
  Kind kind;
  int position;
};

// Tokens -> sketch. Throws InterpretError on malformed input; semantic
// checks beyond the grammar (sub-reference legality etc.) are validate()'s
// job. Decoded values stay at their bin centers (directions included), so
// re-encoding is bin-exact.
Sketch interpret(const std::vector<int>& q, const CodebookSet& cb,
                 const VocabLayout& v);

}  // namespace sketchlang
