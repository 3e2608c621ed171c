#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sketchlang/types.hpp"

namespace sketchlang {

// The solver works on minimal per-primitive charts:
//   point  (x, y)                     2 vars
//   line   (sx, sy, ex, ey)           4 vars, two endpoints
//   circle (cx, cy, r)                3 vars
//   arc    (cx, cy, r, alpha, beta)   5 vars, absolute endpoint angles
// Everything else (interval placement along a line, reference direction,
// winding) is gauge: unpack() reconstructs it so that an untouched chart
// reproduces the original primitive.
//
// Residual forms (one row unless noted):
//   coincident   anchor1 - anchor2                       (2 rows)
//   horizontal   dy of the two anchors; for the whole-line form (both
//                targets the same line, subs Whole) the unit direction's
//                y component
//   vertical     mirror of horizontal
//   parallel     cross(d1, d2) of unit directions
//   perpendicular dot(d1, d2) of unit directions
//   midpoint     anchor1 - line2 midpoint                (2 rows)
//   equal        length difference (lines) / radius difference (round)
//   tangent      line-round: sigma * signed_dist(center, line) - r
//                round-round: |c1-c2| - (s1*r1 + s2*r2)
//                sign choices are frozen from the input geometry
class ResidualSystem {
 public:
  ResidualSystem(const Sketch& sketch,
                 const std::vector<Constraint>& constraints);

  int num_vars() const { return num_vars_; }
  int num_residuals() const { return num_residuals_; }
  int var_offset(int prim) const { return offsets_[prim]; }

  Eigen::VectorXd pack(const Sketch& s) const;
  Sketch unpack(const Eigen::VectorXd& x) const;
  void eval(const Eigen::VectorXd& x, Eigen::VectorXd& r,
            Eigen::MatrixXd* J) const;

  struct BlockInfo {
    int constraint;  // index into the constraint list
    int row;
    int dim;
  };
  const std::vector<BlockInfo>& blocks() const { return blocks_; }

 private:
  struct TangentSigns {
    double s1 = 1, s2 = 1;
  };
  const Sketch base_;
  std::vector<Constraint> constraints_;
  std::vector<int> offsets_;
  std::vector<BlockInfo> blocks_;
  std::vector<TangentSigns> signs_;  // per constraint, tangent rows only
  int num_vars_ = 0;
  int num_residuals_ = 0;
};

struct SolveOptions {
  // The anchor pulls every chart var toward its start value. It starts at
  // anchor_weight and decays by anchor_decay whenever LM stalls at the
  // anchored optimum without meeting residual_tol, down to anchor_floor;
  // feasible systems thus reach the constraint manifold while the anchor
  // still selects the solution nearest the input. Setting
  // anchor_floor = anchor_weight pins the weight (no continuation).
  double anchor_weight = 1e-3;
  double anchor_floor = 1e-12;
  double anchor_decay = 1e-3;
  int max_iterations = 500;
  double residual_tol = 1e-8;   // on the max absolute constraint residual
  double satisfied_tol = 1e-6;  // per-constraint satisfied/violated flag
  std::vector<int> frozen;      // primitives held fixed during solving
};

struct ConstraintResidual {
  int index = 0;
  ConstrKind kind = ConstrKind::Coincident;
  double before = 0;  // max |row| of this constraint
  double after = 0;
  bool satisfied = false;  // after <= satisfied_tol
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double max_residual_before = 0;
  double max_residual_after = 0;
  double residual_norm_after = 0;
  std::vector<ConstraintResidual> per_constraint;
};

struct SolveResult {
  Sketch sketch;
  SolveReport report;
};

// Levenberg-Marquardt on the residual system plus an anchor term
// sqrt(w) * (x - x0) that keeps under-constrained directions in place.
SolveResult solve(const Sketch& s, const std::vector<Constraint>& constraints,
                  const SolveOptions& opts = {});
SolveResult solve(const Sketch& s, const SolveOptions& opts = {});

// Remaining freedom: sum of intrinsic DoF minus the constraint Jacobian's
// rank at the current geometry (singular values above 1e-8 * sigma_max).
int degrees_of_freedom(const Sketch& s);

// Residual rows of a single constraint at the sketch's current geometry.
Eigen::VectorXd constraint_residual(const Sketch& s, const Constraint& c);

}  // namespace sketchlang
