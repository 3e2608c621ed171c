#include "sketchlang/solver.hpp"

#include <cmath>
#include <stdexcept>

namespace sketchlang {

namespace {

int chart_dim(PrimKind k) {
  switch (k) {
    case PrimKind::Point: return 2;
    case PrimKind::Line: return 4;
    case PrimKind::Circle: return 3;
    case PrimKind::Arc: return 5;
  }
  return 0;
}

int residual_dim(ConstrKind k) {
  switch (k) {
    case ConstrKind::Coincident:
    case ConstrKind::Midpoint: return 2;
    default: return 1;
  }
}

// anchor point of (primitive chart, subref) with partials wrt chart vars
struct Anchor {
  Vec2 p;
  Eigen::Matrix<double, 2, 5> J;  // first chart_dim columns are meaningful
};

Anchor anchor_at(PrimKind k, const double* v, SubRef s) {
  Anchor a;
  a.J.setZero();
  switch (k) {
    case PrimKind::Point:
      a.p = {v[0], v[1]};
      a.J(0, 0) = a.J(1, 1) = 1;
      break;
    case PrimKind::Line: {
      Vec2 sp{v[0], v[1]}, ep{v[2], v[3]};
      if (s == SubRef::Start) {
        a.p = sp;
        a.J(0, 0) = a.J(1, 1) = 1;
      } else if (s == SubRef::End) {
        a.p = ep;
        a.J(0, 2) = a.J(1, 3) = 1;
      } else {  // Whole (and, defensively, Center): midpoint
        a.p = 0.5 * (sp + ep);
        a.J(0, 0) = a.J(1, 1) = a.J(0, 2) = a.J(1, 3) = 0.5;
      }
      break;
    }
    case PrimKind::Circle:
      a.p = {v[0], v[1]};
      a.J(0, 0) = a.J(1, 1) = 1;
      break;
    case PrimKind::Arc: {
      if (s == SubRef::Start || s == SubRef::End) {
        int acol = s == SubRef::Start ? 3 : 4;
        double ang = v[acol], r = v[2];
        double c = std::cos(ang), sn = std::sin(ang);
        a.p = Vec2{v[0], v[1]} + r * Vec2{c, sn};
        a.J(0, 0) = a.J(1, 1) = 1;
        a.J(0, 2) = c;
        a.J(1, 2) = sn;
        a.J(0, acol) = -r * sn;
        a.J(1, acol) = r * c;
      } else {  // Center / Whole
        a.p = {v[0], v[1]};
        a.J(0, 0) = a.J(1, 1) = 1;
      }
      break;
    }
  }
  return a;
}

// unit direction and length of a line chart with partials
struct LineGeom {
  Vec2 d;
  double len;
  Eigen::Matrix<double, 2, 4> dJ;
  Eigen::Matrix<double, 1, 4> lenJ;
};

LineGeom line_geom(const double* v) {
  LineGeom g;
  Vec2 sp{v[0], v[1]}, ep{v[2], v[3]};
  Vec2 diff = ep - sp;
  g.len = diff.norm();
  double safe = std::max(g.len, 1e-12);
  g.d = g.len > 1e-12 ? Vec2(diff / g.len) : Vec2{1, 0};
  Eigen::Matrix2d P =
      (Eigen::Matrix2d::Identity() - g.d * g.d.transpose()) / safe;
  g.dJ.block<2, 2>(0, 0) = -P;
  g.dJ.block<2, 2>(0, 2) = P;
  g.lenJ << -g.d.x(), -g.d.y(), g.d.x(), g.d.y();
  return g;
}

}  // namespace

ResidualSystem::ResidualSystem(const Sketch& sketch,
                               const std::vector<Constraint>& constraints)
    : base_(sketch), constraints_(constraints) {
  offsets_.reserve(sketch.primitives.size());
  for (const Primitive& p : sketch.primitives) {
    offsets_.push_back(num_vars_);
    num_vars_ += chart_dim(p.kind);
  }
  signs_.resize(constraints_.size());
  Eigen::VectorXd x0 = pack(sketch);
  for (size_t ci = 0; ci < constraints_.size(); ++ci) {
    const Constraint& c = constraints_[ci];
    if (c.targets.size() != 2) {
      throw std::invalid_argument("constraint with wrong target count");
    }
    for (const ConstraintTarget& t : c.targets) {
      if (t.prim < 0 || t.prim >= (int)sketch.primitives.size()) {
        throw std::invalid_argument("constraint references missing primitive");
      }
    }
    blocks_.push_back({(int)ci, num_residuals_, residual_dim(c.kind)});
    num_residuals_ += residual_dim(c.kind);

    // freeze tangent sign conventions from the input geometry
    if (c.kind == ConstrKind::Tangent) {
      int i0 = c.targets[0].prim, i1 = c.targets[1].prim;
      PrimKind k0 = sketch.primitives[i0].kind;
      PrimKind k1 = sketch.primitives[i1].kind;
      bool line_first = k0 == PrimKind::Line;
      if (k0 == PrimKind::Line || k1 == PrimKind::Line) {
        int li = line_first ? i0 : i1;
        int ri = line_first ? i1 : i0;
        LineGeom g = line_geom(x0.data() + offsets_[li]);
        const double* rv = x0.data() + offsets_[ri];
        Vec2 w = Vec2{rv[0], rv[1]} - Vec2{x0[offsets_[li]], x0[offsets_[li] + 1]};
        double cr = g.d.x() * w.y() - g.d.y() * w.x();
        signs_[ci].s1 = cr >= 0 ? 1 : -1;
      } else {
        const double* a = x0.data() + offsets_[i0];
        const double* b = x0.data() + offsets_[i1];
        double dist = (Vec2{a[0], a[1]} - Vec2{b[0], b[1]}).norm();
        double r0 = a[2], r1 = b[2];
        double best = -1;
        const double cand[3][2] = {{1, 1}, {1, -1}, {-1, 1}};
        for (const double* sc : cand) {
          double res = std::abs(dist - (sc[0] * r0 + sc[1] * r1));
          if (best < 0 || res < best) {
            best = res;
            signs_[ci] = {sc[0], sc[1]};
          }
        }
      }
    }
  }
}

Eigen::VectorXd ResidualSystem::pack(const Sketch& s) const {
  Eigen::VectorXd x(num_vars_);
  for (size_t i = 0; i < s.primitives.size(); ++i) {
    const Primitive& p = s.primitives[i];
    double* v = x.data() + offsets_[i];
    switch (p.kind) {
      case PrimKind::Point:
        v[0] = p.params[0];
        v[1] = p.params[1];
        break;
      case PrimKind::Line: {
        Vec2 sp = start_point(p), ep = end_point(p);
        v[0] = sp.x();
        v[1] = sp.y();
        v[2] = ep.x();
        v[3] = ep.y();
        break;
      }
      case PrimKind::Circle:
        v[0] = p.params[0];
        v[1] = p.params[1];
        v[2] = radius(p);
        break;
      case PrimKind::Arc: {
        double theta0 = std::atan2(p.params[3], p.params[2]);
        double w = winding(p);
        v[0] = p.params[0];
        v[1] = p.params[1];
        v[2] = radius(p);
        v[3] = theta0 + w * range_a(p);
        v[4] = theta0 + w * range_b(p);
        break;
      }
    }
  }
  return x;
}

Sketch ResidualSystem::unpack(const Eigen::VectorXd& x) const {
  Sketch out = base_;
  for (size_t i = 0; i < out.primitives.size(); ++i) {
    Primitive& p = out.primitives[i];
    const double* v = x.data() + offsets_[i];
    switch (p.kind) {
      case PrimKind::Point:
        p.params[0] = v[0];
        p.params[1] = v[1];
        break;
      case PrimKind::Line: {
        Vec2 sp{v[0], v[1]}, ep{v[2], v[3]};
        double len = (ep - sp).norm();
        double len0 = range_b(p) - range_a(p);
        if (len < 1e-12) {
          // collapsed line: keep the old carrier direction
          p.params[0] = sp.x();
          p.params[1] = sp.y();
          p.params[4] = 0;
          p.params[5] = 0;
          break;
        }
        Vec2 d = (ep - sp) / len;
        double scale = len / len0;
        double a = range_a(p) * scale;
        Vec2 carrier = sp - a * d;
        p.params = {carrier.x(), carrier.y(), d.x(), d.y(), a, a + len};
        break;
      }
      case PrimKind::Circle:
        p.params[0] = v[0];
        p.params[1] = v[1];
        p.params[4] = v[2];
        break;
      case PrimKind::Arc: {
        double w = winding(p);
        double a0 = range_a(p);
        double theta0 = v[3] - w * a0;
        p.params[0] = v[0];
        p.params[1] = v[1];
        p.params[2] = std::cos(theta0);
        p.params[3] = std::sin(theta0);
        p.params[4] = v[2];
        p.params[6] = a0;
        p.params[7] = a0 + w * (v[4] - v[3]);
        break;
      }
    }
  }
  return out;
}

void ResidualSystem::eval(const Eigen::VectorXd& x, Eigen::VectorXd& r,
                          Eigen::MatrixXd* J) const {
  r.resize(num_residuals_);
  if (J) {
    J->resize(num_residuals_, num_vars_);
    J->setZero();
  }
  auto add_row = [&](int row, int prim, const Eigen::RowVectorXd& localJ) {
    if (!J) return;
    int dim = chart_dim(base_.primitives[prim].kind);
    J->block(row, offsets_[prim], 1, dim) += localJ.head(dim);
  };
  auto add_anchor = [&](int row, int prim, const Anchor& a, double sign) {
    if (!J) return;
    int dim = chart_dim(base_.primitives[prim].kind);
    J->block(row, offsets_[prim], 2, dim) += sign * a.J.leftCols(dim);
  };

  for (size_t bi = 0; bi < blocks_.size(); ++bi) {
    const BlockInfo& blk = blocks_[bi];
    const Constraint& c = constraints_[blk.constraint];
    int row = blk.row;
    int i0 = c.targets[0].prim, i1 = c.targets[1].prim;
    PrimKind k0 = base_.primitives[i0].kind;
    PrimKind k1 = base_.primitives[i1].kind;
    const double* v0 = x.data() + offsets_[i0];
    const double* v1 = x.data() + offsets_[i1];

    switch (c.kind) {
      case ConstrKind::Coincident: {
        Anchor a0 = anchor_at(k0, v0, c.targets[0].sub);
        Anchor a1 = anchor_at(k1, v1, c.targets[1].sub);
        r.segment<2>(row) = a0.p - a1.p;
        add_anchor(row, i0, a0, 1);
        add_anchor(row, i1, a1, -1);
        break;
      }
      case ConstrKind::Horizontal:
      case ConstrKind::Vertical: {
        int axis = c.kind == ConstrKind::Horizontal ? 1 : 0;  // y-diff / x-diff
        bool whole_line = i0 == i1 && k0 == PrimKind::Line &&
                          c.targets[0].sub == SubRef::Whole &&
                          c.targets[1].sub == SubRef::Whole;
        if (whole_line) {
          LineGeom g = line_geom(v0);
          r(row) = g.d(axis);
          Eigen::RowVectorXd localJ(5);
          localJ.setZero();
          localJ.head(4) = g.dJ.row(axis);
          add_row(row, i0, localJ);
        } else {
          Anchor a0 = anchor_at(k0, v0, c.targets[0].sub);
          Anchor a1 = anchor_at(k1, v1, c.targets[1].sub);
          r(row) = a0.p(axis) - a1.p(axis);
          Eigen::RowVectorXd localJ(5);
          localJ = a0.J.row(axis);
          add_row(row, i0, localJ);
          localJ = -a1.J.row(axis);
          add_row(row, i1, localJ);
        }
        break;
      }
      case ConstrKind::Parallel:
      case ConstrKind::Perpendicular: {
        LineGeom g0 = line_geom(v0);
        LineGeom g1 = line_geom(v1);
        Eigen::RowVectorXd j0(5), j1(5);
        j0.setZero();
        j1.setZero();
        if (c.kind == ConstrKind::Parallel) {
          r(row) = g0.d.x() * g1.d.y() - g0.d.y() * g1.d.x();
          j0.head(4) = g1.d.y() * g0.dJ.row(0) - g1.d.x() * g0.dJ.row(1);
          j1.head(4) = -g0.d.y() * g1.dJ.row(0) + g0.d.x() * g1.dJ.row(1);
        } else {
          r(row) = g0.d.dot(g1.d);
          j0.head(4) = g1.d.x() * g0.dJ.row(0) + g1.d.y() * g0.dJ.row(1);
          j1.head(4) = g0.d.x() * g1.dJ.row(0) + g0.d.y() * g1.dJ.row(1);
        }
        add_row(row, i0, j0);
        add_row(row, i1, j1);
        break;
      }
      case ConstrKind::Midpoint: {
        Anchor a0 = anchor_at(k0, v0, c.targets[0].sub);
        Anchor a1 = anchor_at(k1, v1, SubRef::Whole);  // line midpoint
        r.segment<2>(row) = a0.p - a1.p;
        add_anchor(row, i0, a0, 1);
        add_anchor(row, i1, a1, -1);
        break;
      }
      case ConstrKind::Equal: {
        if (k0 == PrimKind::Line) {
          LineGeom g0 = line_geom(v0);
          LineGeom g1 = line_geom(v1);
          r(row) = g0.len - g1.len;
          Eigen::RowVectorXd j(5);
          j.setZero();
          j.head(4) = g0.lenJ;
          add_row(row, i0, j);
          j.setZero();
          j.head(4) = -g1.lenJ;
          add_row(row, i1, j);
        } else {
          r(row) = v0[2] - v1[2];
          Eigen::RowVectorXd j = Eigen::RowVectorXd::Zero(5);
          j(2) = 1;
          add_row(row, i0, j);
          j(2) = -1;
          add_row(row, i1, j);
        }
        break;
      }
      case ConstrKind::Tangent: {
        const TangentSigns& sg = signs_[blk.constraint];
        if (k0 == PrimKind::Line || k1 == PrimKind::Line) {
          bool line_first = k0 == PrimKind::Line;
          int li = line_first ? i0 : i1;
          int ri = line_first ? i1 : i0;
          const double* lv = x.data() + offsets_[li];
          const double* rv = x.data() + offsets_[ri];
          LineGeom g = line_geom(lv);
          Vec2 cc{rv[0], rv[1]};
          Vec2 w = cc - Vec2{lv[0], lv[1]};
          double cr = g.d.x() * w.y() - g.d.y() * w.x();
          r(row) = sg.s1 * cr - rv[2];
          Eigen::RowVectorXd jl(5), jr(5);
          jl.setZero();
          jr.setZero();
          jl.head(4) = sg.s1 * (w.y() * g.dJ.row(0) - w.x() * g.dJ.row(1));
          // w depends on the line start
          jl(0) += sg.s1 * g.d.y();
          jl(1) += -sg.s1 * g.d.x();
          jr(0) = -sg.s1 * g.d.y();
          jr(1) = sg.s1 * g.d.x();
          jr(2) = -1;
          add_row(row, li, jl);
          add_row(row, ri, jr);
        } else {
          Vec2 c0{v0[0], v0[1]}, c1{v1[0], v1[1]};
          Vec2 diff = c0 - c1;
          double dist = diff.norm();
          Vec2 u = dist > 1e-12 ? Vec2(diff / dist) : Vec2{1, 0};
          r(row) = dist - (sg.s1 * v0[2] + sg.s2 * v1[2]);
          Eigen::RowVectorXd j(5);
          j.setZero();
          j(0) = u.x();
          j(1) = u.y();
          j(2) = -sg.s1;
          add_row(row, i0, j);
          j(0) = -u.x();
          j(1) = -u.y();
          j(2) = -sg.s2;
          add_row(row, i1, j);
        }
        break;
      }
    }
  }
}

namespace {

double max_abs(const Eigen::VectorXd& r) {
  return r.size() == 0 ? 0.0 : r.cwiseAbs().maxCoeff();
}

std::vector<ConstraintResidual> per_constraint_report(
    const ResidualSystem& sys, const std::vector<Constraint>& cs,
    const Eigen::VectorXd& before, const Eigen::VectorXd& after,
    double satisfied_tol) {
  std::vector<ConstraintResidual> out;
  for (const ResidualSystem::BlockInfo& b : sys.blocks()) {
    ConstraintResidual cr;
    cr.index = b.constraint;
    cr.kind = cs[b.constraint].kind;
    cr.before = max_abs(before.segment(b.row, b.dim));
    cr.after = max_abs(after.segment(b.row, b.dim));
    cr.satisfied = cr.after <= satisfied_tol;
    out.push_back(cr);
  }
  return out;
}

}  // namespace

SolveResult solve(const Sketch& s, const std::vector<Constraint>& constraints,
                  const SolveOptions& opts) {
  ResidualSystem sys(s, constraints);
  SolveResult result;
  result.sketch = s;

  Eigen::VectorXd x0 = sys.pack(s);
  Eigen::VectorXd x = x0;
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  sys.eval(x, r, &J);
  result.report.max_residual_before = max_abs(r);

  // chart indices of primitives the solver may move
  std::vector<char> is_frozen(s.primitives.size(), 0);
  for (int p : opts.frozen) {
    if (p >= 0 && p < (int)s.primitives.size()) is_frozen[p] = 1;
  }
  std::vector<int> free_idx;
  free_idx.reserve(sys.num_vars());
  for (size_t p = 0; p < s.primitives.size(); ++p) {
    if (is_frozen[p]) continue;
    int off = sys.var_offset((int)p);
    for (int k = 0; k < chart_dim(s.primitives[p].kind); ++k) {
      free_idx.push_back(off + k);
    }
  }
  const int nf = (int)free_idx.size();

  if (sys.num_residuals() == 0 || nf == 0 ||
      result.report.max_residual_before < opts.residual_tol) {
    result.report.converged =
        result.report.max_residual_before < opts.residual_tol;
    result.report.max_residual_after = result.report.max_residual_before;
    result.report.residual_norm_after = r.norm();
    result.report.per_constraint =
        per_constraint_report(sys, constraints, r, r, opts.satisfied_tol);
    return result;  // geometry untouched
  }

  double w = opts.anchor_weight;
  double mu = 1e-4;
  double nu = 2;
  bool converged = false;
  int iter = 0;

  Eigen::MatrixXd Jf(sys.num_residuals(), nf);
  Eigen::VectorXd xf(nf), x0f(nf);
  for (int k = 0; k < nf; ++k) x0f(k) = x0(free_idx[k]);
  xf = x0f;

  // Decaying the anchor when LM stalls lets feasible systems reach the
  // constraint manifold; the floor keeps gauge directions pinned.
  Eigen::VectorXd r_try;
  for (; iter < opts.max_iterations; ++iter) {
    for (int k = 0; k < nf; ++k) Jf.col(k) = J.col(free_idx[k]);
    Eigen::MatrixXd A = Jf.transpose() * Jf;
    A.diagonal().array() += w + mu;
    Eigen::VectorXd g = Jf.transpose() * r + w * (xf - x0f);
    Eigen::VectorXd delta = A.ldlt().solve(-g);

    bool stalled = false;
    if (!delta.allFinite()) {
      mu *= 10;
      nu = 2;
      continue;
    }
    if (delta.norm() <= 1e-14 * (1.0 + xf.norm())) {
      stalled = true;  // stationary for the current anchor weight
    } else {
      Eigen::VectorXd x_try = x;
      for (int k = 0; k < nf; ++k) x_try(free_idx[k]) = xf(k) + delta(k);
      sys.eval(x_try, r_try, nullptr);
      double cost = r.squaredNorm() + w * (xf - x0f).squaredNorm();
      double cost_try =
          r_try.squaredNorm() + w * (xf + delta - x0f).squaredNorm();
      if (cost_try < cost) {
        xf += delta;
        x = x_try;
        sys.eval(x, r, &J);
        mu = std::max(mu / 3.0, 1e-15);
        nu = 2;
        if (max_abs(r) < opts.residual_tol) {
          converged = true;
          ++iter;
          break;
        }
      } else {
        mu *= nu;
        nu *= 2;
        if (mu > 1e15) stalled = true;
      }
    }
    if (stalled) {
      if (w > opts.anchor_floor) {
        w = std::max(w * opts.anchor_decay, opts.anchor_floor);
        mu = 1e-4;
        nu = 2;
      } else {
        break;
      }
    }
  }

  Eigen::VectorXd r0;
  sys.eval(x0, r0, nullptr);
  result.sketch = sys.unpack(x);
  result.report.converged = converged;
  result.report.iterations = iter;
  result.report.max_residual_after = max_abs(r);
  result.report.residual_norm_after = r.norm();
  result.report.per_constraint =
      per_constraint_report(sys, constraints, r0, r, opts.satisfied_tol);
  return result;
}

SolveResult solve(const Sketch& s, const SolveOptions& opts) {
  return solve(s, s.constraints, opts);
}

int degrees_of_freedom(const Sketch& s) {
  int total = 0;
  for (const Primitive& p : s.primitives) total += intrinsic_dof(p.kind);
  if (s.constraints.empty()) return total;

  ResidualSystem sys(s, s.constraints);
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  sys.eval(sys.pack(s), r, &J);
  if (J.rows() == 0) return total;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
  Eigen::VectorXd sv = svd.singularValues();
  double smax = sv.size() > 0 ? sv(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (smax > 0 && sv(i) > 1e-8 * smax) ++rank;
  }
  return std::max(0, total - rank);
}

Eigen::VectorXd constraint_residual(const Sketch& s, const Constraint& c) {
  ResidualSystem sys(s, {c});
  Eigen::VectorXd r;
  sys.eval(sys.pack(s), r, nullptr);
  return r;
}

}  // namespace sketchlang
