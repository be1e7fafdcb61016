// Copyright 2026 The Epistoch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Columns 0..n-1 are structurals, n..n+m-1 are row activities s_i with
// the full system [A | -I] (x, s) = 0. All arithmetic happens on the
// scaled problem; B^-1 is kept explicitly (row-major) and updated with
// rank-one pivots, rebuilt from the slack basis every refactor_interval
// pivots.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "epistoch/solve.hpp"

namespace epistoch {

std::string lp_status_name(LpStatus s) {
  switch (s) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kIterationLimit: return "iteration-limit";
  }
  return "?";
}

namespace {

enum class VarStatus : unsigned char { kBasic, kLower, kUpper, kFree };

double pow2_round(double v) { return std::ldexp(1.0, static_cast<int>(std::lround(std::log2(v)))); }

}  // namespace

struct SimplexEngine::Impl {
  LpOptions opt;
  int n = 0, m = 0, N = 0;
  double obj_const = 0.0;

  std::vector<int> cstart, cidx;
  std::vector<double> cval;
  std::vector<int> rstart, ridx;
  std::vector<double> rval;
  std::vector<double> colscale, rowscale;

  std::vector<double> lb, ub;    // scaled, real
  std::vector<double> lbw, ubw;  // working bounds, possibly with artificial boxes
  std::vector<char> art;
  std::vector<double> cost;

  std::vector<double> x, d;
  std::vector<VarStatus> st;
  std::vector<int> head, pos;
  std::vector<double> binv;
  std::vector<double> w;

  bool have_basis = false;
  long iters = 0;
  long total_iters = 0;
  int since_refactor = 0;
  double big = 1e7;

  std::vector<double> rho, alpha_col, alpha_row, work;
  std::vector<int> alpha_row_idx, rho_idx;
  std::vector<char> alpha_row_mark;

  Impl(const LinearModel& model, LpOptions o);

  double* brow(int i) { return binv.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(m); }
  double ptol(double bound) const { return opt.primal_tol * (1.0 + (std::isfinite(bound) ? std::abs(bound) : 0.0)); }

  void cold_start();
  void place_nonbasic(int j);
  void compute_xb();
  void compute_duals();
  void refactor();
  void column(int q);
  void row(int r);
  void pivot(int r, int q);
  void ensure_fresh();

  LpStatus dual_simplex();
  LpStatus primal_simplex();
  LpResult run();
  LpResult result(LpStatus status) const;
  bool primal_feasible(bool working) const;
  double max_residual() const;
};

SimplexEngine::Impl::Impl(const LinearModel& model, LpOptions o) : opt(o) {
  n = static_cast<int>(model.num_variables());
  m = static_cast<int>(model.num_constraints());
  N = n + m;
  obj_const = model.objective_constant;

  // Column-wise copy with duplicate entries merged.
  std::vector<std::vector<std::pair<int, double>>> cols(static_cast<std::size_t>(n));
  for (int i = 0; i < m; ++i) {
    for (const auto& t : model.constraints[static_cast<std::size_t>(i)].terms) {
      auto& col = cols[static_cast<std::size_t>(t.var)];
      if (!col.empty() && col.back().first == i) {
        col.back().second += t.coef;
      } else {
        col.emplace_back(i, t.coef);
      }
    }
  }
  cstart.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int j = 0; j < n; ++j) {
    for (const auto& [i, v] : cols[static_cast<std::size_t>(j)]) {
      if (v != 0.0) {
        cidx.push_back(i);
        cval.push_back(v);
      }
    }
    cstart[static_cast<std::size_t>(j) + 1] = static_cast<int>(cidx.size());
  }

  colscale.assign(static_cast<std::size_t>(n), 1.0);
  rowscale.assign(static_cast<std::size_t>(m), 1.0);
  if (opt.scale && !cval.empty()) {
    // Geometric scaling passes, then rounding to powers of two.
    for (int pass = 0; pass < 6; ++pass) {
      std::vector<double> rmin(static_cast<std::size_t>(m), kInf), rmax(static_cast<std::size_t>(m), 0.0);
      for (int j = 0; j < n; ++j) {
        for (int k = cstart[static_cast<std::size_t>(j)]; k < cstart[static_cast<std::size_t>(j) + 1]; ++k) {
          const auto i = static_cast<std::size_t>(cidx[static_cast<std::size_t>(k)]);
          const double a = std::abs(cval[static_cast<std::size_t>(k)]) * colscale[static_cast<std::size_t>(j)];
          rmin[i] = std::min(rmin[i], a);
          rmax[i] = std::max(rmax[i], a);
        }
      }
      for (int i = 0; i < m; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        rowscale[iu] = rmax[iu] > 0.0 ? 1.0 / std::sqrt(rmin[iu] * rmax[iu]) : 1.0;
      }
      for (int j = 0; j < n; ++j) {
        double cmin = kInf, cmax = 0.0;
        for (int k = cstart[static_cast<std::size_t>(j)]; k < cstart[static_cast<std::size_t>(j) + 1]; ++k) {
          const double a = std::abs(cval[static_cast<std::size_t>(k)]) *
                           rowscale[static_cast<std::size_t>(cidx[static_cast<std::size_t>(k)])];
          cmin = std::min(cmin, a);
          cmax = std::max(cmax, a);
        }
        colscale[static_cast<std::size_t>(j)] = cmax > 0.0 ? 1.0 / std::sqrt(cmin * cmax) : 1.0;
      }
    }
    for (auto& s : rowscale) s = pow2_round(s);
    for (auto& s : colscale) s = pow2_round(s);
  }
  for (int j = 0; j < n; ++j) {
    for (int k = cstart[static_cast<std::size_t>(j)]; k < cstart[static_cast<std::size_t>(j) + 1]; ++k) {
      cval[static_cast<std::size_t>(k)] *=
          rowscale[static_cast<std::size_t>(cidx[static_cast<std::size_t>(k)])] * colscale[static_cast<std::size_t>(j)];
    }
  }

  // Row-wise copy.
  rstart.assign(static_cast<std::size_t>(m) + 1, 0);
  for (int i : cidx) ++rstart[static_cast<std::size_t>(i) + 1];
  for (int i = 0; i < m; ++i) rstart[static_cast<std::size_t>(i) + 1] += rstart[static_cast<std::size_t>(i)];
  ridx.resize(cidx.size());
  rval.resize(cval.size());
  {
    std::vector<int> fill(rstart.begin(), rstart.end() - 1);
    for (int j = 0; j < n; ++j) {
      for (int k = cstart[static_cast<std::size_t>(j)]; k < cstart[static_cast<std::size_t>(j) + 1]; ++k) {
        const auto i = static_cast<std::size_t>(cidx[static_cast<std::size_t>(k)]);
        const auto at = static_cast<std::size_t>(fill[i]++);
        ridx[at] = j;
        rval[at] = cval[static_cast<std::size_t>(k)];
      }
    }
  }

  lb.resize(static_cast<std::size_t>(N));
  ub.resize(static_cast<std::size_t>(N));
  cost.assign(static_cast<std::size_t>(N), 0.0);
  for (int j = 0; j < n; ++j) {
    const auto& v = model.variables[static_cast<std::size_t>(j)];
    const double c = colscale[static_cast<std::size_t>(j)];
    lb[static_cast<std::size_t>(j)] = v.lb / c;
    ub[static_cast<std::size_t>(j)] = v.ub / c;
    cost[static_cast<std::size_t>(j)] = v.obj * c;
  }
  for (int i = 0; i < m; ++i) {
    const auto& row_c = model.constraints[static_cast<std::size_t>(i)];
    const double r = rowscale[static_cast<std::size_t>(i)];
    lb[static_cast<std::size_t>(n + i)] = row_c.lower() * r;
    ub[static_cast<std::size_t>(n + i)] = row_c.upper() * r;
  }
  lbw = lb;
  ubw = ub;
  art.assign(static_cast<std::size_t>(N), 0);
  x.assign(static_cast<std::size_t>(N), 0.0);
  d.assign(static_cast<std::size_t>(N), 0.0);
  st.assign(static_cast<std::size_t>(N), VarStatus::kLower);
  head.assign(static_cast<std::size_t>(m), 0);
  pos.assign(static_cast<std::size_t>(N), -1);
  rho.assign(static_cast<std::size_t>(m), 0.0);
  alpha_col.assign(static_cast<std::size_t>(m), 0.0);
  work.assign(static_cast<std::size_t>(m), 0.0);
  alpha_row.assign(static_cast<std::size_t>(N), 0.0);
  alpha_row_mark.assign(static_cast<std::size_t>(N), 0);
}

void SimplexEngine::Impl::cold_start() {
  binv.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0.0);
  std::fill(pos.begin(), pos.end(), -1);
  for (int i = 0; i < m; ++i) {
    head[static_cast<std::size_t>(i)] = n + i;
    pos[static_cast<std::size_t>(n + i)] = i;
    st[static_cast<std::size_t>(n + i)] = VarStatus::kBasic;
    brow(i)[i] = -1.0;
  }
  w.assign(static_cast<std::size_t>(m), 1.0);
  for (int j = 0; j < n; ++j) {
    st[static_cast<std::size_t>(j)] = VarStatus::kLower;
    x[static_cast<std::size_t>(j)] = 0.0;
  }
  compute_duals();
  for (int j = 0; j < n; ++j) place_nonbasic(j);
  compute_xb();
  since_refactor = 0;
  have_basis = true;
}

void SimplexEngine::Impl::place_nonbasic(int j) {
  const auto ju = static_cast<std::size_t>(j);
  const double l = lb[ju], u = ub[ju];
  lbw[ju] = l;
  ubw[ju] = u;
  art[ju] = 0;
  if (l == u) {
    st[ju] = VarStatus::kLower;
    x[ju] = l;
    return;
  }
  const double dj = d[ju];
  const double tol = opt.dual_tol;
  bool want_lower;
  if (dj > tol) {
    want_lower = true;
  } else if (dj < -tol) {
    want_lower = false;
  } else if (st[ju] == VarStatus::kFree) {
    // Keep a superbasic value where it is when still inside the bounds.
    if (x[ju] >= l && x[ju] <= u) return;
    want_lower = std::isfinite(l) && (!std::isfinite(u) || std::abs(x[ju] - l) <= std::abs(x[ju] - u));
  } else {
    want_lower = st[ju] != VarStatus::kUpper;
    if (want_lower && !std::isfinite(l) && std::isfinite(u)) want_lower = false;
    if (!want_lower && !std::isfinite(u) && std::isfinite(l)) want_lower = true;
  }
  const bool zero_cost = std::abs(dj) <= tol;
  if (want_lower) {
    if (std::isfinite(l)) {
      st[ju] = VarStatus::kLower;
      x[ju] = l;
    } else if (zero_cost) {
      st[ju] = VarStatus::kFree;
      x[ju] = std::isfinite(u) ? std::min(0.0, u) : 0.0;
    } else {
      lbw[ju] = -big;
      art[ju] = 1;
      st[ju] = VarStatus::kLower;
      x[ju] = -big;
    }
  } else {
    if (std::isfinite(u)) {
      st[ju] = VarStatus::kUpper;
      x[ju] = u;
    } else if (zero_cost) {
      st[ju] = VarStatus::kFree;
      x[ju] = std::isfinite(l) ? std::max(0.0, l) : 0.0;
    } else {
      ubw[ju] = big;
      art[ju] = 1;
      st[ju] = VarStatus::kUpper;
      x[ju] = big;
    }
  }
}

void SimplexEngine::Impl::compute_xb() {
  std::fill(work.begin(), work.end(), 0.0);
  for (int j = 0; j < N; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (st[ju] == VarStatus::kBasic || x[ju] == 0.0) continue;
    if (j < n) {
      for (int k = cstart[ju]; k < cstart[ju + 1]; ++k) {
        work[static_cast<std::size_t>(cidx[static_cast<std::size_t>(k)])] += cval[static_cast<std::size_t>(k)] * x[ju];
      }
    } else {
      work[static_cast<std::size_t>(j - n)] -= x[ju];
    }
  }
  for (int i = 0; i < m; ++i) {
    const double* b = brow(i);
    double s = 0.0;
    for (int k = 0; k < m; ++k) s += b[k] * work[static_cast<std::size_t>(k)];
    x[static_cast<std::size_t>(head[static_cast<std::size_t>(i)])] = -s;
  }
}

void SimplexEngine::Impl::compute_duals() {
  // y = c_B' B^-1
  std::fill(work.begin(), work.end(), 0.0);
  for (int i = 0; i < m; ++i) {
    const double cb = cost[static_cast<std::size_t>(head[static_cast<std::size_t>(i)])];
    if (cb == 0.0) continue;
    const double* b = brow(i);
    for (int k = 0; k < m; ++k) work[static_cast<std::size_t>(k)] += cb * b[k];
  }
  for (int j = 0; j < N; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (st[ju] == VarStatus::kBasic) {
      d[ju] = 0.0;
    } else if (j < n) {
      double s = cost[ju];
      for (int k = cstart[ju]; k < cstart[ju + 1]; ++k) {
        s -= work[static_cast<std::size_t>(cidx[static_cast<std::size_t>(k)])] * cval[static_cast<std::size_t>(k)];
      }
      d[ju] = s;
    } else {
      d[ju] = work[static_cast<std::size_t>(j - n)];
    }
  }
}

void SimplexEngine::Impl::column(int q) {
  std::fill(alpha_col.begin(), alpha_col.end(), 0.0);
  if (q >= n) {
    const int k = q - n;
    for (int i = 0; i < m; ++i) alpha_col[static_cast<std::size_t>(i)] = -brow(i)[k];
    return;
  }
  const auto qu = static_cast<std::size_t>(q);
  for (int kk = cstart[qu]; kk < cstart[qu + 1]; ++kk) {
    const int k = cidx[static_cast<std::size_t>(kk)];
    const double a = cval[static_cast<std::size_t>(kk)];
    for (int i = 0; i < m; ++i) alpha_col[static_cast<std::size_t>(i)] += brow(i)[k] * a;
  }
}

void SimplexEngine::Impl::row(int r) {
  const double* b = brow(r);
  rho_idx.clear();
  for (int k = 0; k < m; ++k) {
    rho[static_cast<std::size_t>(k)] = b[k];
    if (b[k] != 0.0) rho_idx.push_back(k);
  }
  for (int j : alpha_row_idx) {
    alpha_row[static_cast<std::size_t>(j)] = 0.0;
    alpha_row_mark[static_cast<std::size_t>(j)] = 0;
  }
  alpha_row_idx.clear();
  for (int k : rho_idx) {
    const double rk = rho[static_cast<std::size_t>(k)];
    for (int p = rstart[static_cast<std::size_t>(k)]; p < rstart[static_cast<std::size_t>(k) + 1]; ++p) {
      const int j = ridx[static_cast<std::size_t>(p)];
      if (st[static_cast<std::size_t>(j)] == VarStatus::kBasic) continue;
      if (!alpha_row_mark[static_cast<std::size_t>(j)]) {
        alpha_row_mark[static_cast<std::size_t>(j)] = 1;
        alpha_row_idx.push_back(j);
      }
      alpha_row[static_cast<std::size_t>(j)] += rk * rval[static_cast<std::size_t>(p)];
    }
    const int s = n + k;
    if (st[static_cast<std::size_t>(s)] != VarStatus::kBasic) {
      if (!alpha_row_mark[static_cast<std::size_t>(s)]) {
        alpha_row_mark[static_cast<std::size_t>(s)] = 1;
        alpha_row_idx.push_back(s);
      }
      alpha_row[static_cast<std::size_t>(s)] -= rk;
    }
  }
}

// Pivots column q into row r; alpha_col must hold B^-1 a_q.
void SimplexEngine::Impl::pivot(int r, int q) {
  const double piv = alpha_col[static_cast<std::size_t>(r)];
  double* br = brow(r);
  std::vector<int> nz;
  double norm = 0.0;
  for (int k = 0; k < m; ++k) {
    if (br[k] != 0.0) {
      br[k] /= piv;
      nz.push_back(k);
      norm += br[k] * br[k];
    }
  }
  for (int i = 0; i < m; ++i) {
    if (i == r) continue;
    const double f = alpha_col[static_cast<std::size_t>(i)];
    if (f == 0.0) continue;
    double* bi = brow(i);
    double dot = 0.0;
    for (int k : nz) dot += bi[k] * br[k];
    for (int k : nz) bi[k] -= f * br[k];
    w[static_cast<std::size_t>(i)] = std::max(w[static_cast<std::size_t>(i)] - 2.0 * f * dot + f * f * norm, 1e-12);
  }
  w[static_cast<std::size_t>(r)] = std::max(norm, 1e-12);
  const int leaving = head[static_cast<std::size_t>(r)];
  pos[static_cast<std::size_t>(leaving)] = -1;
  head[static_cast<std::size_t>(r)] = q;
  pos[static_cast<std::size_t>(q)] = r;
  st[static_cast<std::size_t>(q)] = VarStatus::kBasic;
  ++since_refactor;
}

// Rebuilds B^-1 by pivoting the basic structurals into the slack basis.
// Columns that turn out dependent are dropped in favour of slacks.
void SimplexEngine::Impl::refactor() {
  std::vector<int> structurals;
  std::vector<char> keep_slack(static_cast<std::size_t>(m), 0);
  for (int i = 0; i < m; ++i) {
    const int j = head[static_cast<std::size_t>(i)];
    if (j < n) {
      structurals.push_back(j);
    } else {
      keep_slack[static_cast<std::size_t>(j - n)] = 1;
    }
  }
  std::sort(structurals.begin(), structurals.end(), [&](int a, int b) {
    const int la = cstart[static_cast<std::size_t>(a) + 1] - cstart[static_cast<std::size_t>(a)];
    const int lb_ = cstart[static_cast<std::size_t>(b) + 1] - cstart[static_cast<std::size_t>(b)];
    return la != lb_ ? la < lb_ : a < b;
  });
  binv.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0.0);
  for (int k = 0; k < N; ++k) {
    if (st[static_cast<std::size_t>(k)] == VarStatus::kBasic) st[static_cast<std::size_t>(k)] = VarStatus::kLower;
    pos[static_cast<std::size_t>(k)] = -1;
  }
  for (int i = 0; i < m; ++i) {
    head[static_cast<std::size_t>(i)] = n + i;
    pos[static_cast<std::size_t>(n + i)] = i;
    st[static_cast<std::size_t>(n + i)] = VarStatus::kBasic;
    brow(i)[i] = -1.0;
  }
  w.assign(static_cast<std::size_t>(m), 1.0);
  std::vector<char> replaced(static_cast<std::size_t>(m), 0);
  std::vector<int> dropped;
  for (int q : structurals) {
    column(q);
    double best = 0.0, amax = 0.0;
    int r = -1;
    for (int i = 0; i < m; ++i) {
      if (keep_slack[static_cast<std::size_t>(i)] || replaced[static_cast<std::size_t>(i)]) continue;
      amax = std::max(amax, std::abs(alpha_col[static_cast<std::size_t>(i)]));
    }
    for (int i = 0; i < m; ++i) {
      if (keep_slack[static_cast<std::size_t>(i)] || replaced[static_cast<std::size_t>(i)]) continue;
      const double a = std::abs(alpha_col[static_cast<std::size_t>(i)]);
      if (a > best) {
        best = a;
        r = i;
      }
    }
    if (r < 0 || amax < 1e-9) {
      dropped.push_back(q);
      continue;
    }
    replaced[static_cast<std::size_t>(r)] = 1;
    pivot(r, q);
  }
  // Dropped columns leave some slacks basic; they return to a bound.
  for (int q : dropped) {
    st[static_cast<std::size_t>(q)] = VarStatus::kLower;
    place_nonbasic(q);
  }
  for (int k = n; k < N; ++k) {
    if (pos[static_cast<std::size_t>(k)] < 0 && st[static_cast<std::size_t>(k)] == VarStatus::kBasic) {
      st[static_cast<std::size_t>(k)] = VarStatus::kLower;
    }
  }
  // Slacks that were basic before keep their place (they never left);
  // slacks that were nonbasic and got displaced are handled above.
  for (int i = 0; i < m; ++i) {
    const double* b = brow(i);
    double s = 0.0;
    for (int k = 0; k < m; ++k) s += b[k] * b[k];
    w[static_cast<std::size_t>(i)] = std::max(s, 1e-12);
  }
  since_refactor = 0;
}

void SimplexEngine::Impl::ensure_fresh() {
  if (since_refactor < opt.refactor_interval) return;
  // Remember nonbasic statuses of slacks that refactor() would reset.
  std::vector<VarStatus> saved(st.begin() + n, st.end());
  std::vector<char> was_basic(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) was_basic[static_cast<std::size_t>(k)] = saved[static_cast<std::size_t>(k)] == VarStatus::kBasic;
  refactor();
  for (int k = 0; k < m; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    if (pos[static_cast<std::size_t>(n + k)] < 0 && !was_basic[ku]) st[static_cast<std::size_t>(n + k)] = saved[ku];
  }
  compute_xb();
  compute_duals();
}

// Largest |a_i x - s_i| relative to the row's magnitude.
double SimplexEngine::Impl::max_residual() const {
  std::vector<double> act(static_cast<std::size_t>(m), 0.0), mag(static_cast<std::size_t>(m), 1.0);
  for (int j = 0; j < n; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    for (int k = cstart[ju]; k < cstart[ju + 1]; ++k) {
      const auto i = static_cast<std::size_t>(cidx[static_cast<std::size_t>(k)]);
      const double v = cval[static_cast<std::size_t>(k)] * x[ju];
      act[i] += v;
      mag[i] = std::max(mag[i], std::abs(v));
    }
  }
  double worst = 0.0;
  for (int i = 0; i < m; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    worst = std::max(worst, std::abs(act[iu] - x[static_cast<std::size_t>(n + i)]) / mag[iu]);
  }
  return worst;
}

bool SimplexEngine::Impl::primal_feasible(bool working) const {
  const auto& l = working ? lbw : lb;
  const auto& u = working ? ubw : ub;
  for (int i = 0; i < m; ++i) {
    const auto j = static_cast<std::size_t>(head[static_cast<std::size_t>(i)]);
    if (x[j] < l[j] - ptol(l[j]) || x[j] > u[j] + ptol(u[j])) return false;
  }
  return true;
}

LpStatus SimplexEngine::Impl::dual_simplex() {
  int stall = 0;
  bool bland = false;
  std::vector<int> cand;
  while (true) {
    if (iters >= opt.iteration_limit) return LpStatus::kIterationLimit;
    ensure_fresh();

    int r = -1;
    double best = 0.0;
    for (int i = 0; i < m; ++i) {
      const auto j = static_cast<std::size_t>(head[static_cast<std::size_t>(i)]);
      double infeas = 0.0;
      if (x[j] < lbw[j] - ptol(lbw[j])) {
        infeas = lbw[j] - x[j];
      } else if (x[j] > ubw[j] + ptol(ubw[j])) {
        infeas = x[j] - ubw[j];
      } else {
        continue;
      }
      if (bland) {
        if (r < 0 || head[static_cast<std::size_t>(i)] < head[static_cast<std::size_t>(r)]) r = i;
      } else {
        const double score = infeas * infeas / w[static_cast<std::size_t>(i)];
        if (score > best) {
          best = score;
          r = i;
        }
      }
    }
    if (r < 0) return LpStatus::kOptimal;

    const int jr = head[static_cast<std::size_t>(r)];
    const bool to_lower = x[static_cast<std::size_t>(jr)] < lbw[static_cast<std::size_t>(jr)];
    const double s = to_lower ? 1.0 : -1.0;
    row(r);

    // Harris two-pass ratio test.
    cand.clear();
    double theta_max = kInf;
    for (int j : alpha_row_idx) {
      const auto ju = static_cast<std::size_t>(j);
      const double a = alpha_row[ju];
      if (std::abs(a) <= opt.pivot_tol || lbw[ju] == ubw[ju]) continue;
      double deff;
      if (st[ju] == VarStatus::kLower) {
        if (!(s * a < 0.0)) continue;
        deff = std::max(d[ju], 0.0);
      } else if (st[ju] == VarStatus::kUpper) {
        if (!(s * a > 0.0)) continue;
        deff = std::max(-d[ju], 0.0);
      } else {
        deff = std::abs(d[ju]);
      }
      cand.push_back(j);
      if (!bland) theta_max = std::min(theta_max, (deff + opt.dual_tol) / std::abs(a));
    }
    if (cand.empty()) return LpStatus::kInfeasible;

    int q = -1;
    if (bland) {
      double best_ratio = kInf;
      for (int j : cand) {
        const auto ju = static_cast<std::size_t>(j);
        const double ratio = std::abs(d[ju]) / std::abs(alpha_row[ju]);
        if (ratio < best_ratio - 1e-14 || (ratio <= best_ratio + 1e-14 && (q < 0 || j < q))) {
          if (ratio < best_ratio) best_ratio = ratio;
          q = j;
        }
      }
    } else {
      double best_a = 0.0;
      for (int j : cand) {
        const auto ju = static_cast<std::size_t>(j);
        const double a = std::abs(alpha_row[ju]);
        double deff = std::abs(d[ju]);
        if (st[ju] == VarStatus::kLower) deff = std::max(d[ju], 0.0);
        if (st[ju] == VarStatus::kUpper) deff = std::max(-d[ju], 0.0);
        if (deff / a <= theta_max && (a > best_a || (a == best_a && j < q))) {
          best_a = a;
          q = j;
        }
      }
    }
    if (q < 0) return LpStatus::kInfeasible;

    column(q);
    const double arq = alpha_col[static_cast<std::size_t>(r)];
    if (std::abs(arq) <= opt.pivot_tol ||
        std::abs(arq - alpha_row[static_cast<std::size_t>(q)]) > 1e-7 * (1.0 + std::abs(arq))) {
      if (since_refactor == 0) return LpStatus::kInfeasible;
      since_refactor = opt.refactor_interval;
      continue;
    }

    const double theta_d = d[static_cast<std::size_t>(q)] / arq;
    for (int j : alpha_row_idx) d[static_cast<std::size_t>(j)] -= theta_d * alpha_row[static_cast<std::size_t>(j)];
    d[static_cast<std::size_t>(q)] = 0.0;
    d[static_cast<std::size_t>(jr)] = -theta_d;

    const double target = to_lower ? lbw[static_cast<std::size_t>(jr)] : ubw[static_cast<std::size_t>(jr)];
    const double dxq = (x[static_cast<std::size_t>(jr)] - target) / arq;
    x[static_cast<std::size_t>(q)] += dxq;
    for (int i = 0; i < m; ++i) {
      const double a = alpha_col[static_cast<std::size_t>(i)];
      if (a != 0.0) x[static_cast<std::size_t>(head[static_cast<std::size_t>(i)])] -= a * dxq;
    }
    x[static_cast<std::size_t>(jr)] = target;
    pivot(r, q);
    st[static_cast<std::size_t>(jr)] = to_lower ? VarStatus::kLower : VarStatus::kUpper;
    ++iters;

    if (std::abs(theta_d) < 1e-12) {
      if (++stall > 100) bland = true;
    } else {
      stall = 0;
      bland = false;
    }
  }
}

LpStatus SimplexEngine::Impl::primal_simplex() {
  int stall = 0;
  bool bland = false;
  while (true) {
    if (iters >= opt.iteration_limit) return LpStatus::kIterationLimit;
    ensure_fresh();

    int q = -1;
    double dir = 0.0, best = 0.0;
    for (int j = 0; j < N; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (st[ju] == VarStatus::kBasic || lbw[ju] == ubw[ju]) continue;
      const double dj = d[ju];
      double dj_dir = 0.0;
      if (st[ju] == VarStatus::kLower && dj < -opt.dual_tol) {
        dj_dir = 1.0;
      } else if (st[ju] == VarStatus::kUpper && dj > opt.dual_tol) {
        dj_dir = -1.0;
      } else if (st[ju] == VarStatus::kFree && std::abs(dj) > opt.dual_tol) {
        dj_dir = dj < 0.0 ? 1.0 : -1.0;
      } else {
        continue;
      }
      if (bland) {
        q = j;
        dir = dj_dir;
        break;
      }
      if (std::abs(dj) > best) {
        best = std::abs(dj);
        q = j;
        dir = dj_dir;
      }
    }
    if (q < 0) return LpStatus::kOptimal;
    const auto qu = static_cast<std::size_t>(q);

    column(q);
    // Entering moves by dir * t; basic i changes at rate -alpha_i * dir.
    double t_max = kInf;
    for (int i = 0; i < m; ++i) {
      const double delta = -alpha_col[static_cast<std::size_t>(i)] * dir;
      if (std::abs(delta) <= opt.pivot_tol) continue;
      const auto j = static_cast<std::size_t>(head[static_cast<std::size_t>(i)]);
      if (delta < 0.0 && std::isfinite(lbw[j])) {
        t_max = std::min(t_max, (x[j] - lbw[j] + ptol(lbw[j])) / -delta);
      } else if (delta > 0.0 && std::isfinite(ubw[j])) {
        t_max = std::min(t_max, (ubw[j] - x[j] + ptol(ubw[j])) / delta);
      }
    }
    int r = -1;
    double t_row = kInf, best_delta = 0.0;
    bool r_to_lower = true;
    for (int i = 0; i < m; ++i) {
      const double delta = -alpha_col[static_cast<std::size_t>(i)] * dir;
      if (std::abs(delta) <= opt.pivot_tol) continue;
      const auto j = static_cast<std::size_t>(head[static_cast<std::size_t>(i)]);
      double ratio;
      bool lower;
      if (delta < 0.0 && std::isfinite(lbw[j])) {
        ratio = (x[j] - lbw[j]) / -delta;
        lower = true;
      } else if (delta > 0.0 && std::isfinite(ubw[j])) {
        ratio = (ubw[j] - x[j]) / delta;
        lower = false;
      } else {
        continue;
      }
      ratio = std::max(ratio, 0.0);
      if (bland) {
        if (ratio < t_row - 1e-14 || (ratio <= t_row + 1e-14 && r >= 0 &&
                                      head[static_cast<std::size_t>(i)] < head[static_cast<std::size_t>(r)])) {
          t_row = std::min(t_row, ratio);
          r = i;
          r_to_lower = lower;
        }
      } else if (ratio <= t_max && std::abs(delta) > best_delta) {
        best_delta = std::abs(delta);
        t_row = ratio;
        r = i;
        r_to_lower = lower;
      }
    }
    double t_flip = kInf;
    if (dir > 0.0 && std::isfinite(ubw[qu])) t_flip = ubw[qu] - x[qu];
    if (dir < 0.0 && std::isfinite(lbw[qu])) t_flip = x[qu] - lbw[qu];
    t_flip = std::max(t_flip, 0.0);

    if (r < 0 && !std::isfinite(t_flip)) return LpStatus::kUnbounded;

    if (t_flip <= t_row) {
      const double step = dir * t_flip;
      x[qu] = dir > 0.0 ? ubw[qu] : lbw[qu];
      for (int i = 0; i < m; ++i) {
        const double a = alpha_col[static_cast<std::size_t>(i)];
        if (a != 0.0) x[static_cast<std::size_t>(head[static_cast<std::size_t>(i)])] -= a * step;
      }
      st[qu] = dir > 0.0 ? VarStatus::kUpper : VarStatus::kLower;
      ++iters;
      stall = t_flip < 1e-12 ? stall + 1 : 0;
      continue;
    }

    const int jr = head[static_cast<std::size_t>(r)];
    const double step = dir * t_row;
    x[qu] += step;
    for (int i = 0; i < m; ++i) {
      const double a = alpha_col[static_cast<std::size_t>(i)];
      if (a != 0.0) x[static_cast<std::size_t>(head[static_cast<std::size_t>(i)])] -= a * step;
    }
    x[static_cast<std::size_t>(jr)] = r_to_lower ? lbw[static_cast<std::size_t>(jr)] : ubw[static_cast<std::size_t>(jr)];

    row(r);
    const double arq = alpha_col[static_cast<std::size_t>(r)];
    const double theta_d = d[qu] / arq;
    for (int j : alpha_row_idx) d[static_cast<std::size_t>(j)] -= theta_d * alpha_row[static_cast<std::size_t>(j)];
    d[qu] = 0.0;
    d[static_cast<std::size_t>(jr)] = -theta_d;
    pivot(r, q);
    st[static_cast<std::size_t>(jr)] = r_to_lower ? VarStatus::kLower : VarStatus::kUpper;
    if (lbw[static_cast<std::size_t>(jr)] == ubw[static_cast<std::size_t>(jr)]) {
      st[static_cast<std::size_t>(jr)] = VarStatus::kLower;
    }
    ++iters;

    if (t_row < 1e-12) {
      if (++stall > 100) bland = true;
    } else {
      stall = 0;
      bland = false;
    }
  }
}

LpResult SimplexEngine::Impl::result(LpStatus status) const {
  LpResult res;
  res.status = status;
  res.iterations = iters;
  if (status != LpStatus::kOptimal) return res;
  res.values.resize(static_cast<std::size_t>(n));
  double obj = obj_const;
  for (int j = 0; j < n; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    res.values[ju] = x[ju] * colscale[ju];
    obj += cost[ju] * x[ju];
  }
  res.row_activity.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    res.row_activity[static_cast<std::size_t>(i)] =
        x[static_cast<std::size_t>(n + i)] / rowscale[static_cast<std::size_t>(i)];
  }
  res.objective = obj;
  return res;
}

LpResult SimplexEngine::Impl::run() {
  iters = 0;
  if (!have_basis) {
    cold_start();
  } else {
    if (since_refactor >= opt.refactor_interval) {
      ensure_fresh();
    } else {
      compute_duals();
    }
    for (int j = 0; j < N; ++j) {
      if (st[static_cast<std::size_t>(j)] != VarStatus::kBasic) place_nonbasic(j);
    }
    for (int i = 0; i < m; ++i) {
      const auto j = static_cast<std::size_t>(head[static_cast<std::size_t>(i)]);
      lbw[j] = lb[j];
      ubw[j] = ub[j];
      art[j] = 0;
    }
    compute_xb();
  }

  for (int attempt = 0; attempt < 8; ++attempt) {
    LpStatus status = dual_simplex();
    if (status == LpStatus::kIterationLimit) return result(status);
    if (status == LpStatus::kInfeasible) {
      const bool boxed = std::any_of(art.begin(), art.end(), [](char a) { return a != 0; });
      if (!boxed || big >= 1e15) return result(status);
      big *= 1e3;
      for (int j = 0; j < N; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (!art[ju]) continue;
        if (!std::isfinite(lb[ju])) lbw[ju] = -big;
        if (!std::isfinite(ub[ju])) ubw[ju] = big;
        if (st[ju] == VarStatus::kLower) x[ju] = lbw[ju];
        if (st[ju] == VarStatus::kUpper) x[ju] = ubw[ju];
      }
      compute_xb();
      continue;
    }
    // Drop artificial boxes; variables resting on one become superbasic.
    for (int j = 0; j < N; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (!art[ju]) continue;
      lbw[ju] = lb[ju];
      ubw[ju] = ub[ju];
      art[ju] = 0;
      if (st[ju] == VarStatus::kLower && !std::isfinite(lb[ju])) st[ju] = VarStatus::kFree;
      if (st[ju] == VarStatus::kUpper && !std::isfinite(ub[ju])) st[ju] = VarStatus::kFree;
    }
    status = primal_simplex();
    if (status != LpStatus::kOptimal) return result(status);
    // Recompute from the current inverse; refactor only when the rows are
    // no longer satisfied to tolerance.
    compute_xb();
    compute_duals();
    if (max_residual() > opt.primal_tol * 100.0 || !primal_feasible(false)) {
      since_refactor = opt.refactor_interval;
      ensure_fresh();
    }
    bool dual_ok = true;
    for (int j = 0; j < N && dual_ok; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (st[ju] == VarStatus::kBasic || lb[ju] == ub[ju]) continue;
      const double tol = 10.0 * opt.dual_tol;
      if (st[ju] == VarStatus::kLower && d[ju] < -tol) dual_ok = false;
      if (st[ju] == VarStatus::kUpper && d[ju] > tol) dual_ok = false;
      if (st[ju] == VarStatus::kFree && std::abs(d[ju]) > tol) dual_ok = false;
    }
    if (primal_feasible(false) && dual_ok) return result(LpStatus::kOptimal);
    if (primal_feasible(false)) {
      status = primal_simplex();
      if (status != LpStatus::kOptimal) return result(status);
      return result(LpStatus::kOptimal);
    }
    // Lost primal feasibility after refactoring: re-place and retry.
    for (int j = 0; j < N; ++j) {
      if (st[static_cast<std::size_t>(j)] != VarStatus::kBasic) place_nonbasic(j);
    }
    compute_xb();
  }
  return result(LpStatus::kOptimal);
}

SimplexEngine::SimplexEngine(const LinearModel& model, LpOptions opts)
    : impl_(std::make_unique<Impl>(model, opts)) {}

SimplexEngine::~SimplexEngine() = default;

void SimplexEngine::set_bounds(int var, double lower_bound, double upper_bound) {
  const auto j = static_cast<std::size_t>(var);
  const double c = impl_->colscale[j];
  impl_->lb[j] = lower_bound / c;
  impl_->ub[j] = upper_bound / c;
}

double SimplexEngine::lower(int var) const {
  return impl_->lb[static_cast<std::size_t>(var)] * impl_->colscale[static_cast<std::size_t>(var)];
}

double SimplexEngine::upper(int var) const {
  return impl_->ub[static_cast<std::size_t>(var)] * impl_->colscale[static_cast<std::size_t>(var)];
}

LpResult SimplexEngine::solve() {
  for (int j = 0; j < impl_->N; ++j) {
    if (impl_->lb[static_cast<std::size_t>(j)] > impl_->ub[static_cast<std::size_t>(j)]) {
      LpResult res;
      res.status = LpStatus::kInfeasible;
      return res;
    }
  }
  LpResult res = impl_->run();
  impl_->total_iters += res.iterations;
  return res;
}

long SimplexEngine::total_iterations() const { return impl_->total_iters; }

LpResult simplex_lp(const LinearModel& model, const LpOptions& opts) {
  const auto problems = model.validate();
  if (!problems.empty()) throw std::invalid_argument("invalid model: " + problems.front());
  SimplexEngine engine(model, opts);
  return engine.solve();
}

}  // namespace epistoch
