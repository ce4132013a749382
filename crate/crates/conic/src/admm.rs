//! Operator-splitting backend on the homogeneous self-dual embedding.
//!
//! The embedding seeks `u = (x, y, τ) ∈ ℝⁿ × K* × ℝ₊` with `Mu ∈ {0}ⁿ × K × ℝ₊`
//! and `uᵀMu = 0`, where
//!
//! ```text
//!     ⎡  0   Aᵀ   c ⎤
//! M = ⎢ −A   0    b ⎥
//!     ⎣ −cᵀ −bᵀ   0 ⎦
//! ```
//!
//! Douglas–Rachford splitting alternates a resolvent of `M` (one sparse
//! Cholesky solve with `ρₓI + AᵀR_y⁻¹A`, factored up front) with a projection
//! onto the cone product, so every iteration costs one pair of triangular
//! solves plus one projection per cone block. Rows whose width exceeds
//! [`DENSE_ROW_NNZ`] are kept out of the sparse factor and handled with a
//! Woodbury correction.
//!
//! Data are Ruiz-equilibrated before iterating; the dual step scale is adapted
//! from the primal/dual residual balance, with a refactorization each time it
//! moves by more than [`AdmmParams::scale_update_factor`]. A type-II Anderson
//! extrapolation over the fixed-point iterates is applied with a safeguard.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::LltError;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{ColMut, Mat, Side};

use crate::cones::{project_dual, PsdWork};
use crate::program::ConicProgram;
use crate::solve::{Backend, SolveReport, SolveSettings, SolveStatus};
use crate::standard::{Compressed, ConeLayout, StandardForm};

pub const DENSE_ROW_NNZ: usize = 2000;
const SCALE_UPDATE_FACTOR: f64 = 3.0;
const MIN_SCALE: f64 = 1e-6;
const MAX_SCALE: f64 = 1e6;
const ZERO_CONE_WEIGHT: f64 = 1000.0;

#[derive(Clone, Debug)]
pub struct AdmmParams {
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    pub rho_x: f64,
    /// Initial dual step scale.
    pub scale: f64,
    pub adaptive_scale: bool,
    /// Minimum factor by which the scale must move before it is updated.
    pub scale_update_factor: f64,
    /// Balance the primal residual against the larger of the dual residual
    /// and the duality gap when adapting the scale.
    pub gap_aware_scale: bool,
    pub equilibration_passes: usize,
    /// Anderson memory; 0 disables acceleration.
    pub anderson_memory: usize,
    pub check_interval: usize,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            rho_x: 1e-6,
            scale: 0.1,
            adaptive_scale: true,
            scale_update_factor: SCALE_UPDATE_FACTOR,
            gap_aware_scale: false,
            equilibration_passes: 25,
            anderson_memory: 10,
            check_interval: 10,
        }
    }
}

/// The shipped backend.
#[derive(Clone, Debug, Default)]
pub struct Admm {
    pub params: AdmmParams,
}

impl Admm {
    pub fn new(params: AdmmParams) -> Self {
        Self { params }
    }
}

impl Backend for Admm {
    fn name(&self) -> &str {
        "admm-hsde"
    }

    fn solve(&self, prog: &ConicProgram, settings: &SolveSettings) -> SolveReport {
        let start = Instant::now();
        let sf = StandardForm::from_program(prog);
        let out = Workspace::new(&sf, &self.params).and_then(|mut ws| ws.run(settings, start));
        let elapsed = start.elapsed().as_secs_f64();
        match out {
            Ok(mut raw) => {
                raw.report.solve_time = elapsed;
                raw.report.objective += sf.c0;
                raw.report.dual_objective += sf.c0;
                raw.report
            }
            Err(e) => {
                log::warn!("admm setup failed: {e}");
                SolveReport::failed(SolveStatus::NumericalFailure, self.name(), sf.n, elapsed, 0)
            }
        }
    }
}

struct RawOutcome {
    report: SolveReport,
}

#[derive(Debug)]
enum SetupError {
    Factorization(String),
}

impl std::fmt::Display for SetupError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SetupError::Factorization(s) => write!(f, "factorization failed: {s}"),
        }
    }
}

impl From<LltError> for SetupError {
    fn from(e: LltError) -> Self {
        SetupError::Factorization(format!("{e:?}"))
    }
}

/// Row/column equilibration `Â = D A E`, `b̂ = σ_b D b`, `ĉ = σ_c E c`.
struct Scaling {
    d: Vec<f64>,
    e: Vec<f64>,
    sigma_b: f64,
    sigma_c: f64,
}

fn row_groups(layout: &ConeLayout) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut off = 0;
    for _ in 0..layout.zero + layout.nonneg {
        groups.push((off, off + 1));
        off += 1;
    }
    for &q in &layout.soc {
        groups.push((off, off + q));
        off += q;
    }
    for &d in &layout.psd {
        let len = d * (d + 1) / 2;
        groups.push((off, off + len));
        off += len;
    }
    groups
}

fn equilibrate(sf: &StandardForm, passes: usize) -> (Scaling, Compressed, Vec<f64>, Vec<f64>) {
    let (m, n) = (sf.m, sf.n);
    let mut rows = sf.a_rows.clone();
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];
    let groups = row_groups(&sf.cones);
    let clamp = |v: f64| if v < 1e-4 { 1.0 } else { v.min(1e4) };
    for _ in 0..passes {
        let mut row_norm = vec![0.0f64; m];
        for (r, rn) in row_norm.iter_mut().enumerate() {
            *rn = rows.lane(r).fold(0.0, |acc, (_, v)| acc.max(v.abs()));
        }
        for &(lo, hi) in &groups {
            let g = row_norm[lo..hi].iter().fold(0.0f64, |a, &b| a.max(b));
            let f = 1.0 / clamp(g).sqrt();
            for r in lo..hi {
                d[r] *= f;
                for k in rows.ptr[r]..rows.ptr[r + 1] {
                    rows.val[k] *= f;
                }
            }
        }
        let mut col_norm = vec![0.0f64; n];
        for k in 0..rows.idx.len() {
            let j = rows.idx[k];
            col_norm[j] = col_norm[j].max(rows.val[k].abs());
        }
        let f: Vec<f64> = col_norm.iter().map(|&c| 1.0 / clamp(c).sqrt()).collect();
        for j in 0..n {
            e[j] *= f[j];
        }
        for k in 0..rows.idx.len() {
            rows.val[k] *= f[rows.idx[k]];
        }
    }
    let bh: Vec<f64> = sf.b.iter().zip(&d).map(|(b, d)| b * d).collect();
    let ch: Vec<f64> = sf.c.iter().zip(&e).map(|(c, e)| c * e).collect();
    let nb = bh.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let nc = ch.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let sigma_b = 1.0 / nb.clamp(1e-3, 1e6);
    let sigma_c = 1.0 / nc.clamp(1e-3, 1e6);
    let bh = bh.into_iter().map(|v| v * sigma_b).collect();
    let ch = ch.into_iter().map(|v| v * sigma_c).collect();
    (
        Scaling {
            d,
            e,
            sigma_b,
            sigma_c,
        },
        rows,
        bh,
        ch,
    )
}

/// Factorization of `ρₓI + Aᵀ diag(w) A` with wide rows split off.
struct KktSolver {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    symbolic: SymbolicLlt<usize>,
    llt: Llt<usize, f64>,
    /// Rows of `A` handled by the low-rank correction.
    dense_rows: Vec<usize>,
    /// `K_s⁻¹ U`, column-major `n × q`.
    z: Vec<f64>,
    /// Cholesky factor of `W_u⁻¹ + Uᵀ K_s⁻¹ U`.
    cap: Option<faer::linalg::solvers::Llt<f64>>,
}

impl KktSolver {
    fn new(rows: &Compressed, cols: &Compressed, weights: &[f64], rho_x: f64) -> Result<Self, SetupError> {
        let n = cols.major;
        let dense_rows: Vec<usize> = (0..rows.major)
            .filter(|&r| rows.ptr[r + 1] - rows.ptr[r] > DENSE_ROW_NNZ)
            .collect();
        let mut is_dense = vec![false; rows.major];
        for &r in &dense_rows {
            is_dense[r] = true;
        }
        // upper-triangle pattern of AᵀA over the sparse rows
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        let mut mark = vec![usize::MAX; n];
        for j in 0..n {
            let start = row_idx.len();
            mark[j] = j;
            row_idx.push(j);
            for (r, _) in cols.lane(j) {
                if is_dense[r] {
                    continue;
                }
                for (i, _) in rows.lane(r) {
                    if i <= j && mark[i] != j {
                        mark[i] = j;
                        row_idx.push(i);
                    }
                }
            }
            row_idx[start..].sort_unstable();
            col_ptr.push(row_idx.len());
        }
        let values = vec![0.0; row_idx.len()];
        let sym_ref = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let symbolic = SymbolicLlt::try_new(sym_ref, Side::Upper)
            .map_err(|e| SetupError::Factorization(format!("{e:?}")))?;
        let mut solver = Self {
            n,
            llt: {
                // identity placeholder (diagonal is last in each upper column), refactored below
                let mut v = vec![0.0; row_idx.len()];
                for j in 0..n {
                    v[col_ptr[j + 1] - 1] = 1.0;
                }
                let mat = SparseColMatRef::new(sym_ref, &v);
                Llt::try_new_with_symbolic(symbolic.clone(), mat, Side::Upper)?
            },
            col_ptr,
            row_idx,
            values,
            symbolic,
            dense_rows,
            z: Vec::new(),
            cap: None,
        };
        solver.refactor(rows, cols, weights, rho_x, &is_dense)?;
        Ok(solver)
    }

    fn refactor(
        &mut self,
        rows: &Compressed,
        cols: &Compressed,
        weights: &[f64],
        rho_x: f64,
        is_dense: &[bool],
    ) -> Result<(), SetupError> {
        let n = self.n;
        let mut acc = vec![0.0; n];
        for j in 0..n {
            for (r, arj) in cols.lane(j) {
                if is_dense[r] {
                    continue;
                }
                let f = weights[r] * arj;
                for (i, ari) in rows.lane(r) {
                    if i <= j {
                        acc[i] += f * ari;
                    }
                }
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[k];
                self.values[k] = acc[i] + if i == j { rho_x } else { 0.0 };
                acc[i] = 0.0;
            }
        }
        let sym_ref = SymbolicSparseColMatRef::new_checked(n, n, &self.col_ptr, None, &self.row_idx);
        let mat = SparseColMatRef::new(sym_ref, &self.values);
        self.llt = Llt::try_new_with_symbolic(self.symbolic.clone(), mat, Side::Upper)?;

        let q = self.dense_rows.len();
        if q > 0 {
            let mut z = vec![0.0; n * q];
            for (c, &r) in self.dense_rows.iter().enumerate() {
                let col = &mut z[c * n..(c + 1) * n];
                for (i, v) in rows.lane(r) {
                    col[i] = v;
                }
                self.llt.solve_in_place(ColMut::from_slice_mut(col));
            }
            let mut cap = Mat::<f64>::zeros(q, q);
            for (a, &ra) in self.dense_rows.iter().enumerate() {
                for b in 0..q {
                    let zb = &z[b * n..(b + 1) * n];
                    cap[(a, b)] = rows.lane(ra).map(|(i, v)| v * zb[i]).sum::<f64>();
                }
                cap[(a, a)] += 1.0 / weights[ra];
            }
            // symmetrize against round-off before factoring
            for a in 0..q {
                for b in 0..a {
                    let s = 0.5 * (cap[(a, b)] + cap[(b, a)]);
                    cap[(a, b)] = s;
                    cap[(b, a)] = s;
                }
            }
            self.cap = Some(
                cap.llt(Side::Lower)
                    .map_err(|e| SetupError::Factorization(format!("capacitance: {e:?}")))?,
            );
            self.z = z;
        }
        Ok(())
    }

    /// Solves `K v = rhs` in place; `rows` supplies the wide rows `U`.
    fn solve(&self, rhs: &mut [f64], rows: &Compressed) {
        self.llt.solve_in_place(ColMut::from_slice_mut(rhs));
        if let Some(cap) = &self.cap {
            let n = self.n;
            let q = self.dense_rows.len();
            let mut t = Mat::<f64>::zeros(q, 1);
            for (a, &r) in self.dense_rows.iter().enumerate() {
                t[(a, 0)] = rows.lane(r).map(|(i, v)| v * rhs[i]).sum::<f64>();
            }
            cap.solve_in_place(t.as_mut());
            for a in 0..q {
                let ta = t[(a, 0)];
                let za = &self.z[a * n..(a + 1) * n];
                for i in 0..n {
                    rhs[i] -= za[i] * ta;
                }
            }
        }
    }
}

struct Workspace<'a> {
    sf: &'a StandardForm,
    params: AdmmParams,
    scaling: Scaling,
    rows: Compressed,
    cols: Compressed,
    b: Vec<f64>,
    c: Vec<f64>,
    is_dense: Vec<bool>,
    scale: f64,
    /// Diagonal of `R_y`.
    r_y: Vec<f64>,
    r_tau: f64,
    kkt: KktSolver,
    /// `(R_z + M₀)⁻¹ h` with `h = (c, b)`.
    p: Vec<f64>,
    h_dot_p: f64,
    psd_work: PsdWork,
}

impl<'a> Workspace<'a> {
    fn new(sf: &'a StandardForm, params: &AdmmParams) -> Result<Self, SetupError> {
        let (scaling, rows, b, c) = equilibrate(sf, params.equilibration_passes);
        let cols = rows.transpose();
        let is_dense: Vec<bool> = (0..sf.m)
            .map(|r| rows.ptr[r + 1] - rows.ptr[r] > DENSE_ROW_NNZ)
            .collect();
        let scale = params.scale;
        let r_y = Self::r_y_for(scale, &sf.cones, sf.m);
        let weights: Vec<f64> = r_y.iter().map(|r| 1.0 / r).collect();
        let kkt = KktSolver::new(&rows, &cols, &weights, params.rho_x)?;
        let mut ws = Self {
            sf,
            params: params.clone(),
            scaling,
            rows,
            cols,
            b,
            c,
            is_dense,
            scale,
            r_y,
            r_tau: 1.0,
            kkt,
            p: Vec::new(),
            h_dot_p: 0.0,
            psd_work: PsdWork::default(),
        };
        ws.update_p();
        Ok(ws)
    }

    fn r_y_for(scale: f64, cones: &ConeLayout, m: usize) -> Vec<f64> {
        (0..m)
            .map(|r| {
                if r < cones.zero {
                    1.0 / (ZERO_CONE_WEIGHT * scale)
                } else {
                    1.0 / scale
                }
            })
            .collect()
    }

    fn set_scale(&mut self, scale: f64) -> Result<(), SetupError> {
        self.scale = scale;
        self.r_y = Self::r_y_for(scale, &self.sf.cones, self.sf.m);
        let weights: Vec<f64> = self.r_y.iter().map(|r| 1.0 / r).collect();
        self.kkt
            .refactor(&self.rows, &self.cols, &weights, self.params.rho_x, &self.is_dense)?;
        self.update_p();
        Ok(())
    }

    fn update_p(&mut self) {
        let (n, m) = (self.sf.n, self.sf.m);
        let mut h = Vec::with_capacity(n + m);
        h.extend_from_slice(&self.c);
        h.extend_from_slice(&self.b);
        let mut p = vec![0.0; n + m];
        self.solve_m0(&h, &mut p);
        self.h_dot_p = h.iter().zip(&p).map(|(a, b)| a * b).sum();
        self.p = p;
    }

    /// Solves `(R_z + M₀) z = r` with `M₀ = [[0, Aᵀ], [−A, 0]]`.
    fn solve_m0(&self, r: &[f64], z: &mut [f64]) {
        let (n, m) = (self.sf.n, self.sf.m);
        let (rx, ry) = r.split_at(n);
        // (R_x + Aᵀ R_y⁻¹ A) x = r_x − Aᵀ R_y⁻¹ r_y
        let mut t = vec![0.0; m];
        for i in 0..m {
            t[i] = ry[i] / self.r_y[i];
        }
        let (zx, zy) = z.split_at_mut(n);
        for j in 0..n {
            zx[j] = rx[j] - self.cols.lane(j).map(|(r, v)| v * t[r]).sum::<f64>();
        }
        self.kkt.solve(zx, &self.rows);
        // y = R_y⁻¹ (r_y + A x)
        for i in 0..m {
            let ax: f64 = self.rows.lane(i).map(|(j, v)| v * zx[j]).sum();
            zy[i] = (ry[i] + ax) / self.r_y[i];
        }
    }

    fn r_diag(&self, k: usize) -> f64 {
        let n = self.sf.n;
        if k < n {
            self.params.rho_x
        } else if k < n + self.sf.m {
            self.r_y[k - n]
        } else {
            self.r_tau
        }
    }

    /// One Douglas–Rachford step: returns `(ũ, u)` for the current `w`.
    fn step(&mut self, w: &[f64], ut: &mut [f64], u: &mut [f64]) {
        let (n, m) = (self.sf.n, self.sf.m);
        let len = n + m;
        let mut rw = vec![0.0; len];
        for k in 0..len {
            rw[k] = self.r_diag(k) * w[k];
        }
        let mut a = vec![0.0; len];
        self.solve_m0(&rw, &mut a);
        let h_dot_a: f64 = self.c.iter().zip(&a[..n]).map(|(x, y)| x * y).sum::<f64>()
            + self.b.iter().zip(&a[n..]).map(|(x, y)| x * y).sum::<f64>();
        let tau = (self.r_tau * w[len] + h_dot_a) / (self.r_tau + self.h_dot_p);
        for k in 0..len {
            ut[k] = a[k] - tau * self.p[k];
        }
        ut[len] = tau;
        for k in 0..=len {
            u[k] = 2.0 * ut[k] - w[k];
        }
        project_dual(&mut u[n..len], &self.sf.cones, &mut self.psd_work);
        u[len] = u[len].max(0.0);
    }

    fn run(&mut self, settings: &SolveSettings, start: Instant) -> Result<RawOutcome, SetupError> {
        let (n, m) = (self.sf.n, self.sf.m);
        let len = n + m + 1;
        let mut w = vec![0.0; len];
        w[len - 1] = 1.0;
        let mut ut = vec![0.0; len];
        let mut u = vec![0.0; len];
        let mut aa = Anderson::new(len, self.params.anderson_memory);
        let alpha = self.params.alpha;
        let mut last_res_norm = f64::INFINITY;
        let mut status = SolveStatus::TimeLimit;
        let mut iter = 0;
        let mut best: Option<Snapshot> = None;
        let mut next_scale_check = 100usize;

        while iter < settings.max_iterations {
            iter += 1;
            self.step(&w, &mut ut, &mut u);
            // fixed-point map T(w) = w + α(u − ũ)
            let mut tw = w.clone();
            let mut res_norm = 0.0;
            for k in 0..len {
                let g = alpha * (u[k] - ut[k]);
                tw[k] += g;
                res_norm += g * g;
            }
            let res_norm = res_norm.sqrt();
            if aa.enabled() {
                if res_norm > 1.0 * last_res_norm && aa.active() {
                    // safeguard: drop the extrapolation history
                    aa.reset();
                }
                last_res_norm = res_norm;
                match aa.extrapolate(&w, &tw) {
                    Some(next) => w = next,
                    None => w = tw,
                }
            } else {
                w = tw;
            }

            if iter % self.params.check_interval == 0 || iter == settings.max_iterations {
                // residuals use the last projected point and its dual slack
                let snap = self.snapshot(&u, &ut, &w, alpha);
                let conv = snap.converged(settings);
                log::trace!(
                    "it {iter} prim {:.2e} dual {:.2e} gap {:.2e} pobj {:.6e} scale {:.2e}",
                    snap.rel_prim,
                    snap.rel_dual,
                    (snap.pobj - snap.dobj).abs() / (1.0 + snap.pobj.abs() + snap.dobj.abs()),
                    snap.pobj,
                    self.scale
                );
                if best.as_ref().is_none_or(|b| snap.merit() < b.merit()) {
                    best = Some(snap.clone());
                }
                if let Some(st) = conv {
                    status = st;
                    best = Some(snap);
                    break;
                }
                if let Some(limit) = settings.time_limit {
                    if start.elapsed() >= limit {
                        status = SolveStatus::TimeLimit;
                        break;
                    }
                }
                if !snap.finite {
                    status = SolveStatus::NumericalFailure;
                    break;
                }
                if self.params.adaptive_scale && iter >= next_scale_check {
                    next_scale_check = iter + 100;
                    let dual_side = if self.params.gap_aware_scale {
                        snap.rel_dual.max(snap.rel_gap())
                    } else {
                        snap.rel_dual
                    };
                    let ratio = (snap.rel_prim / dual_side.max(1e-300)).sqrt();
                    if ratio.is_finite() {
                        let new_scale = (self.scale * ratio).clamp(MIN_SCALE, MAX_SCALE);
                        let f = new_scale / self.scale;
                        if f > self.params.scale_update_factor || 1.0 / f > self.params.scale_update_factor {
                            // w = u + R⁻¹v with v = R_old(u − (2ũ − w)) kept fixed
                            let mut v = vec![0.0; len];
                            for k in 0..len {
                                v[k] = self.r_diag(k) * (u[k] - 2.0 * ut[k] + w[k]);
                            }
                            self.set_scale(new_scale)?;
                            for k in 0..len {
                                w[k] = u[k] + v[k] / self.r_diag(k);
                            }
                            aa.reset();
                            last_res_norm = f64::INFINITY;
                        }
                    }
                }
            }
        }

        let snap = match best {
            Some(s) => s,
            None => self.snapshot(&u, &ut, &w, alpha),
        };
        Ok(self.finish(snap, status, iter))
    }

    fn snapshot(&self, u: &[f64], ut: &[f64], w: &[f64], _alpha: f64) -> Snapshot {
        let (n, m) = (self.sf.n, self.sf.m);
        let sc = &self.scaling;
        let tau = u[n + m];
        // v_y = R_y (u_y − q_y) with q = 2ũ − w
        let s_hat: Vec<f64> = (0..m)
            .map(|i| self.r_y[i] * (u[n + i] - 2.0 * ut[n + i] + w[n + i]))
            .collect();
        let kappa = self.r_tau * (u[n + m] - 2.0 * ut[n + m] + w[n + m]);

        // unscaled, unnormalized iterates
        let xs: Vec<f64> = (0..n).map(|j| sc.e[j] * u[j] / sc.sigma_b).collect();
        let ys: Vec<f64> = (0..m).map(|i| sc.d[i] * u[n + i] / sc.sigma_c).collect();
        let ss: Vec<f64> = (0..m).map(|i| s_hat[i] / (sc.d[i] * sc.sigma_b)).collect();

        let mut ax = vec![0.0; m];
        self.sf.a_mul(&xs, &mut ax);
        let mut aty = vec![0.0; n];
        self.sf.at_mul(&ys, &mut aty);
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let ctx: f64 = self.sf.c.iter().zip(&xs).map(|(a, b)| a * b).sum();
        let bty: f64 = self.sf.b.iter().zip(&ys).map(|(a, b)| a * b).sum();

        let mut prim = 0.0f64;
        let mut dual = 0.0f64;
        if tau > 0.0 {
            for i in 0..m {
                prim = prim.max(((ax[i] + ss[i]) / tau - self.sf.b[i]).abs());
            }
            for j in 0..n {
                dual = dual.max((aty[j] / tau + self.sf.c[j]).abs());
            }
        }
        let nb = inf(&self.sf.b);
        let nc = inf(&self.sf.c);
        let scale_p = (inf(&ax) / tau.max(1e-300)).max(inf(&ss) / tau.max(1e-300)).max(nb);
        let scale_d = (inf(&aty) / tau.max(1e-300)).max(nc);
        let pobj = ctx / tau.max(1e-300);
        let dobj = -bty / tau.max(1e-300);

        let mut ax_s = ax.clone();
        for i in 0..m {
            ax_s[i] += ss[i];
        }
        let finite = u.iter().all(|v| v.is_finite());
        Snapshot {
            tau,
            kappa,
            x: xs,
            prim,
            dual,
            scale_p,
            scale_d,
            pobj,
            dobj,
            rel_prim: prim / (1.0 + scale_p),
            rel_dual: dual / (1.0 + scale_d),
            ctx,
            bty,
            aty_norm: inf(&aty),
            ax_s_norm: inf(&ax_s),
            finite,
        }
    }

    fn finish(&self, snap: Snapshot, status: SolveStatus, iterations: usize) -> RawOutcome {
        let n = self.sf.n;
        let (x, objective, dual_objective) = match status {
            SolveStatus::Optimal | SolveStatus::TimeLimit if snap.tau > 0.0 => {
                (snap.x.iter().map(|v| v / snap.tau).collect(), snap.pobj, snap.dobj)
            }
            SolveStatus::DualInfeasible => (snap.x.clone(), f64::NEG_INFINITY, f64::NEG_INFINITY),
            SolveStatus::PrimalInfeasible => (vec![f64::NAN; n], f64::INFINITY, f64::INFINITY),
            _ => (vec![f64::NAN; n], f64::NAN, f64::NAN),
        };
        RawOutcome {
            report: SolveReport {
                status,
                objective,
                dual_objective,
                x,
                solve_time: 0.0,
                iterations,
                primal_residual: snap.prim,
                dual_residual: snap.dual,
                gap: (snap.pobj - snap.dobj).abs(),
                backend: "admm-hsde".into(),
                max_violation: f64::NAN,
            },
        }
    }
}

#[derive(Clone, Debug)]
struct Snapshot {
    tau: f64,
    kappa: f64,
    x: Vec<f64>,
    prim: f64,
    dual: f64,
    scale_p: f64,
    scale_d: f64,
    pobj: f64,
    dobj: f64,
    rel_prim: f64,
    rel_dual: f64,
    ctx: f64,
    bty: f64,
    aty_norm: f64,
    ax_s_norm: f64,
    finite: bool,
}

impl Snapshot {
    fn converged(&self, s: &SolveSettings) -> Option<SolveStatus> {
        if !self.finite {
            return None;
        }
        if self.tau > 1e-12 * self.kappa.max(1e-300) || self.kappa <= 0.0 {
            let gap = (self.pobj - self.dobj).abs();
            if self.tau > 0.0
                && self.prim <= s.feas_tol * (1.0 + self.scale_p)
                && self.dual <= s.feas_tol * (1.0 + self.scale_d)
                && gap <= s.gap_tol * (1.0 + self.pobj.abs() + self.dobj.abs())
            {
                return Some(SolveStatus::Optimal);
            }
        }
        // certificates are scale-free in the unnormalized iterate
        if self.bty < 0.0 && self.aty_norm <= s.infeas_tol * (-self.bty) {
            return Some(SolveStatus::PrimalInfeasible);
        }
        if self.ctx < 0.0 && self.ax_s_norm <= s.infeas_tol * (-self.ctx) {
            return Some(SolveStatus::DualInfeasible);
        }
        None
    }

    fn rel_gap(&self) -> f64 {
        (self.pobj - self.dobj).abs() / (1.0 + self.pobj.abs() + self.dobj.abs())
    }

    /// Ranking used to keep the most accurate iterate seen.
    fn merit(&self) -> f64 {
        if self.tau <= 0.0 || !self.finite {
            return f64::INFINITY;
        }
        self.rel_prim.max(self.rel_dual).max(self.rel_gap())
    }
}

/// Type-II Anderson acceleration over fixed-point iterates `w ↦ T(w)`.
struct Anderson {
    mem: usize,
    len: usize,
    /// Differences of residuals `g = T(w) − w`, one per column.
    dg: Vec<Vec<f64>>,
    /// Differences of `T(w)`.
    df: Vec<Vec<f64>>,
    prev_g: Option<Vec<f64>>,
    prev_f: Option<Vec<f64>>,
}

impl Anderson {
    fn new(len: usize, mem: usize) -> Self {
        Self {
            mem,
            len,
            dg: Vec::new(),
            df: Vec::new(),
            prev_g: None,
            prev_f: None,
        }
    }

    fn enabled(&self) -> bool {
        self.mem > 0
    }

    fn active(&self) -> bool {
        !self.dg.is_empty()
    }

    fn reset(&mut self) {
        self.dg.clear();
        self.df.clear();
        self.prev_g = None;
        self.prev_f = None;
    }

    /// Returns the extrapolated next iterate, or `None` to take the plain step.
    fn extrapolate(&mut self, w: &[f64], tw: &[f64]) -> Option<Vec<f64>> {
        let g: Vec<f64> = tw.iter().zip(w).map(|(a, b)| a - b).collect();
        let f = tw.to_vec();
        if let (Some(pg), Some(pf)) = (&self.prev_g, &self.prev_f) {
            let dg: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
            let df: Vec<f64> = f.iter().zip(pf).map(|(a, b)| a - b).collect();
            if self.dg.len() == self.mem {
                self.dg.remove(0);
                self.df.remove(0);
            }
            self.dg.push(dg);
            self.df.push(df);
        }
        self.prev_g = Some(g.clone());
        self.prev_f = Some(f.clone());
        let k = self.dg.len();
        if k == 0 {
            return None;
        }
        // least squares: min ‖g − ΔG γ‖ via normal equations with a small ridge
        let mut gram = Mat::<f64>::zeros(k, k);
        let mut rhs = Mat::<f64>::zeros(k, 1);
        for a in 0..k {
            for b in 0..=a {
                let v: f64 = self.dg[a].iter().zip(&self.dg[b]).map(|(x, y)| x * y).sum();
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
            rhs[(a, 0)] = self.dg[a].iter().zip(&g).map(|(x, y)| x * y).sum();
        }
        let trace: f64 = (0..k).map(|a| gram[(a, a)]).sum();
        let ridge = 1e-10 * trace.max(1e-300);
        for a in 0..k {
            gram[(a, a)] += ridge;
        }
        let llt = gram.llt(Side::Lower).ok()?;
        llt.solve_in_place(rhs.as_mut());
        let mut out = f;
        for a in 0..k {
            let gamma = rhs[(a, 0)];
            if !gamma.is_finite() {
                self.reset();
                return None;
            }
            for (o, d) in out.iter_mut().zip(&self.df[a]) {
                *o -= gamma * d;
            }
        }
        debug_assert_eq!(out.len(), self.len);
        Some(out)
    }
}
