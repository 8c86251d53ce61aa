//! Ensembles of dipolar SLE paths, martingale drift tests, Schramm's
//! observable, and the lattice Green's function check.

use crate::correlators::green_strip;
use crate::error::{Error, Result};
use crate::loewner::{
    classify_side, BrownianDriver, Classification, LoewnerState, PointStatus, UNDECIDED_EPS,
};
use crate::observables::{by_name, catalog, ObservableSpec};
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;

/// Minimum distance of evaluation points from the seed.
pub const MIN_SEED_DISTANCE: f64 = 0.2;
pub const DRIFT_THRESHOLD: f64 = 3.5;
pub const MIN_EFFECTIVE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub kappa: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub seed: u64,
    pub observables: Vec<String>,
    /// Evaluation points `[re, im]`.
    pub points: Vec<[f64; 2]>,
    /// Second point of two-point observables, relative to the first.
    pub partner_offset: [f64; 2],
    pub checkpoints: Vec<f64>,
    pub eps_undecided: f64,
}

/// Points used by the drift tests: away from the seed, the curve's early
/// neighbourhood and the boundary.
pub const DRIFT_POINTS: [[f64; 2]; 5] =
    [[0.0, 2.8], [-1.0, 2.7], [1.5, 2.6], [-2.5, 2.9], [3.0, 2.7]];

/// Points used for Schramm's formula: the Neumann midpoint plus nine
/// interior points.
pub const SCHRAMM_POINTS: [[f64; 2]; 10] = [
    [0.0, PI],
    [1.0, 2.0],
    [-0.5, 2.5],
    [1.5, 1.5],
    [0.3, 1.2],
    [-1.5, 2.0],
    [3.0, 1.5],
    [-1.0, 1.5],
    [0.5, 2.2],
    [-2.5, 1.8],
];

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_paths: 4000,
            kappa: 4.0,
            dt: 1e-3,
            horizon: 1.0,
            seed: 20240611,
            observables: catalog().into_iter().map(|s| s.name).collect(),
            points: DRIFT_POINTS.to_vec(),
            partner_offset: [0.6, -0.4],
            checkpoints: vec![0.0, 0.5, 1.0],
            eps_undecided: UNDECIDED_EPS,
        }
    }
}

pub fn to_c64(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_paths == 0 {
            return bad("n_paths must be positive".into());
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return bad(format!("kappa = {}", self.kappa));
        }
        if !(self.dt > 0.0) || !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad(format!("dt = {}, T = {}", self.dt, self.horizon));
        }
        if self.horizon / self.dt > 1e8 {
            return bad("more than 1e8 steps".into());
        }
        if !(self.eps_undecided >= 0.0) {
            return bad(format!("eps_undecided = {}", self.eps_undecided));
        }
        for w in self.checkpoints.windows(2) {
            if w[1] <= w[0] {
                return bad("checkpoints must increase".into());
            }
        }
        for &t in &self.checkpoints {
            if !(0.0..=self.horizon + 1e-12).contains(&t) {
                return bad(format!("checkpoint {t} outside [0, T]"));
            }
        }
        for name in &self.observables {
            by_name(name)?;
        }
        for z in self.all_points() {
            if !(z.im >= 0.0 && z.im <= PI) || !z.re.is_finite() {
                return Err(Error::OutsideDomain(z));
            }
            if z.norm() < MIN_SEED_DISTANCE {
                return bad(format!("point {z} within {MIN_SEED_DISTANCE} of the seed"));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn checkpoint_steps(&self) -> Vec<usize> {
        self.checkpoints
            .iter()
            .map(|t| (t / self.dt).round() as usize)
            .collect()
    }

    fn needs_partners(&self) -> bool {
        self.observables
            .iter()
            .any(|n| by_name(n).map(|s| s.arity() > 1).unwrap_or(false))
    }

    /// Tracked points: the evaluation points, then their partners.
    pub fn all_points(&self) -> Vec<C64> {
        let mut pts: Vec<C64> = self.points.iter().map(|&p| to_c64(p)).collect();
        if self.needs_partners() {
            let off = to_c64(self.partner_offset);
            pts.extend(self.points.iter().map(|&p| to_c64(p) + off));
        }
        pts
    }
}

/// Observable values per path, checkpoint, observable and point. Stopped
/// entries hold the value frozen at the swallowing time.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableTable {
    pub observables: Vec<String>,
    pub checkpoints: Vec<f64>,
    pub n_points: usize,
    pub n_paths: usize,
    values: Vec<C64>,
    stopped: Vec<bool>,
}

/// One CSV row of an [`ObservableTable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow<'a> {
    pub path_id: usize,
    pub t: f64,
    pub observable: &'a str,
    pub point_id: usize,
    pub re: f64,
    pub im: f64,
    pub stopped: bool,
}

impl ObservableTable {
    fn index(&self, path: usize, ck: usize, obs: usize, point: usize) -> usize {
        ((path * self.checkpoints.len() + ck) * self.observables.len() + obs) * self.n_points
            + point
    }

    pub fn value(&self, path: usize, ck: usize, obs: usize, point: usize) -> (C64, bool) {
        let i = self.index(path, ck, obs, point);
        (self.values[i], self.stopped[i])
    }

    pub fn rows(&self) -> impl Iterator<Item = TableRow<'_>> + '_ {
        (0..self.n_paths).flat_map(move |p| {
            (0..self.checkpoints.len()).flat_map(move |ck| {
                (0..self.observables.len()).flat_map(move |o| {
                    (0..self.n_points).map(move |k| {
                        let (v, s) = self.value(p, ck, o, k);
                        TableRow {
                            path_id: p,
                            t: self.checkpoints[ck],
                            observable: &self.observables[o],
                            point_id: k,
                            re: v.re,
                            im: v.im,
                            stopped: s,
                        }
                    })
                })
            })
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::result::Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        for row in self.rows() {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn point_tuple(spec: &ObservableSpec, k: usize, n_points: usize) -> Vec<usize> {
    (0..spec.arity()).map(|j| k + j * n_points).collect()
}

struct PathRecord {
    values: Vec<C64>,
    stopped: Vec<bool>,
}

fn run_path(
    cfg: &EnsembleConfig,
    specs: &[ObservableSpec],
    points: &[C64],
    path: usize,
) -> Result<PathRecord> {
    let n_pts = cfg.points.len();
    let cells = specs.len() * n_pts;
    let tuples: Vec<Vec<usize>> = specs
        .iter()
        .flat_map(|s| (0..n_pts).map(move |k| point_tuple(s, k, n_pts)))
        .collect();
    let ck_steps = cfg.checkpoint_steps();
    let mut values = Vec::with_capacity(ck_steps.len() * cells);
    let mut stopped = Vec::with_capacity(ck_steps.len() * cells);
    let mut frozen: Vec<Option<C64>> = vec![None; cells];
    let mut failure: Option<Error> = None;
    let mut drv = BrownianDriver::new(cfg.kappa, cfg.dt, cfg.seed, path as u64);
    let mut state = LoewnerState::new(points)?;
    let mut record = |state: &LoewnerState, frozen: &[Option<C64>]| -> Result<()> {
        for (cell, tuple) in tuples.iter().enumerate() {
            match frozen[cell] {
                Some(v) => {
                    values.push(v);
                    stopped.push(true);
                }
                None => {
                    values.push(specs[cell / n_pts].evaluate(state, tuple)?);
                    stopped.push(false);
                }
            }
        }
        Ok(())
    };
    let mut next = 0;
    for step in 0..=ck_steps.last().copied().unwrap_or(0) {
        while next < ck_steps.len() && ck_steps[next] == step {
            record(&state, &frozen)?;
            next += 1;
        }
        if next == ck_steps.len() {
            break;
        }
        let dxi = drv.next_increment();
        state.step_with(dxi, cfg.dt, |pre, gone| {
            for (cell, tuple) in tuples.iter().enumerate() {
                if frozen[cell].is_none() && tuple.iter().any(|i| gone.contains(i)) {
                    match specs[cell / n_pts].evaluate(pre, tuple) {
                        Ok(v) => frozen[cell] = Some(v),
                        Err(e) => failure = Some(e),
                    }
                }
            }
        })?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
    }
    Ok(PathRecord { values, stopped })
}

/// Simulate `n_paths` independent paths and record every observable at every
/// checkpoint. Path `k` uses stream `k` of the base seed, so results do not
/// depend on scheduling.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<ObservableTable> {
    cfg.validate()?;
    let specs: Vec<ObservableSpec> = cfg
        .observables
        .iter()
        .map(|n| by_name(n))
        .collect::<Result<_>>()?;
    let points = cfg.all_points();
    let records: Vec<PathRecord> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| run_path(cfg, &specs, &points, p))
        .collect::<Result<_>>()?;
    let mut values = Vec::new();
    let mut stopped = Vec::new();
    for r in records {
        values.extend(r.values);
        stopped.extend(r.stopped);
    }
    Ok(ObservableTable {
        observables: cfg.observables.clone(),
        checkpoints: cfg.checkpoints.clone(),
        n_points: cfg.points.len(),
        n_paths: cfg.n_paths,
        values,
        stopped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Re,
    Im,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCell {
    pub observable: String,
    pub point_id: usize,
    pub component: Component,
    pub t0: f64,
    pub t1: f64,
    pub mean: f64,
    pub stderr: f64,
    pub z: f64,
    /// Paths entering the mean, stopped ones contributing zero increments.
    pub count: usize,
    /// Paths not stopped at `t0`.
    pub effective: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTestReport {
    pub threshold: f64,
    pub cells: Vec<DriftCell>,
    pub n_tested: usize,
    pub n_failed: usize,
    pub n_inconclusive: usize,
    /// Expected number of failing cells if every observable is a martingale.
    pub expected_false_failures: f64,
    pub multiplicity_note: String,
}

impl DriftTestReport {
    pub fn all_pass(&self) -> bool {
        self.n_failed == 0
    }

    pub fn max_abs_z(&self) -> f64 {
        self.cells
            .iter()
            .filter(|c| c.verdict != Verdict::Inconclusive)
            .map(|c| c.z.abs())
            .fold(0.0, f64::max)
    }
}

fn two_sided_tail(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    2.0 * (1.0 - n.cdf(z))
}

/// One-sample tests of `E[M_{t₁} - M_{t₀}] = 0` per observable, point, real
/// component and checkpoint pair, passing at `|z| ≤ 3.5`.
pub fn drift_test(table: &ObservableTable, pairs: &[(f64, f64)]) -> Result<DriftTestReport> {
    drift_test_with(table, pairs, DRIFT_THRESHOLD)
}

/// [`drift_test`] with another pass threshold.
pub fn drift_test_with(
    table: &ObservableTable,
    pairs: &[(f64, f64)],
    threshold: f64,
) -> Result<DriftTestReport> {
    let find = |t: f64| {
        table
            .checkpoints
            .iter()
            .position(|&c| (c - t).abs() < 1e-9)
            .ok_or_else(|| Error::InvalidConfig(format!("no checkpoint at t = {t}")))
    };
    let mut cells = Vec::new();
    for &(t0, t1) in pairs {
        let (c0, c1) = (find(t0)?, find(t1)?);
        for (o, name) in table.observables.iter().enumerate() {
            let spec = by_name(name)?;
            let comps: &[Component] = if spec.is_real() {
                &[Component::Re]
            } else {
                &[Component::Re, Component::Im]
            };
            for k in 0..table.n_points {
                for &comp in comps {
                    let part = |v: C64| if comp == Component::Re { v.re } else { v.im };
                    let mut incs = Vec::with_capacity(table.n_paths);
                    let mut effective = 0;
                    for p in 0..table.n_paths {
                        let (a, s0) = table.value(p, c0, o, k);
                        let (b, _) = table.value(p, c1, o, k);
                        if !s0 {
                            effective += 1;
                        }
                        incs.push(part(b) - part(a));
                    }
                    let n = incs.len() as f64;
                    let mean = incs.iter().sum::<f64>() / n;
                    let var = if incs.len() > 1 {
                        incs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
                    } else {
                        0.0
                    };
                    let stderr = (var / n).sqrt();
                    let degenerate = incs.iter().all(|x| *x == incs[0]);
                    let usable = effective >= MIN_EFFECTIVE
                        && !degenerate
                        && stderr > 0.0
                        && stderr.is_finite();
                    let z = if usable { mean / stderr } else { f64::NAN };
                    let verdict = if !usable {
                        Verdict::Inconclusive
                    } else if z.abs() <= threshold {
                        Verdict::Pass
                    } else {
                        Verdict::Fail
                    };
                    cells.push(DriftCell {
                        observable: name.clone(),
                        point_id: k,
                        component: comp,
                        t0,
                        t1,
                        mean,
                        stderr,
                        z,
                        count: incs.len(),
                        effective,
                        verdict,
                    });
                }
            }
        }
    }
    let n_tested = cells
        .iter()
        .filter(|c| c.verdict != Verdict::Inconclusive)
        .count();
    let n_failed = cells.iter().filter(|c| c.verdict == Verdict::Fail).count();
    let per_cell = two_sided_tail(threshold);
    let expected = per_cell * n_tested as f64;
    let note = format!(
        "{n_tested} cells at |z| <= {threshold}: per-cell false failure rate {per_cell:.2e}, \
         {expected:.3} expected false failures; Bonferroni family-wise level {:.3}",
        (per_cell * n_tested as f64).min(1.0)
    );
    Ok(DriftTestReport {
        threshold,
        n_tested,
        n_failed,
        n_inconclusive: cells.len() - n_tested,
        cells,
        expected_false_failures: expected,
        multiplicity_note: note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchrammRow {
    pub point: [f64; 2],
    pub n_left: usize,
    pub n_right: usize,
    pub n_undecided: usize,
    /// Swallowed before `T`, included in the left/right counts.
    pub n_swallowed: usize,
    pub fraction_left: f64,
    pub stderr: f64,
    pub exact: f64,
    pub z: f64,
    pub undecided_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchrammReport {
    pub n_paths: usize,
    pub kappa: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub rows: Vec<SchrammRow>,
    /// Some point has more than 5% undecided paths.
    pub flagged: bool,
}

impl SchrammReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }
}

/// `(1/π) arg tanh(z/4)`.
pub fn schramm_formula(z: C64) -> f64 {
    let t = (crate::correlators::normalize(z) * 0.25).tanh();
    C64::new(t.re, t.im + 0.0).arg() / PI
}

/// Fraction of paths passing to the right of each point, i.e. with the
/// point on the left, against Schramm's formula.
pub fn schramm_estimate(cfg: &EnsembleConfig, points: &[C64]) -> Result<SchrammReport> {
    let cfg = EnsembleConfig {
        points: points.iter().map(|z| [z.re, z.im]).collect(),
        observables: vec![],
        checkpoints: vec![],
        ..cfg.clone()
    };
    cfg.validate()?;
    if cfg.kappa != 4.0 {
        return Err(Error::InvalidConfig(format!(
            "Schramm's formula is for kappa = 4, got {}",
            cfg.kappa
        )));
    }
    let n = points.len();
    let n_steps = cfg.n_steps();
    // per point: [left, right, undecided, swallowed]
    let counts = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| -> Result<Vec<[usize; 4]>> {
            let mut drv = BrownianDriver::new(cfg.kappa, cfg.dt, cfg.seed, path as u64);
            let mut st = LoewnerState::new(points)?;
            for _ in 0..n_steps {
                st.step(drv.next_increment(), cfg.dt)?;
            }
            Ok(st
                .points
                .iter()
                .map(|p| {
                    let mut c = [0; 4];
                    match classify_side(p, cfg.eps_undecided) {
                        Classification::Left => c[0] = 1,
                        Classification::Right => c[1] = 1,
                        Classification::Undecided => c[2] = 1,
                    }
                    if matches!(p.status, PointStatus::Swallowed { .. }) {
                        c[3] = 1;
                    }
                    c
                })
                .collect())
        })
        .try_reduce(
            || vec![[0; 4]; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    for i in 0..4 {
                        x[i] += y[i];
                    }
                }
                Ok(a)
            },
        )?;
    let rows: Vec<SchrammRow> = points
        .iter()
        .zip(counts)
        .map(|(&z, [l, r, u, s])| {
            let decided = (l + r) as f64;
            let exact = schramm_formula(z);
            let frac = if decided > 0.0 {
                l as f64 / decided
            } else {
                f64::NAN
            };
            let mut se = (frac * (1.0 - frac) / decided).sqrt();
            if !(se > 0.0) {
                // all paths agree: fall back to the null-hypothesis error
                se = (exact * (1.0 - exact) / decided).sqrt();
            }
            SchrammRow {
                point: [z.re, z.im],
                n_left: l,
                n_right: r,
                n_undecided: u,
                n_swallowed: s,
                fraction_left: frac,
                stderr: se,
                exact,
                z: (frac - exact) / se,
                undecided_fraction: u as f64 / cfg.n_paths as f64,
            }
        })
        .collect();
    let flagged = rows.iter().any(|r| r.undecided_fraction > 0.05);
    Ok(SchrammReport {
        n_paths: cfg.n_paths,
        kappa: cfg.kappa,
        dt: cfg.dt,
        horizon: cfg.horizon,
        rows,
        flagged,
    })
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::SolverFailure(
            "matrix is not square or does not match the right side".into(),
        ));
    }
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() <= 1e-14 * scale {
            return Err(Error::SolverFailure(format!("singular at column {col}")));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Ok(x)
}

/// Grid on `[-L, L] × [0, π]`: Dirichlet at `y = 0` and at `x = ±L`,
/// Neumann at `y = π` by ghost reflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub truncation: f64,
}

impl Lattice {
    pub fn new(mesh: f64, truncation: f64) -> Result<Lattice> {
        if !(mesh > 0.0) || !(truncation > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "mesh {mesh}, truncation {truncation}"
            )));
        }
        let ny = (PI / mesh).round().max(2.0) as usize;
        let nx = (2.0 * truncation / mesh).round().max(2.0) as usize;
        Ok(Lattice {
            nx,
            ny,
            hx: 2.0 * truncation / nx as f64,
            hy: PI / ny as f64,
            truncation,
        })
    }

    pub fn node(&self, i: usize, j: usize) -> C64 {
        C64::new(-self.truncation + i as f64 * self.hx, j as f64 * self.hy)
    }

    /// Nearest node to `z`.
    pub fn snap(&self, z: C64) -> (usize, usize) {
        let i = ((z.re + self.truncation) / self.hx)
            .round()
            .clamp(0.0, self.nx as f64) as usize;
        let j = (z.im / self.hy).round().clamp(0.0, self.ny as f64) as usize;
        (i, j)
    }

    /// Lattice Green's function `-Δ_h G = 2π δ/(h_x h_y)` with source at
    /// node `src`, evaluated at the nodes `targets`. Separation of
    /// variables: the `y` operator is diagonalised exactly by
    /// `sin((m+½)π j/N_y)`, leaving one tridiagonal solve in `x` per mode.
    pub fn green(&self, src: (usize, usize), targets: &[(usize, usize)]) -> Result<Vec<f64>> {
        let (i0, j0) = src;
        let (nx, ny) = (self.nx, self.ny);
        if i0 > nx || j0 > ny || targets.iter().any(|&(i, j)| i > nx || j > ny) {
            return Err(Error::InvalidConfig("node outside the lattice".into()));
        }
        let mut out = vec![0.0; targets.len()];
        if j0 == 0 || i0 == 0 || i0 == nx {
            return Ok(out);
        }
        let weight = if j0 == ny { 0.5 } else { 1.0 };
        let strength = 2.0 * PI / (self.hx * self.hy);
        let hx2 = self.hx * self.hx;
        let m_int = nx - 1;
        let mut diag = vec![0.0; m_int];
        let mut rhs = vec![0.0; m_int];
        for m in 0..ny {
            let theta = (m as f64 + 0.5) * PI / ny as f64;
            let lambda = (2.0 - 2.0 * theta.cos()) / (self.hy * self.hy);
            let cm = strength * weight * (theta * j0 as f64).sin() / (ny as f64 / 2.0);
            // Thomas algorithm on -g_{i-1} + (2 + λh²) g_i - g_{i+1} = h² c δ
            rhs.iter_mut().for_each(|r| *r = 0.0);
            rhs[i0 - 1] = hx2 * cm;
            let b = 2.0 + lambda * hx2;
            diag[0] = b;
            for k in 1..m_int {
                if diag[k - 1] == 0.0 {
                    return Err(Error::SolverFailure(format!("zero pivot in mode {m}")));
                }
                let f = -1.0 / diag[k - 1];
                diag[k] = b + f;
                rhs[k] -= f * rhs[k - 1];
            }
            if diag[m_int - 1] == 0.0 {
                return Err(Error::SolverFailure(format!("zero pivot in mode {m}")));
            }
            rhs[m_int - 1] /= diag[m_int - 1];
            for k in (0..m_int - 1).rev() {
                rhs[k] = (rhs[k] + rhs[k + 1]) / diag[k];
            }
            for (o, &(i, j)) in out.iter_mut().zip(targets) {
                if i > 0 && i < nx {
                    *o += rhs[i - 1] * (theta * j as f64).sin();
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePair {
    pub source: [f64; 2],
    pub target: [f64; 2],
    pub discrete: f64,
    pub continuum: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeReport {
    pub mesh: f64,
    pub truncation: f64,
    pub pairs: Vec<LatticePair>,
    pub max_rel_error: f64,
}

/// Source/target pairs near the centre, including a target on the Neumann
/// line.
pub const LATTICE_PAIRS: [([f64; 2], [f64; 2]); 6] = [
    ([0.0, 1.5], [1.0, 1.9]),
    ([0.0, 1.5], [-0.7, 2.1]),
    ([0.0, 1.5], [0.5, PI]),
    ([0.5, 1.0], [1.5, 0.5]),
    ([0.5, 1.0], [-0.5, 2.5]),
    ([-0.4, 2.4], [0.8, 2.9]),
];

/// Lattice Green's function against `green_strip` at [`LATTICE_PAIRS`].
pub fn lattice_green_check(mesh: f64, truncation: f64) -> Result<LatticeReport> {
    if mesh > 1.0 / 32.0 + 1e-15 || truncation < 6.0 * PI - 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "need mesh <= 1/32 and L >= 6π, got {mesh}, {truncation}"
        )));
    }
    let lat = Lattice::new(mesh, truncation)?;
    let mut pairs = Vec::new();
    for (s, t) in LATTICE_PAIRS {
        let (src, tgt) = (lat.snap(to_c64(s)), lat.snap(to_c64(t)));
        let discrete = lat.green(src, &[tgt])?[0];
        let (zs, zt) = (lat.node(src.0, src.1), lat.node(tgt.0, tgt.1));
        let continuum = green_strip(zs, zt)?;
        pairs.push(LatticePair {
            source: [zs.re, zs.im],
            target: [zt.re, zt.im],
            discrete,
            continuum,
            rel_error: (2.0 * discrete - 2.0 * continuum).abs() / (2.0 * continuum).abs(),
        });
    }
    let max_rel_error = pairs.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    Ok(LatticeReport {
        mesh,
        truncation,
        pairs,
        max_rel_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> EnsembleConfig {
        EnsembleConfig {
            n_paths: 8,
            horizon: 0.2,
            checkpoints: vec![0.0, 0.1, 0.2],
            ..Default::default()
        }
    }

    #[test]
    fn dense_solve_small_systems() {
        let x = dense_solve(vec![vec![0.0, 2.0], vec![3.0, 1.0]], vec![4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        assert!(matches!(
            dense_solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]),
            Err(Error::SolverFailure(_))
        ));
    }

    #[test]
    fn lattice_green_matches_dense_solve() {
        // tiny grid: the full 5-point system assembled directly
        let lat = Lattice {
            nx: 8,
            ny: 5,
            hx: 0.4,
            hy: PI / 5.0,
            truncation: 1.6,
        };
        let (nx, ny) = (lat.nx, lat.ny);
        let idx = |i: usize, j: usize| (i - 1) * ny + (j - 1);
        let n = (nx - 1) * ny;
        let mut a = vec![vec![0.0; n]; n];
        let (ax, ay) = (1.0 / (lat.hx * lat.hx), 1.0 / (lat.hy * lat.hy));
        for i in 1..nx {
            for j in 1..=ny {
                let r = idx(i, j);
                a[r][r] = 2.0 * ax + 2.0 * ay;
                if i > 1 {
                    a[r][idx(i - 1, j)] -= ax;
                }
                if i + 1 < nx {
                    a[r][idx(i + 1, j)] -= ax;
                }
                if j > 1 {
                    a[r][idx(i, j - 1)] -= ay;
                }
                // ghost node above the Neumann row mirrors the one below
                if j < ny {
                    a[r][idx(i, j + 1)] -= ay;
                } else {
                    a[r][idx(i, j - 1)] -= ay;
                }
            }
        }
        for src in [(3, 2), (4, 5), (6, 1)] {
            let mut b = vec![0.0; n];
            b[idx(src.0, src.1)] = 2.0 * PI / (lat.hx * lat.hy);
            let want = dense_solve(a.clone(), b).unwrap();
            let targets: Vec<_> = (1..nx)
                .flat_map(|i| (1..=ny).map(move |j| (i, j)))
                .collect();
            let got = lat.green(src, &targets).unwrap();
            for (k, &(i, j)) in targets.iter().enumerate() {
                assert!(
                    (got[k] - want[idx(i, j)]).abs() < 1e-10,
                    "{src:?} at {:?}",
                    (i, j)
                );
            }
        }
    }

    #[test]
    fn lattice_source_on_dirichlet_line_vanishes() {
        let lat = Lattice::new(1.0 / 32.0, 6.0 * PI).unwrap();
        let src = lat.snap(C64::new(0.3, 0.0));
        let g = lat
            .green(
                src,
                &[lat.snap(C64::new(0.5, 1.0)), lat.snap(C64::new(0.3, 0.5))],
            )
            .unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn lattice_check_rejects_coarse_meshes() {
        assert!(lattice_green_check(0.1, 6.0 * PI).is_err());
        assert!(lattice_green_check(1.0 / 32.0, 5.0).is_err());
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_fields() {
        let cfg = EnsembleConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"T\""));
        let back: EnsembleConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        let partial: EnsembleConfig = serde_json::from_str(r#"{"n_paths": 10, "T": 2.0}"#).unwrap();
        assert_eq!(partial.n_paths, 10);
        assert_eq!(partial.horizon, 2.0);
        assert!(serde_json::from_str::<EnsembleConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(EnsembleConfig::default().validate().is_ok());
        let bad = [
            EnsembleConfig {
                checkpoints: vec![0.0, 2.0],
                ..Default::default()
            },
            EnsembleConfig {
                checkpoints: vec![0.5, 0.2],
                ..Default::default()
            },
            EnsembleConfig {
                points: vec![[0.1, 0.1]],
                ..Default::default()
            },
            EnsembleConfig {
                points: vec![[0.0, 4.0]],
                ..Default::default()
            },
            EnsembleConfig {
                dt: 0.0,
                ..Default::default()
            },
            EnsembleConfig {
                observables: vec!["nope".into()],
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn ensembles_are_reproducible() {
        let cfg = EnsembleConfig {
            n_paths: 2,
            ..small_cfg()
        };
        let a = run_ensemble(&cfg).unwrap();
        let b = run_ensemble(&cfg).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.write_csv(&mut buf_a).unwrap();
        b.write_csv(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        let header = String::from_utf8(buf_a).unwrap();
        assert!(header.starts_with("path_id,t,observable,point_id,re,im,stopped\n"));
    }

    #[test]
    fn zero_kappa_paths_coincide_and_are_inconclusive() {
        let cfg = EnsembleConfig {
            kappa: 0.0,
            n_paths: 150,
            ..small_cfg()
        };
        let tab = run_ensemble(&cfg).unwrap();
        for p in 1..tab.n_paths {
            for o in 0..tab.observables.len() {
                for k in 0..tab.n_points {
                    assert_eq!(tab.value(p, 2, o, k), tab.value(0, 2, o, k));
                }
            }
        }
        let rep = drift_test(&tab, &[(0.0, 0.2)]).unwrap();
        assert!(rep.cells.iter().all(|c| c.verdict == Verdict::Inconclusive));
        assert!(rep.all_pass());
    }

    #[test]
    fn initial_checkpoint_is_the_closed_form() {
        let cfg = small_cfg();
        let tab = run_ensemble(&cfg).unwrap();
        let specs: Vec<_> = cfg
            .observables
            .iter()
            .map(|n| by_name(n).unwrap())
            .collect();
        let pts = cfg.all_points();
        let st = LoewnerState::new(&pts).unwrap();
        for (o, spec) in specs.iter().enumerate() {
            for k in 0..tab.n_points {
                let want = spec
                    .evaluate(&st, &point_tuple(spec, k, tab.n_points))
                    .unwrap();
                for p in 0..tab.n_paths {
                    assert_eq!(tab.value(p, 0, o, k), (want, false));
                }
            }
        }
    }

    #[test]
    fn stopped_values_stay_frozen() {
        // with κ = 0 the vertical slit reaches 0.25i at t ≈ 0.0156
        let cfg = EnsembleConfig {
            kappa: 0.0,
            n_paths: 2,
            points: vec![[0.0, 0.25]],
            observables: vec!["schramm".into(), "current".into()],
            ..small_cfg()
        };
        let tab = run_ensemble(&cfg).unwrap();
        for p in 0..tab.n_paths {
            for o in 0..2 {
                let (v1, s1) = tab.value(p, 1, o, 0);
                let (v2, s2) = tab.value(p, 2, o, 0);
                if s1 {
                    assert!(s2);
                    assert_eq!(v1, v2);
                }
            }
        }
        assert!((0..tab.n_paths).all(|p| tab.value(p, 1, 0, 0).1));
    }

    #[test]
    fn drift_needs_a_known_checkpoint() {
        let tab = run_ensemble(&small_cfg()).unwrap();
        assert!(drift_test(&tab, &[(0.0, 0.15)]).is_err());
    }

    #[test]
    fn schramm_formula_values() {
        assert!((schramm_formula(C64::new(0.0, PI)) - 0.5).abs() < 1e-15);
        assert!(schramm_formula(C64::new(2.0, 0.0)).abs() < 1e-15);
        assert!((schramm_formula(C64::new(-2.0, 0.0)) - 1.0).abs() < 1e-15);
        // monotone decreasing along the Neumann line
        let v: Vec<f64> = [-6.0, -2.0, 0.0, 2.0, 6.0]
            .iter()
            .map(|&x| schramm_formula(C64::new(x, PI)))
            .collect();
        assert!(v.windows(2).all(|w| w[0] > w[1]));
    }
}
