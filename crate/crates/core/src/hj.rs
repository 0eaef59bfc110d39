//! Euler–Lagrange dynamics, shooting, and Hamilton's principal function.
//!
//! The equations of motion are solved in mass-matrix form `M(q, v) v̇ = F(q, v)`
//! with `M = ∂²L/∂v∂v` and `F_l = ∂L/∂q^l − (∂²L/∂v^l∂q^k) v^k`, integrated by
//! classical RK4 with the action carried as an extra state component.

use std::collections::HashMap;
use std::io::{self, Write};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::diff::{gradient_at, vector_gradient, DiffConfig, DiffMethod, TwoPointFunction};
use crate::error::{Error, Result};
use crate::geometry::{
    a_tensor_with, christoffel_lc, christoffel_with, metric_derivatives, quartic_derivatives,
    skewness_derivatives, Lagrangian,
};
use crate::tensor::{invert_matrix, solve_general, solve_symmetric, DenseTensor, Matrix};

/// Condition bound on the velocity Hessian before a step is rejected.
pub const MAX_MASS_CONDITION: f64 = 1e10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Number of RK4 steps on `[0, 1]`.
    pub grid: usize,
    /// Endpoint tolerance, relative to `max(1, |y|_inf)`.
    pub shooting_tol: f64,
    pub max_newton: usize,
    /// Largest `|y - x|_2` accepted by [`shoot`].
    pub trust_radius: f64,
    /// Relative forward-difference step of the shooting Jacobian.
    pub jacobian_step: f64,
    /// Used for field derivatives that have no closed form.
    pub diff: DiffConfig,
    /// Cache principal-function values keyed by the exact bits of `(x, y)`.
    pub memo: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            grid: 200,
            shooting_tol: 1e-13,
            max_newton: 20,
            trust_radius: 0.5,
            jacobian_step: 1e-7,
            diff: DiffConfig::finite_difference(),
            memo: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.grid == 0 {
            return Err(Error::Config("grid must have at least one step".into()));
        }
        for (name, v) in [
            ("shooting_tol", self.shooting_tol),
            ("trust_radius", self.trust_radius),
            ("jacobian_step", self.jacobian_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_newton == 0 {
            return Err(Error::Config("max_newton must be at least 1".into()));
        }
        if self.diff.method != DiffMethod::FiniteDifference {
            return Err(Error::Config(
                "field derivatives without closed forms need the finite-difference method".into(),
            ));
        }
        self.diff.validate()
    }
}

/// Samples of a solution on a uniform grid of `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    /// Running action `∫_0^t L`.
    pub action: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn endpoint(&self) -> &[f64] {
        self.positions.last().expect("non-empty trajectory")
    }

    pub fn total_action(&self) -> f64 {
        *self.action.last().expect("non-empty trajectory")
    }

    fn push(&mut self, t: f64, q: &[f64], v: &[f64], a: f64) {
        self.times.push(t);
        self.positions.push(q.to_vec());
        self.velocities.push(v.to_vec());
        self.action.push(a);
    }

    /// Writes `t, q0.., v0.., action` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.positions.first().map_or(0, |p| p.len());
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("q{i}")));
        header.extend((0..n).map(|i| format!("v{i}")));
        header.push("action".into());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![format!("{:e}", self.times[k])];
            row.extend(self.positions[k].iter().map(|c| format!("{c:e}")));
            row.extend(self.velocities[k].iter().map(|c| format!("{c:e}")));
            row.push(format!("{:e}", self.action[k]));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, c| m.max(c.abs()))
}

fn check_dims(l: &Lagrangian, vs: &[&[f64]]) -> Result<()> {
    let n = l.dim();
    for v in vs {
        if v.len() != n {
            return Err(Error::Dimension(format!(
                "lagrangian has dimension {n}, got a vector of length {}",
                v.len()
            )));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite state".into()));
        }
    }
    Ok(())
}

/// Field values and first derivatives at one point, as dense arrays.
struct LocalFields {
    g: Matrix,
    dg: Vec<Matrix>,
    t: Option<(DenseTensor, Vec<DenseTensor>)>,
    c: Option<(DenseTensor, Vec<DenseTensor>)>,
}

impl LocalFields {
    fn at(l: &Lagrangian, q: &[f64], cfg: &DiffConfig) -> Result<Self> {
        let g = l.g.metric(q)?;
        let dg = metric_derivatives(l.g.as_ref(), q, cfg)?;
        let t = if l.alpha != 0.0 {
            let t = l.t.skewness(q)?.to_dense();
            let dt = skewness_derivatives(l.t.as_ref(), q, cfg)?
                .iter()
                .map(|d| d.to_dense())
                .collect();
            Some((t, dt))
        } else {
            None
        };
        let c = if !l.c.is_zero() {
            let c = l.c.quartic(q)?.to_dense();
            let dc = quartic_derivatives(l.c.as_ref(), q, cfg)?
                .iter()
                .map(|d| d.to_dense())
                .collect();
            Some((c, dc))
        } else {
            None
        };
        Ok(LocalFields { g, dg, t, c })
    }

    fn lagrangian(&self, alpha: f64, v: &[f64]) -> f64 {
        let mut val = 0.5 * self.g.bilinear(v, v);
        if let Some((t, _)) = &self.t {
            val += alpha / 6.0 * t.full_contraction(v);
        }
        if let Some((c, _)) = &self.c {
            val += c.full_contraction(v) / 24.0;
        }
        val
    }

    fn momentum(&self, alpha: f64, v: &[f64]) -> Vec<f64> {
        let mut p = self.g.mul_vec(v);
        if let Some((t, _)) = &self.t {
            for (pi, ti) in p.iter_mut().zip(t.contract_trailing(v)) {
                *pi += 0.5 * alpha * ti;
            }
        }
        if let Some((c, _)) = &self.c {
            for (pi, ci) in p.iter_mut().zip(c.contract_trailing(v)) {
                *pi += ci / 6.0;
            }
        }
        p
    }

    fn accel(&self, alpha: f64, v: &[f64]) -> Result<Vec<f64>> {
        let n = v.len();
        let mut mass = self.g.clone();
        let mut force: Vec<f64> = (0..n)
            .map(|l| {
                let dq = 0.5 * self.dg[l].bilinear(v, v);
                let mix: f64 = (0..n).map(|k| v[k] * self.dg[k].mul_vec(v)[l]).sum();
                dq - mix
            })
            .collect();
        if let Some((t, dt)) = &self.t {
            let tv = t.contract_to_matrix(v);
            for i in 0..n {
                for j in 0..n {
                    mass.set(i, j, mass.get(i, j) + alpha * tv.get(i, j));
                }
            }
            for (l, f) in force.iter_mut().enumerate() {
                let dq = alpha / 6.0 * dt[l].full_contraction(v);
                let mix: f64 = (0..n)
                    .map(|k| v[k] * 0.5 * alpha * dt[k].contract_trailing(v)[l])
                    .sum();
                *f += dq - mix;
            }
        }
        if let Some((c, dc)) = &self.c {
            let cvv = c.contract_to_matrix(v);
            for i in 0..n {
                for j in 0..n {
                    mass.set(i, j, mass.get(i, j) + 0.5 * cvv.get(i, j));
                }
            }
            for (l, f) in force.iter_mut().enumerate() {
                let dq = dc[l].full_contraction(v) / 24.0;
                let mix: f64 = (0..n)
                    .map(|k| v[k] * dc[k].contract_trailing(v)[l] / 6.0)
                    .sum();
                *f += dq - mix;
            }
        }
        match solve_symmetric(&mass, &force, MAX_MASS_CONDITION) {
            Ok((a, _)) => Ok(a),
            Err(Error::Singular { condition }) => Err(Error::Regularity {
                speed: norm2(v),
                condition,
            }),
            Err(e) => Err(e),
        }
    }
}

/// Acceleration from the implicit Euler–Lagrange equations.
pub fn el_accel(l: &Lagrangian, q: &[f64], v: &[f64], cfg: &DiffConfig) -> Result<Vec<f64>> {
    check_dims(l, &[q, v])?;
    LocalFields::at(l, q, cfg)?.accel(l.alpha, v)
}

/// Acceleration from the explicit cubic form
/// `v̇ = −α T^l_jk v^j v̇^k − Γ^l_jk v^j v^k − (α/6) g^{lr} A_rjks v^j v^k v^s`,
/// solved by fixed-point iteration in `v̇`. Ignores any quartic term.
pub fn el_accel_explicit(l: &Lagrangian, q: &[f64], v: &[f64], cfg: &DiffConfig) -> Result<Vec<f64>> {
    check_dims(l, &[q, v])?;
    let n = l.dim();
    let g = l.g.metric(q)?;
    let inv = invert_matrix(&g)?;
    let gamma = christoffel_lc(l.g.as_ref(), q, cfg)?;
    let t = l.t.skewness(q)?.to_dense();
    let a = a_tensor_with(&skewness_derivatives(l.t.as_ref(), q, cfg)?, n);

    let geo: Vec<f64> = (0..n)
        .map(|i| {
            let m = gamma_slice(&gamma.upper, i, n);
            m.bilinear(v, v)
        })
        .collect();
    let avvv = inv.mul_vec(&a.contract_trailing(v));
    let tv = t.contract_to_matrix(v);
    let tv_raised = inv.mul(&tv);

    let mut acc = vec![0.0; n];
    for _ in 0..200 {
        let coupling = tv_raised.mul_vec(&acc);
        let next: Vec<f64> = (0..n)
            .map(|i| -l.alpha * coupling[i] - geo[i] - l.alpha / 6.0 * avvv[i])
            .collect();
        let change = next
            .iter()
            .zip(&acc)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        acc = next;
        if change <= 1e-16 * max_abs(&acc).max(f64::MIN_POSITIVE) {
            return Ok(acc);
        }
    }
    Err(Error::Regularity {
        speed: norm2(v),
        condition: f64::INFINITY,
    })
}

fn gamma_slice(upper: &DenseTensor, i: usize, n: usize) -> Matrix {
    Matrix::from_fn(n, |j, k| upper.get(&[i, j, k]))
}

/// Canonical momentum `∂L/∂v` at `(q, v)`.
pub fn momentum(l: &Lagrangian, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_dims(l, &[q, v])?;
    let f = LocalFields {
        g: l.g.metric(q)?,
        dg: Vec::new(),
        t: (l.alpha != 0.0).then(|| l.t.skewness(q).map(|t| (t.to_dense(), Vec::new()))).transpose()?,
        c: (!l.c.is_zero()).then(|| l.c.quartic(q).map(|c| (c.to_dense(), Vec::new()))).transpose()?,
    };
    Ok(f.momentum(l.alpha, v))
}

/// RK4 on `[0, 1]` with `steps` uniform steps from `(q0, v0)`.
pub fn integrate(
    l: &Lagrangian,
    q0: &[f64],
    v0: &[f64],
    steps: usize,
    cfg: &DiffConfig,
) -> Result<Trajectory> {
    check_dims(l, &[q0, v0])?;
    if steps == 0 {
        return Err(Error::Config("integration needs at least one step".into()));
    }
    let n = l.dim();
    let h = 1.0 / steps as f64;
    let mut traj = Trajectory::default();
    let mut q = q0.to_vec();
    let mut v = v0.to_vec();
    let mut action = 0.0;
    traj.push(0.0, &q, &v, action);

    let rhs = |q: &[f64], v: &[f64]| -> Result<(Vec<f64>, f64)> {
        let f = LocalFields::at(l, q, cfg)?;
        Ok((f.accel(l.alpha, v)?, f.lagrangian(l.alpha, v)))
    };
    let shift = |base: &[f64], d: &[f64], s: f64| -> Vec<f64> {
        base.iter().zip(d).map(|(b, x)| b + s * x).collect()
    };

    for step in 0..steps {
        let stage = || -> Result<(Vec<f64>, Vec<f64>, f64)> {
            let (a1, l1) = rhs(&q, &v)?;
            let (q2, v2) = (shift(&q, &v, 0.5 * h), shift(&v, &a1, 0.5 * h));
            let (a2, l2) = rhs(&q2, &v2)?;
            let (q3, v3) = (shift(&q, &v2, 0.5 * h), shift(&v, &a2, 0.5 * h));
            let (a3, l3) = rhs(&q3, &v3)?;
            let (q4, v4) = (shift(&q, &v3, h), shift(&v, &a3, h));
            let (a4, l4) = rhs(&q4, &v4)?;
            let qn = (0..n)
                .map(|i| q[i] + h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]))
                .collect();
            let vn = (0..n)
                .map(|i| v[i] + h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]))
                .collect();
            Ok((qn, vn, h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4)))
        };
        match stage() {
            Ok((qn, vn, da)) => {
                if qn.iter().chain(&vn).any(|c: &f64| !c.is_finite()) {
                    return Err(Error::Integration {
                        step,
                        partial: Box::new(traj),
                        source: Box::new(Error::Domain("state became non-finite".into())),
                    });
                }
                q = qn;
                v = vn;
                action += da;
                traj.push((step + 1) as f64 * h, &q, &v, action);
            }
            Err(e) => {
                return Err(Error::Integration {
                    step,
                    partial: Box::new(traj),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(traj)
}

#[derive(Clone, Debug, Serialize)]
pub struct ShootingResult {
    pub v_init: Vec<f64>,
    pub endpoint_residual: f64,
    /// Trajectories integrated along the Newton sequence, excluding those
    /// spent on Jacobian columns.
    pub newton_iterations: usize,
    pub trajectory: Trajectory,
}

fn stationary(x: &[f64], steps: usize) -> Trajectory {
    let mut traj = Trajectory::default();
    let zero = vec![0.0; x.len()];
    for k in 0..=steps {
        traj.push(k as f64 / steps as f64, x, &zero, 0.0);
    }
    traj
}

fn endpoint_map(l: &Lagrangian, x: &[f64], v: &[f64], s: &SolverSettings) -> Result<Trajectory> {
    integrate(l, x, v, s.grid, &s.diff)
}

/// Solves `γ(0) = x`, `γ(1) = y` by Newton iteration on the initial velocity,
/// starting from `y − x`. The Jacobian is formed by forward differences and
/// reused until the residual stops contracting.
pub fn shoot(l: &Lagrangian, x: &[f64], y: &[f64], s: &SolverSettings) -> Result<ShootingResult> {
    check_dims(l, &[x, y])?;
    s.validate()?;
    let n = l.dim();
    let delta: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let dist = norm2(&delta);
    if dist > s.trust_radius {
        return Err(Error::Bvp {
            reason: format!("|y - x| = {dist:.3e} is outside the trust radius {}", s.trust_radius),
            residual: dist,
            iterations: 0,
        });
    }
    if dist == 0.0 {
        return Ok(ShootingResult {
            v_init: vec![0.0; n],
            endpoint_residual: 0.0,
            newton_iterations: 0,
            trajectory: stationary(x, s.grid),
        });
    }
    let tol = s.shooting_tol * max_abs(y).max(1.0);
    let bvp_err = |reason: String, residual: f64, iterations: usize| Error::Bvp {
        reason,
        residual,
        iterations,
    };

    let mut v = delta.clone();
    let mut jac: Option<Matrix> = None;
    let mut prev_res = f64::INFINITY;
    let mut best = f64::INFINITY;
    for iteration in 1..=s.max_newton {
        let traj = endpoint_map(l, x, &v, s).map_err(|e| {
            bvp_err(format!("trajectory failed: {e}"), best, iteration)
        })?;
        let r: Vec<f64> = traj.endpoint().iter().zip(y).map(|(a, b)| a - b).collect();
        let res = max_abs(&r);
        best = best.min(res);
        if res <= tol {
            return Ok(ShootingResult {
                v_init: v,
                endpoint_residual: res,
                newton_iterations: iteration,
                trajectory: traj,
            });
        }
        if res > 0.25 * prev_res {
            jac = None;
        }
        prev_res = res;
        if jac.is_none() {
            let h = s.jacobian_step * max_abs(&v).max(1.0);
            let mut cols = Vec::with_capacity(n);
            for k in 0..n {
                let mut vp = v.clone();
                vp[k] += h;
                let tp = endpoint_map(l, x, &vp, s).map_err(|e| {
                    bvp_err(format!("Jacobian trajectory failed: {e}"), best, iteration)
                })?;
                cols.push(
                    tp.endpoint()
                        .iter()
                        .zip(traj.endpoint())
                        .map(|(a, b)| (a - b) / h)
                        .collect::<Vec<f64>>(),
                );
            }
            jac = Some(Matrix::from_fn(n, |i, k| cols[k][i]));
        }
        let neg: Vec<f64> = r.iter().map(|c| -c).collect();
        let dv = solve_general(jac.as_ref().expect("jacobian"), &neg)
            .map_err(|_| bvp_err("singular shooting Jacobian".into(), best, iteration))?;
        for (vi, d) in v.iter_mut().zip(&dv) {
            *vi += d;
        }
        if norm2(&v) > 10.0 * s.trust_radius.max(dist) {
            return Err(bvp_err(
                "initial velocity left the neighbourhood of y - x".into(),
                best,
                iteration,
            ));
        }
    }
    Err(bvp_err(
        format!("no convergence in {} Newton steps", s.max_newton),
        best,
        s.max_newton,
    ))
}

/// `(∂L/∂v at t = 0, ∂L/∂v at t = 1)` along a trajectory.
pub fn boundary_momenta(l: &Lagrangian, traj: &Trajectory) -> Result<(Vec<f64>, Vec<f64>)> {
    if traj.is_empty() {
        return Err(Error::Dimension("empty trajectory".into()));
    }
    let k = traj.len() - 1;
    Ok((
        momentum(l, &traj.positions[0], &traj.velocities[0])?,
        momentum(l, &traj.positions[k], &traj.velocities[k])?,
    ))
}

/// Hamilton's principal function `S(x, y) = ∫_0^1 L(γ, γ̇) dt` along the
/// shooting solution from `x` to `y`.
pub struct PrincipalFunction {
    lagrangian: Lagrangian,
    settings: SolverSettings,
    memo: Option<Mutex<HashMap<Vec<u64>, f64>>>,
}

impl PrincipalFunction {
    pub fn new(lagrangian: Lagrangian, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        let memo = settings.memo.then(|| Mutex::new(HashMap::new()));
        Ok(PrincipalFunction {
            lagrangian,
            settings,
            memo,
        })
    }

    pub fn lagrangian(&self) -> &Lagrangian {
        &self.lagrangian
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    /// The action with a first-order correction for the residual endpoint
    /// mismatch, `A − P_fin·(γ(1) − y)`.
    fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let shot = shoot(&self.lagrangian, x, y, &self.settings)?;
        let traj = &shot.trajectory;
        if shot.endpoint_residual == 0.0 {
            return Ok(traj.total_action());
        }
        let (_, p_fin) = boundary_momenta(&self.lagrangian, traj)?;
        let miss: f64 = p_fin
            .iter()
            .zip(traj.endpoint().iter().zip(y))
            .map(|(p, (e, t))| p * (e - t))
            .sum();
        Ok(traj.total_action() - miss)
    }
}

impl TwoPointFunction for PrincipalFunction {
    fn dim(&self) -> usize {
        self.lagrangian.dim()
    }

    fn label(&self) -> String {
        format!(
            "principal function of L[{}, {}, {}, alpha = {}]",
            self.lagrangian.g.label(),
            self.lagrangian.t.label(),
            self.lagrangian.c.label(),
            self.lagrangian.alpha
        )
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let key: Option<Vec<u64>> = self
            .memo
            .as_ref()
            .map(|_| x.iter().chain(y).map(|c| c.to_bits()).collect());
        if let (Some(memo), Some(k)) = (&self.memo, &key) {
            if let Some(v) = memo.lock().expect("memo lock").get(k) {
                return Ok(*v);
            }
        }
        let value = self.value(x, y).map_err(|e| match e {
            Error::Dimension(_) | Error::Config(_) => e,
            other => Error::Domain(format!("principal function at x = {x:?}, y = {y:?}: {other}")),
        })?;
        if let (Some(memo), Some(k)) = (&self.memo, key) {
            memo.lock().expect("memo lock").insert(k, value);
        }
        Ok(value)
    }
}

/// Comparison of the principal function's first derivatives at
/// `(q, q + delta)` with near-diagonal expansions in `Δ = delta`.
///
/// `displayed_*` is the truncation with terms in `g`, `Γ`, `Γ·Γ`, `T`, `A`
/// and `C/24`; `corrected_*` adds the `g ∂Γ` term and uses `C/6`, which is
/// what the momentum `∂L/∂v` produces at third order.
#[derive(Clone, Debug, Serialize)]
pub struct TaylorReport {
    pub delta: Vec<f64>,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    pub displayed_x: Vec<f64>,
    pub displayed_y: Vec<f64>,
    pub corrected_x: Vec<f64>,
    pub corrected_y: Vec<f64>,
    pub residual_x_displayed: f64,
    pub residual_y_displayed: f64,
    pub residual_x_corrected: f64,
    pub residual_y_corrected: f64,
}

struct ExpansionTerms {
    linear: Vec<f64>,
    gamma: Vec<f64>,
    gamma_gamma: Vec<f64>,
    dgamma: Vec<f64>,
    skew: Vec<f64>,
    a: Vec<f64>,
    quartic: Vec<f64>,
}

fn expansion_terms(l: &Lagrangian, z: &[f64], d: &[f64], cfg: &DiffConfig) -> Result<ExpansionTerms> {
    let n = l.dim();
    let g = l.g.metric(z)?;
    let dg = metric_derivatives(l.g.as_ref(), z, cfg)?;
    let ch = christoffel_with(&g, &dg)?;
    let dupper = vector_gradient(
        |p| Ok(christoffel_lc(l.g.as_ref(), p, cfg)?.upper.values().to_vec()),
        z,
        cfg,
    )?;
    let t = l.t.skewness(z)?.to_dense();
    let a = a_tensor_with(&skewness_derivatives(l.t.as_ref(), z, cfg)?, n);
    let c = l.c.quartic(z)?.to_dense();

    let gamma_d: Vec<f64> = (0..n).map(|j| gamma_slice(&ch.upper, j, n).bilinear(d, d)).collect();
    let mut gamma_gamma = vec![0.0; n];
    let mut dgamma_raw = vec![0.0; n];
    for l_ in 0..n {
        for j in 0..n {
            for k in 0..n {
                gamma_gamma[l_] += ch.lower.get(&[l_, j, k]) * gamma_d[j] * d[k];
                let mut acc = 0.0;
                for s in 0..n {
                    acc += dupper[s][(l_ * n + j) * n + k] * d[s];
                }
                dgamma_raw[l_] += acc * d[j] * d[k];
            }
        }
    }
    let lower_gamma = DenseTensor::from_values(n, 3, ch.lower.values().to_vec())?;
    Ok(ExpansionTerms {
        linear: g.mul_vec(d),
        gamma: lower_gamma.contract_trailing(d),
        gamma_gamma,
        dgamma: g.mul_vec(&dgamma_raw),
        skew: t.contract_trailing(d),
        a: a.contract_trailing(d),
        quartic: c.contract_trailing(d),
    })
}

fn combine(e: &ExpansionTerms, alpha: f64, coeffs: [f64; 7]) -> Vec<f64> {
    let [c_lin, c_gam, c_gg, c_dg, c_t, c_a, c_c] = coeffs;
    (0..e.linear.len())
        .map(|i| {
            c_lin * e.linear[i]
                + c_gam * e.gamma[i]
                + c_gg * e.gamma_gamma[i]
                + c_dg * e.dgamma[i]
                + c_t * alpha * e.skew[i]
                + c_a * alpha * e.a[i]
                + c_c * e.quartic[i]
        })
        .collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn taylor_consistency(
    l: &Lagrangian,
    q: &[f64],
    delta: &[f64],
    settings: &SolverSettings,
) -> Result<TaylorReport> {
    check_dims(l, &[q, delta])?;
    let cfg = &settings.diff;
    let y: Vec<f64> = q.iter().zip(delta).map(|(a, b)| a + b).collect();
    let s = PrincipalFunction::new(l.clone(), settings.clone())?;
    let (grad_x, grad_y) = gradient_at(&s, q, &y, cfg)?;

    let ex = expansion_terms(l, q, delta, cfg)?;
    let ey = expansion_terms(l, &y, delta, cfg)?;
    let sixth = 1.0 / 6.0;
    let displayed_x = combine(&ex, l.alpha, [-1.0, -0.5, -sixth, 0.0, -0.5, -1.0 / 12.0, -1.0 / 24.0]);
    let corrected_x = combine(&ex, l.alpha, [-1.0, -0.5, -sixth, -sixth, -0.5, -1.0 / 12.0, -sixth]);
    let displayed_y = combine(&ey, l.alpha, [1.0, -0.5, sixth, 0.0, 0.5, -1.0 / 12.0, 1.0 / 24.0]);
    let corrected_y = combine(&ey, l.alpha, [1.0, -0.5, sixth, sixth, 0.5, -1.0 / 12.0, sixth]);

    Ok(TaylorReport {
        delta: delta.to_vec(),
        residual_x_displayed: sup_diff(&grad_x, &displayed_x),
        residual_y_displayed: sup_diff(&grad_y, &displayed_y),
        residual_x_corrected: sup_diff(&grad_x, &corrected_x),
        residual_y_corrected: sup_diff(&grad_y, &corrected_y),
        grad_x,
        grad_y,
        displayed_x,
        displayed_y,
        corrected_x,
        corrected_y,
    })
}
