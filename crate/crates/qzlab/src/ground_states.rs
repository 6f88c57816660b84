//! Nonlinear solvers for the leading-order profiles: the 2D ground state R,
//! the vortex ground state, the 2D self-similar pair (P, M) and the 3D
//! self-similar triple (S0, N0, V0).
//!
//! All solvers shoot on an amplitude parameter to bracket the decaying
//! branch, then polish by Newton collocation on the full grid. The 3D
//! density/velocity pair is kept in first-order form
//!   xi N' + 2N + V' + 2V/xi = 0,        xi V' + 5/2 V + (S^2)' = 0,
//! which is equivalent to the usual second-order density equation
//! L(N) = Delta(S^2) for profiles regular at the origin, but collocates
//! without the parasitic near-origin modes of the degenerate Euler operator.

use crate::banded::BandMatrix;
use crate::coupled::BlockSystem;
use crate::error::{Error, Result};
use crate::grid::{GridRef, RadialGrid};
use crate::operators::{
    derivative_matrix, scalar_laplacian_matrix, vector_laplacian_matrix, KL, KU,
};
use crate::profile::{FarField, Profile};
use crate::stencil::{self, Parity};
use std::collections::BTreeMap;

/// Solver bookkeeping attached to a solved bundle.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct SolverMeta {
    pub newton_iterations: usize,
    pub shooting_parameter: Option<f64>,
    pub continuation_path: Vec<f64>,
}

/// A solved nonlinear profile set plus residuals.
#[derive(Debug, Clone)]
pub struct GroundStateBundle {
    pub grid: GridRef,
    pub profiles: BTreeMap<String, Profile>,
    pub residual_inf: f64,
    pub meta: SolverMeta,
}

impl GroundStateBundle {
    pub fn get(&self, name: &str) -> Result<&Profile> {
        self.profiles
            .get(name)
            .ok_or_else(|| Error::MissingProfile(name.into()))
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        self.get(name)?.as_real()
    }
}

pub const DEFAULT_RMAX_2D: f64 = 30.0;
pub const DEFAULT_N_2D: usize = 3000;
pub const DEFAULT_RMAX_3D: f64 = 25.0;
pub const DEFAULT_N_3D: usize = 2500;

// ---------------------------------------------------------------------------
// shooting

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    Crossed,
    Regrew,
}

/// RK4 march of u'' = u - u^3 - lapcorr(u, u', x) recorded at grid nodes.
/// Returns node samples up to `x_end` and the classification.
fn shoot_scalar(
    d: f64,
    vortex: bool,
    c: f64,
    h_node: f64,
    x_end: f64,
    record: Option<&mut Vec<f64>>,
) -> Shot {
    let sub = (h_node / 2e-4).ceil() as usize;
    let hs = h_node / sub as f64;
    let rhs = |x: f64, u: f64, v: f64| -> (f64, f64) {
        let lapcorr = if vortex {
            v / x - u / (x * x)
        } else {
            (d - 1.0) * v / x
        };
        (v, u - u * u * u - lapcorr)
    };
    // series start one substep in
    let x0 = hs;
    let (mut u, mut v) = if vortex {
        (c * x0 + c * x0.powi(3) / 8.0, c + 3.0 * c * x0 * x0 / 8.0)
    } else {
        let upp = (c - c.powi(3)) / d;
        (c + 0.5 * upp * x0 * x0, upp * x0)
    };
    let mut x = x0;
    let mut rec = record;
    if let Some(r) = rec.as_deref_mut() {
        r.push(if vortex { 0.0 } else { c }); // node 0
    }
    let guard = 4.0 * c.abs().max(1.0);
    let mut step_idx = 1usize; // substeps taken since node 0 (x0 = one substep)
    let mut shot = Shot::Regrew;
    'outer: while x < x_end - 0.5 * hs {
        let (k1u, k1v) = rhs(x, u, v);
        let (k2u, k2v) = rhs(x + 0.5 * hs, u + 0.5 * hs * k1u, v + 0.5 * hs * k1v);
        let (k3u, k3v) = rhs(x + 0.5 * hs, u + 0.5 * hs * k2u, v + 0.5 * hs * k2v);
        let (k4u, k4v) = rhs(x + hs, u + hs * k3u, v + hs * k3v);
        u += hs / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += hs / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        x += hs;
        step_idx += 1;
        if step_idx % sub == 0 {
            if let Some(r) = rec.as_deref_mut() {
                r.push(u);
            }
        }
        if u < 0.0 {
            shot = Shot::Crossed;
            break 'outer;
        }
        if u > guard {
            shot = Shot::Regrew;
            break 'outer;
        }
    }
    shot
}

fn bisect<F: FnMut(f64) -> Shot>(
    mut lo: f64,
    mut hi: f64,
    cross_is_high: bool,
    mut f: F,
) -> Result<f64> {
    let want_lo = if cross_is_high { Shot::Regrew } else { Shot::Crossed };
    if f(lo) != want_lo || f(hi) == want_lo {
        return Err(Error::ShootingBracket {
            lo,
            hi,
            what: "bracket endpoints do not straddle the decaying branch".into(),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) == want_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Shooting profile for R / R^(1): node samples on the grid, exponentially
/// extended beyond the trusted region.
fn shot_profile_on_grid(grid: &RadialGrid, d: f64, vortex: bool, c: f64) -> Vec<f64> {
    let h = grid.spacing();
    let x_end = (16.0f64).min(grid.r_max);
    let mut vals = Vec::with_capacity(grid.n);
    shoot_scalar(d, vortex, c, h, x_end, Some(&mut vals));
    let icut_target = ((11.0f64.min(x_end - 1.0)) / h) as usize;
    let icut = icut_target.min(vals.len().saturating_sub(2)).max(1);
    let base = vals[icut].max(1e-300);
    let xcut = icut as f64 * h;
    let mut out = vec![0.0; grid.n];
    for i in 0..grid.n {
        out[i] = if i < icut {
            vals[i]
        } else {
            base * (-(grid.nodes[i] - xcut)).exp()
        };
    }
    out
}

// ---------------------------------------------------------------------------
// single-field Newton polish: Delta u - u + u^3 = 0

fn polish_ground(
    grid: &GridRef,
    vortex: bool,
    u0: Vec<f64>,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = grid.n;
    let lap = if vortex {
        vector_laplacian_matrix(grid)
    } else {
        scalar_laplacian_matrix(grid, Parity::Even)
    };
    let robin_row = stencil::edge_d1_row(n, grid.spacing());
    let residual = |u: &[f64]| -> Vec<f64> {
        let mut f = lap.apply(u);
        for i in 0..n {
            f[i] += -u[i] + u[i].powi(3);
        }
        if vortex {
            f[0] = u[0];
        }
        f[n - 1] = robin_row
            .cols
            .iter()
            .zip(&robin_row.w)
            .map(|(&j, &w)| w * u[j])
            .sum::<f64>()
            + u[n - 1];
        f
    };
    let mut u = u0;
    let mut iters = 0;
    for it in 0..60 {
        iters = it + 1;
        let f = residual(&u);
        let fnorm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut jac = lap.clone();
        for i in 0..n {
            jac.add(i, i, -1.0 + 3.0 * u[i] * u[i]);
        }
        if vortex {
            jac.clear_row(0);
            jac.set(0, 0, 1.0);
        }
        jac.clear_row(n - 1);
        for (&j, &w) in robin_row.cols.iter().zip(&robin_row.w) {
            jac.add(n - 1, j, w);
        }
        jac.add(n - 1, n - 1, 1.0);
        let lu = crate::banded::BandLu::new(&jac);
        if lu.is_singular() {
            return Err(Error::SingularSystem {
                cond: lu.condition_estimate(),
            });
        }
        let du = lu.solve_refined(&jac, &f);
        let step = du.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // damped update
        let mut lam = 1.0;
        loop {
            let un: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a - lam * b).collect();
            let fn_ = residual(&un);
            let nn = fn_.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if nn < fnorm || lam < 1e-3 {
                u = un;
                break;
            }
            lam *= 0.5;
        }
        if step * 1.0_f64.min(1.0) < 1e-13 || step < 1e-13 {
            break;
        }
    }
    // final PDE residual over interior rows
    let mut f = lap.apply(&u);
    for i in 0..n {
        f[i] += -u[i] + u[i].powi(3);
    }
    let lo = if vortex { 1 } else { 0 };
    let res = f[lo..n - 1]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((u, res, iters))
}

fn amplitude_scale(u: &[f64]) -> f64 {
    u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300)
}

/// Ground state R of Delta R - R + R^3 = 0 (d = 2).
pub fn solve_ground_state_2d(rmax: f64, n: usize) -> Result<GroundStateBundle> {
    solve_nls_ground(2, false, rmax, n, "R")
}

/// Vortex ground state of Delta^(1) R - R + R^3 = 0 (d = 2, odd).
pub fn solve_vortex_ground_state(rmax: f64, n: usize) -> Result<GroundStateBundle> {
    solve_nls_ground(2, true, rmax, n, "R1")
}

fn solve_nls_ground(
    d: usize,
    vortex: bool,
    rmax: f64,
    n: usize,
    name: &str,
) -> Result<GroundStateBundle> {
    let grid = RadialGrid::new(d, rmax, n)?;
    let df = d as f64;
    let h = grid.spacing();
    let x_end = (16.0f64).min(rmax);
    let classify = |c: f64| shoot_scalar(df, vortex, c, h, x_end, None);
    // expand the bracket upward until the shot crosses zero
    let mut lo = 0.5;
    let mut hi = 2.0;
    while classify(hi) == Shot::Regrew {
        lo = hi;
        hi *= 1.5;
        if hi > 64.0 {
            return Err(Error::ShootingBracket {
                lo,
                hi,
                what: "no crossing found while expanding the bracket".into(),
            });
        }
    }
    let c = bisect(lo, hi, true, classify)?;
    let u0 = shot_profile_on_grid(&grid, df, vortex, c);
    let (u, res, iters) = polish_ground(&grid, vortex, u0)?;
    let mut u = u;
    if vortex {
        u[0] = 0.0; // boundary row content, exactly
    }
    let scale = amplitude_scale(&u);
    if res / scale > 1e-8 {
        return Err(Error::NewtonDiverged {
            residual: res / scale,
            iters,
        });
    }
    // positivity on (0, rmax): reject sign-changing branches
    let start = if vortex { 1 } else { 0 };
    if u[start..].iter().any(|&v| v < -1e-9 * scale) {
        return Err(Error::SignChange);
    }
    let parity = if vortex { Parity::Odd } else { Parity::Even };
    let p = Profile::new_real(grid.clone(), u, parity, FarField::Decaying)?;
    let mut profiles = BTreeMap::new();
    profiles.insert(name.to_string(), p);
    Ok(GroundStateBundle {
        grid,
        profiles,
        residual_inf: res / scale,
        meta: SolverMeta {
            newton_iterations: iters,
            shooting_parameter: Some(c),
            continuation_path: vec![],
        },
    })
}

// ---------------------------------------------------------------------------
// 2D self-similar pair (P, M)

/// Newton solve of
///   Delta P - P - M P = 0
///   a0^2 L2(M) - Delta M = Delta(P^2),  L2 = xi^2 d2 + 6 xi d1 + 6
/// by continuation in a0 from the (R, -R^2) limit.
pub fn solve_selfsimilar_2d(a0: f64, rmax: f64, n: usize) -> Result<GroundStateBundle> {
    if !(a0 >= 0.0) || a0 > 0.5 {
        return Err(Error::Precondition(format!(
            "a0 = {a0} outside the supported continuation range [0, 0.5]"
        )));
    }
    let base = solve_ground_state_2d(rmax, n)?;
    let grid = base.grid.clone();
    let r = base.values("R")?.to_vec();
    let mut p: Vec<f64> = r.clone();
    let mut m: Vec<f64> = r.iter().map(|&v| -v * v).collect();
    let mut path = vec![];
    if a0 > 0.0 {
        let steps: Vec<f64> = {
            let mut v = vec![];
            let mut a = 0.0;
            while a + 0.025 < a0 - 1e-12 {
                a += 0.025;
                v.push(a);
            }
            v.push(a0);
            v
        };
        for &a in &steps {
            let (pn, mn, _res, it) = newton_pm(&grid, a, p.clone(), m.clone())
                .map_err(|_| Error::ContinuationFailed { at: a })?;
            p = pn;
            m = mn;
            let _ = it;
            path.push(a);
        }
    }
    let lap = scalar_laplacian_matrix(&grid, Parity::Even);
    let mut f1 = lap.apply(&p);
    for i in 0..grid.n {
        f1[i] += -p[i] - m[i] * p[i];
    }
    let res = f1[..grid.n - 1]
        .iter()
        .fold(0.0f64, |mx, v| mx.max(v.abs()))
        / amplitude_scale(&p);
    let scale = amplitude_scale(&p);
    if p.iter().any(|&v| v < -1e-9 * scale) {
        return Err(Error::SignChange);
    }
    let mut profiles = BTreeMap::new();
    profiles.insert(
        "P".into(),
        Profile::new_real(grid.clone(), p, Parity::Even, FarField::Decaying)?,
    );
    profiles.insert(
        "M".into(),
        Profile::new_real(grid.clone(), m, Parity::Even, FarField::Free)?,
    );
    profiles.insert("R".into(), base.profiles["R"].clone());
    Ok(GroundStateBundle {
        grid,
        profiles,
        residual_inf: res,
        meta: SolverMeta {
            newton_iterations: 0,
            shooting_parameter: base.meta.shooting_parameter,
            continuation_path: path,
        },
    })
}

fn newton_pm(
    grid: &GridRef,
    a0: f64,
    mut p: Vec<f64>,
    mut m: Vec<f64>,
) -> Result<(Vec<f64>, Vec<f64>, f64, usize)> {
    let n = grid.n;
    let lap = scalar_laplacian_matrix(grid, Parity::Even);
    // a0^2 L2 - Delta
    let mut eqm = crate::operators::euler_operator_matrix(grid, a0 * a0, 6.0 * a0 * a0, 6.0 * a0 * a0, Parity::Even);
    for i in 0..n {
        let lo = i.saturating_sub(KL);
        let hi = (i + KU).min(n - 1);
        for j in lo..=hi {
            let v = lap.get(i, j);
            if v != 0.0 {
                eqm.add(i, j, -v);
            }
        }
    }
    let robin = stencil::edge_d1_row(n, grid.spacing());
    let resid = |p: &[f64], m: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut f1 = lap.apply(p);
        for i in 0..n {
            f1[i] += -p[i] - m[i] * p[i];
        }
        let p2: Vec<f64> = p.iter().map(|v| v * v).collect();
        let lp2 = lap.apply(&p2);
        let mut f2 = eqm.apply(m);
        for i in 0..n {
            f2[i] -= lp2[i];
        }
        // boundary residuals
        f1[n - 1] = robin
            .cols
            .iter()
            .zip(&robin.w)
            .map(|(&j, &w)| w * p[j])
            .sum::<f64>()
            + p[n - 1];
        f2[n - 1] = robin
            .cols
            .iter()
            .zip(&robin.w)
            .map(|(&j, &w)| w * m[j])
            .sum::<f64>()
            + 3.0 / grid.r_max * m[n - 1];
        (f1, f2)
    };
    let mut iters = 0;
    for it in 0..40 {
        iters = it + 1;
        let (f1, f2) = resid(&p, &m);
        let fnorm = f1
            .iter()
            .chain(&f2)
            .fold(0.0f64, |mx, v| mx.max(v.abs()));
        let mut sys = BlockSystem::new(2, n);
        sys.add_block(0, 0, &lap, None);
        let mm: Vec<f64> = m.iter().map(|&v| -1.0 - v).collect();
        sys.add_diag(0, 0, &mm);
        let mp: Vec<f64> = p.iter().map(|&v| -v).collect();
        sys.add_diag(0, 1, &mp);
        sys.add_block(1, 1, &eqm, None);
        let lap2p = crate::operators::laplacian_times_diag(grid, &p.iter().map(|&v| 2.0 * v).collect::<Vec<_>>());
        sys.add_block(1, 0, &lap2p, Some(&vec![-1.0; n]));
        sys.robin_row(0, grid, 1.0);
        sys.robin_row(1, grid, 3.0 / grid.r_max);
        let rhs = sys.pack(&[&f1, &f2]);
        let dz = sys.solve(&rhs)?;
        let fields = sys.unpack(&dz);
        let step = dz.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
        let mut lam = 1.0;
        loop {
            let pn: Vec<f64> = p.iter().zip(&fields[0]).map(|(a, b)| a - lam * b).collect();
            let mn: Vec<f64> = m.iter().zip(&fields[1]).map(|(a, b)| a - lam * b).collect();
            let (g1, g2) = resid(&pn, &mn);
            let nn = g1.iter().chain(&g2).fold(0.0f64, |mx, v| mx.max(v.abs()));
            if nn < fnorm || lam < 1e-3 {
                p = pn;
                m = mn;
                break;
            }
            lam *= 0.5;
        }
        if step < 1e-10 {
            break;
        }
    }
    let (f1, f2) = resid(&p, &m);
    let res = f1[..n - 1]
        .iter()
        .chain(&f2[..n - 1])
        .fold(0.0f64, |mx, v| mx.max(v.abs()));
    let scale = amplitude_scale(&p);
    if res / scale > 1e-8 {
        return Err(Error::NewtonDiverged {
            residual: res / scale,
            iters,
        });
    }
    Ok((p, m, res, iters))
}

// ---------------------------------------------------------------------------
// 3D self-similar triple (S0, N0, V0)

/// Exact Frobenius coefficients of the 3D profile system, slaved to S0(0).
/// Returns (sig, nu, v): S0 = sum sig_k xi^{2k}, N0 = sum nu_k xi^{2k},
/// V0 = sum v_k xi^{2k+1}.
pub fn selfsim3d_series(sigma0: f64, kmax: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let nu0 = 2.0 * sigma0 * sigma0 / (7.0 - 2.0 * sigma0 * sigma0);
    let mut sig = vec![sigma0, sigma0 * (1.0 + nu0) / 6.0];
    let mut nu = vec![nu0];
    for k in 1..kmax {
        let a_s = ((2 * k + 2) * (2 * k + 3)) as f64;
        let c_n = (4 * k * k + 11 * k + 7) as f64;
        let known_s: f64 = sig[k] + (0..k).map(|j| nu[j] * sig[k - j]).sum::<f64>();
        let s2_known: f64 = (1..=k).map(|j| sig[j] * sig[k + 1 - j]).sum::<f64>();
        // a_s sig[k+1] - sig0 nu[k] = known_s
        // c_n nu[k] - 2 a_s sig0 sig[k+1] = a_s s2_known
        let det = a_s * c_n - 2.0 * a_s * sig[0] * sig[0];
        let sk1 = (known_s * c_n + sig[0] * a_s * s2_known) / det;
        let nk = (a_s * a_s * s2_known + 2.0 * a_s * sig[0] * known_s) / det;
        sig.push(sk1);
        nu.push(nk);
    }
    let v: Vec<f64> = (0..nu.len())
        .map(|k| -((2 * k + 2) as f64) * nu[k] / ((2 * k + 3) as f64))
        .collect();
    (sig, nu, v)
}

struct Shoot3dState {
    samples_s: Vec<f64>,
    samples_n: Vec<f64>,
    reached: f64,
}

fn shoot3d(sigma: f64, h_node: f64, x_end: f64, record: bool) -> (Shot, Option<Shoot3dState>) {
    let sub = (h_node / 2e-4).ceil() as usize;
    let hs = h_node / sub as f64;
    let nu0 = 2.0 * sigma * sigma / (7.0 - 2.0 * sigma * sigma);
    let b = sigma * (1.0 + nu0) / 6.0;
    let a = (10.0 * b * b + sigma * b * (1.0 + nu0)) / (11.0 - sigma * sigma);
    let c = (b * (1.0 + nu0) + sigma * a) / 20.0;
    let x0 = hs;
    let mut s = sigma + b * x0 * x0 + c * x0.powi(4);
    let mut sp = 2.0 * b * x0 + 4.0 * c * x0.powi(3);
    let mut nn = nu0 + a * x0 * x0;
    let mut np = 2.0 * a * x0;
    let rhs = |x: f64, s: f64, sp: f64, n: f64, np: f64| -> (f64, f64, f64, f64) {
        let spp = s + n * s - 2.0 * sp / x;
        let lap_s2 = 2.0 * s * spp + 2.0 * sp * sp + 4.0 * s * sp / x;
        let npp = (lap_s2 - 6.5 * x * np - 7.0 * n) / (x * x);
        (sp, spp, np, npp)
    };
    let mut x = x0;
    let mut st = Shoot3dState {
        samples_s: vec![sigma],
        samples_n: vec![nu0],
        reached: 0.0,
    };
    let guard = 4.0 * sigma;
    let mut idx = 1usize;
    let mut shot = Shot::Regrew;
    while x < x_end - 0.5 * hs {
        let (k1a, k1b, k1c, k1d) = rhs(x, s, sp, nn, np);
        let (k2a, k2b, k2c, k2d) = rhs(
            x + 0.5 * hs,
            s + 0.5 * hs * k1a,
            sp + 0.5 * hs * k1b,
            nn + 0.5 * hs * k1c,
            np + 0.5 * hs * k1d,
        );
        let (k3a, k3b, k3c, k3d) = rhs(
            x + 0.5 * hs,
            s + 0.5 * hs * k2a,
            sp + 0.5 * hs * k2b,
            nn + 0.5 * hs * k2c,
            np + 0.5 * hs * k2d,
        );
        let (k4a, k4b, k4c, k4d) = rhs(
            x + hs,
            s + hs * k3a,
            sp + hs * k3b,
            nn + hs * k3c,
            np + hs * k3d,
        );
        s += hs / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        sp += hs / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        nn += hs / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
        np += hs / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        x += hs;
        idx += 1;
        if idx % sub == 0 && record {
            st.samples_s.push(s);
            st.samples_n.push(nn);
            st.reached = x;
        }
        if s < 0.0 {
            shot = Shot::Crossed;
            break;
        }
        if s > guard {
            shot = Shot::Regrew;
            break;
        }
    }
    (shot, if record { Some(st) } else { None })
}

/// The 3D self-similar triple. Returns S0, N0, V0 plus the alternate V0
/// computed from the first-order transport equation alone ("V0_alt") for
/// the overdetermination check.
pub fn solve_selfsimilar_3d(rmax: f64, n: usize) -> Result<GroundStateBundle> {
    let grid = RadialGrid::new(3, rmax, n)?;
    let h = grid.spacing();
    let x_end = (16.0f64).min(rmax);
    // deeper origin well for SMALLER amplitude: crossing means sigma too small
    let sigma = bisect(2.0, 2.4, false, |c| shoot3d(c, h, x_end, false).0)?;
    let (_, st) = shoot3d(sigma, h, x_end, true);
    let st = st.unwrap();
    // transfer to the grid with far-field extensions
    let mut s = vec![0.0; n];
    let mut nn = vec![0.0; n];
    let icut_s = (((11.0f64.min(st.reached - 1.0)) / h) as usize).clamp(1, st.samples_s.len() - 1);
    let icut_n = (((14.0f64.min(st.reached - 1.0)) / h) as usize).clamp(1, st.samples_n.len() - 1);
    for i in 0..n {
        s[i] = if i < icut_s {
            st.samples_s[i]
        } else {
            st.samples_s[icut_s] * (-(grid.nodes[i] - grid.nodes[icut_s])).exp()
        };
        nn[i] = if i < icut_n {
            st.samples_n[i]
        } else {
            st.samples_n[icut_n] * (grid.nodes[icut_n] / grid.nodes[i]).powi(2)
        };
    }
    let v = vec![0.0; n];
    let (s, nn, v, res, iters) = newton_snv(&grid, s, nn, v)?;
    let scale = amplitude_scale(&s);
    if res / scale > 1e-8 {
        return Err(Error::NewtonDiverged {
            residual: res / scale,
            iters,
        });
    }
    if s.iter().any(|&u| u < -1e-9 * scale) {
        return Err(Error::SignChange);
    }
    // alternate V0 from the transport equation xi V' + 5/2 V = -(S0^2)'
    let d1e = derivative_matrix(&grid, 1, Parity::Even);
    let s2: Vec<f64> = s.iter().map(|v| v * v).collect();
    let ds2 = d1e.apply(&s2);
    let rhs: Vec<f64> = ds2.iter().map(|v| -v).collect();
    let v_alt = solve_first_order_odd(&grid, |i| grid.nodes[i], |_| 2.5, &rhs)?;

    let mut profiles = BTreeMap::new();
    profiles.insert(
        "S0".into(),
        Profile::new_real(grid.clone(), s, Parity::Even, FarField::Decaying)?,
    );
    profiles.insert(
        "N0".into(),
        Profile::new_real(grid.clone(), nn, Parity::Even, FarField::Free)?,
    );
    profiles.insert(
        "V0".into(),
        Profile::new_real(grid.clone(), v, Parity::Odd, FarField::Free)?,
    );
    profiles.insert(
        "V0_alt".into(),
        Profile::new_real(grid.clone(), v_alt, Parity::Odd, FarField::Free)?,
    );
    Ok(GroundStateBundle {
        grid,
        profiles,
        residual_inf: res / scale,
        meta: SolverMeta {
            newton_iterations: iters,
            shooting_parameter: Some(sigma),
            continuation_path: vec![],
        },
    })
}

/// First-order radial solve: dcoef(i) u' + vcoef(i) u = rhs, u odd, u(0)=0.
pub fn solve_first_order_odd(
    grid: &RadialGrid,
    dcoef: impl Fn(usize) -> f64,
    vcoef: impl Fn(usize) -> f64,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = grid.n;
    let rows = stencil::derivative_rows(n, grid.spacing(), 1, Parity::Odd);
    let mut m = BandMatrix::zeros(n, KL, KU);
    for (i, row) in rows.iter().enumerate().skip(1) {
        let c = dcoef(i);
        for (&j, &w) in row.cols.iter().zip(&row.w) {
            m.add(i, j, c * w);
        }
        m.add(i, i, vcoef(i));
    }
    m.set(0, 0, 1.0);
    let mut b = rhs.to_vec();
    b[0] = 0.0;
    let lu = crate::banded::BandLu::new(&m);
    if lu.is_singular() {
        return Err(Error::SingularSystem {
            cond: lu.condition_estimate(),
        });
    }
    let mut x = lu.solve_refined(&m, &b);
    x[0] = 0.0; // Dirichlet row, exactly
    Ok(x)
}

/// Assemble the linearized (S, N, V) system at state (s, n_dens);
/// also the coupled operator of the linear correction systems.
pub fn assemble_snv(grid: &RadialGrid, s: &[f64], n_dens: &[f64]) -> BlockSystem {
    let n = grid.n;
    let h = grid.spacing();
    let lap = scalar_laplacian_matrix(grid, Parity::Even);
    let d1e = derivative_matrix(grid, 1, Parity::Even);
    let d1o = derivative_matrix(grid, 1, Parity::Odd);
    let mut sys = BlockSystem::new(3, n);
    // eq S (field 0): (lap - 1 - N) dS - S dN
    sys.add_block(0, 0, &lap, None);
    let diag_s: Vec<f64> = n_dens.iter().map(|&v| -1.0 - v).collect();
    sys.add_diag(0, 0, &diag_s);
    let neg_s: Vec<f64> = s.iter().map(|&v| -v).collect();
    sys.add_diag(0, 1, &neg_s);
    // eq N (field 1): xi N' + 2N + V' + 2V/xi ; origin row 2N(0) + 3V'(0)
    sys.add_block(1, 1, &d1e, Some(&grid.nodes));
    sys.add_block(1, 2, &d1o, None);
    for i in 0..n {
        sys.add(1, i, 1, i, 2.0);
        if i > 0 {
            sys.add(1, i, 2, i, 2.0 / grid.nodes[i]);
        }
    }
    sys.clear_row(1, 0);
    sys.add(1, 0, 1, 0, 2.0);
    // odd-folded first derivative at the origin: (16 v1 - 2 v2) / (12 h)
    sys.add(1, 0, 2, 1, 3.0 * 16.0 / (12.0 * h));
    sys.add(1, 0, 2, 2, 3.0 * -2.0 / (12.0 * h));
    // eq V (field 2): xi V' + 2.5 V + (2 S dS)'
    sys.add_block(2, 2, &d1o, Some(&grid.nodes));
    for i in 0..n {
        sys.add(2, i, 2, i, 2.5);
    }
    let two_s: Vec<f64> = s.iter().map(|&v| 2.0 * v).collect();
    let mut d1_2s = BandMatrix::zeros(n, KL, KU);
    for i in 0..n {
        let lo = i.saturating_sub(KL);
        let hi = (i + KU).min(n - 1);
        for j in lo..=hi {
            let v = d1e.get(i, j);
            if v != 0.0 {
                d1_2s.set(i, j, v * two_s[j]);
            }
        }
    }
    sys.add_block(2, 0, &d1_2s, None);
    sys.dirichlet_row(2, 0);
    sys.robin_row(0, grid, 1.0);
    sys
}



fn snv_residual(
    grid: &RadialGrid,
    lap: &BandMatrix<f64>,
    d1e: &BandMatrix<f64>,
    d1o: &BandMatrix<f64>,
    robin: &stencil::StencilRow,
    s: &[f64],
    nn: &[f64],
    v: &[f64],
) -> Vec<f64> {
    let n = grid.n;
    let h = grid.spacing();
    let mut f = vec![0.0; 3 * n];
    let lap_s = lap.apply(s);
    let np = d1e.apply(nn);
    let vp = d1o.apply(v);
    let s2: Vec<f64> = s.iter().map(|u| u * u).collect();
    let ds2 = d1e.apply(&s2);
    for i in 0..n {
        f[3 * i] = lap_s[i] - s[i] - nn[i] * s[i];
        f[3 * i + 1] = if i == 0 {
            2.0 * nn[0] + 3.0 * (16.0 * v[1] - 2.0 * v[2]) / (12.0 * h)
        } else {
            grid.nodes[i] * np[i] + 2.0 * nn[i] + vp[i] + 2.0 * v[i] / grid.nodes[i]
        };
        f[3 * i + 2] = if i == 0 {
            v[0]
        } else {
            grid.nodes[i] * vp[i] + 2.5 * v[i] + ds2[i]
        };
    }
    f[3 * (n - 1)] = robin
        .cols
        .iter()
        .zip(&robin.w)
        .map(|(&j, &w)| w * s[j])
        .sum::<f64>()
        + s[n - 1];
    f
}

fn newton_snv(
    grid: &GridRef,
    mut s: Vec<f64>,
    mut nn: Vec<f64>,
    mut v: Vec<f64>,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, f64, usize)> {
    let n = grid.n;
    let lap = scalar_laplacian_matrix(grid, Parity::Even);
    let d1e = derivative_matrix(grid, 1, Parity::Even);
    let d1o = derivative_matrix(grid, 1, Parity::Odd);
    let robin = stencil::edge_d1_row(n, grid.spacing());
    let mut iters = 0;
    for it in 0..40 {
        iters = it + 1;
        let f = snv_residual(grid, &lap, &d1e, &d1o, &robin, &s, &nn, &v);
        let fnorm = f.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let sys = assemble_snv(grid, &s, &nn);
        let dz = sys.solve(&f)?;
        let fields = sys.unpack(&dz);
        let step = dz.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let mut lam = 1.0;
        loop {
            let sn: Vec<f64> = s.iter().zip(&fields[0]).map(|(a, b)| a - lam * b).collect();
            let nnn: Vec<f64> = nn.iter().zip(&fields[1]).map(|(a, b)| a - lam * b).collect();
            let vn: Vec<f64> = v.iter().zip(&fields[2]).map(|(a, b)| a - lam * b).collect();
            let g = snv_residual(grid, &lap, &d1e, &d1o, &robin, &sn, &nnn, &vn);
            let gn = g.iter().fold(0.0f64, |m, u| m.max(u.abs()));
            if gn < fnorm || lam < 1e-3 {
                s = sn;
                nn = nnn;
                v = vn;
                break;
            }
            lam *= 0.5;
        }
        if step < 1e-11 {
            break;
        }
    }
    let f = snv_residual(grid, &lap, &d1e, &d1o, &robin, &s, &nn, &v);
    let res = f.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    Ok((s, nn, v, res, iters))
}
