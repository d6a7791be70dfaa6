//! Geodesic and Jacobi-field integration.
//!
//! Time stepping uses the Dormand–Prince 5(4) embedded pair with PI-free
//! step control and cubic Hermite dense output (4th-order accurate, enough
//! for the 1e-6 targets given the step sizes the controller produces at the
//! tolerances in use). The Jacobi equation is integrated as a first-order
//! system in (ζ, ∇ζ) coupled to the geodesic state, with the connection
//! coefficients and Jacobi endomorphism re-evaluated at every stage.

use crate::error::{Error, Result};
use crate::fieldspec::FieldDef;
use crate::spray::{curvature_from_data, spray_data, Point, EPS_FIBRE};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;

// Dormand-Prince 5(4) tableau
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// stage abscissae omitted: the systems integrated here are autonomous
// 5th-order weights are row 6 of A; 4th-order embedded weights:
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub max_local_error: f64,
}

/// Accepted-step record of an adaptive integration: states and state
/// derivatives at the step points, interpolated in between.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub n: usize,
    pub times: Vec<f64>,
    /// flattened (x, y) at each accepted step
    pub states: Vec<Vec<f64>>,
    /// state derivatives at the same points (for Hermite interpolation)
    pub derivs: Vec<Vec<f64>>,
    pub stats: StepStats,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct JacobiChannel {
    pub times: Vec<f64>,
    pub zeta: Vec<Vec<f64>>,
    pub nabla_zeta: Vec<Vec<f64>>,
}

fn hermite(t: f64, t0: f64, t1: f64, z0: &[f64], z1: &[f64], d0: &[f64], d1: &[f64]) -> Vec<f64> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    z0.iter()
        .zip(z1)
        .zip(d0.iter().zip(d1))
        .map(|((&a, &b), (&da, &db))| h00 * a + h01 * b + h * (h10 * da + h11 * db))
        .collect()
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn initial_point(&self) -> Result<Point> {
        self.point_at_index(0)
    }

    pub fn point_at_index(&self, k: usize) -> Result<Point> {
        let n = self.n;
        Point::new(self.states[k][..n].to_vec(), self.states[k][n..2 * n].to_vec())
    }

    /// Dense-output state at an arbitrary time inside the integration span.
    pub fn sample(&self, t: f64) -> Vec<f64> {
        let times = &self.times;
        if t <= times[0] {
            return self.states[0].clone();
        }
        if t >= *times.last().unwrap() {
            return self.states.last().unwrap().clone();
        }
        let k = match times.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(k) => return self.states[k].clone(),
            Err(k) => k - 1,
        };
        hermite(
            t,
            times[k],
            times[k + 1],
            &self.states[k],
            &self.states[k + 1],
            &self.derivs[k],
            &self.derivs[k + 1],
        )
    }

    pub fn endpoint(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let last = self.states.last().unwrap();
        (last[..n].to_vec(), last[n..2 * n].to_vec())
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(1e-12..=1e-3).contains(&tol) {
        return Err(Error::Config(format!(
            "integration tolerance {tol:e} outside [1e-12, 1e-3]"
        )));
    }
    Ok(())
}

/// Generic adaptive DP5(4) over f: (t, z) -> dz/dt.
fn integrate<F>(z0: Vec<f64>, t_end: f64, tol: f64, mut f: F) -> Result<Trajectory>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let dim = z0.len();
    let mut t = 0.0;
    let mut z = z0;
    let mut dz = f(&z)?;
    let mut h = (t_end / 100.0).min(0.1).max(1e-6);
    let mut times = vec![t];
    let mut states = vec![z.clone()];
    let mut derivs = vec![dz.clone()];
    let mut stats = StepStats::default();
    let h_min = t_end.abs() * 1e-14 + 1e-300;

    while t < t_end {
        if h < h_min {
            return Err(Error::StepFailure(format!("step size underflow at t = {t}")));
        }
        if t + h > t_end {
            h = t_end - t;
        }
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        k.push(dz.clone());
        let mut failed_stage = false;
        // rows 0..4 of A give stages 2..6; row 5 holds the 5th-order weights
        for s in 0..5 {
            let mut zs = z.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[s][j];
                if a != 0.0 {
                    for q in 0..dim {
                        zs[q] += h * a * kj[q];
                    }
                }
            }
            match f(&zs) {
                Ok(ks) => k.push(ks),
                Err(_) => {
                    failed_stage = true;
                    break;
                }
            }
        }
        if failed_stage {
            stats.rejected += 1;
            h *= 0.25;
            continue;
        }
        // 5th-order solution (FSAL: weights = A[5], plus k7 = f(z_new))
        let mut z_new = z.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            let b = A[5][j];
            if b != 0.0 {
                for q in 0..dim {
                    z_new[q] += h * b * kj[q];
                }
            }
        }
        let dz_new = match f(&z_new) {
            Ok(v) => v,
            Err(_) => {
                stats.rejected += 1;
                h *= 0.25;
                continue;
            }
        };
        k.push(dz_new.clone());
        // embedded error estimate
        let mut err = 0.0f64;
        for q in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                let b5 = if j < 6 { A[5][j] } else { 0.0 };
                e += (b5 - B4[j]) * kj[q];
            }
            e *= h;
            let sc = tol + tol * z[q].abs().max(z_new[q].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / dim as f64).sqrt();
        if err <= 1.0 {
            t += h;
            z = z_new;
            dz = dz_new;
            times.push(t);
            states.push(z.clone());
            derivs.push(dz.clone());
            stats.accepted += 1;
            stats.max_local_error = stats.max_local_error.max(err * tol);
        } else {
            stats.rejected += 1;
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        h *= fac;
    }

    Ok(Trajectory {
        n: dim / 2,
        times,
        states,
        derivs,
        stats,
        tol,
    })
}

/// Solve ẍ + 2Γ(x, ẋ) = 0 from `p0` over [0, t_end].
pub fn integrate_geodesic(spray: &FieldDef, p0: &Point, t_end: f64, tol: f64) -> Result<Trajectory> {
    check_tol(tol)?;
    let n = spray.n;
    let z0: Vec<f64> = p0.x.iter().chain(p0.y.iter()).copied().collect();
    let mut traj = integrate(z0, t_end, tol, |z| {
        let p = Point::new(z[..n].to_vec(), z[n..].to_vec())
            .map_err(|_| Error::StepFailure("fibre velocity collapsed".into()))?;
        let jets = spray.eval_jets(&p, 0)?;
        let mut dz = vec![0.0; 2 * n];
        dz[..n].copy_from_slice(&z[n..]);
        for i in 0..n {
            dz[n + i] = -2.0 * jets[i].value();
        }
        Ok(dz)
    })?;
    traj.n = n;
    Ok(traj)
}

/// Solve ∇²ζ + R(ζ) = 0 along `traj`, re-integrating the geodesic jointly
/// with the deviation state and reporting (ζ, ∇ζ) at the trajectory's own
/// step times.
pub fn integrate_jacobi(
    spray: &FieldDef,
    traj: &Trajectory,
    zeta0: &[f64],
    nabla_zeta0: &[f64],
) -> Result<JacobiChannel> {
    let n = spray.n;
    if zeta0.len() != n || nabla_zeta0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "Jacobi initial data must have dimension {n}"
        )));
    }
    let mut z0 = traj.states[0].clone();
    z0.extend_from_slice(zeta0);
    z0.extend_from_slice(nabla_zeta0);
    let full = integrate(z0, traj.t_end(), traj.tol, |z| {
        let p = Point::new(z[..n].to_vec(), z[n..2 * n].to_vec())
            .map_err(|_| Error::StepFailure("fibre velocity collapsed".into()))?;
        let sd = spray_data(spray, &p)?;
        let cd = curvature_from_data(&sd, &p);
        let zeta = DVector::from_column_slice(&z[2 * n..3 * n]);
        let nabla = DVector::from_column_slice(&z[3 * n..4 * n]);
        let dzeta = &nabla - &sd.gamma_j * &zeta;
        let dnabla = -(&cd.r2 * &zeta) - &sd.gamma_j * &nabla;
        let mut dz = vec![0.0; 4 * n];
        dz[..n].copy_from_slice(&z[n..2 * n]);
        for i in 0..n {
            dz[n + i] = -2.0 * sd.gamma[i];
            dz[2 * n + i] = dzeta[i];
            dz[3 * n + i] = dnabla[i];
        }
        Ok(dz)
    })?;
    let mut zeta = Vec::with_capacity(traj.times.len());
    let mut nabla_zeta = Vec::with_capacity(traj.times.len());
    for &t in &traj.times {
        let z = full.sample(t);
        zeta.push(z[2 * n..3 * n].to_vec());
        nabla_zeta.push(z[3 * n..4 * n].to_vec());
    }
    Ok(JacobiChannel {
        times: traj.times.clone(),
        zeta,
        nabla_zeta,
    })
}

/// Max over the trajectory's step times of |ω(Z₁, Z₂)(t) − ω(Z₁, Z₂)(0)|,
/// Z = hlift(ζ) + vlift(∇ζ).
pub fn pairing_constancy(
    spray: &FieldDef,
    omega: &crate::metrizability::OmegaSource,
    traj: &Trajectory,
    ch1: &JacobiChannel,
    ch2: &JacobiChannel,
) -> Result<f64> {
    let n = spray.n;
    if ch1.times.len() != traj.times.len() || ch2.times.len() != traj.times.len() {
        return Err(Error::DimensionMismatch(
            "Jacobi channels must share the trajectory's time grid".into(),
        ));
    }
    let mut first = None;
    let mut worst = 0.0f64;
    for k in 0..traj.times.len() {
        let p = traj.point_at_index(k)?;
        let sd = spray_data(spray, &p)?;
        let m = omega.matrix(spray, &p)?;
        let lift = |zeta: &[f64], nabla: &[f64]| -> Vec<f64> {
            let h = sd.hlift(zeta);
            let v = crate::spray::SprayData::vlift(nabla);
            h.iter().zip(&v).map(|(a, b)| a + b).collect()
        };
        let z1 = lift(&ch1.zeta[k], &ch1.nabla_zeta[k]);
        let z2 = lift(&ch2.zeta[k], &ch2.nabla_zeta[k]);
        let mut val = 0.0;
        for a in 0..2 * n {
            for b in 0..2 * n {
                val += m[(a, b)] * z1[a] * z2[b];
            }
        }
        match first {
            None => first = Some(val),
            Some(v0) => worst = worst.max((val - v0).abs()),
        }
    }
    Ok(worst)
}

/// Affine subspace: a base point and spanning tangent directions.
#[derive(Debug, Clone)]
pub struct AffineSubspace {
    pub point: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl AffineSubspace {
    /// Orthonormalized spanning set.
    fn frame(&self) -> Result<Vec<DVector<f64>>> {
        let n = self.point.len();
        let mut out: Vec<DVector<f64>> = Vec::new();
        for b in &self.basis {
            if b.len() != n {
                return Err(Error::DimensionMismatch(
                    "subspace basis vector has wrong length".into(),
                ));
            }
            let mut v = DVector::from_column_slice(b);
            for u in &out {
                let c = u.dot(&v);
                v -= u * c;
            }
            let norm = v.norm();
            if norm > 1e-10 {
                out.push(v / norm);
            }
        }
        if out.is_empty() {
            return Err(Error::Domain("subspace has no tangent directions".into()));
        }
        Ok(out)
    }
}

/// Norm of the component of the acceleration −2Γ(x, y) normal to the
/// subspace, for a single (x, y) with x in the subspace and y tangent to it.
pub fn normal_acceleration(spray: &FieldDef, sub: &AffineSubspace, p: &Point) -> Result<f64> {
    let frame = sub.frame()?;
    let jets = spray.eval_jets(p, 0)?;
    let n = spray.n;
    let mut acc = DVector::from_fn(n, |i, _| -2.0 * jets[i].value());
    for u in &frame {
        let c = u.dot(&acc);
        acc -= u * c;
    }
    Ok(acc.norm())
}

/// Max normal acceleration over `samples` points with x drawn in the
/// subspace around its base point and y tangent to it.
pub fn totally_geodesic_residual(
    spray: &FieldDef,
    sub: &AffineSubspace,
    samples: usize,
) -> Result<f64> {
    let frame = sub.frame()?;
    let n = spray.n;
    let mut rng = ChaCha8Rng::seed_from_u64(0x7047);
    let mut worst = 0.0f64;
    let mut drawn = 0usize;
    while drawn < samples {
        let mut x = DVector::from_column_slice(&sub.point);
        let mut y = DVector::zeros(n);
        for u in &frame {
            x += u * rng.gen_range(-1.0..1.0);
            y += u * rng.gen_range(-1.0..1.0);
        }
        if y.norm() < 10.0 * EPS_FIBRE {
            continue;
        }
        drawn += 1;
        let p = Point::new(x.iter().copied().collect(), y.iter().copied().collect())?;
        worst = worst.max(normal_acceleration(spray, sub, &p)?);
    }
    Ok(worst)
}

/// Hausdorff distance between two point clouds (used for projective
/// reparametrization checks on computed geodesic traces).
pub fn hausdorff_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let dist = |p: &[f64], q: &[f64]| -> f64 {
        p.iter()
            .zip(q)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt()
    };
    let one_sided = |xs: &[Vec<f64>], ys: &[Vec<f64>]| -> f64 {
        xs.iter()
            .map(|p| {
                ys.iter()
                    .map(|q| dist(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Max over `pts` of the distance to the polyline through `poly` (point to
/// nearest segment). One-sided: suited to comparing a curve against a longer
/// trace that covers it.
pub fn max_distance_to_polyline(pts: &[Vec<f64>], poly: &[Vec<f64>]) -> f64 {
    let seg_dist = |p: &[f64], a: &[f64], b: &[f64]| -> f64 {
        let mut ab2 = 0.0;
        let mut ap_ab = 0.0;
        for i in 0..p.len() {
            let d = b[i] - a[i];
            ab2 += d * d;
            ap_ab += (p[i] - a[i]) * d;
        }
        let t = if ab2 > 0.0 { (ap_ab / ab2).clamp(0.0, 1.0) } else { 0.0 };
        p.iter()
            .enumerate()
            .map(|(i, &pi)| {
                let c = a[i] + t * (b[i] - a[i]);
                (pi - c) * (pi - c)
            })
            .sum::<f64>()
            .sqrt()
    };
    pts.iter()
        .map(|p| {
            poly.windows(2)
                .map(|w| seg_dist(p, &w[0], &w[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0f64, f64::max)
}

/// CSV export: t, x1..xn, y1..yn and optionally zeta/nabla_zeta columns.
pub fn write_csv<W: Write>(
    traj: &Trajectory,
    channel: Option<&JacobiChannel>,
    out: &mut W,
) -> Result<()> {
    let n = traj.n;
    let mut header = vec!["t".to_string()];
    for i in 1..=n {
        header.push(format!("x{i}"));
    }
    for i in 1..=n {
        header.push(format!("y{i}"));
    }
    if channel.is_some() {
        for i in 1..=n {
            header.push(format!("zeta{i}"));
        }
        for i in 1..=n {
            header.push(format!("nabla_zeta{i}"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for (k, &t) in traj.times.iter().enumerate() {
        let mut row = vec![format!("{t:.12e}")];
        for v in &traj.states[k][..2 * n] {
            row.push(format!("{v:.12e}"));
        }
        if let Some(ch) = channel {
            for v in ch.zeta[k].iter().chain(ch.nabla_zeta[k].iter()) {
                row.push(format!("{v:.12e}"));
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Lie-transport check: finite-difference comparison of Z(t + dt) against
/// the pushforward of Z(t) by the geodesic flow over dt, at step index `k`.
/// Returns the norm of the mismatch.
pub fn lie_transport_residual(
    spray: &FieldDef,
    traj: &Trajectory,
    ch: &JacobiChannel,
    k: usize,
    dt: f64,
) -> Result<f64> {
    let n = spray.n;
    let p = traj.point_at_index(k)?;
    let t = traj.times[k];
    // Z(t) in coordinates
    let sd = spray_data(spray, &p)?;
    let lift = |zeta: &[f64], nabla: &[f64]| -> Vec<f64> {
        let h = sd.hlift(zeta);
        let v = crate::spray::SprayData::vlift(nabla);
        h.iter().zip(&v).map(|(a, b)| a + b).collect::<Vec<f64>>()
    };
    let z_here = lift(&ch.zeta[k], &ch.nabla_zeta[k]);
    // pushforward by flowing perturbed initial conditions for time dt
    let eps = 1e-6;
    let base = traj.states[k][..2 * n].to_vec();
    let flow = |state: &[f64]| -> Result<Vec<f64>> {
        let q = Point::new(state[..n].to_vec(), state[n..].to_vec())?;
        let tr = integrate_geodesic(spray, &q, dt, traj.tol.min(1e-9).max(1e-12))?;
        let (x, y) = tr.endpoint();
        Ok(x.into_iter().chain(y).collect())
    };
    let mut pert = base.clone();
    for q in 0..2 * n {
        pert[q] += eps * z_here[q];
    }
    let fwd_pert = flow(&pert)?;
    let fwd_base = flow(&base)?;
    let pushed: Vec<f64> = fwd_pert
        .iter()
        .zip(&fwd_base)
        .map(|(a, b)| (a - b) / eps)
        .collect();
    // Z at t + dt from the channel's own integration
    let kk = traj
        .times
        .iter()
        .position(|&tt| (tt - (t + dt)).abs() < 1e-12);
    let (zeta_next, nabla_next) = match kk {
        Some(idx) => (ch.zeta[idx].clone(), ch.nabla_zeta[idx].clone()),
        None => {
            // re-derive by short co-integration from step k
            let q = traj.point_at_index(k)?;
            let short = integrate_geodesic(spray, &q, dt, traj.tol)?;
            let chs = integrate_jacobi(spray, &short, &ch.zeta[k], &ch.nabla_zeta[k])?;
            (
                chs.zeta.last().unwrap().clone(),
                chs.nabla_zeta.last().unwrap().clone(),
            )
        }
    };
    let p_next = Point::new(fwd_base[..n].to_vec(), fwd_base[n..].to_vec())?;
    let sd_next = spray_data(spray, &p_next)?;
    let h = sd_next.hlift(&zeta_next);
    let v = crate::spray::SprayData::vlift(&nabla_next);
    let z_next: Vec<f64> = h.iter().zip(&v).map(|(a, b)| a + b).collect();
    let mism: f64 = pushed
        .iter()
        .zip(&z_next)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(mism)
}

/// Arc-length resample of the base-coordinate trace of a trajectory, taken
/// from the dense output (accepted steps alone are too coarse for chord
/// accuracy).
pub fn base_trace(traj: &Trajectory, samples: usize) -> Vec<Vec<f64>> {
    let n = traj.n;
    let dense = (samples * 10).max(1000);
    let t0 = traj.times[0];
    let t1 = traj.t_end();
    let pts: Vec<Vec<f64>> = (0..=dense)
        .map(|k| {
            let t = t0 + (t1 - t0) * k as f64 / dense as f64;
            traj.sample(t)[..n].to_vec()
        })
        .collect();
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        let d: f64 = w[0]
            .iter()
            .zip(&w[1])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(samples);
    for s in 0..samples {
        let target = total * s as f64 / (samples - 1).max(1) as f64;
        let k = match cum.binary_search_by(|v| v.partial_cmp(&target).unwrap()) {
            Ok(k) => k,
            Err(k) => (k - 1).min(pts.len() - 2),
        };
        if k + 1 >= pts.len() {
            out.push(pts.last().unwrap().clone());
            continue;
        }
        let seg = cum[k + 1] - cum[k];
        let f = if seg > 0.0 { (target - cum[k]) / seg } else { 0.0 };
        out.push(
            pts[k]
                .iter()
                .zip(&pts[k + 1])
                .map(|(a, b)| a + f * (b - a))
                .collect(),
        );
    }
    out
}

/// Max deviation of a scalar observable from its initial value along the
/// trajectory's step points.
pub fn first_integral_deviation<F>(traj: &Trajectory, f: F) -> Result<f64>
where
    F: Fn(&Point) -> Result<f64>,
{
    let mut first = None;
    let mut worst = 0.0f64;
    for k in 0..traj.times.len() {
        let v = f(&traj.point_at_index(k)?)?;
        match first {
            None => first = Some(v),
            Some(v0) => worst = worst.max((v - v0).abs()),
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldspec::{parse_field, FieldKind};
    use approx::assert_abs_diff_eq;

    fn spiral() -> FieldDef {
        parse_field(
            "G1 = v*sqrt(u^2+v^2+w^2)/2; G2 = -u*sqrt(u^2+v^2+w^2)/2; G3 = 0;",
            FieldKind::Spray,
            3,
        )
        .unwrap()
    }

    fn flat(n: usize) -> FieldDef {
        let src: Vec<String> = (1..=n).map(|i| format!("G{i} = 0;")).collect();
        parse_field(&src.join(" "), FieldKind::Spray, n).unwrap()
    }

    #[test]
    fn flat_geodesics_are_straight_lines() {
        let p0 = Point::new(vec![0.3, -0.1], vec![1.0, 2.0]).unwrap();
        let traj = integrate_geodesic(&flat(2), &p0, 2.0, 1e-10).unwrap();
        let (x, y) = traj.endpoint();
        assert_abs_diff_eq!(x[0], 0.3 + 2.0 * 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(x[1], -0.1 + 2.0 * 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(y[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn spiral_geodesic_quarter_turn() {
        let p0 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 0.0]).unwrap();
        let traj =
            integrate_geodesic(&spiral(), &p0, std::f64::consts::FRAC_PI_2, 1e-10).unwrap();
        let (x, y) = traj.endpoint();
        for (got, want) in x.iter().chain(y.iter()).zip([1.0, 1.0, 0.0, 0.0, 1.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-6);
        }
    }

    #[test]
    fn spiral_first_integrals() {
        let p0 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 1.0]).unwrap();
        let traj = integrate_geodesic(&spiral(), &p0, 10.0, 1e-10).unwrap();
        let lam = first_integral_deviation(&traj, |p| {
            Ok(p.y.iter().map(|v| v * v).sum::<f64>().sqrt())
        })
        .unwrap();
        let w = first_integral_deviation(&traj, |p| Ok(p.y[2])).unwrap();
        let mu = first_integral_deviation(&traj, |p| {
            Ok((p.y[0] * p.y[0] + p.y[1] * p.y[1]).sqrt())
        })
        .unwrap();
        assert!(lam < 1e-8, "lambda drift {lam:e}");
        assert!(w < 1e-8, "w drift {w:e}");
        assert!(mu < 1e-8, "mu drift {mu:e}");
    }

    #[test]
    fn tolerance_bounds_enforced() {
        let p0 = Point::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert!(integrate_geodesic(&flat(2), &p0, 1.0, 1e-2).is_err());
        assert!(integrate_geodesic(&flat(2), &p0, 1.0, 1e-13).is_err());
    }

    #[test]
    fn flat_jacobi_affine() {
        let p0 = Point::new(vec![0.0, 0.0], vec![1.0, 0.5]).unwrap();
        let traj = integrate_geodesic(&flat(2), &p0, 3.0, 1e-10).unwrap();
        let ch = integrate_jacobi(&flat(2), &traj, &[1.0, -1.0], &[0.2, 0.4]).unwrap();
        for (k, &t) in ch.times.iter().enumerate() {
            assert_abs_diff_eq!(ch.zeta[k][0], 1.0 + 0.2 * t, epsilon = 1e-8);
            assert_abs_diff_eq!(ch.zeta[k][1], -1.0 + 0.4 * t, epsilon = 1e-8);
        }
    }

    #[test]
    fn trivial_jacobi_fields_along_spiral() {
        let p0 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 1.0]).unwrap();
        let traj = integrate_geodesic(&spiral(), &p0, 5.0, 1e-10).unwrap();
        // ζ = γ̇
        let ch = integrate_jacobi(&spiral(), &traj, &p0.y, &[0.0; 3]).unwrap();
        for (k, _) in traj.times.iter().enumerate() {
            let y = &traj.states[k][3..6];
            for i in 0..3 {
                assert_abs_diff_eq!(ch.zeta[k][i], y[i], epsilon = 1e-6);
            }
        }
        // ζ = tγ̇
        let ch = integrate_jacobi(&spiral(), &traj, &[0.0; 3], &p0.y).unwrap();
        for (k, &t) in traj.times.iter().enumerate() {
            let y = &traj.states[k][3..6];
            for i in 0..3 {
                assert_abs_diff_eq!(ch.zeta[k][i], t * y[i], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn pairing_antisymmetry_and_conservation() {
        use crate::metrizability::{Multiplier, OmegaSource};
        let f = parse_field("F = sqrt(u^2+v^2+w^2) + (y*u - x*v)/2", FieldKind::Scalar, 3)
            .unwrap();
        let omega = OmegaSource::Kahler(Multiplier::hessian_of(f).unwrap());
        let p0 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 1.0]).unwrap();
        let traj = integrate_geodesic(&spiral(), &p0, 10.0, 1e-10).unwrap();
        let ch1 = integrate_jacobi(&spiral(), &traj, &[1.0, 0.0, 0.0], &[0.0, 0.3, 0.0]).unwrap();
        let ch2 = integrate_jacobi(&spiral(), &traj, &[0.0, 1.0, 0.0], &[0.5, 0.0, -0.2]).unwrap();
        let dev = pairing_constancy(&spiral(), &omega, &traj, &ch1, &ch2).unwrap();
        assert!(dev < 1e-6, "pairing drift {dev:e}");
        // ch1 against itself: identically zero by antisymmetry
        let self_dev = pairing_constancy(&spiral(), &omega, &traj, &ch1, &ch1).unwrap();
        assert!(self_dev < 1e-12);
    }

    #[test]
    fn vanishing_initial_data_lagrangian() {
        use crate::metrizability::{Multiplier, OmegaSource};
        let f = parse_field("F = sqrt(u^2+v^2+w^2) + (y*u - x*v)/2", FieldKind::Scalar, 3)
            .unwrap();
        let omega = OmegaSource::Kahler(Multiplier::hessian_of(f).unwrap());
        let p0 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 1.0]).unwrap();
        let traj = integrate_geodesic(&spiral(), &p0, 10.0, 1e-10).unwrap();
        let ch1 = integrate_jacobi(&spiral(), &traj, &[0.0; 3], &[1.0, 0.0, 0.0]).unwrap();
        let ch2 = integrate_jacobi(&spiral(), &traj, &[0.0; 3], &[0.0, 1.0, 0.5]).unwrap();
        // value at every time, not just drift: pair each channel at each step
        let n = 3;
        let mut worst = 0.0f64;
        for k in 0..traj.times.len() {
            let p = traj.point_at_index(k).unwrap();
            let sd = spray_data(&spiral(), &p).unwrap();
            let m = omega.matrix(&spiral(), &p).unwrap();
            let lift = |z: &[f64], nz: &[f64]| -> Vec<f64> {
                let h = sd.hlift(z);
                let v = crate::spray::SprayData::vlift(nz);
                h.iter().zip(&v).map(|(a, b)| a + b).collect::<Vec<f64>>()
            };
            let z1 = lift(&ch1.zeta[k], &ch1.nabla_zeta[k]);
            let z2 = lift(&ch2.zeta[k], &ch2.nabla_zeta[k]);
            let mut val = 0.0;
            for a in 0..2 * n {
                for b in 0..2 * n {
                    val += m[(a, b)] * z1[a] * z2[b];
                }
            }
            worst = worst.max(val.abs());
        }
        assert!(worst < 1e-7, "Lagrangian pairing {worst:e}");
    }

    #[test]
    fn totally_geodesic_z_plane() {
        let sub = AffineSubspace {
            point: vec![0.0, 0.0, 0.7],
            basis: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
        };
        let r = totally_geodesic_residual(&spiral(), &sub, 50).unwrap();
        assert!(r <= 1e-12, "z-plane residual {r:e}");
    }

    #[test]
    fn totally_geodesic_y_plane_fails() {
        let sub = AffineSubspace {
            point: vec![0.0, 0.0, 0.0],
            basis: vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
        };
        let p = Point::new(vec![0.0; 3], vec![1.0, 0.0, 0.0]).unwrap();
        let probe = normal_acceleration(&spiral(), &sub, &p).unwrap();
        assert_abs_diff_eq!(probe, 1.0, epsilon = 1e-12);
        let r = totally_geodesic_residual(&spiral(), &sub, 50).unwrap();
        assert!(r > 0.0);
    }

    #[test]
    fn flat_any_subspace_geodesic() {
        let sub = AffineSubspace {
            point: vec![0.2, -0.4, 0.1],
            basis: vec![vec![1.0, 2.0, 0.5]],
        };
        assert_eq!(totally_geodesic_residual(&flat(3), &sub, 20).unwrap(), 0.0);
    }

    #[test]
    fn projective_reparametrization_same_trace() {
        use crate::spray::projective_transform;
        let p_fn = parse_field("P = sqrt(u^2+v^2+w^2)/4", FieldKind::Scalar, 3).unwrap();
        let tilted = projective_transform(&spiral(), &p_fn).unwrap();
        let p0 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 1.0]).unwrap();
        // the tilted spray slows along the path but covers more arc over
        // [0, 1] than the original does over [0, 0.5], so the short trace
        // must lie on the long one
        let t1 = integrate_geodesic(&spiral(), &p0, 0.5, 1e-10).unwrap();
        let t2 = integrate_geodesic(&tilted, &p0, 1.0, 1e-10).unwrap();
        let d = max_distance_to_polyline(&base_trace(&t1, 400), &base_trace(&t2, 4000));
        assert!(d < 1e-5, "trace deviation {d:e}");
    }

    #[test]
    fn csv_export_shape() {
        let p0 = Point::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        let traj = integrate_geodesic(&flat(2), &p0, 1.0, 1e-8).unwrap();
        let ch = integrate_jacobi(&flat(2), &traj, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_csv(&traj, Some(&ch), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,x1,x2,y1,y2,zeta1,zeta2,nabla_zeta1,nabla_zeta2"
        );
        assert_eq!(lines.count(), traj.times.len());
    }

    #[test]
    fn lie_transport_of_jacobi_lift() {
        let p0 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 1.0]).unwrap();
        let traj = integrate_geodesic(&spiral(), &p0, 2.0, 1e-10).unwrap();
        let ch = integrate_jacobi(&spiral(), &traj, &[1.0, 0.0, 0.0], &[0.0, 0.3, 0.0]).unwrap();
        let r = lie_transport_residual(&spiral(), &traj, &ch, 0, 1e-3).unwrap();
        assert!(r < 1e-5, "Lie transport residual {r:e}");
    }

    #[test]
    fn energy_conservation_for_normalized_spray() {
        use crate::spray::normalize_semispray;
        // Euclidean metric, semispray with a spurious degree-2 vertical part
        let g = parse_field("H11 = 1; H12 = 0; H22 = 1;", FieldKind::Sym2, 2).unwrap();
        let z = parse_field(
            "G1 = (y1^2+y2^2)/10; G2 = 0;",
            FieldKind::Spray,
            2,
        )
        .unwrap();
        let norm = normalize_semispray(&z, &g).unwrap();
        let p0 = Point::new(vec![0.0, 0.0], vec![0.8, 0.6]).unwrap();
        let traj = integrate_geodesic(&norm, &p0, 4.0, 1e-10).unwrap();
        let drift = first_integral_deviation(&traj, |p| {
            Ok((p.y[0] * p.y[0] + p.y[1] * p.y[1]).sqrt())
        })
        .unwrap();
        assert!(drift < 1e-8, "G drift {drift:e}");
    }
}
