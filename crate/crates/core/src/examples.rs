//! Built-in example sprays and certificates: the spiral system, Shen's
//! circle system, flat baselines, Riemannian sprays from a metric, and the
//! spiral path-space chart with its symplectic form.

use crate::error::{Error, Result};
use crate::fieldspec::{parse_field, Expr, FieldDef, FieldKind};
use crate::jets::Jet;
use crate::metrizability::OmegaSource;
use crate::spray::{eval_metric, Point};
use nalgebra::DMatrix;

pub const SPIRAL_SPRAY_SRC: &str =
    "G1 = v*sqrt(u^2+v^2+w^2)/2; G2 = -u*sqrt(u^2+v^2+w^2)/2; G3 = 0;";
pub const CIRCLE_SPRAY_SRC: &str = "G1 = v*sqrt(u^2+v^2)/2; G2 = -u*sqrt(u^2+v^2)/2;";
pub const SPIRAL_F_SRC: &str = "F = sqrt(u^2+v^2+w^2) + (y*u - x*v)/2";
pub const CIRCLE_F_SRC: &str = "F = sqrt(u^2+v^2) + (y*u - x*v)/2";

/// Closed-form spiral 2-form: dx∧dy plus b_ij dx^i∧dy^j with b the fibre
/// Hessian of the length term.
pub const SPIRAL_OMEGA_SRC: &str = "\
A12 = 1; \
B11 = (v^2+w^2)/sqrt(u^2+v^2+w^2)^3; \
B12 = -u*v/sqrt(u^2+v^2+w^2)^3; \
B13 = -u*w/sqrt(u^2+v^2+w^2)^3; \
B21 = -u*v/sqrt(u^2+v^2+w^2)^3; \
B22 = (u^2+w^2)/sqrt(u^2+v^2+w^2)^3; \
B23 = -v*w/sqrt(u^2+v^2+w^2)^3; \
B31 = -u*w/sqrt(u^2+v^2+w^2)^3; \
B32 = -v*w/sqrt(u^2+v^2+w^2)^3; \
B33 = (u^2+v^2)/sqrt(u^2+v^2+w^2)^3;";

pub fn builtin_spray(name: &str) -> Result<FieldDef> {
    match name {
        "spiral" => parse_field(SPIRAL_SPRAY_SRC, FieldKind::Spray, 3),
        "circle" => parse_field(CIRCLE_SPRAY_SRC, FieldKind::Spray, 2),
        "flat" => flat_spray(3),
        "flat2" => flat_spray(2),
        other => Err(Error::Config(format!("unknown builtin spray '{other}'"))),
    }
}

pub fn builtin_finsler(name: &str) -> Result<FieldDef> {
    match name {
        "spiral" => parse_field(SPIRAL_F_SRC, FieldKind::Scalar, 3),
        "circle" => parse_field(CIRCLE_F_SRC, FieldKind::Scalar, 2),
        other => Err(Error::Config(format!("no builtin Finsler function '{other}'"))),
    }
}

pub fn builtin_twoform(name: &str) -> Result<FieldDef> {
    match name {
        "spiral" => parse_field(SPIRAL_OMEGA_SRC, FieldKind::TwoForm, 3),
        other => Err(Error::Config(format!("no builtin 2-form '{other}'"))),
    }
}

pub fn flat_spray(n: usize) -> Result<FieldDef> {
    let exprs = vec![Expr::num(0.0); n];
    FieldDef::from_exprs(FieldKind::Spray, n, exprs)
}

/// Spray of the Levi-Civita connection of a base metric g(x):
/// Γ^i = ½ γ^i_{jk}(x) y^j y^k, assembled symbolically. The inverse metric
/// is built from cofactors, so only n ≤ 3 is supported.
pub fn riemannian_spray(g: &FieldDef) -> Result<FieldDef> {
    if g.kind != FieldKind::Sym2 {
        return Err(Error::Config("riemannian spray needs sym2 metric components".into()));
    }
    let n = g.n;
    if n > 3 {
        return Err(Error::Config(
            "riemannian builtin supports n <= 3 (symbolic cofactor inverse)".into(),
        ));
    }
    for p in crate::spray::probe_points(n) {
        let gm = eval_metric(g, &p.x)?;
        if gm.clone().cholesky().is_none() {
            return Err(Error::Metric(format!(
                "metric not positive definite at probe x = {:?}",
                p.x
            )));
        }
    }
    let gij = |i: usize, j: usize| g.sym2_expr(i, j).clone();
    // determinant and cofactor expressions
    let det: Expr = match n {
        1 => gij(0, 0),
        2 => Expr::sub(
            Expr::mul(gij(0, 0), gij(1, 1)),
            Expr::mul(gij(0, 1), gij(1, 0)),
        ),
        _ => {
            let m2 = |a: (usize, usize), b: (usize, usize), c: (usize, usize), d: (usize, usize)| {
                Expr::sub(Expr::mul(gij(a.0, a.1), gij(b.0, b.1)), Expr::mul(gij(c.0, c.1), gij(d.0, d.1)))
            };
            Expr::add(
                Expr::sub(
                    Expr::mul(gij(0, 0), m2((1, 1), (2, 2), (1, 2), (2, 1))),
                    Expr::mul(gij(0, 1), m2((1, 0), (2, 2), (1, 2), (2, 0))),
                ),
                Expr::mul(gij(0, 2), m2((1, 0), (2, 1), (1, 1), (2, 0))),
            )
        }
    };
    let cof = |i: usize, l: usize| -> Expr {
        // (i, l) entry of the inverse times det: cofactor C_{li}
        match n {
            1 => Expr::num(1.0),
            2 => {
                let sign = if (i + l) % 2 == 0 { 1.0 } else { -1.0 };
                Expr::mul(Expr::num(sign), gij(1 - l, 1 - i))
            }
            _ => {
                let rows: Vec<usize> = (0..3).filter(|&r| r != l).collect();
                let cols: Vec<usize> = (0..3).filter(|&c| c != i).collect();
                let minor = Expr::sub(
                    Expr::mul(gij(rows[0], cols[0]), gij(rows[1], cols[1])),
                    Expr::mul(gij(rows[0], cols[1]), gij(rows[1], cols[0])),
                );
                let sign = if (i + l) % 2 == 0 { 1.0 } else { -1.0 };
                Expr::mul(Expr::num(sign), minor)
            }
        }
    };
    let mut exprs = Vec::with_capacity(n);
    for i in 0..n {
        // Γ^i = ½ g^{il} (∂_j g_{lk} − ½ ∂_l g_{jk}) y^j y^k, using symmetry
        // of y^j y^k to fold the (j, k) symmetrization
        let mut acc = Expr::num(0.0);
        for l in 0..n {
            let mut inner = Expr::num(0.0);
            for j in 0..n {
                for k in 0..n {
                    let term = Expr::sub(
                        gij(l, k).diff(j),
                        Expr::mul(Expr::num(0.5), gij(j, k).diff(l)),
                    );
                    inner = Expr::add(
                        inner,
                        Expr::mul(term, Expr::mul(Expr::var(n + j), Expr::var(n + k))),
                    );
                }
            }
            acc = Expr::add(acc, Expr::mul(cof(i, l), inner));
        }
        exprs.push(Expr::div(Expr::mul(Expr::num(0.5), acc), det.clone()));
    }
    FieldDef::from_exprs(FieldKind::Spray, n, exprs)
}

/// F recentered at (x₀, y₀); differs from the spiral F by a total derivative
/// so its fibre Hessian is unchanged.
pub fn shifted_finsler(x0: f64, y0: f64) -> Result<FieldDef> {
    let src = format!(
        "F = sqrt(u^2+v^2+w^2) + ((y - ({y0}))*u - (x - ({x0}))*v)/2"
    );
    parse_field(&src, FieldKind::Scalar, 3)
}

// ---------------------------------------------------------------------------
// Path-space chart
// ---------------------------------------------------------------------------

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCoords {
    pub xi: f64,
    pub eta: f64,
    pub nu: f64,
    pub vartheta: f64,
}

/// Phase distance mod 2π.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn genuine_spiral_guard(p: &Point) -> Result<(f64, f64)> {
    let lam = p.y_norm();
    let mu = (p.y[0] * p.y[0] + p.y[1] * p.y[1]).sqrt();
    let w = p.y[2];
    if w.abs() <= 1e-9 * lam {
        return Err(Error::DegenerateRay("w = 0: circle, not a genuine spiral".into()));
    }
    if mu <= 1e-9 * lam {
        return Err(Error::DegenerateRay("mu = 0: vertical line, not a genuine spiral".into()));
    }
    Ok((lam, mu))
}

/// Chart map (x, y, z; u, v, w) → (ξ, η, ν, ϑ) on genuine spirals.
pub fn to_path_coords_spiral(p: &Point) -> Result<PathCoords> {
    if p.n() != 3 {
        return Err(Error::DimensionMismatch("spiral chart needs n = 3".into()));
    }
    let (lam, _mu) = genuine_spiral_guard(p)?;
    let (u, v, w) = (p.y[0], p.y[1], p.y[2]);
    let nu = w / lam;
    let xi = p.x[0] - v / lam;
    let eta = p.x[1] + u / lam;
    let vartheta = ((-u).atan2(v) - p.x[2] / nu).rem_euclid(TAU);
    Ok(PathCoords { xi, eta, nu, vartheta })
}

/// A representative phase point of the spiral with the given path
/// coordinates (the z = 0 point with unit fibre velocity).
pub fn path_point(pc: &PathCoords) -> Result<Point> {
    if pc.nu.abs() >= 1.0 || pc.nu == 0.0 {
        return Err(Error::DegenerateRay(format!(
            "pitch nu = {} outside (-1, 1) \\ {{0}}",
            pc.nu
        )));
    }
    let mu = (1.0 - pc.nu * pc.nu).sqrt();
    let u = -mu * pc.vartheta.sin();
    let v = mu * pc.vartheta.cos();
    let w = pc.nu;
    // λ = 1, so x = ξ + v, y = η − u, z = 0
    Point::new(vec![pc.xi + v, pc.eta - u, 0.0], vec![u, v, w])
}

/// Ω = dξ∧dη + ν dν∧dϑ on two tangent 4-vectors in (ξ, η, ν, ϑ) order.
pub fn omega_path_spiral(pc: &PathCoords, t1: &[f64; 4], t2: &[f64; 4]) -> f64 {
    (t1[0] * t2[1] - t1[1] * t2[0]) + pc.nu * (t1[2] * t2[3] - t1[3] * t2[2])
}

/// Symbolic chart components (ξ, η, ν, ϑ) as expressions in the 6 variables.
fn spiral_chart_exprs() -> [Expr; 4] {
    let lam = Expr::sqrt(Expr::add(
        Expr::add(
            Expr::pow(Expr::var(3), 2),
            Expr::pow(Expr::var(4), 2),
        ),
        Expr::pow(Expr::var(5), 2),
    ));
    let xi = Expr::sub(Expr::var(0), Expr::div(Expr::var(4), lam.clone()));
    let eta = Expr::add(Expr::var(1), Expr::div(Expr::var(3), lam.clone()));
    let nu = Expr::div(Expr::var(5), lam.clone());
    // ϑ = atan2(−u, v) − z·λ/w (phase offset; derivatives are what matter)
    let theta = Expr::sub(
        Expr::Atan2(Box::new(Expr::neg(Expr::var(3))), Box::new(Expr::var(4))),
        Expr::div(Expr::mul(Expr::var(2), lam), Expr::var(5)),
    );
    [xi, eta, nu, theta]
}

/// 4×6 Jacobian of the chart map at a genuine-spiral point.
pub fn spiral_chart_jacobian(p: &Point) -> Result<DMatrix<f64>> {
    genuine_spiral_guard(p)?;
    let n = 3;
    let vars: Vec<Jet> = (0..2 * n)
        .map(|a| {
            let val = if a < n { p.x[a] } else { p.y[a - n] };
            Jet::variable(1, n, a, val)
        })
        .collect();
    let exprs = spiral_chart_exprs();
    let mut jac = DMatrix::zeros(4, 2 * n);
    for (r, e) in exprs.iter().enumerate() {
        let jet = e.eval_jet(&vars)?;
        for a in 0..2 * n {
            jac[(r, a)] = jet.grad(a);
        }
    }
    Ok(jac)
}

/// Pullback of Ω through the chart map, as a 6×6 coordinate matrix.
pub fn pullback_omega_spiral(p: &Point) -> Result<DMatrix<f64>> {
    let pc = to_path_coords_spiral(p)?;
    let jac = spiral_chart_jacobian(p)?;
    let mut omega4 = DMatrix::zeros(4, 4);
    omega4[(0, 1)] = 1.0;
    omega4[(1, 0)] = -1.0;
    omega4[(2, 3)] = pc.nu;
    omega4[(3, 2)] = -pc.nu;
    Ok(jac.transpose() * omega4 * jac)
}

/// Three-way comparison at a genuine-spiral point: chart pullback of Ω,
/// closed-form ω, and the Hilbert 2-form dθ of F (sign-normalized).
pub fn pullback_check_spiral(p: &Point, tol: f64) -> Result<crate::metrizability::ConditionReport> {
    let spray = builtin_spray("spiral")?;
    let pull = pullback_omega_spiral(p)?;
    let closed = OmegaSource::Field(builtin_twoform("spiral")?).matrix(&spray, p)?;
    let hilbert = OmegaSource::HilbertOf(builtin_finsler("spiral")?).matrix(&spray, p)?;
    let scale = closed.amax().max(1e-30);
    let mut rep = crate::metrizability::ConditionReport::new();
    rep.push("pullback_vs_closed", (&pull - &closed).amax(), scale, tol);
    let d_plus = (&closed - &hilbert).amax();
    let d_minus = (&closed + &hilbert).amax();
    rep.push("closed_vs_hilbert", d_plus.min(d_minus), scale, tol);
    let s = if d_plus <= d_minus { 1.0 } else { -1.0 };
    rep.push("pullback_vs_hilbert", (&pull - &hilbert * s).amax(), scale, tol);
    Ok(rep)
}

/// Max |Ω(dφ V₁, dφ V₂)| over vertical tangent pairs at p — the 2-manifold
/// of spirals through a fixed base point is Lagrangian.
pub fn fibre_lagrangian_residual(p: &Point) -> Result<f64> {
    let pull = pullback_omega_spiral(p)?;
    let mut worst = 0.0f64;
    for a in 3..6 {
        for b in 3..6 {
            worst = worst.max(pull[(a, b)].abs());
        }
    }
    Ok(worst)
}

/// Circle-example identity: dθ of the circle F equals −dξ∧dη pulled back
/// through ξ = x − v/μ, η = y + u/μ. Returns the max componentwise
/// deviation.
pub fn circle_dtheta_check(p: &Point) -> Result<f64> {
    if p.n() != 2 {
        return Err(Error::DimensionMismatch("circle example needs n = 2".into()));
    }
    let mu = p.y_norm();
    if mu <= 1e-9 {
        return Err(Error::DegenerateRay("mu = 0".into()));
    }
    let spray = builtin_spray("circle")?;
    let hilbert = OmegaSource::HilbertOf(builtin_finsler("circle")?).matrix(&spray, p)?;
    // Jacobian of (ξ, η)
    let n = 2;
    let muq = Expr::sqrt(Expr::add(
        Expr::pow(Expr::var(2), 2),
        Expr::pow(Expr::var(3), 2),
    ));
    let xi = Expr::sub(Expr::var(0), Expr::div(Expr::var(3), muq.clone()));
    let eta = Expr::add(Expr::var(1), Expr::div(Expr::var(2), muq));
    let vars: Vec<Jet> = (0..2 * n)
        .map(|a| {
            let val = if a < n { p.x[a] } else { p.y[a - n] };
            Jet::variable(1, n, a, val)
        })
        .collect();
    let jxi = xi.eval_jet(&vars)?;
    let jeta = eta.eval_jet(&vars)?;
    let mut pull = DMatrix::zeros(4, 4);
    for a in 0..4 {
        for b in 0..4 {
            // (dξ∧dη)(e_a, e_b)
            pull[(a, b)] = jxi.grad(a) * jeta.grad(b) - jxi.grad(b) * jeta.grad(a);
        }
    }
    Ok((hilbert + pull).amax())
}

/// Min of F over unit fibre directions at base x: a deterministic sphere
/// sweep followed by projected gradient refinement of the best candidate.
pub fn min_f_on_unit_fibre(f: &FieldDef, x: &[f64], samples: usize) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let n = f.n;
    let eval = |y: &[f64]| -> Result<f64> {
        let p = Point::new(x.to_vec(), y.to_vec())?;
        Ok(f.eval_values(&p)?[0])
    };
    let mut best = f64::INFINITY;
    let mut best_y = vec![0.0; n];
    let mut consider = |y: Vec<f64>| -> Result<()> {
        let v = eval(&y)?;
        if v < best {
            best = v;
            best_y = y;
        }
        Ok(())
    };
    if n == 3 {
        // Fibonacci sphere lattice
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        for k in 0..samples {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / samples as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            consider(vec![r * phi.cos(), r * phi.sin(), z])?;
        }
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mut drawn = 0usize;
        while drawn < samples {
            let y: Vec<f64> = (0..n)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            drawn += 1;
            consider(y.iter().map(|v| v / norm).collect())?;
        }
    }
    // projected gradient descent on the sphere from the best grid direction
    let mut y = best_y;
    let mut val = best;
    let mut step = 0.2;
    for _ in 0..300 {
        let p = Point::new(x.to_vec(), y.clone())?;
        let jet = f.eval_scalar_jet(&p, 1)?;
        let g: Vec<f64> = (0..n).map(|i| jet.grad(n + i)).collect();
        let radial: f64 = g.iter().zip(&y).map(|(a, b)| a * b).sum();
        let proj: Vec<f64> = g
            .iter()
            .zip(&y)
            .map(|(gi, yi)| gi - radial * yi)
            .collect();
        let gn = proj.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn < 1e-13 {
            break;
        }
        let mut trial: Vec<f64> = y.iter().zip(&proj).map(|(yi, gi)| yi - step * gi).collect();
        let tn = trial.iter().map(|v| v * v).sum::<f64>().sqrt();
        for t in trial.iter_mut() {
            *t /= tn;
        }
        let tv = eval(&trial)?;
        if tv < val {
            y = trial;
            val = tv;
            step = (step * 1.3).min(0.5);
        } else {
            step *= 0.5;
            if step < 1e-10 {
                break;
            }
        }
    }
    Ok(val)
}
