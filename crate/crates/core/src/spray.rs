//! Objects derived from a spray: connection coefficients, horizontal frame,
//! curvature, Jacobi endomorphism, dynamical covariant derivative, projective
//! transforms, homogeneity probes, semispray normalization, and the isotropy
//! decomposition of the Jacobi endomorphism.

use crate::error::{Error, Result};
use crate::fieldspec::{Expr, FieldDef, FieldKind};
use crate::jets::Jet;
use nalgebra::{DMatrix, DVector};

/// Points with fibre norm below this are outside the slit tangent bundle
/// chart we work in.
pub const EPS_FIBRE: f64 = 1e-6;

/// A point of the slit tangent bundle in a single chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Point {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Point> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "base dim {} vs fibre dim {}",
                x.len(),
                y.len()
            )));
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < EPS_FIBRE {
            return Err(Error::Domain(format!(
                "fibre vector norm {norm:e} below slit-bundle guard {EPS_FIBRE:e}"
            )));
        }
        Ok(Point { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn y_norm(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Same base point with the fibre vector scaled by `s > 0`.
    pub fn scaled_fibre(&self, s: f64) -> Point {
        Point {
            x: self.x.clone(),
            y: self.y.iter().map(|v| s * v).collect(),
        }
    }
}

/// Derivative blocks of the spray coefficients at one point.
#[derive(Debug, Clone)]
pub struct SprayData {
    pub n: usize,
    /// Γ^i
    pub gamma: DVector<f64>,
    /// Γ^i_j = ∂Γ^i/∂y^j, indexed (i, j)
    pub gamma_j: DMatrix<f64>,
    /// Γ^i_{jk} = ∂²Γ^i/∂y^j∂y^k; `gamma_jk[i]` is the (j, k) matrix
    pub gamma_jk: Vec<DMatrix<f64>>,
    /// ∂Γ^i/∂x^j, indexed (i, j)
    pub dgamma_dx: DMatrix<f64>,
    /// ∂Γ^i_j/∂x^k; `dgammaj_dx[i]` is the (j, k) matrix
    pub dgammaj_dx: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub n: usize,
    /// R^l_{ij}, antisymmetric in (i, j); `r3[l]` is the (i, j) matrix
    pub r3: Vec<DMatrix<f64>>,
    /// Jacobi endomorphism R^k_j = R^k_{jl} y^l, indexed (k, j)
    pub r2: DMatrix<f64>,
}

fn check_spray_kind(spray: &FieldDef) -> Result<()> {
    if spray.kind != FieldKind::Spray {
        return Err(Error::Config("expected a spray field".into()));
    }
    Ok(())
}

/// All derivative blocks of Γ^i from one order-2 jet pass.
pub fn spray_data(spray: &FieldDef, p: &Point) -> Result<SprayData> {
    check_spray_kind(spray)?;
    let n = spray.n;
    let jets = spray.eval_jets(p, 2)?;
    let mut gamma = DVector::zeros(n);
    let mut gamma_j = DMatrix::zeros(n, n);
    let mut dgamma_dx = DMatrix::zeros(n, n);
    let mut gamma_jk = Vec::with_capacity(n);
    let mut dgammaj_dx = Vec::with_capacity(n);
    for (i, jet) in jets.iter().enumerate() {
        gamma[i] = jet.value();
        let mut h2 = DMatrix::zeros(n, n);
        let mut hx = DMatrix::zeros(n, n);
        for j in 0..n {
            gamma_j[(i, j)] = jet.grad(n + j);
            dgamma_dx[(i, j)] = jet.grad(j);
            for k in 0..n {
                h2[(j, k)] = jet.hess(n + j, n + k);
                hx[(j, k)] = jet.hess(n + j, k);
            }
        }
        gamma_jk.push(h2);
        dgammaj_dx.push(hx);
    }
    Ok(SprayData { n, gamma, gamma_j, gamma_jk, dgamma_dx, dgammaj_dx })
}

impl SprayData {
    /// Trace connection Γ_i = ∂Γ^k_k/∂y^i = Σ_k Γ^k_{ki}.
    pub fn trace_connection(&self) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |i, _| (0..n).map(|k| self.gamma_jk[k][(k, i)]).sum())
    }

    /// Horizontal lift of a base vector: (v, -Γ^j_k v^k) as a 2n-vector.
    pub fn hlift(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; 2 * n];
        out[..n].copy_from_slice(v);
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += self.gamma_j[(j, k)] * v[k];
            }
            out[n + j] = -s;
        }
        out
    }

    pub fn vlift(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut out = vec![0.0; 2 * n];
        out[n..].copy_from_slice(v);
        out
    }

    /// Components of the spray vector field Γ = (y, -2Γ^i) at the point.
    pub fn spray_vector(&self, p: &Point) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; 2 * n];
        out[..n].copy_from_slice(&p.y);
        for i in 0..n {
            out[n + i] = -2.0 * self.gamma[i];
        }
        out
    }

    /// Directional derivative of a function with known full gradient along Γ.
    pub fn spray_derivative(&self, p: &Point, grad: &dyn Fn(usize) -> f64) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for k in 0..n {
            s += p.y[k] * grad(k) - 2.0 * self.gamma[k] * grad(n + k);
        }
        s
    }
}

/// Curvature of the horizontal distribution and the Jacobi endomorphism,
/// assembled from the spray's second-order jet data:
/// R^l_{ij} = H_i(Γ^l_j) - H_j(Γ^l_i).
pub fn curvature(spray: &FieldDef, p: &Point) -> Result<CurvatureData> {
    let sd = spray_data(spray, p)?;
    Ok(curvature_from_data(&sd, p))
}

pub fn curvature_from_data(sd: &SprayData, p: &Point) -> CurvatureData {
    let n = sd.n;
    let mut r3 = Vec::with_capacity(n);
    for l in 0..n {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                // H_i(Γ^l_j) = ∂Γ^l_j/∂x^i - Γ^k_i ∂Γ^l_j/∂y^k
                let mut hi = sd.dgammaj_dx[l][(j, i)];
                let mut hj = sd.dgammaj_dx[l][(i, j)];
                for k in 0..n {
                    hi -= sd.gamma_j[(k, i)] * sd.gamma_jk[l][(j, k)];
                    hj -= sd.gamma_j[(k, j)] * sd.gamma_jk[l][(i, k)];
                }
                m[(i, j)] = hi - hj;
            }
        }
        r3.push(m);
    }
    let mut r2 = DMatrix::zeros(n, n);
    for k in 0..n {
        for j in 0..n {
            r2[(k, j)] = (0..n).map(|l| r3[k][(j, l)] * p.y[l]).sum();
        }
    }
    CurvatureData { n, r3, r2 }
}

/// (∇h)_{ij} = Γ(h_{ij}) - Γ^k_i h_{kj} - Γ^k_j h_{ik}, with `h` given as
/// order-1 jets of its components.
pub fn dyn_cov_deriv_from_jets(
    sd: &SprayData,
    p: &Point,
    h_jets: &[Vec<Jet>],
) -> DMatrix<f64> {
    let n = sd.n;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let jet = &h_jets[i][j];
            let mut v = sd.spray_derivative(p, &|a| jet.grad(a));
            for k in 0..n {
                v -= sd.gamma_j[(k, i)] * h_jets[k][j].value();
                v -= sd.gamma_j[(k, j)] * h_jets[i][k].value();
            }
            out[(i, j)] = v;
        }
    }
    out
}

/// Dynamical covariant derivative of an explicit sym2 field.
pub fn dyn_cov_deriv(spray: &FieldDef, h: &FieldDef, p: &Point) -> Result<DMatrix<f64>> {
    if h.kind != FieldKind::Sym2 {
        return Err(Error::Config("expected a sym2tensor field for h".into()));
    }
    let sd = spray_data(spray, p)?;
    let h_jets = h.eval_sym2_jets(p, 1)?;
    Ok(dyn_cov_deriv_from_jets(&sd, p, &h_jets))
}

/// Max over scales and components of |f(x, s·y) − s^degree f(x, y)|.
pub fn homogeneity_residual(
    f: &FieldDef,
    degree: f64,
    p: &Point,
    scales: &[f64],
) -> Result<f64> {
    let base = f.eval_values(p)?;
    let mut worst = 0.0f64;
    for &s in scales {
        if s <= 0.0 {
            return Err(Error::Config("homogeneity scales must be positive".into()));
        }
        let scaled = f.eval_values(&p.scaled_fibre(s))?;
        let factor = s.powf(degree);
        for (a, b) in scaled.iter().zip(&base) {
            worst = worst.max((a - factor * b).abs());
        }
    }
    Ok(worst)
}

/// Deterministic probe points used for homogeneity and definiteness checks.
pub fn probe_points(n: usize) -> Vec<Point> {
    let mut pts = Vec::new();
    let dirs: [&[f64]; 4] = [
        &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        &[0.3, -0.8, 0.52, -0.1, 0.9, 0.2],
        &[-0.6, 0.4, 0.7, 0.8, -0.3, -0.5],
        &[0.1, 0.2, -0.9, 0.4, 0.4, 0.7],
    ];
    let xs: [&[f64]; 2] = [
        &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        &[0.4, -0.3, 0.6, 0.1, -0.2, 0.5],
    ];
    for x in xs {
        for d in dirs {
            let y: Vec<f64> = d[..n].to_vec();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 0.1 {
                continue;
            }
            let y: Vec<f64> = y.iter().map(|v| v / norm).collect();
            pts.push(Point::new(x[..n].to_vec(), y).unwrap());
        }
    }
    pts
}

/// Projective transform Γ → Γ − 2PΔ at the level of coefficients:
/// Γ̃^i = Γ^i + P·y^i. `P` must be positively homogeneous of degree 1.
pub fn projective_transform(spray: &FieldDef, p_fn: &FieldDef) -> Result<FieldDef> {
    check_spray_kind(spray)?;
    if p_fn.kind != FieldKind::Scalar {
        return Err(Error::Config("projective factor must be a scalar field".into()));
    }
    let n = spray.n;
    for probe in probe_points(n) {
        let r = homogeneity_residual(p_fn, 1.0, &probe, &[0.5, 2.0])?;
        if r > 1e-8 {
            return Err(Error::Homogeneity(format!(
                "projective factor fails degree-1 homogeneity (residual {r:e})"
            )));
        }
    }
    let p_expr = p_fn.scalar_expr().clone();
    let exprs: Vec<Expr> = (0..n)
        .map(|i| {
            Expr::add(
                spray.component(i).clone(),
                Expr::mul(p_expr.clone(), Expr::var(n + i)),
            )
        })
        .collect();
    FieldDef::from_exprs(FieldKind::Spray, n, exprs)
}

/// Arc-length normalization: given a second-order field `z` (semispray
/// coefficients) and a base Riemannian metric `g` (sym2 components in x
/// only), return the spray z + fΔ with f = −z(G)/G, G = √(g_{ij} y^i y^j).
/// The output satisfies Γ(G) = 0.
pub fn normalize_semispray(z: &FieldDef, g: &FieldDef) -> Result<FieldDef> {
    check_spray_kind(z)?;
    if g.kind != FieldKind::Sym2 {
        return Err(Error::Config("metric must be a sym2tensor field".into()));
    }
    let n = z.n;
    // positive-definiteness at probe points
    for probe in probe_points(n) {
        let m = eval_metric(g, &probe.x)?;
        if m.clone().cholesky().is_none() {
            return Err(Error::Metric(format!(
                "metric not positive definite at probe x = {:?}",
                probe.x
            )));
        }
    }
    // G = sqrt(sum g_ij y^i y^j)
    let mut quad = Expr::num(0.0);
    for i in 0..n {
        for j in i..n {
            let coeff = if i == j { 1.0 } else { 2.0 };
            quad = Expr::add(
                quad,
                Expr::mul(
                    Expr::mul(Expr::num(coeff), g.sym2_expr(i, j).clone()),
                    Expr::mul(Expr::var(n + i), Expr::var(n + j)),
                ),
            );
        }
    }
    let g_expr = Expr::sqrt(quad);
    // z(G) = y^k ∂G/∂x^k − 2 z^k ∂G/∂y^k
    let mut zg = Expr::num(0.0);
    for k in 0..n {
        zg = Expr::add(zg, Expr::mul(Expr::var(n + k), g_expr.diff(k)));
        zg = Expr::sub(
            zg,
            Expr::mul(
                Expr::mul(Expr::num(2.0), z.component(k).clone()),
                g_expr.diff(n + k),
            ),
        );
    }
    // Γ = z + fΔ with f = −z(G)/G acts on coefficients as
    // Γ^i = z^i + (z(G)/(2G)) y^i
    let half_f = Expr::div(zg, Expr::mul(Expr::num(2.0), g_expr));
    let exprs: Vec<Expr> = (0..n)
        .map(|i| {
            Expr::add(
                z.component(i).clone(),
                Expr::mul(half_f.clone(), Expr::var(n + i)),
            )
        })
        .collect();
    FieldDef::from_exprs(FieldKind::Spray, n, exprs)
}

/// Evaluate a base-only metric field at `x` (fibre argument is irrelevant but
/// a valid one is required by the chart guard).
pub fn eval_metric(g: &FieldDef, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = g.n;
    let p = Point::new(x.to_vec(), {
        let mut y = vec![0.0; n];
        y[0] = 1.0;
        y
    })?;
    let jets = g.eval_sym2_jets(&p, 0)?;
    Ok(DMatrix::from_fn(n, n, |i, j| jets[i][j].value()))
}

/// Least-squares fit of the Jacobi endomorphism to λδ^i_j + μ_j y^i.
pub fn isotropy_residual(spray: &FieldDef, p: &Point) -> Result<(f64, DVector<f64>, f64)> {
    let n = spray.n;
    let cd = curvature(spray, p)?;
    // unknowns: (λ, μ_1..μ_n); rows: entries (i, j) of R^i_j
    let rows = n * n;
    let cols = 1 + n;
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            a[(r, 0)] = if i == j { 1.0 } else { 0.0 };
            a[(r, 1 + j)] = p.y[i];
            b[r] = cd.r2[(i, j)];
        }
    }
    let mut ata = a.transpose() * &a;
    for k in 0..cols {
        ata[(k, k)] += 1e-12;
    }
    let atb = a.transpose() * &b;
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::Domain("isotropy normal equations singular".into()))?;
    let misfit = &a * &sol - &b;
    let lambda = sol[0];
    let mu = DVector::from_fn(n, |j, _| sol[1 + j]);
    Ok((lambda, mu, misfit.norm()))
}
