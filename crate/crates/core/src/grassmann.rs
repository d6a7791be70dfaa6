//! Almost Grassmann data on the volume-weighted bundle: the trace
//! connection, the adapted frame/coframe, the 2-form ϖ = h_{ij} dx^i∧θ₂^j,
//! and isotropy checks on the Segre-cone generators.
//!
//! Everything is chart-local: the weight coordinate is frozen to 1, so the
//! weighted fibre coordinate u coincides numerically with y.

use crate::error::{Error, Result};
use crate::fieldspec::FieldDef;
use crate::metrizability::{ConditionReport, Multiplier};
use crate::spray::{spray_data, Point};
use nalgebra::{DMatrix, DVector};

/// Adapted frame and coframe at a weighted point. Covectors and vectors are
/// stored as 2n-component arrays over the (dx, du) / (∂x, ∂u) bases.
#[derive(Debug, Clone)]
pub struct GrassmannFrame {
    pub n: usize,
    /// Γ_i = ∂Γ^k_k/∂y^i
    pub trace_conn: DVector<f64>,
    /// θ₁^i = dx^i
    pub theta1: Vec<DVector<f64>>,
    /// θ₂^i = du^i + (Γ^i_j − u^iΓ_j/(n+1)) dx^j
    pub theta2: Vec<DVector<f64>>,
    /// horizontal vectors dual to θ₁ and annihilated by θ₂
    pub k: Vec<DVector<f64>>,
    /// connection block c^i_j = Γ^i_j − u^iΓ_j/(n+1)
    pub conn: DMatrix<f64>,
}

pub fn grassmann_frame(spray: &FieldDef, p: &Point) -> Result<GrassmannFrame> {
    let n = spray.n;
    let sd = spray_data(spray, p)?;
    let trace_conn = sd.trace_connection();
    let conn = DMatrix::from_fn(n, n, |i, j| {
        sd.gamma_j[(i, j)] - p.y[i] * trace_conn[j] / (n as f64 + 1.0)
    });
    let dim = 2 * n;
    let mut theta1 = Vec::with_capacity(n);
    let mut theta2 = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    for i in 0..n {
        let mut t1 = DVector::zeros(dim);
        t1[i] = 1.0;
        theta1.push(t1);
        let mut t2 = DVector::zeros(dim);
        t2[n + i] = 1.0;
        for j in 0..n {
            t2[j] = conn[(i, j)];
        }
        theta2.push(t2);
        let mut kv = DVector::zeros(dim);
        kv[i] = 1.0;
        for l in 0..n {
            kv[n + l] = -conn[(l, i)];
        }
        k.push(kv);
    }
    Ok(GrassmannFrame {
        n,
        trace_conn,
        theta1,
        theta2,
        k,
        conn,
    })
}

impl GrassmannFrame {
    /// Max deviation of ⟨θ₁^i, K_j⟩ = δ^i_j and ⟨θ₂^i, K_j⟩ = 0.
    pub fn duality_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let d1 = self.theta1[i].dot(&self.k[j]) - if i == j { 1.0 } else { 0.0 };
                let d2 = self.theta2[i].dot(&self.k[j]);
                worst = worst.max(d1.abs()).max(d2.abs());
            }
        }
        worst
    }

    /// Coordinate matrix of ϖ = h_{ij} dx^i∧θ₂^j.
    pub fn varpi_matrix(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let dim = 2 * n;
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                m[(i, n + j)] += h[(i, j)];
                m[(n + j, i)] -= h[(i, j)];
                for l in 0..n {
                    m[(i, l)] += h[(i, j)] * self.conn[(j, l)];
                    m[(l, i)] -= h[(i, j)] * self.conn[(j, l)];
                }
            }
        }
        m
    }

    pub fn apply(&self, m: &DMatrix<f64>, z1: &DVector<f64>, z2: &DVector<f64>) -> f64 {
        (z1.transpose() * m * z2)[(0, 0)]
    }

    /// Horizontal lift through K.
    pub fn hlift(&self, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(2 * self.n);
        for (i, &c) in v.iter().enumerate() {
            out += &self.k[i] * c;
        }
        out
    }

    pub fn vlift(&self, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(2 * self.n);
        for (i, &c) in v.iter().enumerate() {
            out[self.n + i] = c;
        }
        out
    }
}

/// Deterministic grid of unit vectors orthogonal to `u`.
pub fn unit_grid_orthogonal(u: &[f64], count: usize) -> Vec<DVector<f64>> {
    let n = u.len();
    let unorm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut basis: Vec<DVector<f64>> = vec![DVector::from_fn(n, |i, _| u[i] / unorm)];
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        for b in &basis {
            let c = b.dot(&e);
            e -= b * c;
        }
        if e.norm() > 1e-8 {
            let nrm = e.norm();
            basis.push(e / nrm);
        }
    }
    let comp = &basis[1..];
    let k = comp.len();
    let mut out = Vec::with_capacity(count);
    if k == 0 {
        return out;
    }
    // sweep great circles through the complement with golden-angle spacing
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    for s in 0..count {
        let mut v = DVector::zeros(n);
        let mut phase = golden * s as f64;
        for b in comp.iter() {
            v += b * phase.cos();
            phase = phase * 1.7 + golden;
        }
        let nrm = v.norm();
        if nrm > 1e-8 {
            out.push(v / nrm);
        }
    }
    out
}

fn check_annihilates(h: &DMatrix<f64>, u: &[f64]) -> Result<()> {
    let n = u.len();
    let scale = h.amax().max(1e-30) * u.iter().map(|v| v * v).sum::<f64>().sqrt();
    for i in 0..n {
        let s: f64 = (0..n).map(|j| h[(i, j)] * u[j]).sum();
        if s.abs() > 1e-8 * scale.max(1.0) {
            return Err(Error::Annihilation(s.abs()));
        }
    }
    Ok(())
}

/// Isotropy and definiteness checks on ϖ built from a multiplier matrix.
pub fn segre_checks_matrix(
    spray: &FieldDef,
    h: &DMatrix<f64>,
    p: &Point,
    tol: f64,
) -> Result<ConditionReport> {
    check_annihilates(h, &p.y)?;
    let frame = grassmann_frame(spray, p)?;
    let n = frame.n;
    let m = frame.varpi_matrix(h);
    let scale = h.amax().max(1e-30);

    let mut rep = ConditionReport::new();

    let mut horiz = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            horiz = horiz.max(frame.apply(&m, &frame.k[i], &frame.k[j]).abs());
        }
    }
    rep.push("horiz_isotropy", horiz, scale, tol);

    let mut vert = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            vert = vert.max(m[(n + i, n + j)].abs());
        }
    }
    rep.push("vert_isotropy", vert, scale, tol);

    // i_Γϖ and i_Δϖ in the weighted chart
    let sd = spray_data(spray, p)?;
    let gamma_vec = DVector::from_vec(sd.spray_vector(p));
    let mut delta_vec = DVector::zeros(2 * n);
    for i in 0..n {
        delta_vec[n + i] = p.y[i];
    }
    let contract = |v: &DVector<f64>| -> f64 {
        let row = v.transpose() * &m;
        row.amax()
    };
    let char_d = contract(&gamma_vec).max(contract(&delta_vec));
    rep.push("char_D", char_d, scale * p.y_norm().max(1.0), tol);

    // min |ϖ(hlift v, vlift v)| = |h(v,v)| over a grid of unit v ⊥ u,
    // with a sign record
    let grid = unit_grid_orthogonal(&p.y, 32);
    let mut min_abs = f64::INFINITY;
    let mut pos = 0usize;
    let mut neg = 0usize;
    for v in &grid {
        let vs: Vec<f64> = v.iter().copied().collect();
        let q = frame.apply(&m, &frame.hlift(&vs), &frame.vlift(&vs));
        min_abs = min_abs.min(q.abs());
        if q > tol {
            pos += 1;
        } else if q < -tol {
            neg += 1;
        }
    }
    let definite = min_abs > tol && (pos == grid.len() || neg == grid.len());
    rep.push_predicate("two_plane_definiteness", definite, min_abs, tol);
    let sign = if !definite {
        0.0
    } else if pos == grid.len() {
        1.0
    } else {
        -1.0
    };
    rep.push_predicate("definiteness_sign", definite, sign, tol);

    Ok(rep)
}

pub fn segre_checks(
    spray: &FieldDef,
    h: &Multiplier,
    p: &Point,
    tol: f64,
) -> Result<ConditionReport> {
    let hv = h.eval_matrix(p)?;
    segre_checks_matrix(spray, &hv, p, tol)
}
