//! Metrizability criteria: Helmholtz conditions on a multiplier, the
//! semi-basic 1-form conditions, 2-form conditions, Kähler lifts, the
//! quadratic form q, and quasi-definiteness classification.

use crate::error::{Error, Result};
use crate::fieldspec::{FieldDef, FieldKind};
use crate::jets::Jet;
use crate::spray::{curvature_from_data, dyn_cov_deriv_from_jets, spray_data, Point, SprayData};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub const DEFAULT_TOL: f64 = 1e-8;

/// Relative threshold for numerical rank decisions.
pub const RANK_REL_THRESHOLD: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Condition reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ConditionEntry {
    pub name: String,
    pub residual: f64,
    pub relative: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub entries: Vec<ConditionEntry>,
    pub aggregate: f64,
}

impl ConditionReport {
    pub fn new() -> Self {
        ConditionReport { entries: Vec::new(), aggregate: 0.0 }
    }

    pub fn push(&mut self, name: &str, residual: f64, scale: f64, tol: f64) {
        let relative = residual / scale.max(f64::MIN_POSITIVE);
        self.entries.push(ConditionEntry {
            name: name.to_string(),
            residual,
            relative,
            tolerance: tol,
            pass: residual <= tol,
            detail: None,
        });
        self.aggregate = self.aggregate.max(residual);
    }

    /// Entry whose pass/fail is a predicate rather than a residual bound;
    /// `residual` is set to 0 on pass and max(tol·10, magnitude) on fail so
    /// the `pass ⇔ residual ≤ tolerance` invariant still holds.
    pub fn push_predicate(&mut self, name: &str, pass: bool, value: f64, tol: f64) {
        let residual = if pass { 0.0 } else { value.abs().max(tol * 10.0) };
        self.entries.push(ConditionEntry {
            name: name.to_string(),
            residual,
            relative: residual,
            tolerance: tol,
            pass,
            detail: Some(value),
        });
        self.aggregate = self.aggregate.max(residual);
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn entry(&self, name: &str) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

impl Default for ConditionReport {
    fn default() -> Self {
        Self::new()
    }
}

// ---------------------------------------------------------------------------
// Multipliers
// ---------------------------------------------------------------------------

/// A multiplier candidate: either explicit sym2 components, or the fibre
/// Hessian of a scalar function.
#[derive(Debug, Clone)]
pub enum Multiplier {
    Explicit(FieldDef),
    HessianOf(FieldDef),
}

impl Multiplier {
    pub fn explicit(f: FieldDef) -> Result<Multiplier> {
        if f.kind != FieldKind::Sym2 {
            return Err(Error::Config("explicit multiplier must be a sym2tensor".into()));
        }
        Ok(Multiplier::Explicit(f))
    }

    pub fn hessian_of(f: FieldDef) -> Result<Multiplier> {
        if f.kind != FieldKind::Scalar {
            return Err(Error::Config("Hessian multiplier needs a scalar field".into()));
        }
        Ok(Multiplier::HessianOf(f))
    }

    pub fn n(&self) -> usize {
        match self {
            Multiplier::Explicit(f) | Multiplier::HessianOf(f) => f.n,
        }
    }

    /// Order-1 jets of every h_{ij} (full symmetric matrix of jets).
    pub fn eval_jets(&self, p: &Point) -> Result<Vec<Vec<Jet>>> {
        match self {
            Multiplier::Explicit(f) => f.eval_sym2_jets(p, 1),
            Multiplier::HessianOf(f) => {
                let n = f.n;
                let jet = f.eval_scalar_jet(p, 3)?;
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    let mut row = Vec::with_capacity(n);
                    for j in 0..n {
                        let grad: Vec<f64> =
                            (0..2 * n).map(|a| jet.third_fibre(a, i, j)).collect();
                        row.push(Jet::from_value_grad(n, jet.hess(n + i, n + j), grad));
                    }
                    out.push(row);
                }
                Ok(out)
            }
        }
    }

    /// Plain value matrix.
    pub fn eval_matrix(&self, p: &Point) -> Result<DMatrix<f64>> {
        match self {
            Multiplier::Explicit(f) => {
                let jets = f.eval_sym2_jets(p, 0)?;
                let n = f.n;
                Ok(DMatrix::from_fn(n, n, |i, j| jets[i][j].value()))
            }
            Multiplier::HessianOf(f) => hessian_of_scalar(f, p),
        }
    }
}

/// Fibre Hessian ∂²F/∂y^i∂y^j of a scalar field.
pub fn hessian_of_scalar(f: &FieldDef, p: &Point) -> Result<DMatrix<f64>> {
    if f.kind != FieldKind::Scalar {
        return Err(Error::Config("expected scalar field".into()));
    }
    let n = f.n;
    let jet = f.eval_scalar_jet(p, 2)?;
    Ok(DMatrix::from_fn(n, n, |i, j| jet.hess(n + i, n + j)))
}

/// Fibre gradient θ_i = ∂F/∂y^i of a scalar field.
pub fn hilbert_oneform(f: &FieldDef, p: &Point) -> Result<DVector<f64>> {
    if f.kind != FieldKind::Scalar {
        return Err(Error::Config("expected scalar field".into()));
    }
    let n = f.n;
    let jet = f.eval_scalar_jet(p, 1)?;
    Ok(DVector::from_fn(n, |i, _| jet.grad(n + i)))
}

/// Symbolic covector field θ_i = ∂F/∂y^i, usable wherever a parsed covector
/// is expected.
pub fn hilbert_oneform_field(f: &FieldDef) -> Result<FieldDef> {
    if f.kind != FieldKind::Scalar {
        return Err(Error::Config("expected scalar field".into()));
    }
    let n = f.n;
    let exprs = (0..n).map(|i| f.scalar_expr().diff(n + i)).collect();
    FieldDef::from_exprs(FieldKind::Covector, n, exprs)
}

/// i_Γθ = θ_i y^i.
pub fn f_from_theta(theta: &FieldDef, p: &Point) -> Result<f64> {
    if theta.kind != FieldKind::Covector {
        return Err(Error::Config("expected covector field".into()));
    }
    let vals = theta.eval_values(p)?;
    Ok(vals.iter().zip(&p.y).map(|(t, y)| t * y).sum())
}

// ---------------------------------------------------------------------------
// Helmholtz conditions
// ---------------------------------------------------------------------------

/// The five Helmholtz residuals plus the cyclic-curvature equivalent.
pub fn helmholtz_residuals(
    spray: &FieldDef,
    h: &Multiplier,
    p: &Point,
    tol: f64,
) -> Result<ConditionReport> {
    let n = spray.n;
    let sd = spray_data(spray, p)?;
    let cd = curvature_from_data(&sd, p);
    let h_jets = h.eval_jets(p)?;
    let hv = DMatrix::from_fn(n, n, |i, j| h_jets[i][j].value());
    let h_scale = hv.amax().max(1e-30);

    let mut rep = ConditionReport::new();

    let mut sym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            sym = sym.max((hv[(i, j)] - hv[(j, i)]).abs());
        }
    }
    rep.push("sym", sym, h_scale, tol);

    let mut ann = 0.0f64;
    for i in 0..n {
        let s: f64 = (0..n).map(|j| hv[(i, j)] * p.y[j]).sum();
        ann = ann.max(s.abs());
    }
    rep.push("annihilates_y", ann, h_scale * p.y_norm(), tol);

    let mut fib = 0.0f64;
    let mut fib_scale = 1e-30f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let a = h_jets[i][j].grad(n + k);
                let b = h_jets[i][k].grad(n + j);
                fib = fib.max((a - b).abs());
                fib_scale = fib_scale.max(a.abs()).max(b.abs());
            }
        }
    }
    rep.push("fibre_symmetry", fib, fib_scale, tol);

    let nabla = dyn_cov_deriv_from_jets(&sd, p, &h_jets);
    rep.push("nabla", nabla.amax(), h_scale * (1.0 + sd.gamma_j.amax()), tol);

    let hr = &hv * &cd.r2;
    let mut csym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            csym = csym.max((hr[(i, j)] - hr[(j, i)]).abs());
        }
    }
    rep.push("curvature_sym", csym, hr.amax().max(1e-30), tol);

    let mut cyc = 0.0f64;
    let mut cyc_scale = 1e-30f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    let t1 = cd.r3[l][(j, k)] * hv[(i, l)];
                    let t2 = cd.r3[l][(k, i)] * hv[(j, l)];
                    let t3 = cd.r3[l][(i, j)] * hv[(k, l)];
                    s += t1 + t2 + t3;
                    cyc_scale = cyc_scale.max(t1.abs()).max(t2.abs()).max(t3.abs());
                }
                cyc = cyc.max(s.abs());
            }
        }
    }
    rep.push("cyclic_curvature", cyc, cyc_scale, tol);

    Ok(rep)
}

// ---------------------------------------------------------------------------
// Semi-basic 1-form conditions
// ---------------------------------------------------------------------------

/// Residuals of the semi-basic 1-form characterization: Liouville-derivative,
/// fibre and horizontal symmetry of dθ, the rank of dθ, and positivity of
/// i_Γθ.
pub fn bm_residuals(
    spray: &FieldDef,
    theta: &FieldDef,
    p: &Point,
    tol: f64,
) -> Result<ConditionReport> {
    if theta.kind != FieldKind::Covector {
        return Err(Error::Config("expected covector field".into()));
    }
    let n = spray.n;
    let sd = spray_data(spray, p)?;
    let t_jets = theta.eval_jets(p, 1)?;
    let t_scale = t_jets
        .iter()
        .fold(1e-30f64, |m, j| m.max(j.value().abs()));

    let mut rep = ConditionReport::new();

    // L_Δθ = (y^k ∂θ_i/∂y^k) dx^i for semi-basic θ
    let mut lie = 0.0f64;
    for ti in &t_jets {
        let s: f64 = (0..n).map(|k| p.y[k] * ti.grad(n + k)).sum();
        lie = lie.max(s.abs());
    }
    rep.push("lie_delta", lie, t_scale, tol);

    let mut dj = 0.0f64;
    let mut dh = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            dj = dj.max((t_jets[j].grad(n + i) - t_jets[i].grad(n + j)).abs());
            // H_i(θ_j) = ∂θ_j/∂x^i − Γ^k_i ∂θ_j/∂y^k
            let hi: f64 = t_jets[j].grad(i)
                - (0..n)
                    .map(|k| sd.gamma_j[(k, i)] * t_jets[j].grad(n + k))
                    .sum::<f64>();
            let hj: f64 = t_jets[i].grad(j)
                - (0..n)
                    .map(|k| sd.gamma_j[(k, j)] * t_jets[i].grad(n + k))
                    .sum::<f64>();
            dh = dh.max((hi - hj).abs());
        }
    }
    rep.push("dJ", dj, t_scale, tol);
    rep.push("dH", dh, t_scale, tol);

    let dtheta = dtheta_matrix(&t_jets, n);
    let rank = numerical_rank(&dtheta);
    let want = 2 * n - 2;
    rep.push_predicate("rank_dtheta", rank == want, rank as f64, 0.5);

    let igt: f64 = t_jets
        .iter()
        .zip(&p.y)
        .map(|(t, y)| t.value() * y)
        .sum();
    rep.push_predicate("positivity", igt > 0.0, igt, tol);

    Ok(rep)
}

/// Coordinate matrix of dθ for a semi-basic θ, given order-1 jets of its
/// components: entry (a, b) is dθ(e_a, e_b) over the basis (∂x, ∂y).
pub fn dtheta_matrix(t_jets: &[Jet], n: usize) -> DMatrix<f64> {
    let dim = 2 * n;
    DMatrix::from_fn(dim, dim, |a, b| {
        let fwd = if b < n { t_jets[b].grad(a) } else { 0.0 };
        let bwd = if a < n { t_jets[a].grad(b) } else { 0.0 };
        fwd - bwd
    })
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > RANK_REL_THRESHOLD * smax)
        .count()
}

// ---------------------------------------------------------------------------
// 2-forms
// ---------------------------------------------------------------------------

/// Pointwise value of a 2-form split into its three coordinate (or
/// frame-adapted) blocks.
#[derive(Debug, Clone)]
pub struct TwoFormValue {
    pub n: usize,
    /// dx^i ∧ dx^j block (antisymmetric): entry (i, j) = ω(∂x_i, ∂x_j)
    pub a: DMatrix<f64>,
    /// mixed block: entry (i, j) = ω(∂x_i, ∂y_j) (or ω(H_i, V_j) if frame adapted)
    pub b: DMatrix<f64>,
    /// dy^i ∧ dy^j block (antisymmetric)
    pub c: DMatrix<f64>,
    pub frame_adapted: bool,
}

impl TwoFormValue {
    pub fn zero(n: usize, frame_adapted: bool) -> Self {
        TwoFormValue {
            n,
            a: DMatrix::zeros(n, n),
            b: DMatrix::zeros(n, n),
            c: DMatrix::zeros(n, n),
            frame_adapted,
        }
    }

    /// Full 2n×2n antisymmetric matrix over the coordinate (or frame) basis.
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let dim = 2 * n;
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.a[(i, j)];
                m[(i, n + j)] = self.b[(i, j)];
                m[(n + i, j)] = -self.b[(j, i)];
                m[(n + i, n + j)] = self.c[(i, j)];
            }
        }
        m
    }

    pub fn apply(&self, z1: &[f64], z2: &[f64]) -> f64 {
        let m = self.full_matrix();
        let dim = 2 * self.n;
        let mut s = 0.0;
        for p in 0..dim {
            for q in 0..dim {
                s += m[(p, q)] * z1[p] * z2[q];
            }
        }
        s
    }

    pub fn max_abs_diff(&self, other: &TwoFormValue) -> f64 {
        let d1 = (&self.a - &other.a).amax();
        let d2 = (&self.b - &other.b).amax();
        let d3 = (&self.c - &other.c).amax();
        d1.max(d2).max(d3)
    }

    pub fn scaled(&self, s: f64) -> TwoFormValue {
        TwoFormValue {
            n: self.n,
            a: &self.a * s,
            b: &self.b * s,
            c: &self.c * s,
            frame_adapted: self.frame_adapted,
        }
    }
}

pub struct KahlerLift {
    /// A = 0, B = h, C = 0 over the frame basis {H_i, V_i}.
    pub frame: TwoFormValue,
    /// Coordinate-adapted equivalent using φ^j = dy^j + Γ^j_k dx^k.
    pub coord: TwoFormValue,
}

/// Kähler lift ω = h_{ij} dx^i ∧ φ^j of a multiplier with h y = 0.
pub fn kahler_lift(spray: &FieldDef, h: &Multiplier, p: &Point) -> Result<KahlerLift> {
    let hv = h.eval_matrix(p)?;
    check_annihilates(&hv, &p.y)?;
    let sd = spray_data(spray, p)?;
    Ok(kahler_lift_from_matrix(&sd, &hv))
}

pub fn kahler_lift_from_matrix(sd: &SprayData, hv: &DMatrix<f64>) -> KahlerLift {
    let n = sd.n;
    let mut frame = TwoFormValue::zero(n, true);
    frame.b = hv.clone();
    let mut coord = TwoFormValue::zero(n, false);
    coord.b = hv.clone();
    for i in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += hv[(i, j)] * sd.gamma_j[(j, k)] - hv[(k, j)] * sd.gamma_j[(j, i)];
            }
            coord.a[(i, k)] = s;
        }
    }
    KahlerLift { frame, coord }
}

fn check_annihilates(hv: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    let n = y.len();
    let scale = hv.amax().max(1e-30) * y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut worst = 0.0f64;
    for i in 0..n {
        let s: f64 = (0..n).map(|j| hv[(i, j)] * y[j]).sum();
        worst = worst.max(s.abs());
    }
    if worst > 1e-8 * scale.max(1.0) {
        return Err(Error::Annihilation(worst));
    }
    Ok(())
}

/// A 2-form with enough structure to be differentiated pointwise.
#[derive(Debug, Clone)]
pub enum OmegaSource {
    /// Parsed coordinate components.
    Field(FieldDef),
    /// Kähler lift of a multiplier through the given spray's horizontal frame.
    Kahler(Multiplier),
    /// Hilbert 2-form dθ of a scalar function.
    HilbertOf(FieldDef),
}

/// Value and first derivatives of the full coordinate matrix of a 2-form.
pub struct OmegaEval {
    /// m[(p, q)] = ω(e_p, e_q)
    pub m: DMatrix<f64>,
    /// dm[a][(p, q)] = ∂_a ω(e_p, e_q)
    pub dm: Vec<DMatrix<f64>>,
}

impl OmegaSource {
    pub fn n(&self) -> usize {
        match self {
            OmegaSource::Field(f) | OmegaSource::HilbertOf(f) => f.n,
            OmegaSource::Kahler(m) => m.n(),
        }
    }

    /// Coordinate matrix at `p` (no derivatives).
    pub fn matrix(&self, spray: &FieldDef, p: &Point) -> Result<DMatrix<f64>> {
        Ok(self.eval(spray, p)?.m)
    }

    pub fn eval(&self, spray: &FieldDef, p: &Point) -> Result<OmegaEval> {
        let n = self.n();
        let dim = 2 * n;
        match self {
            OmegaSource::Field(f) => {
                if f.kind != FieldKind::TwoForm {
                    return Err(Error::Config("expected twoform field".into()));
                }
                let mut m = DMatrix::zeros(dim, dim);
                let mut dm = vec![DMatrix::zeros(dim, dim); dim];
                let put = |jet: &Jet, p_: usize, q_: usize, dm: &mut Vec<DMatrix<f64>>, m: &mut DMatrix<f64>| {
                    m[(p_, q_)] += jet.value();
                    m[(q_, p_)] -= jet.value();
                    for a in 0..dim {
                        dm[a][(p_, q_)] += jet.grad(a);
                        dm[a][(q_, p_)] -= jet.grad(a);
                    }
                };
                // assemble from stored strict-triangle/a-b-c components
                let vars = (0..dim)
                    .map(|a| {
                        let v = if a < n { p.x[a] } else { p.y[a - n] };
                        Jet::variable(1, n, a, v)
                    })
                    .collect::<Vec<_>>();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let jet = f.twoform_a(i, j).eval_jet(&vars)?;
                        put(&jet, i, j, &mut dm, &mut m);
                        let jet = f.twoform_c(i, j).eval_jet(&vars)?;
                        put(&jet, n + i, n + j, &mut dm, &mut m);
                    }
                    for j in 0..n {
                        let jet = f.twoform_b(i, j).eval_jet(&vars)?;
                        put(&jet, i, n + j, &mut dm, &mut m);
                    }
                }
                Ok(OmegaEval { m, dm })
            }
            OmegaSource::Kahler(mult) => {
                let sd = spray_data(spray, p)?;
                let h_jets = mult.eval_jets(p)?;
                let hv = DMatrix::from_fn(n, n, |i, j| h_jets[i][j].value());
                let lift = kahler_lift_from_matrix(&sd, &hv);
                let mut dm = vec![DMatrix::zeros(dim, dim); dim];
                // ∂Γ^j_k: base index a → dgammaj_dx, fibre index → gamma_jk
                let dgj = |j: usize, k: usize, a: usize| -> f64 {
                    if a < n {
                        sd.dgammaj_dx[j][(k, a)]
                    } else {
                        sd.gamma_jk[j][(k, a - n)]
                    }
                };
                for a in 0..dim {
                    for i in 0..n {
                        for j in 0..n {
                            let db = h_jets[i][j].grad(a);
                            dm[a][(i, n + j)] += db;
                            dm[a][(n + j, i)] -= db;
                        }
                        for k in 0..n {
                            let mut da = 0.0;
                            for j in 0..n {
                                da += h_jets[i][j].grad(a) * sd.gamma_j[(j, k)]
                                    + hv[(i, j)] * dgj(j, k, a)
                                    - h_jets[k][j].grad(a) * sd.gamma_j[(j, i)]
                                    - hv[(k, j)] * dgj(j, i, a);
                            }
                            dm[a][(i, k)] += da;
                        }
                    }
                }
                Ok(OmegaEval { m: lift.coord.full_matrix(), dm })
            }
            OmegaSource::HilbertOf(f) => {
                // dθ with θ_i = ∂F/∂y^i: values from order-2 jets, derivatives
                // from order-3 jets (restricted third block suffices since θ
                // is a fibre gradient).
                if f.kind != FieldKind::Scalar {
                    return Err(Error::Config("expected scalar field".into()));
                }
                let jet = f.eval_scalar_jet(p, 3)?;
                let mut m = DMatrix::zeros(dim, dim);
                let mut dm = vec![DMatrix::zeros(dim, dim); dim];
                // dθ(e_a, e_b) = ∂_a θ_b − ∂_b θ_a for b, a < n extended with 0
                // θ_i has gradient ∂_a θ_i = hess(a, n+i); but the dx∧dx block
                // needs mixed second derivatives of F and its derivative needs
                // third derivatives with only one fibre index, which the
                // restricted storage lacks. Assemble instead from the
                // decomposition dθ = H_i(θ_j) dx^i∧dx^j − h_ij dx^i∧φ^j ... to
                // stay self-contained we assemble directly:
                //   dθ(∂x_a, ∂x_b) = ∂²F/∂x^a∂y^b − ∂²F/∂x^b∂y^a
                //   dθ(∂y_a, ∂x_b) = ∂²F/∂y^a∂y^b
                // and differentiate each in all 2n directions via the third
                // block where available, falling back to finite differences of
                // order-2 jets for the dx∧dx block derivatives.
                for a in 0..n {
                    for b in 0..n {
                        m[(a, b)] = jet.hess(a, n + b) - jet.hess(b, n + a);
                        m[(n + a, b)] = jet.hess(n + a, n + b);
                        m[(b, n + a)] = -jet.hess(n + a, n + b);
                    }
                }
                for c in 0..dim {
                    for a in 0..n {
                        for b in 0..n {
                            // ∂_c of the mixed block: third derivative with two
                            // fibre indices — available exactly.
                            let d = jet.third_fibre(c, a, b);
                            dm[c][(n + a, b)] = d;
                            dm[c][(b, n + a)] = -d;
                        }
                    }
                }
                // dx∧dx block derivatives via central differences of order-2 jets
                let h = 1e-5;
                for c in 0..dim {
                    let shift = |delta: f64| -> Result<DMatrix<f64>> {
                        let mut q = p.clone();
                        if c < n {
                            q.x[c] += delta;
                        } else {
                            q.y[c - n] += delta;
                        }
                        let j2 = f.eval_scalar_jet(&q, 2)?;
                        Ok(DMatrix::from_fn(n, n, |a, b| {
                            j2.hess(a, n + b) - j2.hess(b, n + a)
                        }))
                    };
                    let plus = shift(h)?;
                    let minus = shift(-h)?;
                    let diff = (plus - minus) / (2.0 * h);
                    for a in 0..n {
                        for b in 0..n {
                            dm[c][(a, b)] = diff[(a, b)];
                        }
                    }
                }
                Ok(OmegaEval { m, dm })
            }
        }
    }
}

/// Conditions on a candidate 2-form: characteristic distribution contains Γ
/// and Δ, invariance along the spray, vertical isotropy, the mixed dω
/// condition, and closedness.
pub fn twoform_residuals(
    spray: &FieldDef,
    omega: &OmegaSource,
    p: &Point,
    tol: f64,
) -> Result<ConditionReport> {
    let n = spray.n;
    let dim = 2 * n;
    let sd = spray_data(spray, p)?;
    let ev = omega.eval(spray, p)?;
    let m = &ev.m;
    let scale = m.amax().max(1e-30);

    let gamma_vec = sd.spray_vector(p);
    let mut delta_vec = vec![0.0; dim];
    delta_vec[n..].copy_from_slice(&p.y);

    let contract = |v: &[f64]| -> f64 {
        let mut worst = 0.0f64;
        for b in 0..dim {
            let s: f64 = (0..dim).map(|a| v[a] * m[(a, b)]).sum();
            worst = worst.max(s.abs());
        }
        worst
    };

    let mut rep = ConditionReport::new();
    let y_norm = p.y_norm();
    rep.push("char_gamma", contract(&gamma_vec), scale * y_norm.max(1.0), tol);
    rep.push("char_delta", contract(&delta_vec), scale * y_norm.max(1.0), tol);

    // dω(e_a, e_b, e_c) = ∂_a ω_bc − ∂_b ω_ac + ∂_c ω_ab
    let t = |a: usize, b: usize, c: usize| -> f64 {
        ev.dm[a][(b, c)] - ev.dm[b][(a, c)] + ev.dm[c][(a, b)]
    };

    let mut closed = 0.0f64;
    for a in 0..dim {
        for b in (a + 1)..dim {
            for c in (b + 1)..dim {
                closed = closed.max(t(a, b, c).abs());
            }
        }
    }
    rep.push("closed", closed, scale.max(1.0), tol);

    // L_Γω = i_Γ dω + d(i_Γ ω)
    // α_b = Σ_p Γ^p ω_pb; ∂_a α_b needs ∂_a Γvec
    let dgamma_vec = |a: usize, q: usize| -> f64 {
        if q < n {
            if a == n + q {
                1.0
            } else {
                0.0
            }
        } else {
            let i = q - n;
            -2.0 * if a < n { sd.dgamma_dx[(i, a)] } else { sd.gamma_j[(i, a - n)] }
        }
    };
    let dalpha = |a: usize, b: usize| -> f64 {
        (0..dim)
            .map(|q| dgamma_vec(a, q) * m[(q, b)] + gamma_vec[q] * ev.dm[a][(q, b)])
            .sum()
    };
    let mut lie = 0.0f64;
    for a in 0..dim {
        for b in (a + 1)..dim {
            let igd: f64 = (0..dim).map(|q| gamma_vec[q] * t(q, a, b)).sum();
            lie = lie.max((igd + dalpha(a, b) - dalpha(b, a)).abs());
        }
    }
    rep.push("lie_gamma", lie, scale * y_norm.max(1.0), tol);

    let mut vert = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            vert = vert.max(m[(n + a, n + b)].abs());
        }
    }
    rep.push("vert_isotropy", vert, scale, tol);

    // dω(H_i, V_j, V_k) with H_i = e_i − Γ^k_i e_{n+k}
    let mut dhv = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in (j + 1)..n {
                let mut s = t(i, n + j, n + k);
                for l in 0..n {
                    s -= sd.gamma_j[(l, i)] * t(n + l, n + j, n + k);
                }
                dhv = dhv.max(s.abs());
            }
        }
    }
    rep.push("dH_vert", dhv, scale.max(1.0), tol);

    let rank = numerical_rank(m);
    rep.push_predicate("rank", rank > 0, rank as f64, 0.5);

    Ok(rep)
}

/// q(v) = ω(hlift v, vlift v).
pub fn quadratic_form(
    spray: &FieldDef,
    omega: &OmegaSource,
    p: &Point,
    v: &[f64],
) -> Result<f64> {
    let n = spray.n;
    let sd = spray_data(spray, p)?;
    let m = omega.matrix(spray, p)?;
    // the definition requires vertical isotropy
    let mut vert = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            vert = vert.max(m[(n + a, n + b)].abs());
        }
    }
    if vert > 1e-6 * m.amax().max(1.0) {
        return Err(Error::Domain(format!(
            "2-form fails vertical isotropy (max |ω(V,V)| = {vert:e})"
        )));
    }
    let hl = sd.hlift(v);
    let vl = SprayData::vlift(v);
    let mut s = 0.0;
    for a in 0..2 * n {
        for b in 0..2 * n {
            s += m[(a, b)] * hl[a] * vl[b];
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Definiteness {
    PositiveQuasiDefinite,
    NegativeQuasiDefinite,
    Indefinite,
    Degenerate,
}

/// Eigenvalue classification of `h` restricted to an orthonormal complement
/// of span(y).
pub fn quasi_definiteness(h: &DMatrix<f64>, y: &[f64]) -> Result<(f64, Definiteness)> {
    let n = y.len();
    check_annihilates(h, y)?;
    if n < 2 {
        return Ok((0.0, Definiteness::Degenerate));
    }
    // orthonormal basis of y-complement by Gram-Schmidt against y/|y|
    let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut basis: Vec<DVector<f64>> = vec![DVector::from_fn(n, |i, _| y[i] / ynorm)];
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        for b in &basis {
            let proj = b.dot(&e);
            e -= b * proj;
        }
        let norm = e.norm();
        if norm > 1e-8 {
            basis.push(e / norm);
        }
        if basis.len() == n {
            break;
        }
    }
    let comp = &basis[1..];
    let k = comp.len();
    let restricted = DMatrix::from_fn(k, k, |i, j| (comp[i].transpose() * h * &comp[j])[(0, 0)]);
    let sym = (restricted.clone() + restricted.transpose()) * 0.5;
    let eigs = sym.symmetric_eigen().eigenvalues;
    let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let thr = 1e-10;
    let class = if min > thr {
        Definiteness::PositiveQuasiDefinite
    } else if max < -thr {
        Definiteness::NegativeQuasiDefinite
    } else if min < -thr && max > thr {
        Definiteness::Indefinite
    } else {
        Definiteness::Degenerate
    };
    Ok((min, class))
}
