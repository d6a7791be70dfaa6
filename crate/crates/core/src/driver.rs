//! Batch verification driver: sample points, run the selected condition
//! suites, and assemble a machine-readable report with deterministic bytes
//! for a given config + seed (parallel evaluation merges in point order).

use crate::error::{Error, Result};
use crate::fieldspec::{parse_field, FieldDef, FieldKind};
use crate::metrizability::{
    bm_residuals, helmholtz_residuals, hilbert_oneform_field, twoform_residuals, ConditionEntry,
    ConditionReport, Multiplier, OmegaSource,
};
use crate::par::batch_map;
use crate::spray::{Point, EPS_FIBRE};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

pub const REPORT_SCHEMA: &str = "sprayverify-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Helmholtz,
    Bm,
    Twoform,
    Grassmann,
    Dynamics,
    Example,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Helmholtz => "helmholtz",
            Suite::Bm => "bm",
            Suite::Twoform => "twoform",
            Suite::Grassmann => "grassmann",
            Suite::Dynamics => "dynamics",
            Suite::Example => "example",
        }
    }

    pub fn parse(s: &str) -> Result<Suite> {
        match s {
            "helmholtz" => Ok(Suite::Helmholtz),
            "bm" => Ok(Suite::Bm),
            "twoform" => Ok(Suite::Twoform),
            "grassmann" => Ok(Suite::Grassmann),
            "dynamics" => Ok(Suite::Dynamics),
            "example" => Ok(Suite::Example),
            other => Err(Error::Config(format!("unknown suite '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplingConfig {
    /// per-coordinate [lo, hi] bounds for the base point
    pub xbox: Vec<(f64, f64)>,
    /// fibre radius range [r_min, r_max] (log-uniform)
    pub shell: (f64, f64),
    pub count: usize,
    pub seed: u64,
}

impl SamplingConfig {
    pub fn unit_box(n: usize, count: usize, seed: u64) -> SamplingConfig {
        SamplingConfig {
            xbox: vec![(-1.0, 1.0); n],
            shell: (0.5, 2.0),
            count,
            seed,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.xbox.len() != n {
            return Err(Error::Config(format!(
                "xbox has {} coordinate ranges, spray has dimension {n}",
                self.xbox.len()
            )));
        }
        if self.shell.0 < EPS_FIBRE || self.shell.1 < self.shell.0 {
            return Err(Error::Config(format!(
                "fibre shell [{}, {}] invalid (r_min >= {EPS_FIBRE:e}, r_max >= r_min)",
                self.shell.0, self.shell.1
            )));
        }
        if self.count == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        for (lo, hi) in &self.xbox {
            if hi < lo {
                return Err(Error::Config(format!("empty box range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Deterministic sample sequence.
    pub fn sample(&self, n: usize) -> Result<Vec<Point>> {
        self.validate(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.count);
        while out.len() < self.count {
            let x: Vec<f64> = self
                .xbox
                .iter()
                .map(|(lo, hi)| {
                    if hi > lo {
                        rng.gen_range(*lo..*hi)
                    } else {
                        *lo
                    }
                })
                .collect();
            let mut y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            let r = if self.shell.1 > self.shell.0 {
                (rng.gen_range(self.shell.0.ln()..self.shell.1.ln())).exp()
            } else {
                self.shell.0
            };
            for yi in y.iter_mut() {
                *yi *= r / norm;
            }
            out.push(Point::new(x, y)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spray: FieldDef,
    pub spray_name: String,
    pub finsler: Option<FieldDef>,
    pub theta: Option<FieldDef>,
    pub multiplier: Option<FieldDef>,
    pub twoform: Option<FieldDef>,
    pub suites: Vec<Suite>,
    pub sampling: SamplingConfig,
    pub tol: f64,
    pub tol_overrides: Vec<(Suite, f64)>,
    /// if set, points whose evaluation errors are excluded from pass-rate
    /// denominators instead of failing the run
    pub skippable: bool,
}

impl RunConfig {
    pub fn new(spray: FieldDef, spray_name: &str, suites: Vec<Suite>, sampling: SamplingConfig) -> RunConfig {
        RunConfig {
            spray,
            spray_name: spray_name.to_string(),
            finsler: None,
            theta: None,
            multiplier: None,
            twoform: None,
            suites,
            sampling,
            tol: 1e-8,
            tol_overrides: Vec::new(),
            skippable: false,
        }
    }

    fn suite_tol(&self, suite: Suite) -> f64 {
        self.tol_overrides
            .iter()
            .find(|(s, _)| *s == suite)
            .map(|(_, t)| *t)
            .unwrap_or(self.tol)
    }

    fn resolve_multiplier(&self) -> Result<Multiplier> {
        if let Some(h) = &self.multiplier {
            return Multiplier::explicit(h.clone());
        }
        if let Some(f) = &self.finsler {
            return Multiplier::hessian_of(f.clone());
        }
        Err(Error::Config(
            "suite needs a multiplier: pass sym2 components or a Finsler function".into(),
        ))
    }

    fn resolve_theta(&self) -> Result<FieldDef> {
        if let Some(t) = &self.theta {
            return Ok(t.clone());
        }
        if let Some(f) = &self.finsler {
            return hilbert_oneform_field(f);
        }
        Err(Error::Config(
            "suite needs a 1-form: pass covector components or a Finsler function".into(),
        ))
    }

    fn resolve_omega(&self) -> Result<OmegaSource> {
        if let Some(w) = &self.twoform {
            return Ok(OmegaSource::Field(w.clone()));
        }
        if self.multiplier.is_some() || self.finsler.is_some() {
            return Ok(OmegaSource::Kahler(self.resolve_multiplier()?));
        }
        Err(Error::Config(
            "suite needs a 2-form: pass twoform components, a multiplier, or a Finsler function"
                .into(),
        ))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub index: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub suite: &'static str,
    pub entries: Vec<ConditionEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionSummary {
    pub suite: &'static str,
    pub name: String,
    pub max_residual: f64,
    pub failures: usize,
    pub evaluated: usize,
    pub pass_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub conditions: Vec<ConditionSummary>,
    pub errored_points: usize,
    pub all_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub spray: String,
    pub spray_source: String,
    pub suites: Vec<&'static str>,
    pub sampling: SamplingConfig,
    pub tol: f64,
    pub tol_overrides: Vec<(&'static str, f64)>,
    pub skippable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub config: ConfigEcho,
    pub per_point: Vec<PointRecord>,
    pub summary: Summary,
}

fn eval_suite(cfg: &RunConfig, suite: Suite, p: &Point) -> Result<ConditionReport> {
    let tol = cfg.suite_tol(suite);
    match suite {
        Suite::Helmholtz => helmholtz_residuals(&cfg.spray, &cfg.resolve_multiplier()?, p, tol),
        Suite::Bm => bm_residuals(&cfg.spray, &cfg.resolve_theta()?, p, tol),
        Suite::Twoform => twoform_residuals(&cfg.spray, &cfg.resolve_omega()?, p, tol),
        Suite::Grassmann => {
            crate::grassmann::segre_checks(&cfg.spray, &cfg.resolve_multiplier()?, p, tol)
        }
        Suite::Dynamics => dynamics_suite(cfg, p, tol),
        Suite::Example => crate::examples::pullback_check_spiral(p, tol),
    }
}

/// Short-horizon integration checks at a sampled point: velocity consistency
/// of the dense output and reproduction of the trivial Jacobi field γ̇.
fn dynamics_suite(cfg: &RunConfig, p: &Point, tol: f64) -> Result<ConditionReport> {
    use crate::dynamics::{integrate_geodesic, integrate_jacobi};
    let n = cfg.spray.n;
    // tight integration keeps the Hermite dense-output error well under the
    // velocity-consistency tolerance
    let itol = tol.clamp(1e-12, 1e-3).min(1e-10);
    let traj = integrate_geodesic(&cfg.spray, p, 1.0, itol)?;
    let mut rep = ConditionReport::new();

    // y(t) vs a central difference of x(t) at mid-span
    let t0 = 0.5 * traj.t_end();
    let dt = 1e-5;
    let a = traj.sample(t0 - dt);
    let b = traj.sample(t0 + dt);
    let mid = traj.sample(t0);
    let mut vel = 0.0f64;
    for i in 0..n {
        let fd = (b[i] - a[i]) / (2.0 * dt);
        vel = vel.max((fd - mid[n + i]).abs());
    }
    rep.push("velocity_consistency", vel, p.y_norm().max(1.0), tol.max(1e-6));

    let ch = integrate_jacobi(&cfg.spray, &traj, &p.y, &vec![0.0; n])?;
    let mut jac = 0.0f64;
    for k in 0..traj.times.len() {
        for i in 0..n {
            jac = jac.max((ch.zeta[k][i] - traj.states[k][n + i]).abs());
        }
    }
    rep.push("jacobi_trivial", jac, p.y_norm().max(1.0), tol.max(1e-6));
    Ok(rep)
}

/// Run all selected suites over the sampled points. Returns the report and
/// the process exit status (0 iff everything passed).
pub fn run(cfg: &RunConfig) -> Result<(Report, i32)> {
    if cfg.suites.is_empty() {
        return Err(Error::Config("at least one suite must be selected".into()));
    }
    let n = cfg.spray.n;
    let points = cfg.sampling.sample(n)?;

    let mut tasks: Vec<(usize, Suite)> = Vec::new();
    for (i, _) in points.iter().enumerate() {
        for &s in &cfg.suites {
            tasks.push((i, s));
        }
    }
    let per_point: Vec<PointRecord> = batch_map(&tasks, |&(i, suite)| {
        let p = &points[i];
        match eval_suite(cfg, suite, p) {
            Ok(rep) => PointRecord {
                index: i,
                x: p.x.clone(),
                y: p.y.clone(),
                suite: suite.name(),
                entries: rep.entries,
                error: None,
            },
            Err(e) => PointRecord {
                index: i,
                x: p.x.clone(),
                y: p.y.clone(),
                suite: suite.name(),
                entries: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    });

    // aggregate per (suite, condition name), preserving first-seen order
    let mut conditions: Vec<ConditionSummary> = Vec::new();
    let mut errored = 0usize;
    for rec in &per_point {
        if rec.error.is_some() {
            errored += 1;
            continue;
        }
        for e in &rec.entries {
            let slot = conditions
                .iter_mut()
                .find(|c| c.suite == rec.suite && c.name == e.name);
            let c = match slot {
                Some(c) => c,
                None => {
                    conditions.push(ConditionSummary {
                        suite: rec.suite,
                        name: e.name.clone(),
                        max_residual: 0.0,
                        failures: 0,
                        evaluated: 0,
                        pass_rate: 0.0,
                    });
                    conditions.last_mut().unwrap()
                }
            };
            c.evaluated += 1;
            c.max_residual = c.max_residual.max(e.residual);
            if !e.pass {
                c.failures += 1;
            }
        }
    }
    for c in conditions.iter_mut() {
        c.pass_rate = if c.evaluated > 0 {
            (c.evaluated - c.failures) as f64 / c.evaluated as f64
        } else {
            0.0
        };
    }
    let all_pass = conditions.iter().all(|c| c.failures == 0)
        && (errored == 0 || cfg.skippable)
        && conditions.iter().any(|c| c.evaluated > 0);
    let summary = Summary {
        conditions,
        errored_points: errored,
        all_pass,
    };
    let exit = if summary.all_pass { 0 } else { 1 };
    let report = Report {
        schema: REPORT_SCHEMA,
        config: ConfigEcho {
            spray: cfg.spray_name.clone(),
            spray_source: cfg.spray.print_source(),
            suites: cfg.suites.iter().map(|s| s.name()).collect(),
            sampling: cfg.sampling.clone(),
            tol: cfg.tol,
            tol_overrides: cfg
                .tol_overrides
                .iter()
                .map(|(s, t)| (s.name(), *t))
                .collect(),
            skippable: cfg.skippable,
        },
        per_point,
        summary,
    };
    Ok((report, exit))
}

/// Infer the dimension of a field source from the highest component or
/// variable index mentioned (aliases x,y,z/u,v,w imply 3 where used).
pub fn infer_dim(source: &str, kind: FieldKind) -> Result<usize> {
    let mut max_idx = 0usize;
    let bytes = source.as_bytes();
    let mut i = 0;
    let mut alias3 = false;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                i += 1;
            }
            let word = &source[start..i];
            let (head, tail) = word.split_at(1);
            if matches!(word, "z" | "w") {
                alias3 = true;
            }
            if matches!(head, "G" | "T" | "H" | "A" | "B" | "C" | "x" | "y" | "P" | "F")
                && !tail.is_empty()
                && tail.chars().all(|d| d.is_ascii_digit())
            {
                for d in tail.chars() {
                    max_idx = max_idx.max(d.to_digit(10).unwrap() as usize);
                }
            }
        } else {
            i += 1;
        }
    }
    let n = if alias3 { max_idx.max(3) } else { max_idx.max(2) };
    // confirm by parsing
    for cand in [n, 3, 2, 1, 4, 5, 6] {
        if cand >= 1 && parse_field(source, kind, cand).is_ok() {
            return Ok(cand);
        }
    }
    Err(Error::Config(
        "could not infer field dimension from source".into(),
    ))
}

/// Curated verification battery for the built-in spiral example. Returns
/// (check name, worst residual, pass) triples and the overall exit status.
pub fn verify_spiral() -> Result<(Vec<(String, f64, bool)>, i32)> {
    use crate::dynamics::{integrate_geodesic, normal_acceleration, AffineSubspace};
    use crate::examples::*;
    use crate::metrizability::{hessian_of_scalar, quasi_definiteness, Definiteness};

    let spray = builtin_spray("spiral")?;
    let f = builtin_finsler("spiral")?;
    let mult = Multiplier::hessian_of(f.clone())?;
    let theta = hilbert_oneform_field(&f)?;
    let sampling = SamplingConfig::unit_box(3, 100, 2024);
    let points = sampling.sample(3)?;

    let mut checks: Vec<(String, f64, bool)> = Vec::new();
    let mut add = |name: &str, residual: f64, pass: bool| {
        checks.push((name.to_string(), residual, pass));
    };

    let mut helm = 0.0f64;
    let mut qd_ok = true;
    let mut min_eig = f64::INFINITY;
    let mut bm = 0.0f64;
    let mut bm_ok = true;
    let mut gr = 0.0f64;
    let mut gr_ok = true;
    for p in &points {
        let rep = helmholtz_residuals(&spray, &mult, p, 1e-8)?;
        helm = helm.max(rep.aggregate);
        let h = hessian_of_scalar(&f, p)?;
        let (me, class) = quasi_definiteness(&h, &p.y)?;
        qd_ok &= class == Definiteness::PositiveQuasiDefinite;
        min_eig = min_eig.min(me);
        let rep = bm_residuals(&spray, &theta, p, 1e-8)?;
        bm_ok &= rep.all_pass();
        bm = bm.max(rep.aggregate);
        let rep = crate::grassmann::segre_checks(&spray, &mult, p, 1e-10)?;
        gr_ok &= rep.all_pass();
        gr = gr.max(
            rep.entries
                .iter()
                .filter(|e| e.name.ends_with("isotropy") || e.name == "char_D")
                .map(|e| e.residual)
                .fold(0.0f64, f64::max),
        );
    }
    add("helmholtz", helm, helm <= 1e-8);
    add("quasi_definiteness", min_eig, qd_ok && min_eig >= 0.25);
    add("bm_conditions", bm, bm_ok);
    add("grassmann", gr, gr_ok);

    // geodesic endpoint and first integrals
    let p0 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 0.0])?;
    let traj = integrate_geodesic(&spray, &p0, std::f64::consts::FRAC_PI_2, 1e-10)?;
    let (x, y) = traj.endpoint();
    let target = [1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
    let end_dev = x
        .iter()
        .chain(y.iter())
        .zip(target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    add("geodesic_endpoint", end_dev, end_dev <= 1e-6);

    let p1 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 1.0])?;
    let traj = integrate_geodesic(&spray, &p1, 10.0, 1e-10)?;
    let mu_dev = crate::dynamics::first_integral_deviation(&traj, |p| {
        Ok((p.y[0] * p.y[0] + p.y[1] * p.y[1]).sqrt())
    })?;
    let w_dev = crate::dynamics::first_integral_deviation(&traj, |p| Ok(p.y[2]))?;
    let fi = mu_dev.max(w_dev);
    add("first_integrals", fi, fi <= 1e-8);

    // three-way 2-form identity on genuine spirals
    let mut tri = 0.0f64;
    let mut tri_ok = true;
    let mut used = 0usize;
    for p in &points {
        let lam = p.y_norm();
        if p.y[2].abs() < 0.05 * lam
            || (p.y[0] * p.y[0] + p.y[1] * p.y[1]).sqrt() < 0.05 * lam
        {
            continue;
        }
        used += 1;
        let rep = crate::examples::pullback_check_spiral(p, 1e-9)?;
        tri_ok &= rep.all_pass();
        tri = tri.max(rep.aggregate);
        if used >= 50 {
            break;
        }
    }
    add("twoform_identity", tri, tri_ok && used > 0);

    // totally geodesic planes
    let z_plane = AffineSubspace {
        point: vec![0.0, 0.0, 0.4],
        basis: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
    };
    let zres = crate::dynamics::totally_geodesic_residual(&spray, &z_plane, 40)?;
    add("z_plane_geodesic", zres, zres <= 1e-12);
    let y_plane = AffineSubspace {
        point: vec![0.0; 3],
        basis: vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
    };
    let probe = Point::new(vec![0.0; 3], vec![1.0, 0.0, 0.0])?;
    let yres = normal_acceleration(&spray, &y_plane, &probe)?;
    add("y_plane_not_geodesic", yres, yres >= 0.5);

    // positivity window
    let f_in = min_f_on_unit_fibre(&f, &[3.9f64.sqrt(), 0.0, 0.0], 400)?;
    let f_out = min_f_on_unit_fibre(&f, &[0.0, 4.1f64.sqrt(), 0.0], 400)?;
    add("positivity_window", f_in.min(-f_out), f_in > 0.0 && f_out <= 0.0);

    // circle restriction identity
    let q = Point::new(vec![0.3, -0.2], vec![0.8, 0.6])?;
    let circ = circle_dtheta_check(&q)?;
    add("circle_identity", circ, circ <= 1e-10);

    let exit = if checks.iter().all(|(_, _, p)| *p) { 0 } else { 1 };
    Ok((checks, exit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{builtin_finsler, builtin_spray};

    #[test]
    fn deterministic_reports() {
        let cfg = RunConfig {
            finsler: Some(builtin_finsler("spiral").unwrap()),
            ..RunConfig::new(
                builtin_spray("spiral").unwrap(),
                "spiral",
                vec![Suite::Helmholtz, Suite::Bm],
                SamplingConfig::unit_box(3, 20, 42),
            )
        };
        let (r1, e1) = run(&cfg).unwrap();
        let (r2, e2) = run(&cfg).unwrap();
        assert_eq!(e1, 0);
        assert_eq!(e2, 0);
        let b1 = serde_json::to_vec(&r1).unwrap();
        let b2 = serde_json::to_vec(&r2).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn seed_changes_points() {
        let s1 = SamplingConfig::unit_box(3, 5, 1).sample(3).unwrap();
        let s2 = SamplingConfig::unit_box(3, 5, 2).sample(3).unwrap();
        assert_ne!(s1[0].x, s2[0].x);
    }

    #[test]
    fn identity_multiplier_fails_with_exit_1() {
        let h = parse_field(
            "H11 = 1; H12 = 0; H13 = 0; H22 = 1; H23 = 0; H33 = 1;",
            FieldKind::Sym2,
            3,
        )
        .unwrap();
        let cfg = RunConfig {
            multiplier: Some(h),
            ..RunConfig::new(
                builtin_spray("flat").unwrap(),
                "flat",
                vec![Suite::Helmholtz],
                SamplingConfig::unit_box(3, 10, 7),
            )
        };
        let (report, exit) = run(&cfg).unwrap();
        assert_eq!(exit, 1);
        let ann = report
            .summary
            .conditions
            .iter()
            .find(|c| c.name == "annihilates_y")
            .unwrap();
        assert_eq!(ann.failures, ann.evaluated);
    }

    #[test]
    fn missing_certificate_is_config_error() {
        let cfg = RunConfig::new(
            builtin_spray("flat").unwrap(),
            "flat",
            vec![Suite::Helmholtz],
            SamplingConfig::unit_box(3, 2, 0),
        );
        let (report, exit) = run(&cfg).unwrap();
        // per-point config errors surface as errored points, failing the run
        assert_eq!(exit, 1);
        assert_eq!(report.summary.errored_points, 2);
    }

    #[test]
    fn empty_suite_selection_rejected() {
        let cfg = RunConfig::new(
            builtin_spray("flat").unwrap(),
            "flat",
            vec![],
            SamplingConfig::unit_box(3, 1, 0),
        );
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn shell_radii_respected() {
        let sampling = SamplingConfig {
            xbox: vec![(-1.0, 1.0); 3],
            shell: (0.5, 2.0),
            count: 200,
            seed: 3,
        };
        for p in sampling.sample(3).unwrap() {
            let r = p.y_norm();
            assert!((0.5..=2.0).contains(&r), "radius {r} outside shell");
        }
    }

    #[test]
    fn infer_dims() {
        assert_eq!(infer_dim("G1 = 0; G2 = 0;", FieldKind::Spray).unwrap(), 2);
        assert_eq!(
            infer_dim(crate::examples::SPIRAL_SPRAY_SRC, FieldKind::Spray).unwrap(),
            3
        );
        assert_eq!(
            infer_dim("F = sqrt(y1^2 + y2^2)", FieldKind::Scalar).unwrap(),
            2
        );
    }

    #[test]
    fn spiral_battery_passes() {
        let (checks, exit) = verify_spiral().unwrap();
        assert_eq!(exit, 0, "checks: {checks:?}");
    }

    #[test]
    fn dynamics_suite_passes_for_spiral() {
        let cfg = RunConfig {
            finsler: Some(builtin_finsler("spiral").unwrap()),
            ..RunConfig::new(
                builtin_spray("spiral").unwrap(),
                "spiral",
                vec![Suite::Dynamics],
                SamplingConfig::unit_box(3, 3, 11),
            )
        };
        let (report, exit) = run(&cfg).unwrap();
        assert_eq!(exit, 0, "summary: {:#?}", report.summary);
    }
}
