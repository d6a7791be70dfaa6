//! End-to-end acceptance battery. Each test prints one pass/fail line.

use sprayverify::driver::{run, RunConfig, SamplingConfig, Suite};
use sprayverify::dynamics::{
    first_integral_deviation, integrate_geodesic, integrate_jacobi, normal_acceleration,
    pairing_constancy, totally_geodesic_residual, AffineSubspace,
};
use sprayverify::examples::{
    builtin_finsler, builtin_spray, builtin_twoform, circle_dtheta_check, min_f_on_unit_fibre,
    phase_distance, pullback_check_spiral, to_path_coords_spiral,
};
use sprayverify::fieldspec::{parse_field, FieldDef, FieldKind};
use sprayverify::metrizability::{
    bm_residuals, f_from_theta, hessian_of_scalar, helmholtz_residuals, hilbert_oneform_field,
    kahler_lift, quadratic_form, quasi_definiteness, Definiteness, Multiplier, OmegaSource,
};
use sprayverify::oracle::fd_oracle;
use sprayverify::spray::{projective_transform, Point};

fn verdict(num: usize, name: &str, pass: bool) {
    println!(
        "criterion {num} ({name}): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {num} ({name}) failed");
}

fn spiral() -> FieldDef {
    builtin_spray("spiral").unwrap()
}

fn spiral_f() -> FieldDef {
    builtin_finsler("spiral").unwrap()
}

fn shell_points(count: usize, seed: u64) -> Vec<Point> {
    SamplingConfig::unit_box(3, count, seed).sample(3).unwrap()
}

#[test]
fn criterion_01_spiral_certification() {
    let start = std::time::Instant::now();
    let spray = spiral();
    let f = spiral_f();
    let mult = Multiplier::hessian_of(f.clone()).unwrap();
    let mut worst = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut ok = true;
    for p in shell_points(1000, 1) {
        let rep = helmholtz_residuals(&spray, &mult, &p, 1e-8).unwrap();
        worst = worst.max(rep.aggregate);
        ok &= rep.all_pass();
        let h = hessian_of_scalar(&f, &p).unwrap();
        let (me, class) = quasi_definiteness(&h, &p.y).unwrap();
        ok &= class == Definiteness::PositiveQuasiDefinite;
        min_eig = min_eig.min(me);
    }
    ok &= worst <= 1e-8 && min_eig >= 0.25 && start.elapsed().as_secs() <= 10;
    verdict(1, "spiral certification", ok);
}

#[test]
fn criterion_02_bm_conditions() {
    let spray = spiral();
    let theta = hilbert_oneform_field(&spiral_f()).unwrap();
    let mut ok = true;
    for p in shell_points(1000, 2) {
        let rep = bm_residuals(&spray, &theta, &p, 1e-8).unwrap();
        for name in ["lie_delta", "dJ", "dH"] {
            ok &= rep.entry(name).unwrap().residual <= 1e-8;
        }
        ok &= rep.entry("rank_dtheta").unwrap().detail == Some(4.0);
        let igt = rep.entry("positivity").unwrap().detail.unwrap();
        ok &= igt > 0.0;
        // i_Γθ reproduces F itself
        let fval = spiral_f().eval_values(&p).unwrap()[0];
        ok &= (igt - fval).abs() <= 1e-10 * fval.abs().max(1.0);
        ok &= (f_from_theta(&theta, &p).unwrap() - fval).abs() <= 1e-10;
    }
    verdict(2, "semi-basic 1-form conditions", ok);
}

fn genuine_points(count: usize, seed: u64) -> Vec<Point> {
    let mut out = Vec::new();
    for p in shell_points(count * 4, seed) {
        let lam = p.y_norm();
        let mu = (p.y[0] * p.y[0] + p.y[1] * p.y[1]).sqrt();
        if p.y[2].abs() >= 0.05 * lam && mu >= 0.05 * lam {
            out.push(p);
            if out.len() == count {
                break;
            }
        }
    }
    assert_eq!(out.len(), count);
    out
}

#[test]
fn criterion_03_three_way_two_form_identity() {
    let mut ok = true;
    let mut worst = 0.0f64;
    for p in genuine_points(200, 3) {
        let rep = pullback_check_spiral(&p, 1e-9).unwrap();
        ok &= rep.all_pass();
        worst = worst.max(rep.aggregate);
    }
    ok &= worst <= 1e-9;
    verdict(3, "three-way 2-form identity", ok);
}

#[test]
fn criterion_04_concomitance() {
    let spray = spiral();
    let mult = Multiplier::hessian_of(spiral_f()).unwrap();
    let mut ok = true;
    for (pi, src) in [
        "P = sqrt(u^2+v^2+w^2)",
        "P = u^2/sqrt(u^2+v^2+w^2)",
    ]
    .iter()
    .enumerate()
    {
        let p_fn = parse_field(src, FieldKind::Scalar, 3).unwrap();
        let tilted = projective_transform(&spray, &p_fn).unwrap();
        for p in shell_points(50, 40 + pi as u64) {
            let l1 = kahler_lift(&spray, &mult, &p).unwrap();
            let l2 = kahler_lift(&tilted, &mult, &p).unwrap();
            let dev = (l1.coord.full_matrix() - l2.coord.full_matrix()).amax();
            ok &= dev <= 1e-10;
            let omega1 = OmegaSource::Kahler(mult.clone());
            let v = [0.3, -0.8, 0.5];
            let q1 = quadratic_form(&spray, &omega1, &p, &v).unwrap();
            let q2 = quadratic_form(&tilted, &omega1, &p, &v).unwrap();
            ok &= (q1 - q2).abs() <= 1e-10;
        }
    }
    verdict(4, "projective concomitance", ok);
}

#[test]
fn criterion_05_geodesic_accuracy() {
    let spray = spiral();
    let p0 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 0.0]).unwrap();
    let traj = integrate_geodesic(&spray, &p0, std::f64::consts::FRAC_PI_2, 1e-10).unwrap();
    let (x, y) = traj.endpoint();
    let target = [1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
    let dev = x
        .iter()
        .chain(y.iter())
        .zip(target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let p1 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 1.0]).unwrap();
    let traj = integrate_geodesic(&spray, &p1, 10.0, 1e-10).unwrap();
    let mu = first_integral_deviation(&traj, |p| {
        Ok((p.y[0] * p.y[0] + p.y[1] * p.y[1]).sqrt())
    })
    .unwrap();
    let w = first_integral_deviation(&traj, |p| Ok(p.y[2])).unwrap();
    verdict(
        5,
        "geodesic accuracy",
        dev <= 1e-6 && mu <= 1e-8 && w <= 1e-8,
    );
}

#[test]
fn criterion_06_jacobi_suite() {
    let spray = spiral();
    let mut ok = true;

    // trivial fields γ̇ and tγ̇
    let p0 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 1.0]).unwrap();
    let traj = integrate_geodesic(&spray, &p0, 10.0, 1e-10).unwrap();
    let ch = integrate_jacobi(&spray, &traj, &p0.y, &[0.0; 3]).unwrap();
    for (k, _) in traj.times.iter().enumerate() {
        for i in 0..3 {
            ok &= (ch.zeta[k][i] - traj.states[k][3 + i]).abs() <= 1e-6;
        }
    }
    let ch = integrate_jacobi(&spray, &traj, &[0.0; 3], &p0.y).unwrap();
    for (k, &t) in traj.times.iter().enumerate() {
        for i in 0..3 {
            ok &= (ch.zeta[k][i] - t * traj.states[k][3 + i]).abs() <= 1e-6;
        }
    }

    // flat-spray fields affine in t
    let flat: FieldDef = parse_field("G1 = 0; G2 = 0; G3 = 0;", FieldKind::Spray, 3).unwrap();
    let tf = integrate_geodesic(&flat, &p0, 5.0, 1e-10).unwrap();
    let chf = integrate_jacobi(&flat, &tf, &[1.0, -0.5, 0.2], &[0.3, 0.1, -0.7]).unwrap();
    for (k, &t) in tf.times.iter().enumerate() {
        ok &= (chf.zeta[k][0] - (1.0 + 0.3 * t)).abs() <= 1e-8;
        ok &= (chf.zeta[k][1] - (-0.5 + 0.1 * t)).abs() <= 1e-8;
        ok &= (chf.zeta[k][2] - (0.2 - 0.7 * t)).abs() <= 1e-8;
    }

    // pairing conservation and the Lagrangian property
    let omega = OmegaSource::Kahler(Multiplier::hessian_of(spiral_f()).unwrap());
    let ch1 = integrate_jacobi(&spray, &traj, &[1.0, 0.0, 0.0], &[0.0, 0.3, 0.0]).unwrap();
    let ch2 = integrate_jacobi(&spray, &traj, &[0.0, 1.0, 0.0], &[0.5, 0.0, -0.2]).unwrap();
    ok &= pairing_constancy(&spray, &omega, &traj, &ch1, &ch2).unwrap() <= 1e-6;
    let v1 = integrate_jacobi(&spray, &traj, &[0.0; 3], &[1.0, 0.0, 0.0]).unwrap();
    let v2 = integrate_jacobi(&spray, &traj, &[0.0; 3], &[0.0, 1.0, 0.5]).unwrap();
    // both start at ζ = 0, so the conserved value is the value itself
    ok &= pairing_constancy(&spray, &omega, &traj, &v1, &v2).unwrap() <= 1e-7;

    verdict(6, "Jacobi suite", ok);
}

#[test]
fn criterion_07_path_space_chart() {
    let spray = spiral();
    let mut ok = true;
    let p0 = Point::new(vec![0.0; 3], vec![1.0, 0.0, 1.0]).unwrap();
    let traj = integrate_geodesic(&spray, &p0, 10.0, 1e-10).unwrap();
    let pc0 = to_path_coords_spiral(&p0).unwrap();
    for k in 0..traj.times.len() {
        let pc = to_path_coords_spiral(&traj.point_at_index(k).unwrap()).unwrap();
        ok &= (pc.xi - pc0.xi).abs() <= 1e-6
            && (pc.eta - pc0.eta).abs() <= 1e-6
            && (pc.nu - pc0.nu).abs() <= 1e-6
            && phase_distance(pc.vartheta, pc0.vartheta) <= 1e-6;
    }
    for p in genuine_points(50, 7) {
        let rep = pullback_check_spiral(&p, 1e-9).unwrap();
        ok &= rep.all_pass();
    }
    for (x, y, u, v) in [(0.0, 0.0, 1.0, 0.0), (0.4, -0.7, 0.6, 0.8), (-0.3, 0.2, -0.5, 1.1)] {
        let q = Point::new(vec![x, y], vec![u, v]).unwrap();
        ok &= circle_dtheta_check(&q).unwrap() <= 1e-10;
    }
    verdict(7, "path-space chart", ok);
}

#[test]
fn criterion_08_totally_geodesic() {
    let spray = spiral();
    let mut ok = true;
    for z in [-0.8, 0.0, 1.3] {
        let plane = AffineSubspace {
            point: vec![0.0, 0.0, z],
            basis: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
        };
        ok &= totally_geodesic_residual(&spray, &plane, 50).unwrap() <= 1e-12;
    }
    let y_plane = AffineSubspace {
        point: vec![0.0; 3],
        basis: vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
    };
    let probe = Point::new(vec![0.0; 3], vec![1.0, 0.0, 0.0]).unwrap();
    ok &= normal_acceleration(&spray, &y_plane, &probe).unwrap() >= 0.5;
    // restriction to z = 0, w = 0 is exactly the circle spray
    let circle = builtin_spray("circle").unwrap();
    for (x, y, u, v) in [(0.2, -0.4, 1.0, 0.3), (0.0, 0.0, 0.6, -0.9), (1.1, 0.7, -0.2, 0.5)] {
        let p2 = Point::new(vec![x, y], vec![u, v]).unwrap();
        let p3 = Point::new(vec![x, y, 0.3], vec![u, v, 0.0]).unwrap();
        let c = circle.eval_values(&p2).unwrap();
        let s = spray.eval_values(&p3).unwrap();
        ok &= c[0] == s[0] && c[1] == s[1] && s[2] == 0.0;
    }
    verdict(8, "totally geodesic submanifolds", ok);
}

#[test]
fn criterion_09_positivity_window() {
    let f = spiral_f();
    let mut ok = true;
    for angle in [0.0f64, 1.0, 2.5, 4.0] {
        let r_in = 3.9f64.sqrt();
        let x = [r_in * angle.cos(), r_in * angle.sin(), 0.4];
        ok &= min_f_on_unit_fibre(&f, &x, 400).unwrap() > 0.0;
        let r_out = 4.1f64.sqrt();
        let x = [r_out * angle.cos(), r_out * angle.sin(), -0.6];
        ok &= min_f_on_unit_fibre(&f, &x, 400).unwrap() <= 0.0;
    }
    verdict(9, "positivity window", ok);
}

#[test]
fn criterion_10_kernel_validation() {
    let mut ok = true;
    let fields: Vec<(FieldDef, usize)> = vec![
        (builtin_spray("spiral").unwrap(), 3),
        (builtin_spray("circle").unwrap(), 2),
        (builtin_spray("flat").unwrap(), 3),
        (builtin_finsler("spiral").unwrap(), 3),
        (builtin_finsler("circle").unwrap(), 2),
        (builtin_twoform("spiral").unwrap(), 3),
    ];
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for (fi, (field, n)) in fields.iter().enumerate() {
        let n = *n;
        let points = SamplingConfig::unit_box(n, 100 / fields.len() + 5, 10)
            .sample(n)
            .unwrap();
        for p in &points {
            let jets = field.eval_jets(p, 3).unwrap();
            for (c, jet) in jets.iter().enumerate() {
                let mut check = |jet_val: f64, fd: f64, label: &str| {
                    let rel = (jet_val - fd).abs() / jet_val.abs().max(fd.abs()).max(1.0);
                    if rel > worst {
                        worst = rel;
                        worst_at = format!(
                            "field {fi} comp {c} {label}: jet {jet_val} vs fd {fd} at {:?};{:?}",
                            p.x, p.y
                        );
                    }
                    ok &= rel <= 1e-6;
                };
                for a in 0..2 * n {
                    let fd = fd_oracle(field, c, p, &[a]).unwrap();
                    check(jet.grad(a), fd, &format!("d[{a}]"));
                    for b in a..2 * n {
                        let fd = fd_oracle(field, c, p, &[a, b]).unwrap();
                        check(jet.hess(a, b), fd, &format!("d[{a},{b}]"));
                    }
                }
                // third order over the stored fibre-restricted block
                for a in 0..2 * n {
                    for i in 0..n {
                        for j in i..n {
                            let fd = fd_oracle(field, c, p, &[a, n + i, n + j]).unwrap();
                            check(
                                jet.third_fibre(a, i, j),
                                fd,
                                &format!("d[{a},{},{}]", n + i, n + j),
                            );
                        }
                    }
                }
            }
        }
    }
    if worst > 1e-6 {
        println!("worst relative deviation {worst:e} at {worst_at}");
    }
    // negative control: identity multiplier must fail with exit status 1
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
            SamplingConfig::unit_box(3, 20, 5),
        )
    };
    let (_, exit) = run(&cfg).unwrap();
    ok &= exit == 1;
    verdict(10, "kernel validation", ok);
}

#[test]
fn criterion_11_grassmann_suite() {
    let spray = spiral();
    let f = spiral_f();
    let mult = Multiplier::hessian_of(f).unwrap();
    let mut ok = true;
    for p in shell_points(100, 11) {
        let rep = sprayverify::grassmann::segre_checks(&spray, &mult, &p, 1e-10).unwrap();
        ok &= rep.all_pass();
        ok &= rep.entry("definiteness_sign").unwrap().detail == Some(1.0);
        let frame = sprayverify::grassmann::grassmann_frame(&spray, &p).unwrap();
        ok &= frame.trace_conn.amax() <= 1e-12;
    }
    verdict(11, "Grassmann suite", ok);
}
