//! End-to-end criteria at the pinned tolerances. Prints one line per
//! criterion and fails if any of them fails.
//!
//! Runs without the test harness so the table is always printed.

use std::time::Instant;

use bendkit::bending::{
    bendability_flag, bending_space_dimension, pointwise_constraint_kernel, ruled_bending, synthesize, triviality_test,
    verify_bending, Probe,
};
use bendkit::bending::rigidity::orthonormal_shape;
use bendkit::hypersurface::{
    classify, envelope_cross_check, from_samples, gauss_parametrize, pair_from_phi, HypersurfaceSample, Verdict,
};
use bendkit::pde::{solve_goursat, GoursatProblem, PhiFamily};
use bendkit::registry::{build_example, clifford_family, clifford_phi0, non_bendable_family, Resolution};
use bendkit::{make_grid, Dir, Result, ScalarField, VecField};
use nalgebra::{Matrix2, Matrix4, Vector4};

const FULL: Resolution = Resolution { nu: 65, nv: 65, ns: 9 };

type Criterion = (&'static str, fn() -> Result<Outcome>, Option<f64>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn c1_goursat() -> Result<Outcome> {
    let mut oracle = 0.0;
    let mut fact = 1.0;
    for k in 0..20 {
        if k > 0 {
            fact *= k as f64;
        }
        oracle += (-1f64).powi(k) / (fact * fact);
    }
    let corner = |n: usize| -> Result<f64> {
        let g = make_grid((0.0, 1.0), (0.0, 1.0), n, n)?;
        let prob = GoursatProblem::from_fns(ScalarField::constant(&g, 1.0), |_| 1.0, |_| 1.0)?;
        Ok((solve_goursat(&prob)?.at(n - 1, n - 1, 0) - oracle).abs())
    };
    let (e65, e129) = (corner(65)?, corner(129)?);
    let ratio = e65 / e129;
    outcome(
        e129 <= 1e-3 && (3.2..=4.8).contains(&ratio),
        format!("oracle {oracle:.6}, error(129) {e129:.2e}, ratio {ratio:.3}"),
    )
}

fn c2_gauss() -> Result<Outcome> {
    let hyp = build_example("clifford", FULL)?.hyp;
    let c = hyp.checks.expect("built from Gauss data");
    let g = 100.0 * hyp.h() * hyp.h();
    outcome(
        c.normal_orthogonality <= 1e-8 && c.normal_match <= g && c.shape_cross_check <= g,
        format!(
            "<N,psi_i> {:.1e}, normal match {:.1e}, shape cross-check {:.1e} (gate {g:.1e})",
            c.normal_orthogonality, c.normal_match, c.shape_cross_check
        ),
    )
}

fn c3_envelope() -> Result<Outcome> {
    let ex = build_example("clifford", FULL)?;
    let (d, probed) = envelope_cross_check(ex.family.as_ref().expect("family"), &ex.hyp, 5)?;
    outcome(probed == 25 && d <= 1e-6, format!("max leaf distance {d:.1e} over {probed} nodes"))
}

fn c4_synthesis() -> Result<Outcome> {
    let hyp = build_example("clifford", FULL)?.hyp;
    let cls = classify(&hyp)?;
    let tensors = synthesize(&hyp, &cls)?;
    let vr = verify_bending(&hyp, &tensors.t, 0.5, Some(&tensors))?;
    let mut worst: (String, f64) = (String::new(), 0.0);
    let mut pass = true;
    for name in ["S-compat", "T-path"] {
        let (r, g) = (tensors.residuals[name], tensors.gates[name]);
        pass &= r <= g;
        if r / g > worst.1 {
            worst = (name.into(), r / g);
        }
    }
    let vres = vr.residuals();
    for name in ["iif", "var", "tau-theta-beta", "recovered-B"] {
        let r = *vres.get(name).unwrap_or(&f64::INFINITY);
        pass &= r <= vr.gate;
        if r / vr.gate > worst.1 {
            worst = (name.into(), r / vr.gate);
        }
    }
    outcome(pass, format!("all within gate; largest residual/gate {:.1e} ({})", worst.1, worst.0))
}

fn c5_uniqueness() -> Result<Outcome> {
    let hyp = build_example("clifford", FULL)?.hyp;
    let cls = classify(&hyp)?;
    let tensors = synthesize(&hyp, &cls)?;
    let triv = triviality_test(&hyp, &tensors.t)?;
    let space = bending_space_dimension(&hyp, &Probe::centered(&hyp, [9, 9, 3])?)?;
    outcome(
        triv.relative_residual > 1e-2 && space.nullity == 1 && space.gap_ratio > 1e3,
        format!(
            "triviality residual {:.3}, nullity {}, gap ratio {:.1e}",
            triv.relative_residual, space.nullity, space.gap_ratio
        ),
    )
}

fn c6_rank3() -> Result<Outcome> {
    let hyp = build_example("sphere-patch", FULL)?.hyp;
    let regular: Vec<usize> = (0..hyp.len()).filter(|&i| hyp.regular[i]).collect();
    let step = (regular.len() / 100).max(1);
    let (mut nonzero, mut weakest, mut points) = (0, f64::INFINITY, 0);
    for &idx in regular.iter().step_by(step).take(100) {
        let k = pointwise_constraint_kernel(&orthonormal_shape(&hyp, idx)?)?;
        nonzero += usize::from(k.dim() > 0);
        weakest = weakest.min(k.smallest_nonzero());
        points += 1;
    }
    let space = bending_space_dimension(&hyp, &Probe::centered(&hyp, [9, 9, 3])?)?;
    outcome(
        points == 100 && nonzero == 0 && weakest > 0.1 && space.nullity == 0,
        format!("{points} points, nontrivial kernels {nonzero}, smallest sigma {weakest:.3}, global nullity {}", space.nullity),
    )
}

fn rotation() -> Matrix4<f64> {
    let plane = |i: usize, j: usize, a: f64| {
        let mut r = Matrix4::identity();
        r[(i, i)] = a.cos();
        r[(j, j)] = a.cos();
        r[(i, j)] = -a.sin();
        r[(j, i)] = a.sin();
        r
    };
    plane(0, 1, 0.7) * plane(1, 3, -1.3) * plane(2, 3, 0.4)
}

fn rotate(field: &VecField, q: &Matrix4<f64>) -> VecField {
    let mut out = field.clone();
    for i in 0..field.grid().len() {
        let x = field.node(i);
        let y = q * Vector4::new(x[0], x[1], x[2], x[3]);
        out.node_mut(i).copy_from_slice(y.as_slice());
    }
    out
}

fn rotated(ex: &bendkit::registry::Example, q: &Matrix4<f64>) -> Result<HypersurfaceSample> {
    match &ex.family {
        Some(fam) => {
            let turned = PhiFamily { phi: rotate(&fam.phi, q), ..fam.clone() };
            let s = &ex.hyp.grid.axes()[2];
            gauss_parametrize(&pair_from_phi(&turned)?, (s.lo, s.hi), s.n)
        }
        None => from_samples(&rotate(&ex.hyp.psi, q), &rotate(&ex.hyp.normal, q)),
    }
}

fn c7_classification() -> Result<Outcome> {
    let q = rotation();
    let mut pass = true;
    let mut notes = Vec::new();
    let want = [
        ("cone", Verdict::SurfaceLike),
        ("ruled-demo", Verdict::Ruled),
        ("clifford", Verdict::Hyperbolic),
        ("elliptic-demo", Verdict::Elliptic),
    ];
    for (name, verdict) in want {
        let ex = build_example(name, FULL)?;
        let c = classify(&ex.hyp)?;
        let h = ex.hyp.h();
        let mut ok = c.verdict == verdict;
        match verdict {
            Verdict::Ruled => ok &= c.residuals["det-D"] <= (100.0 * h * h).clamp(1e-6, 0.1),
            Verdict::Hyperbolic | Verdict::Elliptic => {
                let sign = if verdict == Verdict::Hyperbolic { 1.0 } else { -1.0 };
                let dev = c.j_bar.iter().map(|j| (j * j - Matrix2::identity() * sign).norm()).fold(0.0, f64::max);
                ok &= dev <= 1e-10;
            }
            _ => {}
        }
        let turned = classify(&rotated(&ex, &q)?)?;
        let drift = c.j_bar.iter().zip(&turned.j_bar).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        ok &= turned.verdict == c.verdict && drift <= 1e-10;
        pass &= ok;
        notes.push(format!("{name} {} (rotation drift {drift:.0e})", c.verdict));
    }
    outcome(pass, notes.join(", "))
}

fn c8_ruled() -> Result<Outcome> {
    let hyp = build_example("ruled-demo", FULL)?.hyp;
    let cls = classify(&hyp)?;
    let nu = hyp.grid.n(Dir::U);
    let r1 = ruled_bending(&hyp, &cls, &vec![1.0; nu])?;
    let r2 = ruled_bending(&hyp, &cls, &vec![2.0; nu])?;
    let doubles = r1.theta.values().iter().zip(r2.theta.values()).all(|(a, b)| 2.0 * a == *b);
    let h = hyp.h();
    let codazzi = r1.codazzi_residual(&hyp, 0.1)?.max(r1.codazzi_residual(&hyp, 1.0)?);
    let probe = Probe::centered(&hyp, [9, 9, 3])?;
    let space = bending_space_dimension(&hyp, &probe)?;
    let seed_nodes = probe.count[0];
    outcome(
        doubles && codazzi <= 100.0 * h * h && space.nullity == seed_nodes,
        format!(
            "codazzi {codazzi:.1e} (gate {:.1e}), doubling exact {doubles}, nullity {} vs {seed_nodes} seed nodes",
            100.0 * h * h,
            space.nullity
        ),
    )
}

fn c9_flag() -> Result<Outcome> {
    let a = bendability_flag(&clifford_family(65, 65, clifford_phi0)?)?;
    let b = bendability_flag(&non_bendable_family(65, 65)?)?;
    outcome(
        a.bendable && a.residual <= 1e-10 && !b.bendable && b.residual >= 1.0,
        format!("clifford residual {:.1e}, constructed family residual {:.3}", a.residual, b.residual),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("Goursat convergence", c1_goursat, Some(5.0)),
        ("Gauss-parametrization consistency", c2_gauss, Some(10.0)),
        ("envelope/parametrization equivalence", c3_envelope, Some(5.0)),
        ("bending synthesis and verification", c4_synthesis, Some(30.0)),
        ("non-triviality and uniqueness", c5_uniqueness, Some(60.0)),
        ("rank-3 rigidity", c6_rank3, None),
        ("classification dichotomy", c7_classification, None),
        ("ruled family", c8_ruled, None),
        ("bendability flag", c9_flag, None),
    ];
    let mut failed = Vec::new();
    for (k, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs < l);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = limit.map_or(String::new(), |l| format!(" / {l} s"));
        println!(
            "criterion {}: {} {name}: {detail} [{secs:.2} s{budget}]",
            k + 1,
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failed.push(k + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
