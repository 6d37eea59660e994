use std::path::{Path, PathBuf};
use std::time::Instant;

use bendkit::bending::{
    bending_space_dimension, bendability_flag, deformed_codazzi, gate, pointwise_constraint_kernel, ruled_bending,
    synthesize, triviality_test, verify_bending, Probe,
};
use bendkit::bending::rigidity::orthonormal_shape;
use bendkit::config::PipelineConfig;
use bendkit::grid::Dir;
use bendkit::hypersurface::classify::residual_gates;
use bendkit::hypersurface::envelope::{ENVELOPE_RESIDUAL, ENVELOPE_TOL};
use bendkit::hypersurface::sample::GAUSS_CHECK_NAMES;
use bendkit::hypersurface::{classify, envelope_cross_check, gauss_parametrize, pair_from_phi, rank_profile, HypersurfaceSample, Verdict};
use bendkit::io::{
    bending_bundle, bending_from_bundle, family_bundle, family_from_bundle, hypersurface_bundle, hypersurface_from_bundle,
    read_json, write_json, write_obj_slices, BendingFile, Bundle, GridSpec,
};
use bendkit::pde::PhiFamily;
use bendkit::registry::{self, build_example};
use bendkit::report::{bend_residual_names, verify_residual_names, Report};
use bendkit::error::ExitClass;
use bendkit::{Error, Result};

use crate::Common;

const OK: u8 = 0;
const GEOMETRY: u8 = 3;
const INTEGRABILITY: u8 = 4;

struct Ctx {
    cfg: PipelineConfig,
    out: PathBuf,
    hash: String,
}

impl Ctx {
    fn new(common: &Common) -> Result<Ctx> {
        let mut cfg = match &common.config {
            Some(p) => PipelineConfig::load(p)?,
            None => match &common.example {
                Some(name) => PipelineConfig::for_example(name),
                None => return Err(Error::Input("pass --config or --example".into())),
            },
        };
        if common.config.is_some() {
            if let Some(ex) = &common.example {
                cfg.example = Some(ex.clone());
            }
        }
        if let Some(g) = &common.grid {
            cfg.set_grid(g)?;
        }
        if let Some(s) = common.gate_scale {
            cfg.gates.scale = s;
        }
        if let Some(o) = &common.out {
            cfg.output.dir = o.clone();
        }
        cfg.validate()?;
        // The output directory does not change any result.
        let mut canon = cfg.clone();
        canon.output.dir = PathBuf::new();
        let hash = canon.hash();
        Ok(Ctx { out: cfg.output.dir.clone(), cfg, hash })
    }

    fn report(&self, command: &str, grid: Option<GridSpec>) -> Report {
        Report::new(command, &self.hash, grid)
    }

    fn gate(&self, name: &str, library: f64) -> f64 {
        self.cfg.gates.apply(name, library)
    }

    fn default_file(&self, explicit: Option<PathBuf>, name: &str) -> Option<PathBuf> {
        explicit.or_else(|| Some(self.out.join(name)).filter(|p| p.is_file()))
    }

    fn fiber_range(&self) -> Result<(f64, f64)> {
        let default = match self.cfg.example.as_deref() {
            Some("clifford") => Some(registry::CLIFFORD_FIBER),
            Some("cone") => Some((0.3, 0.7)),
            Some("elliptic-demo") => Some(registry::ELLIPTIC_FIBER),
            _ => None,
        };
        match (self.cfg.fiber.range, default) {
            (Some(r), _) => Ok((r[0], r[1])),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::Input("fiber.range is required for this family".into())),
        }
    }

    /// Family from an explicit file, `<out>/family.json`, or the configuration.
    fn family(&self, explicit: Option<PathBuf>) -> Result<Option<PhiFamily>> {
        if let Some(p) = self.default_file(explicit, "family.json") {
            log::info!("reading family from {}", p.display());
            return family_from_bundle(&read_json::<Bundle>(&p)?).map(Some);
        }
        let from_example = matches!(self.cfg.example.as_deref(), Some("sphere-patch" | "ruled-demo" | "cylinder"));
        if self.cfg.seeds.is_empty() && from_example {
            return Ok(None);
        }
        self.cfg.family().map(Some)
    }

    /// Builds the hypersurface; returns the family it came from when there is one.
    fn build_hyp(&self, family: Option<PathBuf>) -> Result<(HypersurfaceSample, Option<PhiFamily>)> {
        match self.family(family)? {
            Some(fam) => {
                let (lo, hi) = self.fiber_range()?;
                let hyp = gauss_parametrize(&pair_from_phi(&fam)?, (lo, hi), self.cfg.fiber.count)?;
                Ok((hyp, Some(fam)))
            }
            None => {
                let name = self.cfg.example.as_deref().expect("checked by family()");
                Ok((build_example(name, self.cfg.resolution())?.hyp, None))
            }
        }
    }

    /// Hypersurface from a file when one is available, built otherwise.
    /// The second value is the stored or measured envelope distance.
    fn hyp(&self, explicit: Option<PathBuf>) -> Result<(HypersurfaceSample, Option<f64>)> {
        if let Some(p) = self.default_file(explicit, "hypersurface.json") {
            log::info!("reading hypersurface from {}", p.display());
            let b = read_json::<Bundle>(&p)?;
            let env = b.meta.get(ENVELOPE_RESIDUAL).and_then(|v| v.as_f64());
            return Ok((hypersurface_from_bundle(&b)?, env));
        }
        let (hyp, fam) = self.build_hyp(None)?;
        let env = match fam {
            Some(f) => Some(envelope_cross_check(&f, &hyp, 5)?.0),
            None => None,
        };
        Ok((hyp, env))
    }

    /// Probe of the configured size around the base node.
    fn probe(&self, hyp: &HypersurfaceSample) -> Result<Probe> {
        let count = self.cfg.bending.probe;
        let n = [hyp.grid.n(Dir::U), hyp.grid.n(Dir::V), hyp.grid.n(Dir::S)];
        let centre = match self.cfg.base {
            Some([i, j]) => [i, j, n[2] / 2],
            None => [n[0] / 2, n[1] / 2, n[2] / 2],
        };
        let mut start = [0; 3];
        for d in 0..3 {
            if count[d] < 3 || count[d] > n[d] || centre[d] >= n[d] {
                return Err(Error::Input(format!("probe {count:?} around node {centre:?} does not fit the {n:?} chart")));
            }
            start[d] = centre[d].saturating_sub(count[d] / 2).min(n[d] - count[d]);
        }
        Ok(Probe { start, count, stride: [1; 3] })
    }
}

fn elapsed(report: &mut Report, stage: &str, since: Instant) {
    report.timing.insert(stage.into(), since.elapsed().as_secs_f64());
}

fn finish(report: &Report, code: u8) -> u8 {
    let fails = report.failures();
    if fails.is_empty() {
        log::info!("verdict: {}", report.verdict);
    } else {
        log::warn!("verdict: {}; failed gates: {}", report.verdict, fails.join(", "));
    }
    code
}

fn owned(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn gauss_residuals(ctx: &Ctx, report: &mut Report, hyp: &HypersurfaceSample, envelope: Option<f64>) -> Result<()> {
    match &hyp.checks {
        Some(c) => {
            for (name, (value, gate)) in c.residuals(hyp.h()) {
                report.gated(&name, value, ctx.gate(&name, gate))?;
            }
        }
        None => report.skip_missing(&owned(&GAUSS_CHECK_NAMES), "hypersurface was not built from Gauss data"),
    }
    match envelope {
        Some(d) => report.gated(ENVELOPE_RESIDUAL, d, ctx.gate(ENVELOPE_RESIDUAL, ENVELOPE_TOL))?,
        None => report.skipped(ENVELOPE_RESIDUAL, "no hyperplane family")?,
    }
    Ok(())
}

pub fn solve(common: &Common) -> Result<u8> {
    let ctx = Ctx::new(common)?;
    let start = Instant::now();
    let fam = ctx.cfg.family()?;
    let mut report = ctx.report("solve", Some(GridSpec::of(fam.phi.grid())));
    elapsed(&mut report, "solve", start);
    report.gated("pde", fam.max_residual()?, ctx.gate("pde", fam.residual_gate()))?;
    let flag = bendability_flag(&fam)?;
    report.info("bendable", flag.bendable);
    report.info("bendability-residual", flag.residual);
    report.info("bendability-gate", flag.gate);
    report.info("kind", format!("{:?}", fam.kind).to_lowercase());
    write_json(&ctx.out.join("family.json"), &family_bundle(&fam))?;
    report.verdict = if report.passed() { "solved" } else { "residual above gate" }.into();
    report.emit(&ctx.out, "solve", &["pde".to_string()])?;
    let code = if report.passed() { OK } else { INTEGRABILITY };
    Ok(finish(&report, code))
}

pub fn build(common: &Common, family: Option<PathBuf>) -> Result<u8> {
    let ctx = Ctx::new(common)?;
    let start = Instant::now();
    let (hyp, fam) = ctx.build_hyp(family)?;
    let mut report = ctx.report("build", Some(GridSpec::of(&hyp.grid)));
    elapsed(&mut report, "parametrize", start);
    let start = Instant::now();
    let envelope = match &fam {
        Some(f) => {
            let (d, probed) = envelope_cross_check(f, &hyp, 5)?;
            report.info("envelope-probes", probed);
            Some(d)
        }
        None => None,
    };
    elapsed(&mut report, "envelope", start);
    gauss_residuals(&ctx, &mut report, &hyp, envelope)?;
    let regular = hyp.regular.iter().filter(|&&r| r).count();
    if regular < hyp.len() {
        log::warn!("{} of {} nodes are singular and left out", hyp.len() - regular, hyp.len());
    }
    report.info("regular-nodes", regular);
    report.info("nodes", hyp.len());
    report.info("rank-histogram", rank_profile(&hyp).histogram.to_vec());

    let mut bundle = hypersurface_bundle(&hyp);
    if let Some(d) = envelope {
        bundle.meta.insert(ENVELOPE_RESIDUAL.into(), d.into());
    }
    write_json(&ctx.out.join("hypersurface.json"), &bundle)?;
    let start = Instant::now();
    let files = write_obj_slices(&hyp, &ctx.out.join("mesh"), ctx.cfg.output.mesh_coords)?;
    elapsed(&mut report, "mesh", start);
    report.info("mesh-slices", files.len());

    let mut names = owned(&GAUSS_CHECK_NAMES);
    names.push(ENVELOPE_RESIDUAL.into());
    report.verdict = if report.passed() { "built" } else { "inconsistent geometry" }.into();
    report.emit(&ctx.out, "build", &names)?;
    let code = if report.passed() { OK } else { GEOMETRY };
    Ok(finish(&report, code))
}

/// Pointwise kernel dimensions at evenly spread regular nodes.
fn kernel_dims(hyp: &HypersurfaceSample, points: usize) -> Result<(Vec<usize>, f64)> {
    let regular: Vec<usize> = (0..hyp.len()).filter(|&i| hyp.regular[i]).collect();
    let step = (regular.len() / points.max(1)).max(1);
    let mut hist = vec![0usize; 7];
    let mut weakest = f64::INFINITY;
    for &idx in regular.iter().step_by(step).take(points) {
        let k = pointwise_constraint_kernel(&orthonormal_shape(hyp, idx)?)?;
        hist[k.dim()] += 1;
        weakest = weakest.min(k.smallest_nonzero());
    }
    Ok((hist, weakest))
}

fn rigidity_info(ctx: &Ctx, report: &mut Report, hyp: &HypersurfaceSample) -> Result<usize> {
    let start = Instant::now();
    let (hist, weakest) = kernel_dims(hyp, ctx.cfg.bending.kernel_points)?;
    report.info("pointwise-kernel-histogram", hist);
    report.info("pointwise-smallest-nonzero", weakest);
    elapsed(report, "pointwise-kernel", start);
    let start = Instant::now();
    let probe = ctx.probe(hyp)?;
    let space = bending_space_dimension(hyp, &probe)?;
    elapsed(report, "bending-space", start);
    report.info("bending-space-nullity", space.nullity);
    report.info("bending-space-gap-ratio", space.gap_ratio);
    report.info("bending-space-unknowns", space.unknowns);
    report.info("probe-start", probe.start.to_vec());
    report.info("probe-count", probe.count.to_vec());
    let smallest: Vec<f64> = space.singular_values.iter().take(space.nullity + 3).copied().collect();
    report.info("bending-space-smallest-singular-values", smallest);
    Ok(space.nullity)
}

pub fn bend(common: &Common, hypersurface: Option<PathBuf>) -> Result<u8> {
    let ctx = Ctx::new(common)?;
    let start = Instant::now();
    let (hyp, envelope) = ctx.hyp(hypersurface)?;
    let h = hyp.h();
    let mut report = ctx.report("bend", Some(GridSpec::of(&hyp.grid)));
    elapsed(&mut report, "load", start);
    let names = bend_residual_names();
    gauss_residuals(&ctx, &mut report, &hyp, envelope)?;

    let profile = rank_profile(&hyp);
    report.info("rank-histogram", profile.histogram.to_vec());
    if profile.constant_rank() == Some(3) {
        rigidity_info(&ctx, &mut report, &hyp)?;
        report.verdict = "rigid (rank 3)".into();
        report.skip_missing(&names, "rank 3: no bending is synthesized");
        report.emit(&ctx.out, "bend", &names)?;
        return Ok(finish(&report, if report.passed() { OK } else { GEOMETRY }));
    }

    let start = Instant::now();
    let cls = match classify(&hyp) {
        Ok(c) => c,
        Err(e) if e.exit_class() == ExitClass::Integrability => {
            log::error!("{e}");
            report.verdict = format!("unclassifiable: {e}");
            report.skip_missing(&names, "classification failed");
            report.emit(&ctx.out, "bend", &names)?;
            return Ok(finish(&report, INTEGRABILITY));
        }
        Err(e) => return Err(e),
    };
    elapsed(&mut report, "classify", start);
    let gates = residual_gates(h);
    for (name, value) in &cls.residuals {
        match gates.get(name).copied().flatten() {
            Some(g) => report.gated(name, *value, ctx.gate(name, g))?,
            None => report.measured(name, *value)?,
        }
    }
    report.info("classification", cls.verdict.to_string());

    let bending = match cls.verdict {
        Verdict::SurfaceLike | Verdict::Mixed => {
            report.verdict = format!("not bendable by synthesis ({})", cls.verdict);
            report.skip_missing(&names, "no bending for this class");
            report.emit(&ctx.out, "bend", &names)?;
            return Ok(finish(&report, INTEGRABILITY));
        }
        Verdict::Ruled => {
            let start = Instant::now();
            let seeds = vec![ctx.cfg.bending.theta0; hyp.grid.n(Dir::U)];
            let rb = ruled_bending(&hyp, &cls, &seeds)?;
            let mut codazzi = 0.0f64;
            for &t in &ctx.cfg.bending.t {
                codazzi = codazzi.max(rb.codazzi_residual(&hyp, t)?);
            }
            elapsed(&mut report, "ruled", start);
            report.gated("ruling", rb.ruling_residual, ctx.gate("ruling", gate(h, 0.0)))?;
            report.gated("codazzi-A", codazzi, ctx.gate("codazzi-A", gate(h, 0.0)))?;
            report.verdict = "bendable (ruled)".into();
            BendingFile { hyp, b_chart: Some(rb.b_chart), tensors: None, t: None, theta: Some(rb.theta), meta: Default::default() }
        }
        Verdict::Hyperbolic | Verdict::Elliptic => {
            let start = Instant::now();
            let tensors = synthesize(&hyp, &cls)?;
            elapsed(&mut report, "synthesize", start);
            for (name, value) in &tensors.residuals {
                report.gated(name, *value, ctx.gate(name, tensors.gates[name]))?;
            }
            let start = Instant::now();
            let t_probe = ctx.cfg.bending.t[ctx.cfg.bending.t.len() / 2];
            let vr = verify_bending(&hyp, &tensors.t, t_probe, Some(&tensors))?;
            for (name, value) in vr.residuals() {
                report.gated(&name, value, ctx.gate(&name, vr.gate))?;
            }
            report.info("verify-t", t_probe);
            let triv = triviality_test(&hyp, &tensors.t)?;
            elapsed(&mut report, "verify", start);
            report.info("trivial", triv.is_trivial);
            report.info("triviality-residual", triv.relative_residual);
            report.verdict = format!("bendable ({})", cls.verdict);
            let b_chart = Some(tensors.b_chart.clone());
            BendingFile { hyp, b_chart, tensors: Some(tensors), t: None, theta: None, meta: Default::default() }
        }
    };
    report.skip_missing(&names, "not applicable to this class");
    let mut bending = bending;
    bending.meta.insert("classification".into(), cls.verdict.to_string().into());
    write_json(&ctx.out.join("bending.json"), &bending_bundle(&bending))?;
    report.emit(&ctx.out, "bend", &names)?;
    let code = if report.passed() { OK } else { INTEGRABILITY };
    Ok(finish(&report, code))
}

pub fn verify(common: &Common, bending: Option<PathBuf>, ts: Option<Vec<f64>>) -> Result<u8> {
    let ctx = Ctx::new(common)?;
    let path = bending.unwrap_or_else(|| ctx.out.join("bending.json"));
    let start = Instant::now();
    let file = bending_from_bundle(&read_json::<Bundle>(&path)?)?;
    let ts = ts.unwrap_or_else(|| ctx.cfg.bending.t.clone());
    if ts.is_empty() {
        return Err(Error::Input("verify needs at least one t".into()));
    }
    let hyp = &file.hyp;
    let mut report = ctx.report("verify", Some(GridSpec::of(&hyp.grid)));
    elapsed(&mut report, "load", start);
    let start = Instant::now();
    let names = match (&file.t, &file.b_chart) {
        (Some(t), _) => {
            for &tp in &ts {
                let vr = verify_bending(hyp, t, tp, file.tensors.as_ref())?;
                for (name, value) in vr.residuals() {
                    let key = format!("{name}@t={tp}");
                    report.gated(&key, value, ctx.gate(&key, vr.gate))?;
                }
            }
            let names = verify_residual_names(&ts);
            report.skip_missing(&names, "needs the synthesized tensors");
            names
        }
        (None, Some(b)) => {
            let mut names = Vec::new();
            for &tp in &ts {
                let key = format!("codazzi-A@t={tp}");
                report.gated(&key, deformed_codazzi(hyp, b, tp)?, ctx.gate(&key, gate(hyp.h(), 0.0)))?;
                names.push(key);
            }
            names
        }
        (None, None) => {
            return Err(Error::Input(format!("{}: no displacement field or bending tensor", path.display())));
        }
    };
    elapsed(&mut report, "verify", start);
    report.verdict = if report.passed() { "verified" } else { "not a bending" }.into();
    report.emit(&ctx.out, "verify", &names)?;
    let code = if report.passed() { OK } else { INTEGRABILITY };
    Ok(finish(&report, code))
}

pub fn rigidity(common: &Common, hypersurface: Option<PathBuf>) -> Result<u8> {
    let ctx = Ctx::new(common)?;
    let (hyp, _) = ctx.hyp(hypersurface)?;
    let mut report = ctx.report("rigidity", Some(GridSpec::of(&hyp.grid)));
    report.info("rank-histogram", rank_profile(&hyp).histogram.to_vec());
    let nullity = rigidity_info(&ctx, &mut report, &hyp)?;
    report.verdict = if nullity == 0 { "rigid".into() } else { format!("bending space of dimension {nullity} on the probe") };
    report.emit(&ctx.out, "rigidity", &[])?;
    Ok(finish(&report, OK))
}

pub fn export_mesh(common: &Common, hypersurface: Option<PathBuf>, coords: Option<Vec<usize>>) -> Result<u8> {
    let ctx = Ctx::new(common)?;
    let coords = match coords {
        None => ctx.cfg.output.mesh_coords,
        Some(c) => <[usize; 3]>::try_from(c.as_slice())
            .map_err(|_| Error::Input(format!("--coords needs three indices, got {}", c.len())))?,
    };
    let (hyp, _) = ctx.hyp(hypersurface)?;
    let dir: &Path = &ctx.out.join("mesh");
    let files = write_obj_slices(&hyp, dir, coords)?;
    log::info!("wrote {} slices to {}", files.len(), dir.display());
    Ok(OK)
}
