//! JSON field containers, named bundles and OBJ export.
//!
//! Floats are written in shortest round-trip form, so a save followed by a
//! load reproduces every sample bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bending::BendingTensors;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VecField};
use crate::grid::{Axis, Grid};
use crate::hypersurface::{from_parts, GaussPair, HypersurfaceSample};
use crate::pde::PhiFamily;
use crate::surface::{JetKind, Kind, SurfaceJet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub ranges: Vec<[f64; 2]>,
    pub counts: Vec<usize>,
}

impl GridSpec {
    pub fn of(grid: &Grid) -> GridSpec {
        GridSpec {
            ranges: grid.axes().iter().map(|a| [a.lo, a.hi]).collect(),
            counts: grid.axes().iter().map(|a| a.n).collect(),
        }
    }

    pub fn to_grid(&self) -> Result<Grid> {
        if self.ranges.len() != self.counts.len() {
            return Err(Error::Format("grid ranges and counts differ in length".into()));
        }
        let axes = self
            .ranges
            .iter()
            .zip(&self.counts)
            .map(|(r, &n)| Axis::new(r[0], r[1], n))
            .collect::<Result<Vec<_>>>()?;
        Grid::from_axes(axes)
    }
}

/// One sampled field; `ambient_dim` values per node, node-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub grid: GridSpec,
    pub ambient_dim: usize,
    pub values: Vec<f64>,
}

impl FieldRecord {
    pub fn scalar(f: &ScalarField) -> FieldRecord {
        FieldRecord { grid: GridSpec::of(f.grid()), ambient_dim: 1, values: f.values().to_vec() }
    }

    pub fn vector(f: &VecField) -> FieldRecord {
        FieldRecord { grid: GridSpec::of(f.grid()), ambient_dim: f.dim(), values: f.values().to_vec() }
    }

    pub fn matrices3(grid: &Grid, m: &[Matrix3<f64>]) -> FieldRecord {
        let values = m.iter().flat_map(|x| x.as_slice().to_vec()).collect();
        FieldRecord { grid: GridSpec::of(grid), ambient_dim: 9, values }
    }

    pub fn matrices2(grid: &Grid, m: &[Matrix2<f64>]) -> FieldRecord {
        let values = m.iter().flat_map(|x| x.as_slice().to_vec()).collect();
        FieldRecord { grid: GridSpec::of(grid), ambient_dim: 4, values }
    }

    pub fn mask(grid: &Grid, mask: &[bool]) -> FieldRecord {
        let values = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        FieldRecord { grid: GridSpec::of(grid), ambient_dim: 1, values }
    }

    pub fn to_scalar(&self) -> Result<ScalarField> {
        if self.ambient_dim != 1 {
            return Err(Error::Format(format!("expected a scalar field, found dimension {}", self.ambient_dim)));
        }
        ScalarField::new(self.grid.to_grid()?, self.values.clone())
    }

    pub fn to_vector(&self) -> Result<VecField> {
        VecField::new(self.grid.to_grid()?, self.ambient_dim, self.values.clone())
    }

    pub fn to_matrices3(&self) -> Result<Vec<Matrix3<f64>>> {
        self.expect_dim(9)?;
        Ok(self.values.chunks(9).map(Matrix3::from_column_slice).collect())
    }

    pub fn to_matrices2(&self) -> Result<Vec<Matrix2<f64>>> {
        self.expect_dim(4)?;
        Ok(self.values.chunks(4).map(Matrix2::from_column_slice).collect())
    }

    pub fn to_mask(&self) -> Result<Vec<bool>> {
        self.expect_dim(1)?;
        Ok(self.values.iter().map(|&x| x != 0.0).collect())
    }

    fn expect_dim(&self, d: usize) -> Result<()> {
        let len = self.grid.counts.iter().product::<usize>();
        if self.ambient_dim != d || self.values.len() != d * len {
            return Err(Error::Format(format!("expected {d} values per node")));
        }
        Ok(())
    }
}

/// Named fields plus free-form metadata, tagged by `format`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub format: String,
    pub meta: BTreeMap<String, Value>,
    pub fields: BTreeMap<String, FieldRecord>,
}

impl Bundle {
    pub fn new(format: &str) -> Bundle {
        Bundle { format: format.into(), meta: BTreeMap::new(), fields: BTreeMap::new() }
    }

    pub fn field(&self, name: &str) -> Result<&FieldRecord> {
        self.fields.get(name).ok_or_else(|| Error::Format(format!("missing field `{name}`")))
    }

    pub fn meta_str(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Format(format!("missing metadata `{key}`")))
    }

    fn expect_format(&self, allowed: &[&str]) -> Result<()> {
        if allowed.contains(&self.format.as_str()) {
            Ok(())
        } else {
            Err(Error::Format(format!("expected a {} file, found `{}`", allowed.join(" or "), self.format)))
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn kind_name(kind: Kind) -> &'static str {
    match kind {
        Kind::Real => "real",
        Kind::Complex => "complex",
    }
}

pub fn parse_kind(s: &str) -> Result<Kind> {
    match s {
        "real" => Ok(Kind::Real),
        "complex" => Ok(Kind::Complex),
        _ => Err(Error::Input(format!("unknown equation kind `{s}`"))),
    }
}

pub fn family_bundle(family: &PhiFamily) -> Bundle {
    let mut b = Bundle::new("family");
    b.meta.insert("kind".into(), kind_name(family.kind).into());
    b.fields.insert("phi0".into(), FieldRecord::scalar(&family.phi0));
    for c in 0..family.phi.dim() {
        b.fields.insert(format!("phi{}", c + 1), FieldRecord::scalar(&family.phi.component(c)));
    }
    b.fields.insert("m".into(), FieldRecord::scalar(&family.m));
    b
}

pub fn family_from_bundle(b: &Bundle) -> Result<PhiFamily> {
    b.expect_format(&["family"])?;
    let mut comps = Vec::new();
    while let Some(r) = b.fields.get(&format!("phi{}", comps.len() + 1)) {
        comps.push(r.to_scalar()?);
    }
    if comps.is_empty() {
        return Err(Error::Format("family has no components phi1, phi2, ...".into()));
    }
    let family = PhiFamily {
        phi0: b.field("phi0")?.to_scalar()?,
        phi: VecField::from_components(&comps)?,
        kind: parse_kind(b.meta_str("kind")?)?,
        m: b.field("m")?.to_scalar()?,
    };
    let grid = family.phi0.grid();
    if family.phi.grid() != grid || family.m.grid() != grid {
        return Err(Error::Format("family fields live on different grids".into()));
    }
    Ok(family)
}

const JET_NAMES: [&str; 6] = ["h", "h_u", "h_v", "h_uu", "h_uv", "h_vv"];
const GAMMA_NAMES: [&str; 6] = ["gamma", "gamma_u", "gamma_v", "gamma_uu", "gamma_uv", "gamma_vv"];

fn jet_kind_name(k: JetKind) -> &'static str {
    match k {
        JetKind::HyperbolicCandidate => "hyperbolic",
        JetKind::EllipticCandidate => "elliptic",
        JetKind::Unknown => "unknown",
    }
}

fn parse_jet_kind(s: &str) -> Result<JetKind> {
    match s {
        "hyperbolic" => Ok(JetKind::HyperbolicCandidate),
        "elliptic" => Ok(JetKind::EllipticCandidate),
        "unknown" => Ok(JetKind::Unknown),
        _ => Err(Error::Format(format!("unknown jet kind `{s}`"))),
    }
}

fn insert_pair(b: &mut Bundle, pair: &GaussPair) {
    let j = &pair.jet;
    for (name, f) in JET_NAMES.iter().zip([&j.h, &j.h_u, &j.h_v, &j.h_uu, &j.h_uv, &j.h_vv]) {
        b.fields.insert(format!("pair.{name}"), FieldRecord::vector(f));
    }
    let gs = [&pair.gamma, &pair.gamma_u, &pair.gamma_v, &pair.gamma_uu, &pair.gamma_uv, &pair.gamma_vv];
    for (name, f) in GAMMA_NAMES.iter().zip(gs) {
        b.fields.insert(format!("pair.{name}"), FieldRecord::scalar(f));
    }
    for (k, xi) in pair.normal_frame.iter().enumerate() {
        b.fields.insert(format!("pair.xi{k}"), FieldRecord::vector(xi));
    }
    b.meta.insert("pair.jet_kind".into(), jet_kind_name(j.kind).into());
    b.meta.insert("pair.normal_frame".into(), pair.normal_frame.len().into());
}

fn read_pair(b: &Bundle) -> Result<Option<GaussPair>> {
    if !b.fields.contains_key("pair.h") {
        return Ok(None);
    }
    let jet_fields = JET_NAMES.map(|n| b.field(&format!("pair.{n}")).and_then(FieldRecord::to_vector));
    let [h, h_u, h_v, h_uu, h_uv, h_vv] = jet_fields;
    let jet = SurfaceJet::from_parts([h?, h_u?, h_v?, h_uu?, h_uv?, h_vv?], parse_jet_kind(b.meta_str("pair.jet_kind")?)?)?;
    let gamma_fields = GAMMA_NAMES.map(|n| b.field(&format!("pair.{n}")).and_then(FieldRecord::to_scalar));
    let [gamma, gamma_u, gamma_v, gamma_uu, gamma_uv, gamma_vv] = gamma_fields;
    let count = b
        .meta
        .get("pair.normal_frame")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Format("missing metadata `pair.normal_frame`".into()))?;
    let normal_frame = (0..count)
        .map(|k| b.field(&format!("pair.xi{k}")).and_then(FieldRecord::to_vector))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(GaussPair {
        jet,
        gamma: gamma?,
        gamma_u: gamma_u?,
        gamma_v: gamma_v?,
        gamma_uu: gamma_uu?,
        gamma_uv: gamma_uv?,
        gamma_vv: gamma_vv?,
        normal_frame,
    }))
}

fn insert_hypersurface(b: &mut Bundle, hyp: &HypersurfaceSample) {
    for (name, f) in [("psi", &hyp.psi), ("psi_u", &hyp.psi_u), ("psi_v", &hyp.psi_v), ("psi_s", &hyp.psi_s), ("normal", &hyp.normal)] {
        b.fields.insert(name.into(), FieldRecord::vector(f));
    }
    b.fields.insert("regular".into(), FieldRecord::mask(&hyp.grid, &hyp.regular));
    if let Some(pw) = &hyp.pw {
        b.fields.insert("pw".into(), FieldRecord::matrices2(&hyp.grid, pw));
    }
    if let Some(pair) = &hyp.pair {
        insert_pair(b, pair);
    }
}

pub fn hypersurface_bundle(hyp: &HypersurfaceSample) -> Bundle {
    let mut b = Bundle::new("hypersurface");
    insert_hypersurface(&mut b, hyp);
    b
}

/// Rebuilds a sample; accepts hypersurface and bending files.
pub fn hypersurface_from_bundle(b: &Bundle) -> Result<HypersurfaceSample> {
    b.expect_format(&["hypersurface", "bending"])?;
    let v = |name: &str| b.field(name).and_then(FieldRecord::to_vector);
    let pw = match b.fields.get("pw") {
        Some(r) => Some(r.to_matrices2()?),
        None => None,
    };
    from_parts(
        v("psi")?,
        [v("psi_u")?, v("psi_v")?, v("psi_s")?],
        v("normal")?,
        b.field("regular")?.to_mask()?,
        pw,
        read_pair(b)?,
    )
}

/// Contents of a bending file.
#[derive(Debug, Clone)]
pub struct BendingFile {
    pub hyp: HypersurfaceSample,
    /// Bending tensor in the chart frame.
    pub b_chart: Option<Vec<Matrix3<f64>>>,
    pub tensors: Option<BendingTensors>,
    /// Displacement field, if one was synthesized or supplied.
    pub t: Option<VecField>,
    /// Ruled-case scalar multiplier.
    pub theta: Option<ScalarField>,
    pub meta: BTreeMap<String, Value>,
}

pub fn bending_bundle(file: &BendingFile) -> Bundle {
    let mut b = Bundle::new("bending");
    insert_hypersurface(&mut b, &file.hyp);
    b.meta.extend(file.meta.clone());
    let grid = &file.hyp.grid;
    if let Some(bc) = &file.b_chart {
        b.fields.insert("bending.b".into(), FieldRecord::matrices3(grid, bc));
    }
    if let Some(t) = &file.tensors {
        for (name, f) in ["l_u", "l_v", "l_s"].iter().zip(&t.l_cols) {
            b.fields.insert(format!("bending.{name}"), FieldRecord::vector(f));
        }
        b.fields.insert("bending.y".into(), FieldRecord::vector(&t.y));
        b.meta.insert("bending.residuals".into(), number_map(&t.residuals));
        b.meta.insert("bending.gates".into(), number_map(&t.gates));
    }
    if let Some(t) = file.t.as_ref().or(file.tensors.as_ref().map(|x| &x.t)) {
        b.fields.insert("bending.t".into(), FieldRecord::vector(t));
    }
    if let Some(theta) = &file.theta {
        b.fields.insert("bending.theta".into(), FieldRecord::scalar(theta));
    }
    b
}

pub fn bending_from_bundle(b: &Bundle) -> Result<BendingFile> {
    b.expect_format(&["bending"])?;
    let hyp = hypersurface_from_bundle(b)?;
    let b_chart = b.fields.get("bending.b").map(FieldRecord::to_matrices3).transpose()?;
    if b_chart.as_ref().is_some_and(|m| m.len() != hyp.len()) {
        return Err(Error::Format("bending tensor and chart differ in size".into()));
    }
    let opt_vec = |name: &str| b.fields.get(name).map(FieldRecord::to_vector).transpose();
    let t = opt_vec("bending.t")?;
    let tensors = match (opt_vec("bending.l_u")?, opt_vec("bending.l_v")?, opt_vec("bending.l_s")?, opt_vec("bending.y")?, &t, &b_chart) {
        (Some(lu), Some(lv), Some(ls), Some(y), Some(t), Some(b_chart)) => {
            let residuals = read_number_map(b, "bending.residuals");
            let gates = read_number_map(b, "bending.gates");
            Some(BendingTensors { b_chart: b_chart.clone(), l_cols: [lu, lv, ls], y, t: t.clone(), residuals, gates })
        }
        _ => None,
    };
    let theta = b.fields.get("bending.theta").map(FieldRecord::to_scalar).transpose()?;
    let meta = b.meta.iter().filter(|(k, _)| !k.starts_with("pair.") && !matches!(k.as_str(), "bending.residuals" | "bending.gates")).map(|(k, v)| (k.clone(), v.clone())).collect();
    Ok(BendingFile { hyp, b_chart, tensors, t, theta, meta })
}

fn number_map(m: &BTreeMap<String, f64>) -> Value {
    Value::Object(m.iter().map(|(k, v)| (k.clone(), (*v).into())).collect())
}

fn read_number_map(b: &Bundle, key: &str) -> BTreeMap<String, f64> {
    b.meta
        .get(key)
        .and_then(Value::as_object)
        .map(|m| m.iter().filter_map(|(k, v)| v.as_f64().map(|x| (k.clone(), x))).collect())
        .unwrap_or_default()
}

/// OBJ text of the `s`-slice `k`: vertices are the chosen ambient
/// coordinates at regular nodes, faces are the grid quads with four regular
/// corners, split into triangles.
pub fn obj_slice(hyp: &HypersurfaceSample, k: usize, coords: [usize; 3]) -> Result<String> {
    let grid = &hyp.grid;
    let (nu, nv) = (grid.n(crate::grid::Dir::U), grid.n(crate::grid::Dir::V));
    if grid.dim() != 3 || k >= grid.n(crate::grid::Dir::S) {
        return Err(Error::Input(format!("slice {k} outside the chart")));
    }
    if coords.iter().any(|&c| c >= hyp.psi.dim()) {
        return Err(Error::Input(format!("coordinate choice {coords:?} outside R^{}", hyp.psi.dim())));
    }
    let mut out = String::new();
    let _ = writeln!(out, "# slice s = {}", grid.point(grid.idx(0, 0, k))[2]);
    let mut vertex = vec![0usize; nu * nv];
    let mut count = 0;
    for j in 0..nv {
        for i in 0..nu {
            let idx = grid.idx(i, j, k);
            if hyp.regular[idx] {
                count += 1;
                vertex[j * nu + i] = count;
                let p = hyp.psi.node(idx);
                let _ = writeln!(out, "v {} {} {}", p[coords[0]], p[coords[1]], p[coords[2]]);
            }
        }
    }
    for j in 0..nv - 1 {
        for i in 0..nu - 1 {
            let q = [vertex[j * nu + i], vertex[j * nu + i + 1], vertex[(j + 1) * nu + i + 1], vertex[(j + 1) * nu + i]];
            if q.iter().all(|&x| x > 0) {
                let _ = writeln!(out, "f {} {} {}", q[0], q[1], q[2]);
                let _ = writeln!(out, "f {} {} {}", q[0], q[2], q[3]);
            }
        }
    }
    Ok(out)
}

/// Writes `slice_<k>.obj` for every fiber index into `dir`.
pub fn write_obj_slices(hyp: &HypersurfaceSample, dir: &Path, coords: [usize; 3]) -> Result<Vec<PathBuf>> {
    let ns = hyp.grid.n(crate::grid::Dir::S);
    let width = ns.to_string().len();
    let mut paths = Vec::with_capacity(ns);
    for k in 0..ns {
        let path = dir.join(format!("slice_{k:0width$}.obj"));
        write_text(&path, &obj_slice(hyp, k, coords)?)?;
        paths.push(path);
    }
    Ok(paths)
}
