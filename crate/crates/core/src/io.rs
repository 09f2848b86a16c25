//! JSON documents for systems, plants and controller templates, and CSV
//! export of singular-value curves.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::interconnect::{
    ControllerTemplate, DelayTermSeries, PlantDims, PlantSpec, TemplateTerm,
};
use crate::linalg::{self, RMat};
use crate::model::{DdaeSystem, SigmaCurve};

type Rows = Vec<Vec<f64>>;

fn matrix(name: &str, rows: &Rows, r: usize, c: usize) -> Result<RMat> {
    if rows.len() != r {
        return Err(Error::Parse(format!("{name}: expected {r} rows, found {}", rows.len())));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(Error::Parse(format!(
            "{name}: row {i} has {} entries, expected {c}",
            row.len()
        )));
    }
    Ok(linalg::RMat::from_fn(r, c, |i, j| rows[i][j]))
}

/// Column count of a matrix whose row count is known; zero-row matrices
/// report `fallback`.
fn width(rows: &Rows, fallback: usize) -> usize {
    rows.first().map_or(fallback, |r| r.len())
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        Error::Parse(format!(
            "{what}: {e} (line {}, column {})",
            e.line(),
            e.column()
        ))
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub n: usize,
    pub delays: Vec<f64>,
    #[serde(rename = "E")]
    pub e: Rows,
    #[serde(rename = "A")]
    pub a: Vec<Rows>,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
}

impl SystemDoc {
    pub fn from_system(sys: &DdaeSystem) -> Self {
        Self {
            n: sys.n(),
            delays: sys.delays().to_vec(),
            e: linalg::to_rows(sys.e()),
            a: sys.a().iter().map(linalg::to_rows).collect(),
            b: linalg::to_rows(sys.b()),
            c: linalg::to_rows(sys.c()),
        }
    }

    pub fn to_system(&self) -> Result<DdaeSystem> {
        let n = self.n;
        if self.a.len() != self.delays.len() + 1 {
            return Err(Error::Parse(format!(
                "\"A\" holds {} matrices for {} delays (expected {})",
                self.a.len(),
                self.delays.len(),
                self.delays.len() + 1
            )));
        }
        let e = matrix("E", &self.e, n, n)?;
        let a = self
            .a
            .iter()
            .enumerate()
            .map(|(i, m)| matrix(&format!("A[{i}]"), m, n, n))
            .collect::<Result<Vec<_>>>()?;
        let b = matrix("B", &self.b, n, width(&self.b, 0))?;
        let c = matrix("C", &self.c, self.c.len(), width(&self.c, n))?;
        DdaeSystem::new(e, a, b, c, self.delays.clone())
    }
}

pub fn system_from_json(text: &str) -> Result<DdaeSystem> {
    parse_json::<SystemDoc>(text, "system")?.to_system()
}

pub fn system_to_json(sys: &DdaeSystem) -> String {
    serde_json::to_string_pretty(&SystemDoc::from_system(sys)).expect("plain data serializes")
}

pub fn load_system(path: &Path) -> Result<DdaeSystem> {
    system_from_json(&read(path)?)
}

pub fn save_system(path: &Path, sys: &DdaeSystem) -> Result<()> {
    write(path, &system_to_json(sys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDoc {
    pub delay: f64,
    pub matrix: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantDoc {
    pub n_g: usize,
    pub n_w: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub n_z: usize,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Rows>,
    #[serde(rename = "A", default)]
    pub a: Vec<TermDoc>,
    #[serde(rename = "B1", default)]
    pub b1: Vec<TermDoc>,
    #[serde(rename = "B2", default)]
    pub b2: Vec<TermDoc>,
    #[serde(rename = "C1", default)]
    pub c1: Vec<TermDoc>,
    #[serde(rename = "D11", default)]
    pub d11: Vec<TermDoc>,
    #[serde(rename = "D12", default)]
    pub d12: Vec<TermDoc>,
    #[serde(rename = "C2", default)]
    pub c2: Vec<TermDoc>,
    #[serde(rename = "D21", default)]
    pub d21: Vec<TermDoc>,
    #[serde(rename = "D22", default)]
    pub d22: Vec<TermDoc>,
}

fn series(name: &str, terms: &[TermDoc], r: usize, c: usize) -> Result<DelayTermSeries> {
    let mut out = DelayTermSeries::new();
    for t in terms {
        out = out.with(t.delay, matrix(name, &t.matrix, r, c)?);
    }
    Ok(out)
}

fn series_doc(s: &DelayTermSeries) -> Vec<TermDoc> {
    s.terms
        .iter()
        .map(|t| TermDoc {
            delay: t.delay,
            matrix: linalg::to_rows(&t.matrix),
        })
        .collect()
}

impl PlantDoc {
    pub fn from_plant(p: &PlantSpec) -> Self {
        let d = p.dims;
        Self {
            n_g: d.n_g,
            n_w: d.n_w,
            n_u: d.n_u,
            n_y: d.n_y,
            n_z: d.n_z,
            e: p.e.as_ref().map(linalg::to_rows),
            a: series_doc(&p.a),
            b1: series_doc(&p.b1),
            b2: series_doc(&p.b2),
            c1: series_doc(&p.c1),
            d11: series_doc(&p.d11),
            d12: series_doc(&p.d12),
            c2: series_doc(&p.c2),
            d21: series_doc(&p.d21),
            d22: series_doc(&p.d22),
        }
    }

    pub fn to_plant(&self) -> Result<PlantSpec> {
        let dims = PlantDims {
            n_g: self.n_g,
            n_w: self.n_w,
            n_u: self.n_u,
            n_y: self.n_y,
            n_z: self.n_z,
        };
        let (ng, nw, nu, ny, nz) = (self.n_g, self.n_w, self.n_u, self.n_y, self.n_z);
        let mut p = PlantSpec::new(dims);
        p.e = self.e.as_ref().map(|e| matrix("E", e, ng, ng)).transpose()?;
        p.a = series("A", &self.a, ng, ng)?;
        p.b1 = series("B1", &self.b1, ng, nw)?;
        p.b2 = series("B2", &self.b2, ng, nu)?;
        p.c1 = series("C1", &self.c1, nz, ng)?;
        p.d11 = series("D11", &self.d11, nz, nw)?;
        p.d12 = series("D12", &self.d12, nz, nu)?;
        p.c2 = series("C2", &self.c2, ny, ng)?;
        p.d21 = series("D21", &self.d21, ny, nw)?;
        p.d22 = series("D22", &self.d22, ny, nu)?;
        p.check()?;
        Ok(p)
    }
}

pub fn plant_from_json(text: &str) -> Result<PlantSpec> {
    parse_json::<PlantDoc>(text, "plant")?.to_plant()
}

pub fn plant_to_json(p: &PlantSpec) -> String {
    serde_json::to_string_pretty(&PlantDoc::from_plant(p)).expect("plain data serializes")
}

pub fn load_plant(path: &Path) -> Result<PlantSpec> {
    plant_from_json(&read(path)?)
}

/// `"free"` or `{"frozen": value}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskDoc {
    Free,
    Frozen(f64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MaskSet {
    #[serde(rename = "AK", default)]
    pub ak: Vec<Vec<Vec<MaskDoc>>>,
    #[serde(rename = "BK", default)]
    pub bk: Vec<Vec<Vec<MaskDoc>>>,
    #[serde(rename = "CK", default)]
    pub ck: Vec<Vec<Vec<MaskDoc>>>,
    #[serde(rename = "DK", default)]
    pub dk: Vec<Vec<Vec<MaskDoc>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateDoc {
    #[serde(rename = "nK")]
    pub n_k: usize,
    #[serde(rename = "AK", default)]
    pub ak: Vec<TermDoc>,
    #[serde(rename = "BK", default)]
    pub bk: Vec<TermDoc>,
    #[serde(rename = "CK", default)]
    pub ck: Vec<TermDoc>,
    #[serde(rename = "DK", default)]
    pub dk: Vec<TermDoc>,
    /// Parallel to the term arrays; a missing entry means every entry is free.
    #[serde(default)]
    pub mask: MaskSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<f64>>,
}

fn template_terms(
    name: &str,
    terms: &[TermDoc],
    masks: &[Vec<Vec<MaskDoc>>],
    r: usize,
    c: usize,
) -> Result<Vec<TemplateTerm>> {
    if masks.len() > terms.len() {
        return Err(Error::Parse(format!(
            "{name}: {} masks for {} terms",
            masks.len(),
            terms.len()
        )));
    }
    terms
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let mut values = matrix(name, &t.matrix, r, c)?;
            let Some(mask) = masks.get(k) else {
                return Ok(TemplateTerm::all_free(t.delay, values));
            };
            if mask.len() != r || mask.iter().any(|row| row.len() != c) {
                return Err(Error::Parse(format!("{name}: mask {k} is not {r}x{c}")));
            }
            let mut free = Vec::with_capacity(r * c);
            for (i, row) in mask.iter().enumerate() {
                for (j, m) in row.iter().enumerate() {
                    match *m {
                        MaskDoc::Free => free.push(true),
                        MaskDoc::Frozen(v) => {
                            values[(i, j)] = v;
                            free.push(false);
                        }
                    }
                }
            }
            Ok(TemplateTerm {
                delay: t.delay,
                values,
                free,
            })
        })
        .collect()
}

fn template_doc_terms(terms: &[TemplateTerm]) -> (Vec<TermDoc>, Vec<Vec<Vec<MaskDoc>>>) {
    let docs = terms
        .iter()
        .map(|t| TermDoc {
            delay: t.delay,
            matrix: linalg::to_rows(&t.values),
        })
        .collect();
    let masks = terms
        .iter()
        .map(|t| {
            let c = t.values.ncols();
            (0..t.values.nrows())
                .map(|i| {
                    (0..c)
                        .map(|j| {
                            if t.free[i * c + j] {
                                MaskDoc::Free
                            } else {
                                MaskDoc::Frozen(t.values[(i, j)])
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    (docs, masks)
}

impl TemplateDoc {
    pub fn from_template(t: &ControllerTemplate) -> Self {
        let (ak, mak) = template_doc_terms(&t.ak);
        let (bk, mbk) = template_doc_terms(&t.bk);
        let (ck, mck) = template_doc_terms(&t.ck);
        let (dk, mdk) = template_doc_terms(&t.dk);
        Self {
            n_k: t.n_k,
            ak,
            bk,
            ck,
            dk,
            mask: MaskSet {
                ak: mak,
                bk: mbk,
                ck: mck,
                dk: mdk,
            },
            p0: t.p0.clone(),
        }
    }

    /// Needs the plant's `n_u` and `n_y` for the matrix shapes.
    pub fn to_template(&self, n_u: usize, n_y: usize) -> Result<ControllerTemplate> {
        let nk = self.n_k;
        Ok(ControllerTemplate {
            n_k: nk,
            ak: template_terms("AK", &self.ak, &self.mask.ak, nk, nk)?,
            bk: template_terms("BK", &self.bk, &self.mask.bk, nk, n_y)?,
            ck: template_terms("CK", &self.ck, &self.mask.ck, n_u, nk)?,
            dk: template_terms("DK", &self.dk, &self.mask.dk, n_u, n_y)?,
            p0: self.p0.clone(),
        })
    }
}

pub fn template_from_json(text: &str, plant: &PlantSpec) -> Result<ControllerTemplate> {
    parse_json::<TemplateDoc>(text, "controller template")?.to_template(plant.dims.n_u, plant.dims.n_y)
}

pub fn template_to_json(t: &ControllerTemplate) -> String {
    serde_json::to_string_pretty(&TemplateDoc::from_template(t)).expect("plain data serializes")
}

pub fn load_template(path: &Path, plant: &PlantSpec) -> Result<ControllerTemplate> {
    template_from_json(&read(path)?, plant)
}

/// Machine-readable record of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub options: Value,
    pub result: Value,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// `x` with `digits` significant digits, fixed or exponent notation like `%g`.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -4 || exp >= digits as i32 {
        let s = format!("{:.*e}", digits - 1, x);
        trim_exponent_form(&s)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding can carry into a new leading digit (9.99.. -> 10.0..).
        let s = if s.trim_start_matches('-').split('.').next().map_or(0, |d| d.len()) as i32
            > exp + 1
            && decimals > 0
        {
            format!("{x:.prec$}", prec = decimals - 1)
        } else {
            s
        };
        trim_fraction(&s)
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn trim_exponent_form(s: &str) -> String {
    match s.split_once('e') {
        Some((m, e)) => format!("{}e{e}", trim_fraction(m)),
        None => s.to_string(),
    }
}

/// CSV with header `omega,sigma1,...`, 9 significant digits.
pub fn sweep_csv(curve: &SigmaCurve) -> String {
    let k = curve.points.iter().map(|p| p.sigmas.len()).max().unwrap_or(1).max(1);
    let mut out = String::from("omega");
    for i in 1..=k {
        let _ = write!(out, ",sigma{i}");
    }
    out.push('\n');
    for p in &curve.points {
        out.push_str(&format_significant(p.omega, 9));
        for i in 0..k {
            out.push(',');
            if let Some(s) = p.sigmas.get(i) {
                out.push_str(&format_significant(*s, 9));
            }
        }
        out.push('\n');
    }
    out
}

pub fn save_sweep(path: &Path, curve: &SigmaCurve) -> Result<()> {
    write(path, &sweep_csv(curve))
}
