//! Closing a delayed plant with a structured controller.
//!
//! The plant
//!
//! ```text
//! E_G x_G' = sum A^i x_G(t - t)  + sum B1^i w(t - t)  + sum B2^i u(t - t)
//!        z = sum C1^i x_G(t - t) + sum D11^i w(t - t) + sum D12^i u(t - t)
//!        y = sum C2^i x_G(t - t) + sum D21^i w(t - t) + sum D22^i u(t - t)
//! ```
//!
//! and the controller
//!
//! ```text
//! x_K' = sum A_K^i x_K(t - t) + sum B_K^i y(t - t)
//!    u = sum C_K^i x_K(t - t) + sum D_K^i y(t - t)
//! ```
//!
//! are stacked into one descriptor system with state
//! `X = [x_G; x_K; u; y; w (optional); z (optional)]`. The last four blocks
//! are algebraic slack variables; they absorb feedthrough and input/output
//! delays so that every controller entry appears linearly in `A_0..A_m`
//! while `B` and `C` stay constant.

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::model::{self, DdaeSystem, DEFAULT_RANK_TOL};

/// One `(delay, matrix)` summand of a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub delay: f64,
    pub matrix: RMat,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelayTermSeries {
    pub terms: Vec<DelayTerm>,
}

impl DelayTermSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(delay: f64, matrix: RMat) -> Self {
        Self {
            terms: vec![DelayTerm { delay, matrix }],
        }
    }

    pub fn with(mut self, delay: f64, matrix: RMat) -> Self {
        self.terms.push(DelayTerm { delay, matrix });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_delayed(&self) -> bool {
        self.terms.iter().any(|t| t.delay != 0.0)
    }

    fn check(&self, name: &str, rows: usize, cols: usize) -> Result<()> {
        let mut seen: Vec<f64> = Vec::new();
        for t in &self.terms {
            if t.matrix.nrows() != rows || t.matrix.ncols() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "{name} term at delay {} is {}x{}, expected {rows}x{cols}",
                    t.delay,
                    t.matrix.nrows(),
                    t.matrix.ncols()
                )));
            }
            if !(t.delay >= 0.0) || !t.delay.is_finite() {
                return Err(Error::InvalidOption(format!(
                    "{name} has invalid delay {}",
                    t.delay
                )));
            }
            if seen.contains(&t.delay) {
                return Err(Error::InvalidOption(format!(
                    "{name} lists delay {} twice",
                    t.delay
                )));
            }
            seen.push(t.delay);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantDims {
    pub n_g: usize,
    pub n_w: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub n_z: usize,
}

/// Plant in delayed state-space form. Absent channels are empty series.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub dims: PlantDims,
    /// Descriptor matrix of the plant state equation; identity when `None`.
    pub e: Option<RMat>,
    pub a: DelayTermSeries,
    pub b1: DelayTermSeries,
    pub b2: DelayTermSeries,
    pub c1: DelayTermSeries,
    pub d11: DelayTermSeries,
    pub d12: DelayTermSeries,
    pub c2: DelayTermSeries,
    pub d21: DelayTermSeries,
    pub d22: DelayTermSeries,
}

impl PlantSpec {
    pub fn new(dims: PlantDims) -> Self {
        Self {
            dims,
            e: None,
            a: DelayTermSeries::new(),
            b1: DelayTermSeries::new(),
            b2: DelayTermSeries::new(),
            c1: DelayTermSeries::new(),
            d11: DelayTermSeries::new(),
            d12: DelayTermSeries::new(),
            c2: DelayTermSeries::new(),
            d21: DelayTermSeries::new(),
            d22: DelayTermSeries::new(),
        }
    }

    pub fn check(&self) -> Result<()> {
        let d = self.dims;
        if let Some(e) = &self.e {
            if e.nrows() != d.n_g || e.ncols() != d.n_g {
                return Err(Error::DimensionMismatch(format!(
                    "plant E is {}x{}, expected {}x{}",
                    e.nrows(),
                    e.ncols(),
                    d.n_g,
                    d.n_g
                )));
            }
        }
        self.a.check("A", d.n_g, d.n_g)?;
        self.b1.check("B1", d.n_g, d.n_w)?;
        self.b2.check("B2", d.n_g, d.n_u)?;
        self.c1.check("C1", d.n_z, d.n_g)?;
        self.d11.check("D11", d.n_z, d.n_w)?;
        self.d12.check("D12", d.n_z, d.n_u)?;
        self.c2.check("C2", d.n_y, d.n_g)?;
        self.d21.check("D21", d.n_y, d.n_w)?;
        self.d22.check("D22", d.n_y, d.n_u)?;
        Ok(())
    }
}

/// Entry of a controller matrix: optimized or held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskEntry {
    Free,
    Frozen(f64),
}

/// A controller term whose entries are either free parameters or frozen values.
/// `values` holds the frozen values and the initial values of free entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateTerm {
    pub delay: f64,
    pub values: RMat,
    /// Row-major, `true` for free entries.
    pub free: Vec<bool>,
}

impl TemplateTerm {
    pub fn all_free(delay: f64, values: RMat) -> Self {
        let free = vec![true; values.nrows() * values.ncols()];
        Self {
            delay,
            values,
            free,
        }
    }

    pub fn all_frozen(delay: f64, values: RMat) -> Self {
        let free = vec![false; values.nrows() * values.ncols()];
        Self {
            delay,
            values,
            free,
        }
    }

    pub fn mask(&self) -> Vec<MaskEntry> {
        let c = self.values.ncols();
        self.free
            .iter()
            .enumerate()
            .map(|(k, &f)| {
                if f {
                    MaskEntry::Free
                } else {
                    MaskEntry::Frozen(self.values[(k / c, k % c)])
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerBlock {
    Ak,
    Bk,
    Ck,
    Dk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerTemplate {
    pub n_k: usize,
    pub ak: Vec<TemplateTerm>,
    pub bk: Vec<TemplateTerm>,
    pub ck: Vec<TemplateTerm>,
    pub dk: Vec<TemplateTerm>,
    /// Overrides the initial values stored in the free entries.
    pub p0: Option<Vec<f64>>,
}

impl ControllerTemplate {
    /// Static gain `u = K y`, every entry free, initialized at `k`.
    pub fn static_gain(k: RMat) -> Self {
        Self {
            n_k: 0,
            ak: Vec::new(),
            bk: Vec::new(),
            ck: Vec::new(),
            dk: vec![TemplateTerm::all_free(0.0, k)],
            p0: None,
        }
    }

    /// Dynamic controller of order `n_k` with undelayed, fully free matrices.
    pub fn dynamic(ak: RMat, bk: RMat, ck: RMat, dk: RMat) -> Self {
        Self {
            n_k: ak.nrows(),
            ak: vec![TemplateTerm::all_free(0.0, ak)],
            bk: vec![TemplateTerm::all_free(0.0, bk)],
            ck: vec![TemplateTerm::all_free(0.0, ck)],
            dk: vec![TemplateTerm::all_free(0.0, dk)],
            p0: None,
        }
    }

    fn series(&self) -> [(ControllerBlock, &Vec<TemplateTerm>); 4] {
        [
            (ControllerBlock::Ak, &self.ak),
            (ControllerBlock::Bk, &self.bk),
            (ControllerBlock::Ck, &self.ck),
            (ControllerBlock::Dk, &self.dk),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.series()
            .iter()
            .flat_map(|(_, s)| s.iter())
            .map(|t| t.free.iter().filter(|&&f| f).count())
            .sum()
    }

    /// Initial parameter vector: `p0` if given, else the stored free values.
    pub fn initial_parameters(&self) -> Vec<f64> {
        if let Some(p) = &self.p0 {
            return p.clone();
        }
        let mut out = Vec::new();
        for (_, series) in self.series() {
            for t in series {
                let c = t.values.ncols();
                for (k, &f) in t.free.iter().enumerate() {
                    if f {
                        out.push(t.values[(k / c, k % c)]);
                    }
                }
            }
        }
        out
    }

    fn check(&self, n_u: usize, n_y: usize) -> Result<()> {
        let nk = self.n_k;
        let shapes = [(nk, nk), (nk, n_y), (n_u, nk), (n_u, n_y)];
        for ((block, series), (r, c)) in self.series().into_iter().zip(shapes) {
            let mut seen = Vec::new();
            for t in series {
                if t.values.nrows() != r || t.values.ncols() != c {
                    return Err(Error::DimensionMismatch(format!(
                        "{block:?} term at delay {} is {}x{}, expected {r}x{c}",
                        t.delay,
                        t.values.nrows(),
                        t.values.ncols()
                    )));
                }
                if t.free.len() != r * c {
                    return Err(Error::DimensionMismatch(format!(
                        "{block:?} mask has {} entries, expected {}",
                        t.free.len(),
                        r * c
                    )));
                }
                if !(t.delay >= 0.0) || !t.delay.is_finite() {
                    return Err(Error::InvalidOption(format!(
                        "{block:?} has invalid delay {}",
                        t.delay
                    )));
                }
                if seen.contains(&t.delay) {
                    return Err(Error::InvalidOption(format!(
                        "{block:?} lists delay {} twice",
                        t.delay
                    )));
                }
                seen.push(t.delay);
            }
        }
        if let Some(p) = &self.p0 {
            if p.len() != self.parameter_count() {
                return Err(Error::DimensionMismatch(format!(
                    "p0 has {} entries, template has {} free parameters",
                    p.len(),
                    self.parameter_count()
                )));
            }
        }
        Ok(())
    }
}

/// Row/column offsets of the blocks of the closed-loop state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlackLayout {
    pub x_g: usize,
    pub x_k: usize,
    pub u: usize,
    pub y: usize,
    /// Offset of the w-slack, if present.
    pub w: Option<usize>,
    /// Offset of the z-slack, if present.
    pub z: Option<usize>,
    pub n: usize,
}

/// Where a parameter lands: `A_delay_index[row, col]` with coefficient one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSlot {
    pub delay_index: usize,
    pub row: usize,
    pub col: usize,
    pub block: ControllerBlock,
}

/// Closed loop whose `A_i` depend affinely on the controller parameters.
#[derive(Debug, Clone)]
pub struct ParamClosedLoop {
    base: DdaeSystem,
    slots: Vec<ParamSlot>,
    p0: Vec<f64>,
    layout: SlackLayout,
}

impl ParamClosedLoop {
    /// Closed loop at `p = 0` (frozen entries in place, free entries zero).
    pub fn base(&self) -> &DdaeSystem {
        &self.base
    }

    pub fn parameter_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    pub fn initial_parameters(&self) -> &[f64] {
        &self.p0
    }

    pub fn layout(&self) -> SlackLayout {
        self.layout
    }

    pub fn delays(&self) -> &[f64] {
        self.base.delays()
    }

    pub fn with_delays(&self, delays: Vec<f64>) -> Result<Self> {
        Ok(Self {
            base: self.base.with_delays(delays)?,
            ..self.clone()
        })
    }
}

fn distinct_delays(all: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = all.filter(|&d| d > 0.0).collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn delay_index(delays: &[f64], d: f64) -> usize {
    if d == 0.0 {
        0
    } else {
        1 + delays.iter().position(|&x| x == d).expect("delay collected")
    }
}

/// Stacks plant and controller into a standard-form closed loop.
pub fn assemble(plant: &PlantSpec, ctrl: &ControllerTemplate) -> Result<ParamClosedLoop> {
    plant.check()?;
    let d = plant.dims;
    ctrl.check(d.n_u, d.n_y)?;

    let b1_direct = !plant.b1.has_delayed();
    let need_w = !plant.d11.is_empty() || !plant.d21.is_empty() || !b1_direct;
    let need_z =
        plant.c1.has_delayed() || plant.d11.has_delayed() || plant.d12.has_delayed();

    let x_k = d.n_g;
    let u = x_k + ctrl.n_k;
    let y = u + d.n_u;
    let mut next = y + d.n_y;
    let w = need_w.then(|| {
        let off = next;
        next += d.n_w;
        off
    });
    let z = need_z.then(|| {
        let off = next;
        next += d.n_z;
        off
    });
    let layout = SlackLayout {
        x_g: 0,
        x_k,
        u,
        y,
        w,
        z,
        n: next,
    };
    let n = layout.n;

    let plant_series = [
        &plant.a, &plant.b1, &plant.b2, &plant.c1, &plant.d11, &plant.d12, &plant.c2, &plant.d21,
        &plant.d22,
    ];
    let delays = distinct_delays(
        plant_series
            .iter()
            .flat_map(|s| s.terms.iter().map(|t| t.delay))
            .chain(
                ctrl.series()
                    .iter()
                    .flat_map(|(_, s)| s.iter().map(|t| t.delay)),
            ),
    );
    let mut a = vec![linalg::zeros(n, n); delays.len() + 1];
    let mut put = |series: &DelayTermSeries, r0: usize, c0: usize| {
        for t in &series.terms {
            linalg::add_block(&mut a[delay_index(&delays, t.delay)], r0, c0, &t.matrix, 1.0);
        }
    };

    // Plant state rows.
    put(&plant.a, 0, 0);
    put(&plant.b2, 0, u);
    if let Some(w) = w {
        if !b1_direct {
            put(&plant.b1, 0, w);
        }
        put(&plant.d21, y, w);
    }
    put(&plant.c2, y, 0);
    put(&plant.d22, y, u);
    if let Some(z) = z {
        put(&plant.c1, z, 0);
        put(&plant.d12, z, u);
        if let Some(w) = w {
            put(&plant.d11, z, w);
        }
    }
    let minus_eye = |a: &mut RMat, off: usize, size: usize| {
        for i in 0..size {
            a[(off + i, off + i)] -= 1.0;
        }
    };
    minus_eye(&mut a[0], u, d.n_u);
    minus_eye(&mut a[0], y, d.n_y);
    if let Some(w) = w {
        minus_eye(&mut a[0], w, d.n_w);
    }
    if let Some(z) = z {
        minus_eye(&mut a[0], z, d.n_z);
    }

    // Controller: frozen values into the base, free entries become slots.
    let mut slots = Vec::new();
    for (block, series) in ctrl.series() {
        let (r0, c0) = match block {
            ControllerBlock::Ak => (x_k, x_k),
            ControllerBlock::Bk => (x_k, y),
            ControllerBlock::Ck => (u, x_k),
            ControllerBlock::Dk => (u, y),
        };
        for t in series {
            let di = delay_index(&delays, t.delay);
            let cols = t.values.ncols();
            for (k, &free) in t.free.iter().enumerate() {
                let (r, c) = (k / cols, k % cols);
                if free {
                    slots.push(ParamSlot {
                        delay_index: di,
                        row: r0 + r,
                        col: c0 + c,
                        block,
                    });
                } else {
                    a[di][(r0 + r, c0 + c)] += t.values[(r, c)];
                }
            }
        }
    }

    let mut e = linalg::zeros(n, n);
    match &plant.e {
        Some(eg) => linalg::set_block(&mut e, 0, 0, eg),
        None => linalg::set_block(&mut e, 0, 0, &linalg::identity(d.n_g)),
    }
    linalg::set_block(&mut e, x_k, x_k, &linalg::identity(ctrl.n_k));

    let mut b = linalg::zeros(n, d.n_w);
    if b1_direct {
        for t in &plant.b1.terms {
            linalg::add_block(&mut b, 0, 0, &t.matrix, 1.0);
        }
    }
    if let Some(w) = w {
        linalg::set_block(&mut b, w, 0, &linalg::identity(d.n_w));
    }

    let mut c = linalg::zeros(d.n_z, n);
    if let Some(z) = z {
        linalg::set_block(&mut c, 0, z, &linalg::identity(d.n_z));
    } else {
        for t in &plant.c1.terms {
            linalg::add_block(&mut c, 0, 0, &t.matrix, 1.0);
        }
        for t in &plant.d12.terms {
            linalg::add_block(&mut c, 0, u, &t.matrix, 1.0);
        }
        if let Some(w) = w {
            for t in &plant.d11.terms {
                linalg::add_block(&mut c, 0, w, &t.matrix, 1.0);
            }
        }
    }

    let base = DdaeSystem::new(e, a, b, c, delays)?;
    let p0 = ctrl.initial_parameters();
    let pcl = ParamClosedLoop {
        base,
        slots,
        p0,
        layout,
    };
    let at_p0 = instantiate(&pcl, &pcl.p0)?;
    match model::validate(&at_p0, DEFAULT_RANK_TOL) {
        Ok(_) => Ok(pcl),
        Err(Error::AssumptionOneViolated {
            sigma_min,
            threshold,
        }) => Err(Error::AlgebraicLoop(format!(
            "U^T A_0 V of the closed loop has smallest singular value {sigma_min:.3e} \
             (threshold {threshold:.3e}); the slack rows for u (offset {}), y (offset {}) \
             cannot be solved for",
            layout.u, layout.y
        ))),
        Err(e) => Err(e),
    }
}

/// Closed-loop system at parameter vector `p`.
pub fn instantiate(pcl: &ParamClosedLoop, p: &[f64]) -> Result<DdaeSystem> {
    if p.len() != pcl.slots.len() {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector has {} entries, expected {}",
            p.len(),
            pcl.slots.len()
        )));
    }
    let mut a = pcl.base.a().to_vec();
    for (s, &v) in pcl.slots.iter().zip(p) {
        a[s.delay_index][(s.row, s.col)] += v;
    }
    DdaeSystem::new(
        pcl.base.e().clone(),
        a,
        pcl.base.b().clone(),
        pcl.base.c().clone(),
        pcl.base.delays().to_vec(),
    )
}

/// `dA_i/dp_k` for `i = 0..=m`.
pub fn parameter_jacobian(pcl: &ParamClosedLoop, k: usize) -> Result<Vec<RMat>> {
    let slot = pcl.slots.get(k).ok_or(Error::IndexOutOfRange {
        index: k,
        len: pcl.slots.len(),
    })?;
    let n = pcl.base.n();
    let mut out = vec![linalg::zeros(n, n); pcl.base.m() + 1];
    out[slot.delay_index][(slot.row, slot.col)] = 1.0;
    Ok(out)
}
