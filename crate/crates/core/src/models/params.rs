use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{Family, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::{sample_gaussian, sample_uniform, Matrix, Rng};

/// All trainable arrays of a model.
///
/// Layouts:
/// - `embedding`: one row per word (`V x E`); the input term is a row lookup.
/// - `input_proj`: gated input weights stacked by gate, candidate last
///   (`[r; z; h~]` for GRU, `[f; i; o; c~]` for LSTM), `G*H x E`.
/// - `gate_recurrent` / `gate_bias`: recurrence and bias of the non-candidate gates.
/// - `slices`: one row per slice holding the `H x H` recurrence matrix
///   followed by its `H` bias entries.
/// - m-RNN: `factor_left` (`H x F`), `factor_right` (`F x H`),
///   `factor_table` (one factor vector per word, `V x F`) and `hidden_bias`.
/// - `output_w` (`V x H`) and `output_b` (`1 x V`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub embedding: Matrix,
    pub input_proj: Option<Matrix>,
    pub gate_recurrent: Option<Matrix>,
    pub gate_bias: Option<Matrix>,
    pub slices: Option<Matrix>,
    pub factor_left: Option<Matrix>,
    pub factor_right: Option<Matrix>,
    pub factor_table: Option<Matrix>,
    pub hidden_bias: Option<Matrix>,
    pub output_w: Matrix,
    pub output_b: Matrix,
}

impl ParameterSet {
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let (v, e, h) = (spec.vocab, spec.embed, spec.hidden);
        let gated = spec.family.is_gated();
        let g = spec.family.gate_rows();
        let mrnn = spec.family == Family::Mrnn;
        let f = spec.factor;
        Ok(ParameterSet {
            embedding: Matrix::zeros(v, e),
            input_proj: gated.then(|| Matrix::zeros(g * h, e)),
            gate_recurrent: gated.then(|| Matrix::zeros((g - 1) * h, h)),
            gate_bias: gated.then(|| Matrix::zeros(1, (g - 1) * h)),
            slices: (!mrnn).then(|| Matrix::zeros(spec.policy.k, h * h + h)),
            factor_left: mrnn.then(|| Matrix::zeros(h, f)),
            factor_right: mrnn.then(|| Matrix::zeros(f, h)),
            factor_table: mrnn.then(|| Matrix::zeros(v, f)),
            hidden_bias: mrnn.then(|| Matrix::zeros(1, h)),
            output_w: Matrix::zeros(v, h),
            output_b: Matrix::zeros(1, v),
        })
    }

    /// Present tensors in declared (checkpoint) order.
    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        let mut out = vec![("embedding", &self.embedding)];
        let optional = [
            ("input_proj", &self.input_proj),
            ("gate_recurrent", &self.gate_recurrent),
            ("gate_bias", &self.gate_bias),
            ("slices", &self.slices),
            ("factor_left", &self.factor_left),
            ("factor_right", &self.factor_right),
            ("factor_table", &self.factor_table),
            ("hidden_bias", &self.hidden_bias),
        ];
        out.extend(
            optional
                .into_iter()
                .filter_map(|(n, m)| m.as_ref().map(|m| (n, m))),
        );
        out.push(("output_w", &self.output_w));
        out.push(("output_b", &self.output_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        let mut out = vec![("embedding", &mut self.embedding)];
        let optional = [
            ("input_proj", &mut self.input_proj),
            ("gate_recurrent", &mut self.gate_recurrent),
            ("gate_bias", &mut self.gate_bias),
            ("slices", &mut self.slices),
            ("factor_left", &mut self.factor_left),
            ("factor_right", &mut self.factor_right),
            ("factor_table", &mut self.factor_table),
            ("hidden_bias", &mut self.hidden_bias),
        ];
        out.extend(
            optional
                .into_iter()
                .filter_map(|(n, m)| m.as_mut().map(|m| (n, m))),
        );
        out.push(("output_w", &mut self.output_w));
        out.push(("output_b", &mut self.output_b));
        out
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.is_finite())
    }

    /// Slice `s` of the recurrence tensor as (matrix, bias).
    pub fn slice(&self, s: usize, hidden: usize) -> (&[f64], &[f64]) {
        let row = self
            .slices
            .as_ref()
            .expect("model has no slice tensor")
            .row(s);
        row.split_at(hidden * hidden)
    }

    fn zero_biases(&mut self, hidden: usize) {
        for m in [&mut self.gate_bias, &mut self.hidden_bias]
            .into_iter()
            .flatten()
        {
            m.data_mut().fill(0.0);
        }
        self.output_b.data_mut().fill(0.0);
        if let Some(s) = &mut self.slices {
            for r in 0..s.rows() {
                s.row_mut(r)[hidden * hidden..].fill(0.0);
            }
        }
    }
}

/// Weight initialisation scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Gaussian { stddev: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Init::Gaussian { stddev } => write!(f, "gaussian({stddev})"),
            Init::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
        }
    }
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(vec![format!(
                "bad init {s:?}; expected gaussian(stddev) or uniform(lo,hi)"
            )])
        };
        let s = s.trim();
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args: Vec<f64> = rest
            .strip_suffix(')')
            .ok_or_else(bad)?
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (name.trim(), args.as_slice()) {
            ("gaussian", [sd]) if *sd >= 0.0 => Ok(Init::Gaussian { stddev: *sd }),
            ("uniform", [lo, hi]) if lo <= hi => Ok(Init::Uniform { lo: *lo, hi: *hi }),
            _ => Err(bad()),
        }
    }
}

/// Draw every tensor in declared order. Biases use the same scheme as the
/// weights unless `zero_bias` is set.
pub fn init_params(
    spec: &ModelSpec,
    init: Init,
    zero_bias: bool,
    rng: &mut Rng,
) -> Result<ParameterSet> {
    let mut p = ParameterSet::zeros(spec)?;
    for (_, m) in p.tensors_mut() {
        let n = m.len();
        let draws = match init {
            Init::Gaussian { stddev } => sample_gaussian(rng, 0.0, stddev, n),
            Init::Uniform { lo, hi } => sample_uniform(rng, lo, hi, n),
        };
        m.data_mut().copy_from_slice(&draws);
    }
    if zero_bias {
        p.zero_biases(spec.hidden);
    }
    Ok(p)
}

/// Gradient rows that only materialise when touched.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RowGrad {
    cols: usize,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl RowGrad {
    pub fn new(cols: usize) -> Self {
        RowGrad {
            cols,
            rows: BTreeMap::new(),
        }
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let cols = self.cols;
        self.rows.entry(r).or_insert_with(|| vec![0.0; cols])
    }

    pub fn row(&self, r: usize) -> Option<&[f64]> {
        self.rows.get(&r).map(|v| v.as_slice())
    }

    pub fn touched(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows.iter().map(|(r, v)| (*r, v.as_slice()))
    }

    fn add(&mut self, other: &RowGrad) {
        for (r, v) in &other.rows {
            for (a, b) in self.row_mut(*r).iter_mut().zip(v) {
                *a += b;
            }
        }
    }

    fn get(&self, flat: usize) -> f64 {
        self.rows
            .get(&(flat / self.cols))
            .map_or(0.0, |row| row[flat % self.cols])
    }
}

/// Gradients with the same layout as [`ParameterSet`]. Embedding rows,
/// slice rows and m-RNN factor rows are sparse: only rows selected during
/// the forward pass exist.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: RowGrad,
    pub input_proj: Option<Matrix>,
    pub gate_recurrent: Option<Matrix>,
    pub gate_bias: Option<Matrix>,
    pub slices: Option<RowGrad>,
    pub factor_left: Option<Matrix>,
    pub factor_right: Option<Matrix>,
    pub factor_table: Option<RowGrad>,
    pub hidden_bias: Option<Matrix>,
    pub output_w: Matrix,
    pub output_b: Matrix,
}

enum GradView<'a> {
    Dense(&'a Matrix),
    Rows(&'a RowGrad),
}

impl Gradients {
    pub fn zeros(params: &ParameterSet) -> Self {
        let dense = |m: &Option<Matrix>| m.as_ref().map(|m| Matrix::zeros(m.rows(), m.cols()));
        let rows = |m: &Option<Matrix>| m.as_ref().map(|m| RowGrad::new(m.cols()));
        Gradients {
            embedding: RowGrad::new(params.embedding.cols()),
            input_proj: dense(&params.input_proj),
            gate_recurrent: dense(&params.gate_recurrent),
            gate_bias: dense(&params.gate_bias),
            slices: rows(&params.slices),
            factor_left: dense(&params.factor_left),
            factor_right: dense(&params.factor_right),
            factor_table: rows(&params.factor_table),
            hidden_bias: dense(&params.hidden_bias),
            output_w: Matrix::zeros(params.output_w.rows(), params.output_w.cols()),
            output_b: Matrix::zeros(1, params.output_b.cols()),
        }
    }

    fn views(&self) -> Vec<(&'static str, GradView<'_>)> {
        fn dense<'a>(
            n: &'static str,
            m: &'a Option<Matrix>,
        ) -> Option<(&'static str, GradView<'a>)> {
            m.as_ref().map(|m| (n, GradView::Dense(m)))
        }
        let mut out = vec![("embedding", GradView::Rows(&self.embedding))];
        out.extend(dense("input_proj", &self.input_proj));
        out.extend(dense("gate_recurrent", &self.gate_recurrent));
        out.extend(dense("gate_bias", &self.gate_bias));
        out.extend(self.slices.as_ref().map(|r| ("slices", GradView::Rows(r))));
        out.extend(dense("factor_left", &self.factor_left));
        out.extend(dense("factor_right", &self.factor_right));
        out.extend(
            self.factor_table
                .as_ref()
                .map(|r| ("factor_table", GradView::Rows(r))),
        );
        out.extend(dense("hidden_bias", &self.hidden_bias));
        out.push(("output_w", GradView::Dense(&self.output_w)));
        out.push(("output_b", GradView::Dense(&self.output_b)));
        out
    }

    /// Every stored gradient array, for norms and rescaling.
    pub fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.extend(self.embedding.rows.values_mut().map(|v| v.as_mut_slice()));
        for m in [
            &mut self.input_proj,
            &mut self.gate_recurrent,
            &mut self.gate_bias,
            &mut self.factor_left,
            &mut self.factor_right,
            &mut self.hidden_bias,
        ]
        .into_iter()
        .flatten()
        {
            out.push(m.data_mut());
        }
        for r in [&mut self.slices, &mut self.factor_table]
            .into_iter()
            .flatten()
        {
            out.extend(r.rows.values_mut().map(|v| v.as_mut_slice()));
        }
        out.push(self.output_w.data_mut());
        out.push(self.output_b.data_mut());
        out
    }

    pub fn norm(&mut self) -> f64 {
        crate::linalg::global_norm(self.arrays_mut().into_iter().map(|a| &*a))
    }

    pub fn scale(&mut self, factor: f64) {
        for a in self.arrays_mut() {
            for v in a.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        self.embedding.add(&other.embedding);
        let pairs = [
            (&mut self.input_proj, &other.input_proj),
            (&mut self.gate_recurrent, &other.gate_recurrent),
            (&mut self.gate_bias, &other.gate_bias),
            (&mut self.factor_left, &other.factor_left),
            (&mut self.factor_right, &other.factor_right),
            (&mut self.hidden_bias, &other.hidden_bias),
        ];
        for (a, b) in pairs {
            if let (Some(a), Some(b)) = (a, b) {
                add_dense(a, b);
            }
        }
        for (a, b) in [
            (&mut self.slices, &other.slices),
            (&mut self.factor_table, &other.factor_table),
        ] {
            if let (Some(a), Some(b)) = (a, b) {
                a.add(b);
            }
        }
        add_dense(&mut self.output_w, &other.output_w);
        add_dense(&mut self.output_b, &other.output_b);
    }

    /// Gradient entry by tensor name and flat row-major index (0 for untouched rows).
    pub fn get(&self, tensor: &str, flat: usize) -> Option<f64> {
        self.views()
            .into_iter()
            .find(|(n, _)| *n == tensor)
            .map(|(_, v)| match v {
                GradView::Dense(m) => m.data()[flat],
                GradView::Rows(r) => r.get(flat),
            })
    }

    /// `p <- p - lr * g` for every stored gradient entry.
    pub fn apply_to(&self, params: &mut ParameterSet, lr: f64) {
        for ((name, view), (pname, m)) in self.views().into_iter().zip(params.tensors_mut()) {
            debug_assert_eq!(name, pname);
            match view {
                GradView::Dense(g) => {
                    for (p, g) in m.data_mut().iter_mut().zip(g.data()) {
                        *p -= lr * g;
                    }
                }
                GradView::Rows(rg) => {
                    for (r, g) in rg.iter() {
                        for (p, g) in m.row_mut(r).iter_mut().zip(g) {
                            *p -= lr * g;
                        }
                    }
                }
            }
        }
    }
}

fn add_dense(a: &mut Matrix, b: &Matrix) {
    for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
        *x += y;
    }
}
