//! Textbook recurrent language models written term by term: one named
//! matrix per weight, inputs as one-hot vectors, dense gradients and plain
//! loops. They share only the scalar kernels (`dot`, `sigmoid`, `softmax`)
//! with the library and add terms in the same order, so results can be
//! compared exactly.

#![allow(dead_code)]

use rrntn::linalg::{dot, sample_uniform, sigmoid, softmax, Matrix, Rng};
use rrntn::mapping::MappingPolicy;
use rrntn::models::{ModelSpec, ParameterSet};

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(rows: usize, cols: usize) -> Mat {
    vec![vec![0.0; cols]; rows]
}

pub fn random(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
    (0..rows)
        .map(|_| sample_uniform(rng, -1.0, 1.0, cols))
        .collect()
}

pub fn random_vec(n: usize, rng: &mut Rng) -> Vec<f64> {
    sample_uniform(rng, -1.0, 1.0, n)
}

fn one_hot(x: u32, v: usize) -> Vec<f64> {
    let mut e = vec![0.0; v];
    e[x as usize] = 1.0;
    e
}

fn matvec(m: &Mat, v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// `g += a bᵀ`
fn outer_add(g: &mut Mat, a: &[f64], b: &[f64]) {
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v += a[i] * b[j];
        }
    }
}

/// `out += mᵀ v`
fn tmatvec_add(out: &mut [f64], m: &Mat, v: &[f64]) {
    for (i, row) in m.iter().enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            *o += v[i] * row[j];
        }
    }
}

fn vec_add(g: &mut [f64], a: &[f64]) {
    for (x, y) in g.iter_mut().zip(a) {
        *x += y;
    }
}

fn to_matrix(m: &Mat) -> Matrix {
    Matrix::from_vec(m.len(), m[0].len(), m.concat()).unwrap()
}

fn transpose(m: &Mat) -> Mat {
    (0..m[0].len())
        .map(|j| m.iter().map(|row| row[j]).collect())
        .collect()
}

fn row_matrix(v: &[f64]) -> Matrix {
    Matrix::from_vec(1, v.len(), v.to_vec()).unwrap()
}

/// Recurrence matrix and bias flattened into one slice row.
fn slice_row(u: &Mat, b: &[f64]) -> Vec<f64> {
    let mut row = u.concat();
    row.extend_from_slice(b);
    row
}

/// Output layer `softmax(W_o h + b_o)`.
#[derive(Clone)]
pub struct Output {
    pub w_o: Mat,
    pub b_o: Vec<f64>,
}

impl Output {
    fn zeros_like(&self) -> Output {
        Output {
            w_o: zeros(self.w_o.len(), self.w_o[0].len()),
            b_o: vec![0.0; self.b_o.len()],
        }
    }

    fn probs(&self, h: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = self
            .w_o
            .iter()
            .zip(&self.b_o)
            .map(|(row, b)| dot(row, h) + b)
            .collect();
        softmax(&z)
    }

    /// Accumulates into `g` and returns dLoss/dh.
    fn backward(&self, g: &mut Output, h: &[f64], probs: &[f64], y: u32) -> Vec<f64> {
        let mut dz = probs.to_vec();
        dz[y as usize] -= 1.0;
        outer_add(&mut g.w_o, &dz, h);
        vec_add(&mut g.b_o, &dz);
        let mut dh = vec![0.0; h.len()];
        tmatvec_add(&mut dh, &self.w_o, &dz);
        dh
    }
}

/// Forward results and gradients of one sequence.
pub struct Run<P> {
    pub losses: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Option<Vec<f64>>,
    pub grads: P,
    pub dh0: Vec<f64>,
    pub dc0: Option<Vec<f64>>,
}

/// `h_t = σ(W_h x_t + U_h h_{t-1} + b_h)`, the classic s-RNN.
#[derive(Clone)]
pub struct Srnn {
    /// H x V
    pub w_h: Mat,
    pub u_h: Mat,
    pub b_h: Vec<f64>,
    pub out: Output,
}

impl Srnn {
    pub fn random(v: usize, h: usize, rng: &mut Rng) -> Self {
        Srnn {
            w_h: random(h, v, rng),
            u_h: random(h, h, rng),
            b_h: random_vec(h, rng),
            out: Output {
                w_o: random(v, h, rng),
                b_o: random_vec(v, rng),
            },
        }
    }

    fn zeros_like(&self) -> Self {
        Srnn {
            w_h: zeros(self.w_h.len(), self.w_h[0].len()),
            u_h: zeros(self.u_h.len(), self.u_h.len()),
            b_h: vec![0.0; self.b_h.len()],
            out: self.out.zeros_like(),
        }
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec::srnn(self.w_h[0].len(), self.w_h.len())
    }

    pub fn to_params(&self) -> ParameterSet {
        let mut p = ParameterSet::zeros(&self.spec()).unwrap();
        p.embedding = to_matrix(&transpose(&self.w_h));
        p.slices = Some(
            Matrix::from_vec(
                1,
                p.slices.as_ref().unwrap().cols(),
                slice_row(&self.u_h, &self.b_h),
            )
            .unwrap(),
        );
        p.output_w = to_matrix(&self.out.w_o);
        p.output_b = row_matrix(&self.out.b_o);
        p
    }

    pub fn run(&self, inputs: &[u32], targets: &[u32], h0: &[f64], dh_end: &[f64]) -> Run<Srnn> {
        let v = self.w_h[0].len();
        let mut hs = vec![h0.to_vec()];
        let mut all_probs = Vec::new();
        let mut losses = Vec::new();
        for (&x, &y) in inputs.iter().zip(targets) {
            let hp = hs.last().unwrap();
            let wx = matvec(&self.w_h, &one_hot(x, v));
            let uh = matvec(&self.u_h, hp);
            let h: Vec<f64> = (0..hp.len())
                .map(|i| sigmoid(wx[i] + uh[i] + self.b_h[i]))
                .collect();
            let probs = self.out.probs(&h);
            losses.push(-probs[y as usize].ln());
            all_probs.push(probs);
            hs.push(h);
        }
        let mut g = self.zeros_like();
        let mut dh_next = dh_end.to_vec();
        for t in (0..inputs.len()).rev() {
            let (h, hp) = (&hs[t + 1], &hs[t]);
            let mut dh = self.out.backward(&mut g.out, h, &all_probs[t], targets[t]);
            vec_add(&mut dh, &dh_next);
            let da: Vec<f64> = dh.iter().zip(h).map(|(d, h)| d * h * (1.0 - h)).collect();
            outer_add(&mut g.w_h, &da, &one_hot(inputs[t], v));
            outer_add(&mut g.u_h, &da, hp);
            vec_add(&mut g.b_h, &da);
            let mut dhp = vec![0.0; h.len()];
            tmatvec_add(&mut dhp, &self.u_h, &da);
            dh_next = dhp;
        }
        Run {
            losses,
            h: hs.pop().unwrap(),
            c: None,
            grads: g,
            dh0: dh_next,
            dc0: None,
        }
    }
}

/// `h_t = σ(W_h x_t + U_h^{i(x_t)} h_{t-1} + b_h)`: one recurrence matrix per
/// word and a single shared bias.
#[derive(Clone)]
pub struct Rntn {
    pub w_h: Mat,
    /// Indexed by word id.
    pub u_h: Vec<Mat>,
    pub b_h: Vec<f64>,
    pub out: Output,
}

impl Rntn {
    pub fn random(v: usize, h: usize, rng: &mut Rng) -> Self {
        Rntn {
            w_h: random(h, v, rng),
            u_h: (0..v).map(|_| random(h, h, rng)).collect(),
            b_h: random_vec(h, rng),
            out: Output {
                w_o: random(v, h, rng),
                b_o: random_vec(v, rng),
            },
        }
    }

    fn zeros_like(&self) -> Self {
        let h = self.b_h.len();
        Rntn {
            w_h: zeros(h, self.w_h[0].len()),
            u_h: vec![zeros(h, h); self.u_h.len()],
            b_h: vec![0.0; h],
            out: self.out.zeros_like(),
        }
    }

    pub fn spec(&self) -> ModelSpec {
        let v = self.w_h[0].len();
        ModelSpec::rrntn(v, self.b_h.len(), MappingPolicy::identity(v))
    }

    /// Every slice carries a copy of the shared bias.
    pub fn to_params(&self) -> ParameterSet {
        let mut p = ParameterSet::zeros(&self.spec()).unwrap();
        p.embedding = to_matrix(&transpose(&self.w_h));
        let rows: Mat = self.u_h.iter().map(|u| slice_row(u, &self.b_h)).collect();
        p.slices = Some(to_matrix(&rows));
        p.output_w = to_matrix(&self.out.w_o);
        p.output_b = row_matrix(&self.out.b_o);
        p
    }

    pub fn run(&self, inputs: &[u32], targets: &[u32], h0: &[f64], dh_end: &[f64]) -> Run<Rntn> {
        let v = self.w_h[0].len();
        let mut hs = vec![h0.to_vec()];
        let mut all_probs = Vec::new();
        let mut losses = Vec::new();
        for (&x, &y) in inputs.iter().zip(targets) {
            let hp = hs.last().unwrap();
            let wx = matvec(&self.w_h, &one_hot(x, v));
            let uh = matvec(&self.u_h[x as usize], hp);
            let h: Vec<f64> = (0..hp.len())
                .map(|i| sigmoid(wx[i] + uh[i] + self.b_h[i]))
                .collect();
            let probs = self.out.probs(&h);
            losses.push(-probs[y as usize].ln());
            all_probs.push(probs);
            hs.push(h);
        }
        let mut g = self.zeros_like();
        let mut dh_next = dh_end.to_vec();
        for t in (0..inputs.len()).rev() {
            let (h, hp, x) = (&hs[t + 1], &hs[t], inputs[t] as usize);
            let mut dh = self.out.backward(&mut g.out, h, &all_probs[t], targets[t]);
            vec_add(&mut dh, &dh_next);
            let da: Vec<f64> = dh.iter().zip(h).map(|(d, h)| d * h * (1.0 - h)).collect();
            outer_add(&mut g.w_h, &da, &one_hot(inputs[t], v));
            outer_add(&mut g.u_h[x], &da, hp);
            vec_add(&mut g.b_h, &da);
            let mut dhp = vec![0.0; h.len()];
            tmatvec_add(&mut dhp, &self.u_h[x], &da);
            dh_next = dhp;
        }
        Run {
            losses,
            h: hs.pop().unwrap(),
            c: None,
            grads: g,
            dh0: dh_next,
            dc0: None,
        }
    }
}

/// Input weights, recurrence and bias of one gate.
#[derive(Clone)]
pub struct Gate {
    /// H x E
    pub w: Mat,
    pub u: Mat,
    pub b: Vec<f64>,
}

impl Gate {
    fn random(h: usize, e: usize, rng: &mut Rng) -> Self {
        Gate {
            w: random(h, e, rng),
            u: random(h, h, rng),
            b: random_vec(h, rng),
        }
    }

    fn zeros_like(&self) -> Self {
        let h = self.b.len();
        Gate {
            w: zeros(h, self.w[0].len()),
            u: zeros(h, h),
            b: vec![0.0; h],
        }
    }

    /// `W x + U h + b` before the nonlinearity.
    fn pre(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let wx = matvec(&self.w, x);
        let uh = matvec(&self.u, h);
        (0..self.b.len())
            .map(|i| wx[i] + uh[i] + self.b[i])
            .collect()
    }
}

/// Gated network pieces shared by the GRU and LSTM references: an
/// embedding `x_t = W_e onehot(w_t)` feeding the gates, and the output layer.
#[derive(Clone)]
pub struct Gated {
    /// E x V
    pub w_e: Mat,
    /// GRU: r, z, candidate. LSTM: f, i, o, candidate.
    pub gates: Vec<Gate>,
    pub out: Output,
}

impl Gated {
    fn random(v: usize, e: usize, h: usize, n: usize, rng: &mut Rng) -> Self {
        Gated {
            w_e: random(e, v, rng),
            gates: (0..n).map(|_| Gate::random(h, e, rng)).collect(),
            out: Output {
                w_o: random(v, h, rng),
                b_o: random_vec(v, rng),
            },
        }
    }

    fn zeros_like(&self) -> Self {
        Gated {
            w_e: zeros(self.w_e.len(), self.w_e[0].len()),
            gates: self.gates.iter().map(Gate::zeros_like).collect(),
            out: self.out.zeros_like(),
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        (self.w_e[0].len(), self.w_e.len(), self.gates[0].b.len())
    }

    /// Gates stacked in order, the last one (candidate) in the slice tensor.
    fn to_params(&self, spec: &ModelSpec) -> ParameterSet {
        let mut p = ParameterSet::zeros(spec).unwrap();
        let n = self.gates.len();
        p.embedding = to_matrix(&transpose(&self.w_e));
        let proj: Mat = self.gates.iter().flat_map(|g| g.w.clone()).collect();
        p.input_proj = Some(to_matrix(&proj));
        let rec: Mat = self.gates[..n - 1]
            .iter()
            .flat_map(|g| g.u.clone())
            .collect();
        p.gate_recurrent = Some(to_matrix(&rec));
        let bias: Vec<f64> = self.gates[..n - 1]
            .iter()
            .flat_map(|g| g.b.clone())
            .collect();
        p.gate_bias = Some(row_matrix(&bias));
        let cand = &self.gates[n - 1];
        p.slices = Some(to_matrix(&vec![slice_row(&cand.u, &cand.b)]));
        p.output_w = to_matrix(&self.out.w_o);
        p.output_b = row_matrix(&self.out.b_o);
        p
    }

    /// Gradient of the embedding output: `Σ_g W_gᵀ a_g` in gate order.
    fn input_grad(&self, g: &mut Gated, x: &[f64], onehot: &[f64], acts: &[&[f64]]) {
        let mut de = vec![0.0; x.len()];
        for (gate, (gg, a)) in self.gates.iter().zip(g.gates.iter_mut().zip(acts)) {
            outer_add(&mut gg.w, a, x);
            tmatvec_add(&mut de, &gate.w, a);
        }
        outer_add(&mut g.w_e, &de, onehot);
    }
}

/// GRU:
/// `r = σ(W_r x + U_r h + b_r)`, `z = σ(W_z x + U_z h + b_z)`,
/// `h~ = tanh(W_h x + U_h (r ⊙ h) + b_h)`, `h' = z ⊙ h + (1 - z) ⊙ h~`.
#[derive(Clone)]
pub struct Gru(pub Gated);

impl Gru {
    pub fn random(v: usize, e: usize, h: usize, rng: &mut Rng) -> Self {
        Gru(Gated::random(v, e, h, 3, rng))
    }

    pub fn spec(&self) -> ModelSpec {
        let (v, e, h) = self.0.dims();
        ModelSpec::gru(v, e, h, MappingPolicy::single())
    }

    pub fn to_params(&self) -> ParameterSet {
        self.0.to_params(&self.spec())
    }

    pub fn run(&self, inputs: &[u32], targets: &[u32], h0: &[f64], dh_end: &[f64]) -> Run<Gru> {
        let m = &self.0;
        let (v, _, hd) = m.dims();
        let [gr, gz, gc] = [&m.gates[0], &m.gates[1], &m.gates[2]];
        struct Step {
            x: Vec<f64>,
            r: Vec<f64>,
            z: Vec<f64>,
            rh: Vec<f64>,
            c: Vec<f64>,
            probs: Vec<f64>,
        }
        let mut hs = vec![h0.to_vec()];
        let mut steps = Vec::new();
        let mut losses = Vec::new();
        for (&w, &y) in inputs.iter().zip(targets) {
            let hp = hs.last().unwrap();
            let x = matvec(&m.w_e, &one_hot(w, v));
            let r: Vec<f64> = gr.pre(&x, hp).into_iter().map(sigmoid).collect();
            let z: Vec<f64> = gz.pre(&x, hp).into_iter().map(sigmoid).collect();
            let rh: Vec<f64> = r.iter().zip(hp).map(|(a, b)| a * b).collect();
            let c: Vec<f64> = gc.pre(&x, &rh).into_iter().map(f64::tanh).collect();
            let h: Vec<f64> = (0..hd)
                .map(|i| z[i] * hp[i] + (1.0 - z[i]) * c[i])
                .collect();
            let probs = m.out.probs(&h);
            losses.push(-probs[y as usize].ln());
            steps.push(Step {
                x,
                r,
                z,
                rh,
                c,
                probs,
            });
            hs.push(h);
        }
        let mut g = m.zeros_like();
        let mut dh_next = dh_end.to_vec();
        for t in (0..inputs.len()).rev() {
            let s = &steps[t];
            let (h, hp) = (&hs[t + 1], &hs[t]);
            let mut dh = m.out.backward(&mut g.out, h, &s.probs, targets[t]);
            vec_add(&mut dh, &dh_next);
            let mut dhp: Vec<f64> = (0..hd).map(|i| dh[i] * s.z[i]).collect();
            let mut a_r = vec![0.0; hd];
            let mut a_z = vec![0.0; hd];
            let mut a_c = vec![0.0; hd];
            for i in 0..hd {
                let dz = dh[i] * (hp[i] - s.c[i]);
                let dc = dh[i] * (1.0 - s.z[i]);
                a_z[i] = dz * s.z[i] * (1.0 - s.z[i]);
                a_c[i] = dc * (1.0 - s.c[i] * s.c[i]);
            }
            outer_add(&mut g.gates[2].u, &a_c, &s.rh);
            vec_add(&mut g.gates[2].b, &a_c);
            let mut drh = vec![0.0; hd];
            tmatvec_add(&mut drh, &gc.u, &a_c);
            for i in 0..hd {
                let dr = drh[i] * hp[i];
                dhp[i] += drh[i] * s.r[i];
                a_r[i] = dr * s.r[i] * (1.0 - s.r[i]);
            }
            m.input_grad(&mut g, &s.x, &one_hot(inputs[t], v), &[&a_r, &a_z, &a_c]);
            for (k, a) in [(0, &a_r), (1, &a_z)] {
                outer_add(&mut g.gates[k].u, a, hp);
                vec_add(&mut g.gates[k].b, a);
            }
            tmatvec_add(&mut dhp, &gr.u, &a_r);
            tmatvec_add(&mut dhp, &gz.u, &a_z);
            dh_next = dhp;
        }
        Run {
            losses,
            h: hs.pop().unwrap(),
            c: None,
            grads: Gru(g),
            dh0: dh_next,
            dc0: None,
        }
    }
}

/// LSTM:
/// `f, i, o = σ(W x + U h + b)` per gate, `c~ = tanh(W_c x + U_c h + b_c)`,
/// `c' = i ⊙ c~ + f ⊙ c`, `h' = o ⊙ tanh(c')`.
#[derive(Clone)]
pub struct Lstm(pub Gated);

impl Lstm {
    pub fn random(v: usize, e: usize, h: usize, rng: &mut Rng) -> Self {
        Lstm(Gated::random(v, e, h, 4, rng))
    }

    pub fn spec(&self) -> ModelSpec {
        let (v, e, h) = self.0.dims();
        ModelSpec::lstm(v, e, h, MappingPolicy::single())
    }

    pub fn to_params(&self) -> ParameterSet {
        self.0.to_params(&self.spec())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn run(
        &self,
        inputs: &[u32],
        targets: &[u32],
        h0: &[f64],
        c0: &[f64],
        dh_end: &[f64],
        dc_end: &[f64],
    ) -> Run<Lstm> {
        let m = &self.0;
        let (v, _, hd) = m.dims();
        let [gf, gi, go, gc] = [&m.gates[0], &m.gates[1], &m.gates[2], &m.gates[3]];
        struct Step {
            x: Vec<f64>,
            f: Vec<f64>,
            i: Vec<f64>,
            o: Vec<f64>,
            cc: Vec<f64>,
            tc: Vec<f64>,
            probs: Vec<f64>,
        }
        let mut hs = vec![h0.to_vec()];
        let mut cs = vec![c0.to_vec()];
        let mut steps = Vec::new();
        let mut losses = Vec::new();
        for (&w, &y) in inputs.iter().zip(targets) {
            let (hp, cp) = (hs.last().unwrap(), cs.last().unwrap());
            let x = matvec(&m.w_e, &one_hot(w, v));
            let f: Vec<f64> = gf.pre(&x, hp).into_iter().map(sigmoid).collect();
            let i: Vec<f64> = gi.pre(&x, hp).into_iter().map(sigmoid).collect();
            let o: Vec<f64> = go.pre(&x, hp).into_iter().map(sigmoid).collect();
            let cc: Vec<f64> = gc.pre(&x, hp).into_iter().map(f64::tanh).collect();
            let c: Vec<f64> = (0..hd).map(|k| i[k] * cc[k] + f[k] * cp[k]).collect();
            let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            let h: Vec<f64> = (0..hd).map(|k| o[k] * tc[k]).collect();
            let probs = m.out.probs(&h);
            losses.push(-probs[y as usize].ln());
            steps.push(Step {
                x,
                f,
                i,
                o,
                cc,
                tc,
                probs,
            });
            hs.push(h);
            cs.push(c);
        }
        let mut g = m.zeros_like();
        let mut dh_next = dh_end.to_vec();
        let mut dc_next = dc_end.to_vec();
        for t in (0..inputs.len()).rev() {
            let s = &steps[t];
            let (h, hp, cp) = (&hs[t + 1], &hs[t], &cs[t]);
            let mut dh = m.out.backward(&mut g.out, h, &s.probs, targets[t]);
            vec_add(&mut dh, &dh_next);
            let mut a = vec![vec![0.0; hd]; 4];
            let mut dcp = vec![0.0; hd];
            for k in 0..hd {
                let d_o = dh[k] * s.tc[k];
                let dc = dc_next[k] + dh[k] * s.o[k] * (1.0 - s.tc[k] * s.tc[k]);
                let d_i = dc * s.cc[k];
                let d_cc = dc * s.i[k];
                let d_f = dc * cp[k];
                dcp[k] = dc * s.f[k];
                a[0][k] = d_f * s.f[k] * (1.0 - s.f[k]);
                a[1][k] = d_i * s.i[k] * (1.0 - s.i[k]);
                a[2][k] = d_o * s.o[k] * (1.0 - s.o[k]);
                a[3][k] = d_cc * (1.0 - s.cc[k] * s.cc[k]);
            }
            outer_add(&mut g.gates[3].u, &a[3], hp);
            vec_add(&mut g.gates[3].b, &a[3]);
            let mut dhp = vec![0.0; hd];
            tmatvec_add(&mut dhp, &gc.u, &a[3]);
            m.input_grad(
                &mut g,
                &s.x,
                &one_hot(inputs[t], v),
                &[&a[0], &a[1], &a[2], &a[3]],
            );
            for (gg, ak) in g.gates.iter_mut().zip(&a).take(3) {
                outer_add(&mut gg.u, ak, hp);
                vec_add(&mut gg.b, ak);
            }
            for (gate, ak) in [gf, gi, go].into_iter().zip(&a) {
                tmatvec_add(&mut dhp, &gate.u, ak);
            }
            dh_next = dhp;
            dc_next = dcp;
        }
        Run {
            losses,
            h: hs.pop().unwrap(),
            c: cs.pop(),
            grads: Lstm(g),
            dh0: dh_next,
            dc0: Some(dc_next),
        }
    }
}

/// Flatten reference gradients into the library's layout, tensor by tensor:
/// `(name, row-major values)`. Embedding and slice tensors come out dense.
pub fn srnn_grads(g: &Srnn) -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("embedding", transpose(&g.w_h).concat()),
        ("slices", slice_row(&g.u_h, &g.b_h)),
        ("output_w", g.out.w_o.concat()),
        ("output_b", g.out.b_o.clone()),
    ]
}

pub fn gated_grads(g: &Gated) -> Vec<(&'static str, Vec<f64>)> {
    let n = g.gates.len();
    let cand = &g.gates[n - 1];
    vec![
        ("embedding", transpose(&g.w_e).concat()),
        (
            "input_proj",
            g.gates.iter().flat_map(|x| x.w.concat()).collect(),
        ),
        (
            "gate_recurrent",
            g.gates[..n - 1].iter().flat_map(|x| x.u.concat()).collect(),
        ),
        (
            "gate_bias",
            g.gates[..n - 1].iter().flat_map(|x| x.b.clone()).collect(),
        ),
        ("slices", slice_row(&cand.u, &cand.b)),
        ("output_w", g.out.w_o.concat()),
        ("output_b", g.out.b_o.clone()),
    ]
}
