//! Single-timestep cells and the output layer, with their local backward passes.
//!
//! Pre-activations are always summed as `(input term + recurrent term) + bias`
//! so the K = 1 configurations reproduce the textbook cells bit for bit.

use super::chunk::State;
use super::params::Gradients;
use super::{Family, ModelSpec, ParameterSet};
use crate::linalg::{add_matvec_t, add_outer, dot, matvec_rows, sigmoid, softmax_in_place};

/// Dropout masks for one step; `None` means no dropout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepMasks {
    /// On the embedding output (gated families only).
    pub embed: Option<Vec<f64>>,
    /// On `h_t` as it enters the output layer.
    pub output: Option<Vec<f64>>,
}

/// Intermediate values a cell keeps for its backward pass.
#[derive(Debug, Clone, PartialEq)]
pub enum CellCache {
    Simple,
    Factored {
        /// `U_rh h_prev`
        right: Vec<f64>,
        /// `v_x ⊙ right`
        scaled: Vec<f64>,
    },
    Gru {
        input: Vec<f64>,
        /// `[r; z]`
        gates: Vec<f64>,
        /// `r ⊙ h_prev`
        reset_prev: Vec<f64>,
        candidate: Vec<f64>,
    },
    Lstm {
        input: Vec<f64>,
        /// `[f; i; o]`
        gates: Vec<f64>,
        candidate: Vec<f64>,
        tanh_cell: Vec<f64>,
    },
}

fn slice_of(spec: &ModelSpec, x: u32) -> usize {
    spec.policy.slice_of_id(x)
}

/// `h = σ(W_emb[x] + U_s h_prev + b_s)` with `s = policy(rank(x))`.
pub fn rrntn_step(
    params: &ParameterSet,
    spec: &ModelSpec,
    x: u32,
    h_prev: &[f64],
) -> (Vec<f64>, CellCache) {
    let h = spec.hidden;
    let (u, b) = params.slice(slice_of(spec, x), h);
    let emb = params.embedding.row(x as usize);
    let out = (0..h)
        .map(|i| sigmoid(emb[i] + dot(&u[i * h..(i + 1) * h], h_prev) + b[i]))
        .collect();
    (out, CellCache::Simple)
}

/// `h = σ(W_emb[x] + U_lh (v_x ⊙ (U_rh h_prev)) + b)`.
pub fn mrnn_step(
    params: &ParameterSet,
    spec: &ModelSpec,
    x: u32,
    h_prev: &[f64],
) -> (Vec<f64>, CellCache) {
    let (h, f) = (spec.hidden, spec.factor);
    let left = params.factor_left.as_ref().expect("m-RNN parameters");
    let right_m = params.factor_right.as_ref().expect("m-RNN parameters");
    let v = params
        .factor_table
        .as_ref()
        .expect("m-RNN parameters")
        .row(x as usize);
    let b = params
        .hidden_bias
        .as_ref()
        .expect("m-RNN parameters")
        .data();
    let right = matvec_rows(right_m.data(), h, h_prev);
    let scaled: Vec<f64> = v.iter().zip(&right).map(|(a, b)| a * b).collect();
    let emb = params.embedding.row(x as usize);
    let out = (0..h)
        .map(|i| sigmoid(emb[i] + dot(left.row(i), &scaled) + b[i]))
        .collect();
    debug_assert_eq!(scaled.len(), f);
    (out, CellCache::Factored { right, scaled })
}

fn gated_input(params: &ParameterSet, x: u32, mask: Option<&[f64]>) -> Vec<f64> {
    let row = params.embedding.row(x as usize);
    match mask {
        Some(m) => row.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => row.to_vec(),
    }
}

/// GRU step; the candidate recurrence and bias come from slice `policy(rank(x))`.
pub fn gru_step(
    params: &ParameterSet,
    spec: &ModelSpec,
    x: u32,
    h_prev: &[f64],
    embed_mask: Option<&[f64]>,
) -> (Vec<f64>, CellCache) {
    let h = spec.hidden;
    let input = gated_input(params, x, embed_mask);
    let proj = params.input_proj.as_ref().expect("gated parameters");
    let rec = params.gate_recurrent.as_ref().expect("gated parameters");
    let bias = params.gate_bias.as_ref().expect("gated parameters").data();
    let pre_in = matvec_rows(proj.data(), spec.embed, &input);
    let pre_rec = matvec_rows(rec.data(), h, h_prev);
    let gates: Vec<f64> = (0..2 * h)
        .map(|j| sigmoid(pre_in[j] + pre_rec[j] + bias[j]))
        .collect();
    let (r, z) = gates.split_at(h);
    let reset_prev: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let (u, b) = params.slice(slice_of(spec, x), h);
    let candidate: Vec<f64> = (0..h)
        .map(|i| (pre_in[2 * h + i] + dot(&u[i * h..(i + 1) * h], &reset_prev) + b[i]).tanh())
        .collect();
    let out = (0..h)
        .map(|i| z[i] * h_prev[i] + (1.0 - z[i]) * candidate[i])
        .collect();
    (
        out,
        CellCache::Gru {
            input,
            gates,
            reset_prev,
            candidate,
        },
    )
}

/// LSTM step; the candidate cell recurrence and bias come from slice `policy(rank(x))`.
pub fn lstm_step(
    params: &ParameterSet,
    spec: &ModelSpec,
    x: u32,
    h_prev: &[f64],
    c_prev: &[f64],
    embed_mask: Option<&[f64]>,
) -> (Vec<f64>, Vec<f64>, CellCache) {
    let h = spec.hidden;
    let input = gated_input(params, x, embed_mask);
    let proj = params.input_proj.as_ref().expect("gated parameters");
    let rec = params.gate_recurrent.as_ref().expect("gated parameters");
    let bias = params.gate_bias.as_ref().expect("gated parameters").data();
    let pre_in = matvec_rows(proj.data(), spec.embed, &input);
    let pre_rec = matvec_rows(rec.data(), h, h_prev);
    let gates: Vec<f64> = (0..3 * h)
        .map(|j| sigmoid(pre_in[j] + pre_rec[j] + bias[j]))
        .collect();
    let (fg, rest) = gates.split_at(h);
    let (ig, og) = rest.split_at(h);
    let (u, b) = params.slice(slice_of(spec, x), h);
    let candidate: Vec<f64> = (0..h)
        .map(|i| (pre_in[3 * h + i] + dot(&u[i * h..(i + 1) * h], h_prev) + b[i]).tanh())
        .collect();
    let cell: Vec<f64> = (0..h)
        .map(|i| ig[i] * candidate[i] + fg[i] * c_prev[i])
        .collect();
    let tanh_cell: Vec<f64> = cell.iter().map(|c| c.tanh()).collect();
    let out = (0..h).map(|i| og[i] * tanh_cell[i]).collect();
    (
        out,
        cell,
        CellCache::Lstm {
            input,
            gates,
            candidate,
            tanh_cell,
        },
    )
}

/// One recurrent step for any family.
pub fn step(
    params: &ParameterSet,
    spec: &ModelSpec,
    x: u32,
    state: &State,
    embed_mask: Option<&[f64]>,
) -> (State, CellCache) {
    match spec.family {
        Family::Rrntn => {
            let (h, cache) = rrntn_step(params, spec, x, &state.h);
            (State { h, c: None }, cache)
        }
        Family::Mrnn => {
            let (h, cache) = mrnn_step(params, spec, x, &state.h);
            (State { h, c: None }, cache)
        }
        Family::Gru => {
            let (h, cache) = gru_step(params, spec, x, &state.h, embed_mask);
            (State { h, c: None }, cache)
        }
        Family::Lstm => {
            let c_prev = state.c.as_deref().expect("LSTM state carries a cell");
            let (h, c, cache) = lstm_step(params, spec, x, &state.h, c_prev, embed_mask);
            (State { h, c: Some(c) }, cache)
        }
    }
}

/// `softmax(W_out (mask ⊙ h) + b_out)`.
pub fn output_distribution(params: &ParameterSet, h: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
    let input = masked(h, mask);
    let mut z = output_logits(params, &input);
    softmax_in_place(&mut z);
    z
}

pub(crate) fn masked(h: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
    match mask {
        Some(m) => h.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => h.to_vec(),
    }
}

pub(crate) fn output_logits(params: &ParameterSet, input: &[f64]) -> Vec<f64> {
    let b = params.output_b.data();
    params
        .output_w
        .data()
        .chunks_exact(input.len())
        .zip(b)
        .map(|(row, bias)| dot(row, input) + bias)
        .collect()
}

/// Accumulate output-layer gradients for one prediction; returns dLoss/dh.
pub(crate) fn output_backward(
    params: &ParameterSet,
    out_input: &[f64],
    out_mask: Option<&[f64]>,
    probs: &[f64],
    target: u32,
    grads: &mut Gradients,
) -> Vec<f64> {
    let mut dz = probs.to_vec();
    dz[target as usize] -= 1.0;
    add_outer(grads.output_w.data_mut(), &dz, out_input);
    for (g, d) in grads.output_b.data_mut().iter_mut().zip(&dz) {
        *g += d;
    }
    let mut dh = vec![0.0; out_input.len()];
    add_matvec_t(params.output_w.data(), out_input.len(), &dz, &mut dh);
    if let Some(m) = out_mask {
        for (d, m) in dh.iter_mut().zip(m) {
            *d *= m;
        }
    }
    dh
}

/// Everything a cell's backward pass needs from the forward step.
pub(crate) struct CellInputs<'a> {
    pub x: u32,
    pub h_prev: &'a [f64],
    pub c_prev: Option<&'a [f64]>,
    pub h: &'a [f64],
    pub embed_mask: Option<&'a [f64]>,
    pub cache: &'a CellCache,
}

/// Local backward pass of one cell. `dh` and `dc` are the total gradients
/// reaching `h_t` and `c_t`; returns the gradients for `h_{t-1}` and `c_{t-1}`.
pub(crate) fn cell_backward(
    params: &ParameterSet,
    spec: &ModelSpec,
    step: CellInputs<'_>,
    dh: &[f64],
    dc: Option<&[f64]>,
    grads: &mut Gradients,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let hd = spec.hidden;
    let slice = slice_of(spec, step.x);
    match step.cache {
        CellCache::Simple => {
            let da: Vec<f64> = dh
                .iter()
                .zip(step.h)
                .map(|(d, h)| d * h * (1.0 - h))
                .collect();
            add_into(grads.embedding.row_mut(step.x as usize), &da);
            let srow = grads.slices.as_mut().expect("slice grads").row_mut(slice);
            let (gu, gb) = srow.split_at_mut(hd * hd);
            add_outer(gu, &da, step.h_prev);
            add_into(gb, &da);
            let (u, _) = params.slice(slice, hd);
            let mut dh_prev = vec![0.0; hd];
            add_matvec_t(u, hd, &da, &mut dh_prev);
            (dh_prev, None)
        }
        CellCache::Factored { right, scaled } => {
            let f = spec.factor;
            let da: Vec<f64> = dh
                .iter()
                .zip(step.h)
                .map(|(d, h)| d * h * (1.0 - h))
                .collect();
            add_into(grads.embedding.row_mut(step.x as usize), &da);
            add_into(
                grads.hidden_bias.as_mut().expect("m-RNN grads").data_mut(),
                &da,
            );
            add_outer(
                grads.factor_left.as_mut().expect("m-RNN grads").data_mut(),
                &da,
                scaled,
            );
            let left = params.factor_left.as_ref().expect("m-RNN parameters");
            let mut d_scaled = vec![0.0; f];
            add_matvec_t(left.data(), f, &da, &mut d_scaled);
            let v = params
                .factor_table
                .as_ref()
                .expect("m-RNN parameters")
                .row(step.x as usize);
            let dv: Vec<f64> = d_scaled.iter().zip(right).map(|(a, b)| a * b).collect();
            add_into(
                grads
                    .factor_table
                    .as_mut()
                    .expect("m-RNN grads")
                    .row_mut(step.x as usize),
                &dv,
            );
            let d_right: Vec<f64> = d_scaled.iter().zip(v).map(|(a, b)| a * b).collect();
            add_outer(
                grads.factor_right.as_mut().expect("m-RNN grads").data_mut(),
                &d_right,
                step.h_prev,
            );
            let mut dh_prev = vec![0.0; hd];
            add_matvec_t(
                params
                    .factor_right
                    .as_ref()
                    .expect("m-RNN parameters")
                    .data(),
                hd,
                &d_right,
                &mut dh_prev,
            );
            (dh_prev, None)
        }
        CellCache::Gru {
            input,
            gates,
            reset_prev,
            candidate,
        } => {
            let (r, z) = gates.split_at(hd);
            let h_prev = step.h_prev;
            // d_pre stacks [da_r; da_z; da_cand] to match the input projection rows
            let mut d_pre = vec![0.0; 3 * hd];
            let mut dh_prev: Vec<f64> = dh.iter().zip(z).map(|(d, z)| d * z).collect();
            for i in 0..hd {
                let dz = dh[i] * (h_prev[i] - candidate[i]);
                let dcand = dh[i] * (1.0 - z[i]);
                d_pre[hd + i] = dz * z[i] * (1.0 - z[i]);
                d_pre[2 * hd + i] = dcand * (1.0 - candidate[i] * candidate[i]);
            }
            let da_c = &d_pre[2 * hd..];
            let srow = grads.slices.as_mut().expect("slice grads").row_mut(slice);
            let (gu, gb) = srow.split_at_mut(hd * hd);
            add_outer(gu, da_c, reset_prev);
            add_into(gb, da_c);
            let (u, _) = params.slice(slice, hd);
            let mut d_reset_prev = vec![0.0; hd];
            add_matvec_t(u, hd, da_c, &mut d_reset_prev);
            for i in 0..hd {
                let dr = d_reset_prev[i] * h_prev[i];
                dh_prev[i] += d_reset_prev[i] * r[i];
                d_pre[i] = dr * r[i] * (1.0 - r[i]);
            }
            gated_shared_backward(params, spec, &step, input, &d_pre, 2, &mut dh_prev, grads);
            (dh_prev, None)
        }
        CellCache::Lstm {
            input,
            gates,
            candidate,
            tanh_cell,
        } => {
            let (fg, rest) = gates.split_at(hd);
            let (ig, og) = rest.split_at(hd);
            let c_prev = step.c_prev.expect("LSTM cell state");
            let dc_next = dc.expect("LSTM cell gradient");
            let mut d_pre = vec![0.0; 4 * hd];
            let mut dc_prev = vec![0.0; hd];
            for i in 0..hd {
                let d_o = dh[i] * tanh_cell[i];
                let dcell = dc_next[i] + dh[i] * og[i] * (1.0 - tanh_cell[i] * tanh_cell[i]);
                let d_i = dcell * candidate[i];
                let d_cand = dcell * ig[i];
                let d_f = dcell * c_prev[i];
                dc_prev[i] = dcell * fg[i];
                d_pre[i] = d_f * fg[i] * (1.0 - fg[i]);
                d_pre[hd + i] = d_i * ig[i] * (1.0 - ig[i]);
                d_pre[2 * hd + i] = d_o * og[i] * (1.0 - og[i]);
                d_pre[3 * hd + i] = d_cand * (1.0 - candidate[i] * candidate[i]);
            }
            let da_c = &d_pre[3 * hd..];
            let srow = grads.slices.as_mut().expect("slice grads").row_mut(slice);
            let (gu, gb) = srow.split_at_mut(hd * hd);
            add_outer(gu, da_c, step.h_prev);
            add_into(gb, da_c);
            let (u, _) = params.slice(slice, hd);
            let mut dh_prev = vec![0.0; hd];
            add_matvec_t(u, hd, da_c, &mut dh_prev);
            gated_shared_backward(params, spec, &step, input, &d_pre, 3, &mut dh_prev, grads);
            (dh_prev, Some(dc_prev))
        }
    }
}

/// Gradients of the shared gate weights, the input projection and the
/// embedding row. `d_pre` holds `n_gates` sigmoid-gate pre-activation
/// gradients followed by the candidate's.
#[allow(clippy::too_many_arguments)]
fn gated_shared_backward(
    params: &ParameterSet,
    spec: &ModelSpec,
    step: &CellInputs<'_>,
    input: &[f64],
    d_pre: &[f64],
    n_gates: usize,
    dh_prev: &mut [f64],
    grads: &mut Gradients,
) {
    let hd = spec.hidden;
    let d_gates = &d_pre[..n_gates * hd];
    add_outer(
        grads.input_proj.as_mut().expect("gated grads").data_mut(),
        d_pre,
        input,
    );
    add_outer(
        grads
            .gate_recurrent
            .as_mut()
            .expect("gated grads")
            .data_mut(),
        d_gates,
        step.h_prev,
    );
    add_into(
        grads.gate_bias.as_mut().expect("gated grads").data_mut(),
        d_gates,
    );
    add_matvec_t(
        params
            .gate_recurrent
            .as_ref()
            .expect("gated parameters")
            .data(),
        hd,
        d_gates,
        dh_prev,
    );
    let mut d_input = vec![0.0; spec.embed];
    add_matvec_t(
        params.input_proj.as_ref().expect("gated parameters").data(),
        spec.embed,
        d_pre,
        &mut d_input,
    );
    if let Some(m) = step.embed_mask {
        for (d, m) in d_input.iter_mut().zip(m) {
            *d *= m;
        }
    }
    add_into(grads.embedding.row_mut(step.x as usize), &d_input);
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, Rng};
    use crate::mapping::MappingPolicy;
    use crate::models::{init_params, Init};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn zero_params_give_logistic_half() {
        let spec = ModelSpec::rrntn(5, 3, MappingPolicy::rank_min(2));
        let p = ParameterSet::zeros(&spec).unwrap();
        let (h, _) = rrntn_step(&p, &spec, 4, &[0.3, -0.2, 0.9]);
        assert_eq!(h, vec![0.5; 3]);

        let spec = ModelSpec::mrnn(5, 3, 2);
        let p = ParameterSet::zeros(&spec).unwrap();
        let (h, _) = mrnn_step(&p, &spec, 1, &[0.3, -0.2, 0.9]);
        assert_eq!(h, vec![0.5; 3]);
    }

    #[test]
    fn zero_gru_halves_previous_state() {
        let spec = ModelSpec::gru(5, 2, 3, MappingPolicy::single());
        let p = ParameterSet::zeros(&spec).unwrap();
        let h0 = [0.4, -0.8, 0.2];
        let (h, _) = gru_step(&p, &spec, 2, &h0, None);
        assert_eq!(h, vec![0.2, -0.4, 0.1]);
    }

    #[test]
    fn zero_lstm_stays_at_zero() {
        let spec = ModelSpec::lstm(5, 2, 3, MappingPolicy::single());
        let p = ParameterSet::zeros(&spec).unwrap();
        let (h, c, _) = lstm_step(&p, &spec, 2, &[0.4, -0.8, 0.2], &[0.0; 3], None);
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
    }

    /// H = 2, V = 3, K = 2 with hand-set weights. Token ids 0 (rank 1) and
    /// 2 (rank 3) use slices 0 and 1.
    #[test]
    fn rrntn_hand_example() {
        let spec = ModelSpec::rrntn(3, 2, MappingPolicy::rank_min(2));
        let mut p = ParameterSet::zeros(&spec).unwrap();
        p.embedding = Matrix::from_rows(&[&[0.1, -0.2], &[0.0, 0.0], &[0.3, 0.4]]).unwrap();
        p.slices = Some(
            Matrix::from_rows(&[
                &[1.0, 0.0, 0.0, 1.0, 0.5, -0.5],
                &[0.0, 2.0, -1.0, 0.0, 0.0, 0.1],
            ])
            .unwrap(),
        );
        let h_prev = [0.5, -1.0];
        // rank 1: a = (0.1 + 0.5 + 0.5, -0.2 - 1.0 - 0.5) = (1.1, -1.7)
        let (h1, _) = rrntn_step(&p, &spec, 0, &h_prev);
        let expect1 = [1.0 / (1.0 + (-1.1f64).exp()), 1.0 / (1.0 + 1.7f64.exp())];
        assert!(close(&h1, &expect1, 1e-15));
        // rank 3: a = (0.3 + 2*(-1.0) + 0, 0.4 - 0.5 + 0.1) = (-1.7, 0.0)
        let (h3, _) = rrntn_step(&p, &spec, 2, &h_prev);
        let expect3 = [1.0 / (1.0 + 1.7f64.exp()), 0.5];
        assert!(close(&h3, &expect3, 1e-15));
        assert_ne!(h1, h3);
    }

    /// F = 1: the factored recurrence is a scalar path U_lh * v_x * (U_rh · h).
    #[test]
    fn mrnn_hand_example() {
        let spec = ModelSpec::mrnn(2, 2, 1);
        let mut p = ParameterSet::zeros(&spec).unwrap();
        p.embedding = Matrix::from_rows(&[&[0.2, 0.0], &[0.0, 0.0]]).unwrap();
        p.factor_left = Some(Matrix::from_rows(&[&[1.0], &[-2.0]]).unwrap());
        p.factor_right = Some(Matrix::from_rows(&[&[0.5, 0.25]]).unwrap());
        p.factor_table = Some(Matrix::from_rows(&[&[3.0], &[0.0]]).unwrap());
        p.hidden_bias = Some(Matrix::from_rows(&[&[0.0, 0.1]]).unwrap());
        let h_prev = [1.0, 2.0];
        // U_rh h = 1.0; v = 3 -> 3.0; a = (0.2 + 3.0, 0 - 6.0 + 0.1)
        let (h, _) = mrnn_step(&p, &spec, 0, &h_prev);
        assert!(close(&h, &[sigmoid(3.2), sigmoid(-5.9)], 1e-15));
    }

    #[test]
    fn mrnn_with_identity_factors_is_srnn_with_identity_recurrence() {
        let (v, hd) = (6, 4);
        let mspec = ModelSpec::mrnn(v, hd, hd);
        let sspec = ModelSpec::srnn(v, hd);
        let mut rng = Rng::new(5);
        let mut m = init_params(&mspec, Init::Gaussian { stddev: 0.7 }, false, &mut rng).unwrap();
        m.factor_left = Some(Matrix::identity(hd));
        m.factor_right = Some(Matrix::identity(hd));
        m.factor_table = Some(Matrix::from_vec(v, hd, vec![1.0; v * hd]).unwrap());
        let mut s = ParameterSet::zeros(&sspec).unwrap();
        s.embedding = m.embedding.clone();
        let mut row = Matrix::identity(hd).data().to_vec();
        row.extend_from_slice(m.hidden_bias.as_ref().unwrap().data());
        s.slices = Some(Matrix::from_vec(1, hd * hd + hd, row).unwrap());
        let h_prev = [0.3, -0.6, 0.1, 0.9];
        for x in 0..v as u32 {
            let (a, _) = mrnn_step(&m, &mspec, x, &h_prev);
            let (b, _) = rrntn_step(&s, &sspec, x, &h_prev);
            assert!(close(&a, &b, 1e-15));
        }
    }

    /// H = 2 GRU with hand-set weights against scalar arithmetic.
    #[test]
    fn gru_hand_example() {
        let spec = ModelSpec::gru(2, 1, 2, MappingPolicy::single());
        let mut p = ParameterSet::zeros(&spec).unwrap();
        p.embedding = Matrix::from_rows(&[&[1.0], &[0.0]]).unwrap();
        // rows: r0 r1 z0 z1 c0 c1
        p.input_proj = Some(Matrix::from_vec(6, 1, vec![0.5, -0.5, 1.0, 0.0, 0.2, -0.3]).unwrap());
        p.gate_recurrent =
            Some(Matrix::from_vec(4, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.5, 0.5]).unwrap());
        p.gate_bias = Some(Matrix::from_vec(1, 4, vec![0.0, 0.1, 0.0, -0.1]).unwrap());
        p.slices = Some(Matrix::from_vec(1, 6, vec![1.0, 1.0, 0.0, -1.0, 0.05, 0.0]).unwrap());
        let hp = [0.4, -0.2];
        let r = [sigmoid(0.5 + 0.4), sigmoid(-0.5 - 0.2 + 0.1)];
        let z = [sigmoid(1.0), sigmoid(0.5 * 0.4 + 0.5 * -0.2 - 0.1)];
        let q = [r[0] * hp[0], r[1] * hp[1]];
        let c = [(0.2 + q[0] + q[1] + 0.05).tanh(), (-0.3 - q[1]).tanh()];
        let expect = [
            z[0] * hp[0] + (1.0 - z[0]) * c[0],
            z[1] * hp[1] + (1.0 - z[1]) * c[1],
        ];
        let (h, _) = gru_step(&p, &spec, 0, &hp, None);
        assert!(close(&h, &expect, 1e-15));
    }

    /// H = 2 LSTM with hand-set weights against scalar arithmetic.
    #[test]
    fn lstm_hand_example() {
        let spec = ModelSpec::lstm(2, 1, 2, MappingPolicy::single());
        let mut p = ParameterSet::zeros(&spec).unwrap();
        p.embedding = Matrix::from_rows(&[&[1.0], &[0.0]]).unwrap();
        // rows: f0 f1 i0 i1 o0 o1 c0 c1
        p.input_proj =
            Some(Matrix::from_vec(8, 1, vec![0.1, 0.2, 0.3, 0.4, -0.1, -0.2, 0.5, -0.5]).unwrap());
        let mut rec = vec![0.0; 12];
        rec[0] = 1.0; // f0 <- h0
        rec[7] = -1.0; // i1 <- h1
        p.gate_recurrent = Some(Matrix::from_vec(6, 2, rec).unwrap());
        p.gate_bias = Some(Matrix::from_vec(1, 6, vec![0.0, 0.0, 0.0, 0.0, 0.2, 0.0]).unwrap());
        p.slices = Some(Matrix::from_vec(1, 6, vec![0.0, 1.0, 1.0, 0.0, 0.0, 0.3]).unwrap());
        let hp = [0.5, -0.5];
        let cp = [0.2, -0.1];
        let f = [sigmoid(0.1 + 0.5), sigmoid(0.2)];
        let i = [sigmoid(0.3), sigmoid(0.4 + 0.5)];
        let o = [sigmoid(-0.1 + 0.2), sigmoid(-0.2)];
        let cc = [(0.5 - 0.5f64).tanh(), (-0.5 + 0.5 + 0.3f64).tanh()];
        let c = [i[0] * cc[0] + f[0] * cp[0], i[1] * cc[1] + f[1] * cp[1]];
        let hh = [o[0] * c[0].tanh(), o[1] * c[1].tanh()];
        let (h, cell, _) = lstm_step(&p, &spec, 0, &hp, &cp, None);
        assert!(close(&cell, &c, 1e-15));
        assert!(close(&h, &hh, 1e-15));
    }

    #[test]
    fn output_distribution_cases() {
        let spec = ModelSpec::srnn(4, 3);
        let mut p = ParameterSet::zeros(&spec).unwrap();
        let probs = output_distribution(&p, &[0.1, 0.2, 0.3], None);
        assert_eq!(probs, vec![0.25; 4]);

        let spec2 = ModelSpec::srnn(2, 3);
        let mut p2 = ParameterSet::zeros(&spec2).unwrap();
        p2.output_b = Matrix::from_vec(1, 2, vec![0.0, 3f64.ln()]).unwrap();
        let probs = output_distribution(&p2, &[0.5, 0.5, 0.5], None);
        assert!(close(&probs, &[0.25, 0.75], 1e-15));

        p = init_params(
            &spec,
            Init::Gaussian { stddev: 1.0 },
            false,
            &mut Rng::new(4),
        )
        .unwrap();
        let probs = output_distribution(&p, &[0.1, 0.7, 0.3], Some(&[2.0, 0.0, 2.0]));
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
