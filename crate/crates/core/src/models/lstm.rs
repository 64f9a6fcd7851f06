//! Single-layer left-to-right LSTM read out at the last step.

use super::{head_backward, head_forward, HeadCache, ModelSpec};
use crate::nncore::{linalg, Mode, NnError, ParamSet};

pub(super) const FORGET_BIAS: &str = "lstm.b_f";

// Gate order: input, forget, output, candidate.
const GATES: [&str; 4] = ["i", "f", "o", "g"];

fn wx(g: &str) -> String {
    format!("lstm.wx_{g}")
}

fn wh(g: &str) -> String {
    format!("lstm.wh_{g}")
}

fn b(g: &str) -> String {
    format!("lstm.b_{g}")
}

pub(super) fn shapes(spec: &ModelSpec) -> Vec<(String, Vec<usize>)> {
    let (d, h) = (spec.input_dim, spec.hidden);
    let mut out = Vec::new();
    for g in GATES {
        out.push((wx(g), vec![d, h]));
        out.push((wh(g), vec![h, h]));
        out.push((b(g), vec![h]));
    }
    out
}

struct Step {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates in `GATES` order.
    gates: [Vec<f64>; 4],
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

pub(crate) struct LstmCache {
    steps: Vec<Step>,
    head: HeadCache,
}

impl LstmCache {
    pub(crate) fn hidden_states(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.h.clone()).collect()
    }
}

struct Weights<'a> {
    wx: [&'a [f64]; 4],
    wh: [&'a [f64]; 4],
    b: [&'a [f64]; 4],
}

fn weights(params: &ParamSet) -> Result<Weights<'_>, NnError> {
    let get = |name: String| params.value(&name).map(|t| t.data());
    Ok(Weights {
        wx: [get(wx("i"))?, get(wx("f"))?, get(wx("o"))?, get(wx("g"))?],
        wh: [get(wh("i"))?, get(wh("f"))?, get(wh("o"))?, get(wh("g"))?],
        b: [get(b("i"))?, get(b("f"))?, get(b("o"))?, get(b("g"))?],
    })
}

pub(super) fn forward(
    spec: &ModelSpec,
    params: &ParamSet,
    seq: &[Vec<f64>],
    mode: &mut Mode<'_>,
) -> Result<(Vec<f64>, LstmCache), NnError> {
    let h_dim = spec.hidden;
    let w = weights(params)?;
    let mut h = vec![0.0; h_dim];
    let mut c = vec![0.0; h_dim];
    let mut steps = Vec::with_capacity(seq.len());

    for x in seq {
        let mut gates: [Vec<f64>; 4] = Default::default();
        for k in 0..4 {
            let mut a = w.b[k].to_vec();
            linalg::vec_mat_acc(x, w.wx[k], h_dim, &mut a);
            linalg::vec_mat_acc(&h, w.wh[k], h_dim, &mut a);
            if k == 3 {
                a.iter_mut().for_each(|v| *v = v.tanh());
            } else {
                a.iter_mut().for_each(|v| *v = linalg::sigmoid(*v));
            }
            gates[k] = a;
        }
        let [i, f, o, g] = &gates;
        let c_new: Vec<f64> = (0..h_dim).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
        let tanh_c: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
        let h_new: Vec<f64> = (0..h_dim).map(|j| o[j] * tanh_c[j]).collect();
        steps.push(Step {
            x: x.clone(),
            h_prev: std::mem::replace(&mut h, h_new.clone()),
            c_prev: std::mem::replace(&mut c, c_new),
            gates,
            tanh_c,
            h: h_new,
        });
    }

    let (logits, head) = head_forward(params, &h, spec.dropout, mode)?;
    Ok((logits, LstmCache { steps, head }))
}

pub(super) fn backward(
    spec: &ModelSpec,
    params: &mut ParamSet,
    cache: &LstmCache,
    dlogits: &[f64],
) -> Vec<Vec<f64>> {
    let h_dim = spec.hidden;
    let mut dh = head_backward(params, &cache.head, dlogits);
    let mut dc = vec![0.0; h_dim];
    let mut dinput = vec![Vec::new(); cache.steps.len()];

    let (values, grads) = params.split_mut();
    let w_x: Vec<&[f64]> = GATES.iter().map(|g| values[&wx(g)].data()).collect();
    let w_h: Vec<&[f64]> = GATES.iter().map(|g| values[&wh(g)].data()).collect();
    let mut g_x: Vec<Vec<f64>> = w_x.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut g_h: Vec<Vec<f64>> = w_h.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut g_b: Vec<Vec<f64>> = vec![vec![0.0; h_dim]; 4];

    for (t, step) in cache.steps.iter().enumerate().rev() {
        let [i, f, o, g] = &step.gates;
        let mut da: [Vec<f64>; 4] = Default::default();
        for k in 0..4 {
            da[k] = vec![0.0; h_dim];
        }
        let mut dc_prev = vec![0.0; h_dim];
        for j in 0..h_dim {
            let tc = step.tanh_c[j];
            let d_o = dh[j] * tc;
            let dcj = dc[j] + dh[j] * o[j] * (1.0 - tc * tc);
            let d_i = dcj * g[j];
            let d_g = dcj * i[j];
            let d_f = dcj * step.c_prev[j];
            dc_prev[j] = dcj * f[j];
            da[0][j] = d_i * i[j] * (1.0 - i[j]);
            da[1][j] = d_f * f[j] * (1.0 - f[j]);
            da[2][j] = d_o * o[j] * (1.0 - o[j]);
            da[3][j] = d_g * (1.0 - g[j] * g[j]);
        }
        let mut dx = vec![0.0; spec.input_dim];
        let mut dh_prev = vec![0.0; h_dim];
        for k in 0..4 {
            linalg::outer_acc(&step.x, &da[k], &mut g_x[k]);
            linalg::outer_acc(&step.h_prev, &da[k], &mut g_h[k]);
            linalg::add_assign(&mut g_b[k], &da[k]);
            linalg::mat_vec_acc(w_x[k], h_dim, &da[k], &mut dx);
            linalg::mat_vec_acc(w_h[k], h_dim, &da[k], &mut dh_prev);
        }
        dinput[t] = dx;
        dh = dh_prev;
        dc = dc_prev;
    }

    for (k, gname) in GATES.iter().enumerate() {
        linalg::add_assign(grads.get_mut(&wx(gname)).expect("wx").data_mut(), &g_x[k]);
        linalg::add_assign(grads.get_mut(&wh(gname)).expect("wh").data_mut(), &g_h[k]);
        linalg::add_assign(grads.get_mut(&b(gname)).expect("b").data_mut(), &g_b[k]);
    }
    dinput
}
