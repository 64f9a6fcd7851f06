//! Child-sum tree-LSTM over a dependency tree.
//!
//! Each node gets one forget gate per child; the input, output and update
//! gates see the sum of the children's hidden states. Only the subtree under
//! the readout node influences the output, so only that subtree is evaluated.

use super::{head_backward, head_forward, HeadCache, ModelError, ModelSpec, TreeInput};
use crate::nncore::{linalg, Mode, ParamSet};

// Gate order: input, output, update, forget.
const GATES: [&str; 4] = ["i", "o", "u", "f"];
const I: usize = 0;
const O: usize = 1;
const U: usize = 2;
const F: usize = 3;

fn w(g: &str) -> String {
    format!("tree.w_{g}")
}

fn u(g: &str) -> String {
    format!("tree.u_{g}")
}

fn b(g: &str) -> String {
    format!("tree.b_{g}")
}

pub(super) fn shapes(spec: &ModelSpec) -> Vec<(String, Vec<usize>)> {
    let (d, h) = (spec.input_dim, spec.hidden);
    let mut out = Vec::new();
    for g in GATES {
        out.push((w(g), vec![d, h]));
        out.push((u(g), vec![h, h]));
        out.push((b(g), vec![h]));
    }
    out
}

struct Node {
    h_sum: Vec<f64>,
    i: Vec<f64>,
    o: Vec<f64>,
    u: Vec<f64>,
    /// One forget gate per child, aligned with `children[node]`.
    f: Vec<Vec<f64>>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

pub(crate) struct TreeCache {
    /// Nodes of the readout subtree, children before parents.
    order: Vec<usize>,
    nodes: Vec<Option<Node>>,
    head: HeadCache,
}

/// Checks that `children` forms a single tree rooted at `root` covering every node.
fn validate(tree: &TreeInput) -> Result<(), ModelError> {
    let n = tree.embeddings.len();
    if tree.children.len() != n {
        return Err(ModelError::MalformedTree(format!(
            "{} child lists for {n} nodes",
            tree.children.len()
        )));
    }
    if tree.root >= n || tree.readout >= n {
        return Err(ModelError::MalformedTree(format!(
            "root {} / readout {} out of range for {n} nodes",
            tree.root, tree.readout
        )));
    }
    let mut parent = vec![None; n];
    for (p, kids) in tree.children.iter().enumerate() {
        for &k in kids {
            if k >= n {
                return Err(ModelError::MalformedTree(format!("child {k} out of range")));
            }
            if k == tree.root || parent[k].replace(p).is_some() {
                return Err(ModelError::MalformedTree(format!("node {k} has more than one parent")));
            }
        }
    }
    let reached = postorder(tree, tree.root).len();
    if reached != n {
        return Err(ModelError::MalformedTree(format!(
            "{} of {n} nodes unreachable from the root",
            n - reached
        )));
    }
    Ok(())
}

fn postorder(tree: &TreeInput, top: usize) -> Vec<usize> {
    let mut order = Vec::new();
    let mut stack = vec![(top, false)];
    while let Some((node, expanded)) = stack.pop() {
        if expanded {
            order.push(node);
        } else {
            stack.push((node, true));
            for &k in tree.children[node].iter().rev() {
                stack.push((k, false));
            }
        }
    }
    order
}

struct Weights<'a> {
    w: [&'a [f64]; 4],
    u: [&'a [f64]; 4],
    b: [&'a [f64]; 4],
}

fn weights(params: &ParamSet) -> Result<Weights<'_>, ModelError> {
    let get = |name: String| params.value(&name).map(|t| t.data());
    Ok(Weights {
        w: [get(w("i"))?, get(w("o"))?, get(w("u"))?, get(w("f"))?],
        u: [get(u("i"))?, get(u("o"))?, get(u("u"))?, get(u("f"))?],
        b: [get(b("i"))?, get(b("o"))?, get(b("u"))?, get(b("f"))?],
    })
}

pub(super) fn forward(
    spec: &ModelSpec,
    params: &ParamSet,
    tree: &TreeInput,
    mode: &mut Mode<'_>,
) -> Result<(Vec<f64>, TreeCache), ModelError> {
    validate(tree)?;
    let h_dim = spec.hidden;
    let wts = weights(params)?;
    let order = postorder(tree, tree.readout);
    let mut nodes: Vec<Option<Node>> = (0..tree.embeddings.len()).map(|_| None).collect();

    for &j in &order {
        let x = &tree.embeddings[j];
        let kids = &tree.children[j];
        let mut h_sum = vec![0.0; h_dim];
        for &k in kids {
            linalg::add_assign(&mut h_sum, &nodes[k].as_ref().expect("postorder").h);
        }
        let gate = |g: usize, h_in: &[f64]| {
            let mut a = wts.b[g].to_vec();
            linalg::vec_mat_acc(x, wts.w[g], h_dim, &mut a);
            linalg::vec_mat_acc(h_in, wts.u[g], h_dim, &mut a);
            a
        };
        let i: Vec<f64> = gate(I, &h_sum).into_iter().map(linalg::sigmoid).collect();
        let o: Vec<f64> = gate(O, &h_sum).into_iter().map(linalg::sigmoid).collect();
        let uu: Vec<f64> = gate(U, &h_sum).into_iter().map(f64::tanh).collect();
        let mut c: Vec<f64> = (0..h_dim).map(|m| i[m] * uu[m]).collect();
        let mut f = Vec::with_capacity(kids.len());
        for &k in kids {
            let child = nodes[k].as_ref().expect("postorder");
            let fk: Vec<f64> = gate(F, &child.h).into_iter().map(linalg::sigmoid).collect();
            for m in 0..h_dim {
                c[m] += fk[m] * child.c[m];
            }
            f.push(fk);
        }
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h = (0..h_dim).map(|m| o[m] * tanh_c[m]).collect();
        nodes[j] = Some(Node {
            h_sum,
            i,
            o,
            u: uu,
            f,
            c,
            tanh_c,
            h,
        });
    }

    let top = nodes[tree.readout].as_ref().expect("readout evaluated");
    let (logits, head) = head_forward(params, &top.h, spec.dropout, mode)?;
    Ok((logits, TreeCache { order, nodes, head }))
}

pub(super) fn backward(
    spec: &ModelSpec,
    params: &mut ParamSet,
    cache: &TreeCache,
    tree: &TreeInput,
    dlogits: &[f64],
) -> Vec<Vec<f64>> {
    let h_dim = spec.hidden;
    let n = tree.embeddings.len();
    let mut dh = vec![vec![0.0; h_dim]; n];
    let mut dc = vec![vec![0.0; h_dim]; n];
    dh[tree.readout] = head_backward(params, &cache.head, dlogits);
    let mut dinput = vec![vec![0.0; spec.input_dim]; n];

    let (values, grads) = params.split_mut();
    let w_x: Vec<&[f64]> = GATES.iter().map(|g| values[&w(g)].data()).collect();
    let w_h: Vec<&[f64]> = GATES.iter().map(|g| values[&u(g)].data()).collect();
    let mut g_x: Vec<Vec<f64>> = w_x.iter().map(|m| vec![0.0; m.len()]).collect();
    let mut g_h: Vec<Vec<f64>> = w_h.iter().map(|m| vec![0.0; m.len()]).collect();
    let mut g_b = vec![vec![0.0; h_dim]; 4];

    for &j in cache.order.iter().rev() {
        let node = cache.nodes[j].as_ref().expect("cached node");
        let x = &tree.embeddings[j];
        let kids = &tree.children[j];
        let mut a = vec![vec![0.0; h_dim]; 3];
        let mut dcj = vec![0.0; h_dim];
        for m in 0..h_dim {
            let tc = node.tanh_c[m];
            let d_o = dh[j][m] * tc;
            dcj[m] = dc[j][m] + dh[j][m] * node.o[m] * (1.0 - tc * tc);
            let d_i = dcj[m] * node.u[m];
            let d_u = dcj[m] * node.i[m];
            a[I][m] = d_i * node.i[m] * (1.0 - node.i[m]);
            a[O][m] = d_o * node.o[m] * (1.0 - node.o[m]);
            a[U][m] = d_u * (1.0 - node.u[m] * node.u[m]);
        }

        let mut dx = vec![0.0; spec.input_dim];
        let mut dh_sum = vec![0.0; h_dim];
        for g in [I, O, U] {
            linalg::outer_acc(x, &a[g], &mut g_x[g]);
            linalg::outer_acc(&node.h_sum, &a[g], &mut g_h[g]);
            linalg::add_assign(&mut g_b[g], &a[g]);
            linalg::mat_vec_acc(w_x[g], h_dim, &a[g], &mut dx);
            linalg::mat_vec_acc(w_h[g], h_dim, &a[g], &mut dh_sum);
        }

        for (slot, &k) in kids.iter().enumerate() {
            let child = cache.nodes[k].as_ref().expect("cached child");
            let fk = &node.f[slot];
            let mut a_f = vec![0.0; h_dim];
            for m in 0..h_dim {
                dc[k][m] += dcj[m] * fk[m];
                a_f[m] = dcj[m] * child.c[m] * fk[m] * (1.0 - fk[m]);
            }
            linalg::outer_acc(x, &a_f, &mut g_x[F]);
            linalg::outer_acc(&child.h, &a_f, &mut g_h[F]);
            linalg::add_assign(&mut g_b[F], &a_f);
            linalg::mat_vec_acc(w_x[F], h_dim, &a_f, &mut dx);
            let mut dh_k = dh_sum.clone();
            linalg::mat_vec_acc(w_h[F], h_dim, &a_f, &mut dh_k);
            linalg::add_assign(&mut dh[k], &dh_k);
        }
        dinput[j] = dx;
    }

    for (k, gname) in GATES.iter().enumerate() {
        linalg::add_assign(grads.get_mut(&w(gname)).expect("w").data_mut(), &g_x[k]);
        linalg::add_assign(grads.get_mut(&u(gname)).expect("u").data_mut(), &g_h[k]);
        linalg::add_assign(grads.get_mut(&b(gname)).expect("b").data_mut(), &g_b[k]);
    }
    dinput
}

#[cfg(test)]
mod tests {
    use super::super::tests::{random_seq, spec};
    use super::super::*;
    use crate::corpus::TemporalStatus;
    use crate::nncore::{GradCheckConfig, SeededRng};
    use rand::SeedableRng;

    /// "Protesters said they will launch their protest" style tree with 8 nodes.
    fn fixture(rng: &mut SeededRng, d: usize, readout: usize) -> TreeInput {
        TreeInput {
            embeddings: random_seq(rng, 8, d),
            children: vec![
                vec![],
                vec![0, 4, 7],
                vec![],
                vec![],
                vec![2, 3, 6],
                vec![],
                vec![5],
                vec![],
            ],
            root: 1,
            readout,
        }
    }

    #[test]
    fn zero_model_logits_are_the_bias() {
        let mut m = Classifier::zeroed(spec(ModelKind::TreeLstm, 4, 5)).unwrap();
        m.params_mut()
            .value_mut("out.b")
            .unwrap()
            .data_mut()
            .copy_from_slice(&[0.3, -0.1, 0.2]);
        let mut rng = SeededRng::seed_from_u64(0);
        let input = ModelInput::Tree(fixture(&mut rng, 4, 1));
        assert_eq!(m.logits(&input, &mut Mode::Eval).unwrap(), vec![0.3, -0.1, 0.2]);
    }

    #[test]
    fn single_node_is_one_cell_step() {
        let mut rng = SeededRng::seed_from_u64(6);
        let m = Classifier::with_scale(spec(ModelKind::TreeLstm, 3, 2), 0.5, &mut rng).unwrap();
        let x = random_seq(&mut rng, 1, 3);
        let tree = TreeInput {
            embeddings: x.clone(),
            children: vec![vec![]],
            root: 0,
            readout: 0,
        };
        let (_, cache) = super::forward(m.spec(), m.params(), &tree, &mut Mode::Eval).unwrap();
        let h = &cache.nodes[0].as_ref().unwrap().h;
        let p = m.params();
        let pre = |g: &str, j: usize| {
            let w = p.value(&format!("tree.w_{g}")).unwrap().data();
            p.value(&format!("tree.b_{g}")).unwrap().data()[j]
                + (0..3).map(|r| x[0][r] * w[r * 2 + j]).sum::<f64>()
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        for j in 0..2 {
            let c = sig(pre("i", j)) * pre("u", j).tanh();
            assert!((h[j] - sig(pre("o", j)) * c.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn malformed_trees_are_rejected() {
        let mut rng = SeededRng::seed_from_u64(0);
        let m = Classifier::new(spec(ModelKind::TreeLstm, 2, 3), &mut rng).unwrap();
        let bad = [
            (vec![vec![1], vec![0]], 0),
            (vec![vec![1], vec![]], 1),
            (vec![vec![], vec![]], 0),
            (vec![vec![1, 1], vec![]], 0),
            (vec![vec![5], vec![]], 0),
        ];
        for (children, root) in bad {
            let tree = TreeInput {
                embeddings: random_seq(&mut rng, 2, 2),
                children,
                root,
                readout: root,
            };
            assert!(matches!(
                m.classify(&ModelInput::Tree(tree)),
                Err(ModelError::MalformedTree(_))
            ));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = GradCheckConfig {
            coords_per_param: None,
            ..Default::default()
        };
        for readout in [1, 4] {
            let mut rng = SeededRng::seed_from_u64(17);
            let mut m = Classifier::with_scale(spec(ModelKind::TreeLstm, 5, 6), 0.5, &mut rng).unwrap();
            let input = ModelInput::Tree(fixture(&mut rng, 5, readout));
            let err = check_gradients(&mut m, &input, TemporalStatus::Future, &cfg).unwrap();
            assert!(err < 1e-4, "readout {readout}: {err}");
        }
    }

    #[test]
    fn target_readout_ignores_nodes_outside_its_subtree() {
        let mut rng = SeededRng::seed_from_u64(9);
        let mut m = Classifier::with_scale(spec(ModelKind::TreeLstm, 3, 4), 0.5, &mut rng).unwrap();
        let tree = fixture(&mut rng, 3, 4);
        let out = m
            .loss_and_grad(&ModelInput::Tree(tree), TemporalStatus::Past, &mut Mode::Eval)
            .unwrap();
        assert!(out.dinput[0].iter().all(|v| *v == 0.0));
        assert!(out.dinput[1].iter().all(|v| *v == 0.0));
        assert!(out.dinput[5].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn sibling_order_does_not_matter() {
        let mut rng = SeededRng::seed_from_u64(4);
        let m = Classifier::with_scale(spec(ModelKind::TreeLstm, 4, 5), 0.5, &mut rng).unwrap();
        let tree = fixture(&mut rng, 4, 1);
        let mut permuted = tree.clone();
        permuted.children[4] = vec![6, 2, 3];
        permuted.children[1] = vec![7, 4, 0];
        let a = m.logits(&ModelInput::Tree(tree), &mut Mode::Eval).unwrap();
        let b = m.logits(&ModelInput::Tree(permuted), &mut Mode::Eval).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
