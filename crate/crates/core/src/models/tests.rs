use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::{add, mat_vec, rotation_from_uniform};
use crate::graph::{remove_nodes, Construction, GeometricGraph};

fn random_graph(n: usize, k: usize, seed: u64) -> GeometricGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<Vec3> = (0..n)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let feats: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0, rng.random_range(0.0..2.0)]).collect();
    GeometricGraph::from_construction((0..n).collect(), coords, feats, Construction::Knn(k)).unwrap()
}

fn transformed(g: &GeometricGraph, rot: &[[f64; 3]; 3], t: Vec3) -> GeometricGraph {
    let coords = g.coords().iter().map(|&c| add(mat_vec(rot, c), t)).collect();
    GeometricGraph::from_construction(g.node_ids().to_vec(), coords, g.features().to_vec(), g.construction())
        .unwrap()
}

fn configs(head: Head) -> Vec<ModelConfig> {
    let mut multi = ModelConfig::attention(head, 2, 3);
    multi.multiscale = true;
    vec![ModelConfig::egnn(head, 2, 1), ModelConfig::attention(head, 2, 2), multi]
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-3)
}

#[test]
fn construction_is_deterministic() {
    for cfg in configs(Head::GraphScalar) {
        let a = Model::new(cfg.clone()).unwrap();
        let b = Model::new(cfg).unwrap();
        assert_eq!(a.params(), b.params());
        let g = random_graph(7, 3, 0);
        assert_eq!(a.predict_graph(&g).unwrap(), b.predict_graph(&g).unwrap());
    }
}

#[test]
fn single_node_and_coincident_nodes() {
    let single = GeometricGraph::from_construction(vec![4], vec![[0.1, 0.2, 0.3]], vec![vec![1.0, 0.5]], Construction::Knn(3))
        .unwrap();
    let twin = GeometricGraph::from_construction(
        vec![0, 1, 2],
        vec![[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]],
        vec![vec![1.0, 0.0]; 3],
        Construction::Fc,
    )
    .unwrap();
    for cfg in configs(Head::GraphScalar) {
        let m = Model::new(cfg).unwrap();
        assert!(m.predict_graph(&single).unwrap().is_finite());
        assert!(m.predict_graph(&twin).unwrap().is_finite());
    }
    for cfg in configs(Head::NodeVector) {
        let m = Model::new(cfg).unwrap();
        let out = m.predict_node(&twin).unwrap();
        assert!(out.iter().flatten().all(|v| v.is_finite()));
        assert_eq!(m.predict_node(&single).unwrap().len(), 1);
    }
}

#[test]
fn wrong_head_is_rejected() {
    let m = Model::new(ModelConfig::egnn(Head::GraphScalar, 2, 0)).unwrap();
    assert!(m.predict_node(&random_graph(5, 2, 1)).is_err());
}

#[test]
fn graph_output_invariant_under_rigid_motions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for cfg in configs(Head::GraphScalar) {
        let m = Model::new(cfg).unwrap();
        let g = random_graph(9, 4, 5);
        let base = m.predict_graph(&g).unwrap();
        for _ in 0..20 {
            let rot = rotation_from_uniform(rng.random(), rng.random(), rng.random());
            let t = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let moved = m.predict_graph(&transformed(&g, &rot, t)).unwrap();
            assert!(rel_close(base, moved, 1e-5), "{base} vs {moved}");
        }
    }
}

#[test]
fn node_output_equivariant_under_rigid_motions() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for cfg in configs(Head::NodeVector) {
        let m = Model::new(cfg).unwrap();
        let g = random_graph(9, 4, 6);
        let base = m.predict_node(&g).unwrap();
        for _ in 0..20 {
            let rot = rotation_from_uniform(rng.random(), rng.random(), rng.random());
            let t = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let moved = m.predict_node(&transformed(&g, &rot, t)).unwrap();
            for (b, mv) in base.iter().zip(&moved) {
                let expect = mat_vec(&rot, *b);
                for a in 0..3 {
                    assert!(rel_close(expect[a], mv[a], 1e-5), "{expect:?} vs {mv:?}");
                }
            }
        }
    }
}

#[test]
fn node_output_permutation_equivariant() {
    let g = random_graph(8, 3, 21);
    let perm = [3usize, 7, 0, 5, 1, 6, 2, 4];
    let coords: Vec<Vec3> = perm.iter().map(|&p| g.coords()[p]).collect();
    let feats: Vec<Vec<f64>> = perm.iter().map(|&p| g.features()[p].clone()).collect();
    let pg = GeometricGraph::from_construction((0..8).collect(), coords, feats, Construction::Knn(3)).unwrap();
    for cfg in configs(Head::NodeVector) {
        let m = Model::new(cfg).unwrap();
        let a = m.predict_node(&g).unwrap();
        let b = m.predict_node(&pg).unwrap();
        for (slot, &p) in perm.iter().enumerate() {
            for c in 0..3 {
                assert!((a[p][c] - b[slot][c]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn egnn_layer_matches_loop_reference() {
    let mut cfg = ModelConfig::egnn(Head::NodeVector, 2, 8);
    cfg.depth = 1;
    cfg.hidden = 6;
    let m = Model::new(cfg).unwrap();
    let g = random_graph(6, 2, 3);
    let feats = Tensor::from_shape_fn((6, 2), |(i, j)| g.features()[i][j]);
    let h0 = feats.dot(&m.params()[0]) + &m.params()[1];
    let x0 = Tensor::from_shape_fn((6, 3), |(i, a)| g.coords()[i][a]);
    let (_, x1) = egnn_layer_reference(&m.params()[2..14], &h0, &x0, g.edges());
    let out = m.predict_node(&g).unwrap();
    for i in 0..6 {
        for a in 0..3 {
            assert!((out[i][a] - (x1[[i, a]] - x0[[i, a]])).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_coordinate_head_leaves_positions_fixed() {
    let mut m = Model::new(ModelConfig::egnn(Head::NodeVector, 2, 4)).unwrap();
    let names: Vec<String> = m.param_names().to_vec();
    for (name, p) in names.iter().zip(m.params_mut()) {
        if name.ends_with("coord2.w") || name.ends_with("coord2.b") {
            p.fill(0.0);
        }
    }
    let out = m.predict_node(&random_graph(7, 3, 9)).unwrap();
    assert!(out.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn subgraph_matches_materialized_graph() {
    let g = random_graph(9, 3, 13);
    let sub = remove_nodes(&g, &[2, 5]).unwrap();
    let explicit = sub.to_graph();
    for cfg in configs(Head::GraphScalar) {
        let m = Model::new(cfg).unwrap();
        assert_eq!(m.predict_graph(&sub).unwrap(), m.predict_graph(&explicit).unwrap());
    }
}

#[test]
fn batched_and_single_inference_agree() {
    let graphs: Vec<GeometricGraph> = (0..5).map(|s| random_graph(4 + s as usize, 2, s)).collect();
    let views: Vec<&dyn GraphView> = graphs.iter().map(|g| g as &dyn GraphView).collect();
    for cfg in configs(Head::GraphScalar) {
        let m = Model::new(cfg).unwrap();
        let batched = m.predict_graphs(&views).unwrap();
        for (g, b) in graphs.iter().zip(&batched) {
            assert!((m.predict_graph(g).unwrap() - b).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_weights_are_distributions() {
    let g = random_graph(8, 3, 17);
    for cfg in configs(Head::GraphScalar).into_iter().skip(1) {
        let m = Model::new(cfg).unwrap();
        for (recv, alpha) in attention_weights(&m, &g).unwrap() {
            for h in 0..alpha.ncols() {
                let mut sums = vec![0.0; 8];
                for (e, &r) in recv.iter().enumerate() {
                    assert!(alpha[[e, h]] >= 0.0);
                    sums[r] += alpha[[e, h]];
                }
                for s in sums {
                    assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

fn loss_of(m: &Model, params: &[Tensor], batch: &GraphBatch, target: &Tensor) -> f64 {
    let tape = Tape::new();
    let vars: Vec<_> = params.iter().map(|p| tape.constant(p.clone())).collect();
    let out = m.forward(&tape, &vars, batch, Mode::Eval);
    let d = out.sub(tape.constant(target.clone()));
    d.mul(d).mean().item()
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let graphs = [random_graph(6, 3, 31), random_graph(5, 2, 32)];
    let views: Vec<&dyn GraphView> = graphs.iter().map(|g| g as &dyn GraphView).collect();
    for head in [Head::GraphScalar, Head::NodeVector] {
        for mut cfg in configs(head) {
            cfg.hidden = 8;
            cfg.dropout = 0.0;
            let m = Model::new(cfg).unwrap();
            let batch = m.batch(&views);
            let rows = if head == Head::GraphScalar { 2 } else { 11 };
            let cols = if head == Head::GraphScalar { 1 } else { 3 };
            let target = Tensor::from_shape_fn((rows, cols), |(r, c)| (r as f64 * 0.3 + c as f64).sin());
            let tape = Tape::new();
            let vars: Vec<_> = m.params().iter().map(|p| tape.leaf(p.clone())).collect();
            let out = m.forward(&tape, &vars, &batch, Mode::Eval);
            let d = out.sub(tape.constant(target.clone()));
            let grads = tape.grad(d.mul(d).mean(), &vars).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..40 {
                let p = rng.random_range(0..m.params().len());
                let (r, c) = m.params()[p].dim();
                let (r, c) = (rng.random_range(0..r), rng.random_range(0..c));
                let h = 1e-5;
                let mut plus = m.params().to_vec();
                plus[p][[r, c]] += h;
                let mut minus = m.params().to_vec();
                minus[p][[r, c]] -= h;
                let fd = (loss_of(&m, &plus, &batch, &target) - loss_of(&m, &minus, &batch, &target)) / (2.0 * h);
                let an = grads[p][[r, c]];
                assert!(
                    (fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-6),
                    "{} [{r},{c}]: fd {fd} vs analytic {an}",
                    m.param_names()[p]
                );
            }
        }
    }
}
