//! Central finite-difference gradient checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskgraph::labelprop::augment_inputs;
use riskgraph::models::{Model, ModelConfig, Variant};
use riskgraph::tensor::{Matrix, Segments, Tape, Var};
use riskgraph::{build_graph, full_neighborhood_batch, EgoBatch, GraphConfig, NodeId, Session};

use super::relative_error;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

pub type OpFn = fn(&mut Tape, &[Var]) -> Var;

/// Random matrix with entries bounded away from zero, so ReLU kinks are not
/// crossed by a finite-difference step.
pub fn rand_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            let m: f64 = rng.random_range(0.1..1.5);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Contracts any output to a scalar with fixed random row and column
/// weights. Row weights matter: a softmax column sums to a constant.
fn reduce(tape: &mut Tape, out: Var) -> Var {
    let (rows, cols) = tape.shape(out);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let row_w = tape.constant(rand_matrix(rows, 1, &mut rng)).unwrap();
    let proj = tape.constant(rand_matrix(cols, 1, &mut rng)).unwrap();
    let weighted = tape.scale_rows(out, row_w).unwrap();
    let z = tape.matmul(weighted, proj).unwrap();
    tape.segment_sum(z, Segments::new(vec![0; rows], 1).unwrap()).unwrap()
}

fn scalar_of(inputs: &[Matrix], f: OpFn) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone()).unwrap()).collect();
    let out = f(&mut tape, &vars);
    let s = reduce(&mut tape, out);
    tape.value(s).item()
}

/// Gradient norms below this are treated as exactly zero. Finite differences
/// carry roundoff around 1e-11, so relative error against a vanishing
/// gradient is meaningless; the absolute gap is compared instead.
pub const ZERO_GRAD: f64 = 1e-7;

/// Relative error, or the absolute gap when both gradients vanish. The
/// attention query projection is one such case: its term is constant within
/// each softmax group, so its true gradient is identically zero.
pub fn gradient_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm(analytic).max(norm(numeric)) < ZERO_GRAD {
        let gap: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
        norm(&gap) / ZERO_GRAD * TOLERANCE
    } else {
        relative_error(analytic, numeric)
    }
}

/// Worst relative error over all inputs of `f`.
pub fn check_op(inputs: &[Matrix], f: OpFn) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone()).unwrap()).collect();
    let out = f(&mut tape, &vars);
    let s = reduce(&mut tape, out);
    let mut grads = tape.backward(s).unwrap();
    let mut worst: f64 = 0.0;
    for (i, m) in inputs.iter().enumerate() {
        let analytic = grads.take_or_zeros(vars[i], m.shape());
        let mut numeric = vec![0.0; m.data().len()];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= STEP;
            *slot = (scalar_of(&plus, f) - scalar_of(&minus, f)) / (2.0 * STEP);
        }
        worst = worst.max(gradient_error(analytic.data(), &numeric));
    }
    worst
}

/// Every differentiable tape operation, with representative inputs.
pub fn op_cases() -> Vec<(&'static str, Vec<Matrix>, OpFn)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut m = |r, c| rand_matrix(r, c, &mut rng);
    vec![
        ("matmul", vec![m(4, 3), m(3, 5)], |t, v| t.matmul(v[0], v[1]).unwrap()),
        ("add", vec![m(3, 4), m(3, 4)], |t, v| t.add(v[0], v[1]).unwrap()),
        ("add_bias", vec![m(5, 3), m(1, 3)], |t, v| t.add_bias(v[0], v[1]).unwrap()),
        ("concat_cols", vec![m(4, 2), m(4, 3)], |t, v| t.concat_cols(v[0], v[1]).unwrap()),
        ("relu", vec![m(4, 4)], |t, v| t.relu(v[0]).unwrap()),
        ("sigmoid", vec![m(4, 3)], |t, v| t.sigmoid(v[0]).unwrap()),
        ("gather_rows", vec![m(4, 3)], |t, v| t.gather_rows(v[0], &[2, 0, 2, 3, 2]).unwrap()),
        ("head_rows", vec![m(5, 3)], |t, v| t.head_rows(v[0], 3).unwrap()),
        ("segment_mean", vec![m(6, 3)], |t, v| {
            t.segment_mean(v[0], Segments::new(vec![0, 2, 0, 3, 3, 3], 5).unwrap()).unwrap()
        }),
        ("segment_sum", vec![m(6, 3)], |t, v| {
            t.segment_sum(v[0], Segments::new(vec![1, 1, 0, 3, 0, 1], 4).unwrap()).unwrap()
        }),
        ("segment_softmax", vec![m(7, 1)], |t, v| {
            t.segment_softmax(v[0], Segments::new(vec![0, 0, 1, 2, 2, 2, 0], 4).unwrap()).unwrap()
        }),
        ("scale_rows", vec![m(5, 3), m(5, 1)], |t, v| t.scale_rows(v[0], v[1]).unwrap()),
        ("l2_normalize_rows", vec![m(4, 3)], |t, v| t.l2_normalize_rows(v[0]).unwrap()),
        ("dropout", vec![m(6, 4)], |t, v| {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            t.dropout(v[0], 0.4, true, &mut rng).unwrap()
        }),
        ("weighted_bce_with_logits", vec![m(6, 1)], |t, v| {
            let y = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
            let w = [1.0, 0.5, 2.0, 1.0, 0.0, 1.5];
            t.weighted_bce_with_logits(v[0], &y, Some(&w), 3.0).unwrap()
        }),
    ]
}

/// Ten sessions sharing identifiers in a few overlapping groups.
pub fn toy_graph() -> (riskgraph::TemporalGraph, Matrix) {
    let ids = [
        ("a0", "d0", "i0"),
        ("a1", "d0", "i1"),
        ("a0", "d1", "i0"),
        ("a2", "d1", "i1"),
        ("a1", "d0", "i0"),
        ("a3", "d2", "i2"),
        ("a0", "d2", "i1"),
        ("a2", "d0", "i2"),
        ("a1", "d1", "i0"),
        ("a3", "d0", "i1"),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let sessions: Vec<Session> = ids
        .iter()
        .enumerate()
        .map(|(i, (a, d, ip))| Session {
            account_id: a.to_string(),
            device_id: d.to_string(),
            ip_address: ip.to_string(),
            t: (i as i64) * 3_600,
            x: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
            y: u8::from(i % 3 == 0),
            tau: (i as i64) * 3_600 + 5_000,
        })
        .collect();
    let g = build_graph(sessions, GraphConfig::new(8 * 3_600, 3).unwrap()).unwrap();
    let inputs = augment_inputs(&g);
    (g, inputs)
}

fn model_loss(model: &Model, batch: &EgoBatch, labels: &[f64]) -> f64 {
    let mut tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fwd = model.forward(&mut tape, batch, true, false, &mut rng).unwrap();
    let loss = tape.weighted_bce_with_logits(fwd.logits, labels, None, 2.0).unwrap();
    tape.value(loss).item()
}

/// Worst relative error over all parameters of a full model of `variant`.
pub fn check_model(variant: Variant) -> f64 {
    let (g, inputs) = toy_graph();
    let cfg = ModelConfig {
        variant,
        layers: 2,
        hidden_dim: 4,
        dropout: 0.25,
        l2_norm: true,
        edge_type_embed_dim: 2,
        dt_embed_dim: 3,
        ..ModelConfig::default()
    };
    let model = Model::new(cfg, inputs.cols(), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let seeds: Vec<NodeId> = (5..10).map(NodeId::from).collect();
    let batch = full_neighborhood_batch(&g, &seeds, 2, &inputs).unwrap();
    assert!(!batch.edges.is_empty());
    let labels: Vec<f64> = seeds.iter().map(|&v| f64::from(g.session(v).y)).collect();

    let mut tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fwd = model.forward(&mut tape, &batch, true, true, &mut rng).unwrap();
    let loss = tape.weighted_bce_with_logits(fwd.logits, &labels, None, 2.0).unwrap();
    let mut grads = tape.backward(loss).unwrap();

    let mut worst: f64 = 0.0;
    for (i, &var) in fwd.params.iter().enumerate() {
        let analytic = grads.take_or_zeros(var, tape.shape(var));
        let mut numeric = vec![0.0; analytic.data().len()];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let mut plus = model.clone();
            plus.params.values_mut()[i].data_mut()[j] += STEP;
            let mut minus = model.clone();
            minus.params.values_mut()[i].data_mut()[j] -= STEP;
            *slot = (model_loss(&plus, &batch, &labels) - model_loss(&minus, &batch, &labels)) / (2.0 * STEP);
        }
        worst = worst.max(gradient_error(analytic.data(), &numeric));
    }
    worst
}
