use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::linalg::{dot, sigmoid};
use crate::model::ModelParameters;

/// Which endpoint of an edge a message is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Destination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Mean,
    Last,
    Sum,
}

impl Aggregator {
    pub const ALL: [Aggregator; 3] = [Aggregator::Mean, Aggregator::Last, Aggregator::Sum];
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregator::Mean => "mean",
            Aggregator::Last => "last",
            Aggregator::Sum => "sum",
        })
    }
}

impl FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregator::Mean),
            "last" => Ok(Aggregator::Last),
            "sum" => Ok(Aggregator::Sum),
            _ => Err(Error::Config(format!("unknown aggregator `{s}`"))),
        }
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { what, expected, got });
    }
    Ok(())
}

/// `φ(Δt)`: interleaved `(cos ω_i Δt, sin ω_i Δt)` pairs scaled by `sqrt(1/d_t)`.
pub fn time_encode(delta_t: f64, params: &ModelParameters) -> Vec<f64> {
    encode_with(delta_t, &params.omega)
}

pub(crate) fn encode_with(delta_t: f64, omega: &[f64]) -> Vec<f64> {
    let scale = (1.0 / (2 * omega.len()) as f64).sqrt();
    let mut out = Vec::with_capacity(2 * omega.len());
    for &w in omega {
        let (s, c) = (w * delta_t).sin_cos();
        out.push(scale * c);
        out.push(scale * s);
    }
    out
}

/// `W_side · [s_self ‖ s_other ‖ feat ‖ φ(Δt)] + b_side`.
pub fn compute_message(
    s_self: &[f64],
    s_other: &[f64],
    feat: &[f64],
    delta_t: f64,
    side: Side,
    params: &ModelParameters,
) -> Result<Vec<f64>> {
    let dims = &params.dims;
    check_len("message s_self", dims.d_s, s_self.len())?;
    check_len("message s_other", dims.d_s, s_other.len())?;
    check_len("message feature", dims.d_e, feat.len())?;
    let (w, b) = match side {
        Side::Source => (&params.msg_src, &params.msg_src_bias),
        Side::Destination => (&params.msg_dst, &params.msg_dst_bias),
    };
    let mut input = Vec::with_capacity(dims.message_input());
    input.extend_from_slice(s_self);
    input.extend_from_slice(s_other);
    input.extend_from_slice(feat);
    input.extend(time_encode(delta_t, params));
    let mut out = w.matvec(&input);
    for (o, bi) in out.iter_mut().zip(b) {
        *o += bi;
    }
    Ok(out)
}

/// Combines the messages a node received in one batch, in arrival order.
pub fn aggregate_messages(msgs: &[(Vec<f64>, f64)], mode: Aggregator) -> Result<Vec<f64>> {
    let Some((first, _)) = msgs.first() else {
        return Err(Error::Contract("cannot aggregate an empty message list".into()));
    };
    let width = first.len();
    for (m, _) in msgs {
        check_len("aggregated message", width, m.len())?;
    }
    match mode {
        Aggregator::Last => {
            let mut best = 0;
            for (i, (_, t)) in msgs.iter().enumerate() {
                if *t >= msgs[best].1 {
                    best = i;
                }
            }
            Ok(msgs[best].0.clone())
        }
        Aggregator::Sum | Aggregator::Mean => {
            let mut acc = vec![0.0; width];
            for (m, _) in msgs {
                for (a, x) in acc.iter_mut().zip(m) {
                    *a += x;
                }
            }
            if mode == Aggregator::Mean {
                let n = msgs.len() as f64;
                for a in &mut acc {
                    *a /= n;
                }
            }
            Ok(acc)
        }
    }
}

/// One GRU step of node memory.
pub fn gru_update(msg: &[f64], s_prev: &[f64], params: &ModelParameters) -> Result<Vec<f64>> {
    let dims = &params.dims;
    check_len("gru message", dims.d_m, msg.len())?;
    check_len("gru state", dims.d_s, s_prev.len())?;
    let g = &params.gru;
    let gate = |w: &crate::model::Matrix, u: &crate::model::Matrix, b: &[f64], s: &[f64]| {
        let wm = w.matvec(msg);
        let us = u.matvec(s);
        wm.iter()
            .zip(&us)
            .zip(b)
            .map(|((a, c), bi)| a + c + bi)
            .collect::<Vec<f64>>()
    };
    let z: Vec<f64> = gate(&g.w_z, &g.u_z, &g.b_z, s_prev).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = gate(&g.w_r, &g.u_r, &g.b_r, s_prev).into_iter().map(sigmoid).collect();
    let rs: Vec<f64> = r.iter().zip(s_prev).map(|(a, b)| a * b).collect();
    let cand: Vec<f64> = gate(&g.w_h, &g.u_h, &g.b_h, &rs).into_iter().map(f64::tanh).collect();
    Ok(z.iter()
        .zip(&cand)
        .zip(s_prev)
        .map(|((zi, ci), si)| (1.0 - zi) * ci + zi * si)
        .collect())
}

/// `sigmoid(w_p · [h_u ‖ h_v] + b_p)`.
pub fn predict_link(h_u: &[f64], h_v: &[f64], params: &ModelParameters) -> f64 {
    let d = params.dims.d;
    let logit = dot(&params.predictor_w[..d], h_u) + dot(&params.predictor_w[d..], h_v);
    sigmoid(logit + params.predictor_b)
}

/// Attention state of one head over one neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadRecord {
    pub query: Vec<f64>,
    /// `q · k_u / sqrt(d_k)` per neighbor, in neighbor order.
    pub logits: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl HeadRecord {
    /// Normalized attention weights.
    pub fn weights(&self) -> Vec<f64> {
        let (scores, z) = softmax_parts(&self.logits);
        scores.into_iter().map(|s| s / z).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub embedding: Vec<f64>,
    pub heads: Vec<HeadRecord>,
}

/// `[repr ‖ φ(0)]`, the full query-side input.
pub fn query_input(repr: &[f64], params: &ModelParameters) -> Vec<f64> {
    let mut out = Vec::with_capacity(repr.len() + params.dims.d_t);
    out.extend_from_slice(repr);
    out.extend(time_encode(0.0, params));
    out
}

/// `[repr ‖ feat ‖ φ(Δt)]`, the full key/value-side input.
pub fn kv_input(repr_feat: &[f64], delta_t: f64, params: &ModelParameters) -> Vec<f64> {
    let mut out = Vec::with_capacity(repr_feat.len() + params.dims.d_t);
    out.extend_from_slice(repr_feat);
    out.extend(time_encode(delta_t, params));
    out
}

pub fn head_query(q_in: &[f64], layer: usize, head: usize, params: &ModelParameters) -> Vec<f64> {
    params.attention[layer].query[head].vecmat(q_in)
}

/// `(q·k / sqrt(d_k), v)` for one neighbor under one head.
pub fn head_key_value(
    query: &[f64],
    kv_in: &[f64],
    layer: usize,
    head: usize,
    params: &ModelParameters,
) -> (f64, Vec<f64>) {
    let att = &params.attention[layer];
    let k = att.key[head].vecmat(kv_in);
    let v = att.value[head].vecmat(kv_in);
    let scale = (params.dims.d_k as f64).sqrt();
    (dot(query, &k) / scale, v)
}

/// `exp(l - max)` per logit and their sum.
pub fn softmax_parts(logits: &[f64]) -> (Vec<f64>, f64) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scores: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z = scores.iter().sum();
    (scores, z)
}

/// Concatenates head outputs and applies `W_O`.
pub fn combine_heads(head_outputs: &[Vec<f64>], layer: usize, params: &ModelParameters) -> Vec<f64> {
    let out_proj = &params.attention[layer].output;
    let d_k = params.dims.d_k;
    let mut out = vec![0.0; params.dims.d];
    for (h, ho) in head_outputs.iter().enumerate() {
        let part = out_proj.vecmat_rows(ho, h * d_k);
        for (o, p) in out.iter_mut().zip(part) {
            *o += p;
        }
    }
    out
}

/// Weighted value sum divided by the normalizer.
pub fn head_output(scores: &[f64], z: f64, values: &[Vec<f64>], d_k: usize) -> Vec<f64> {
    let mut num = vec![0.0; d_k];
    for (s, v) in scores.iter().zip(values) {
        for (n, x) in num.iter_mut().zip(v) {
            *n += s * x;
        }
    }
    num.into_iter().map(|x| x / z).collect()
}

/// Multi-head temporal attention of one node over its sampled neighborhood.
///
/// `query_repr` is the node's own representation for `layer`; each neighbor
/// contributes `(repr_u ‖ e, t_e)`. Time encodings (`φ(0)` for the query,
/// `φ(t_query - t_e)` for neighbors) are appended here. An empty
/// neighborhood yields the zero vector and no head records.
pub fn temporal_attention(
    query_repr: &[f64],
    neighbors: &[(Vec<f64>, f64)],
    t_query: f64,
    layer: usize,
    params: &ModelParameters,
) -> Result<AttentionOutput> {
    let dims = &params.dims;
    if layer >= dims.layers {
        return Err(Error::Dimension {
            what: "attention layer",
            expected: dims.layers,
            got: layer,
        });
    }
    check_len("attention query", dims.repr_width(layer), query_repr.len())?;
    for (x, _) in neighbors {
        check_len("attention neighbor", dims.repr_width(layer) + dims.d_e, x.len())?;
    }
    if neighbors.is_empty() {
        return Ok(AttentionOutput {
            embedding: vec![0.0; dims.d],
            heads: Vec::new(),
        });
    }
    let q_in = query_input(query_repr, params);
    let kv_ins: Vec<Vec<f64>> = neighbors
        .iter()
        .map(|(x, t)| kv_input(x, t_query - t, params))
        .collect();
    let mut heads = Vec::with_capacity(dims.heads);
    let mut outputs = Vec::with_capacity(dims.heads);
    for h in 0..dims.heads {
        let query = head_query(&q_in, layer, h, params);
        let mut logits = Vec::with_capacity(neighbors.len());
        let mut values = Vec::with_capacity(neighbors.len());
        for kv in &kv_ins {
            let (l, v) = head_key_value(&query, kv, layer, h, params);
            logits.push(l);
            values.push(v);
        }
        let (scores, z) = softmax_parts(&logits);
        outputs.push(head_output(&scores, z, &values, dims.d_k));
        heads.push(HeadRecord { query, logits, values });
    }
    Ok(AttentionOutput {
        embedding: combine_heads(&outputs, layer, params),
        heads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Matrix, ModelDims};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(seed: u64) -> ModelParameters {
        ModelParameters::init(seed, ModelDims::default()).unwrap()
    }

    fn zero_params() -> ModelParameters {
        ModelParameters::zeros(ModelDims::default()).unwrap()
    }

    #[test]
    fn time_encoding_at_zero() {
        let p = zero_params();
        assert_eq!(time_encode(0.0, &p), vec![0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn time_encoding_quarter_period() {
        let mut p = zero_params();
        p.omega = vec![2.0, 0.3];
        let enc = time_encode(std::f64::consts::PI / 4.0, &p);
        assert!(enc[0].abs() < 1e-15);
        assert!((enc[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn time_encoding_norm_is_half() {
        let p = params(1);
        for dt in [0.0, 0.5, 3.0, 1e6] {
            let n2: f64 = time_encode(dt, &p).iter().map(|x| x * x).sum();
            assert!((n2 - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_message_weights_give_zero() {
        let p = zero_params();
        let m = compute_message(&[1.0; 8], &[2.0; 8], &[3.0; 4], 1.5, Side::Source, &p).unwrap();
        assert_eq!(m, vec![0.0; 8]);
    }

    #[test]
    fn identity_message_returns_concatenation() {
        let dims = ModelDims {
            d_s: 2,
            d_e: 1,
            d_t: 2,
            d_m: 7,
            ..ModelDims::default()
        };
        let mut p = ModelParameters::zeros(dims).unwrap();
        p.msg_dst = Matrix::identity(7);
        let m = compute_message(&[1.0, 2.0], &[3.0, 4.0], &[5.0], 0.0, Side::Destination, &p).unwrap();
        let s = (0.5f64).sqrt();
        assert_eq!(m, vec![1.0, 2.0, 3.0, 4.0, 5.0, s, 0.0]);
    }

    #[test]
    fn message_sides_use_their_own_weights() {
        let p = params(4);
        let a = compute_message(&[0.1; 8], &[0.2; 8], &[0.3; 4], 1.0, Side::Source, &p).unwrap();
        let b = compute_message(&[0.1; 8], &[0.2; 8], &[0.3; 4], 1.0, Side::Destination, &p).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn message_dimension_mismatch() {
        let p = params(4);
        let err = compute_message(&[0.1; 7], &[0.2; 8], &[0.3; 4], 1.0, Side::Source, &p).unwrap_err();
        assert!(matches!(
            err,
            Error::Dimension {
                expected: 8,
                got: 7,
                ..
            }
        ));
    }

    #[test]
    fn aggregation_examples() {
        let msgs = vec![(vec![1.0, 2.0], 1.0), (vec![3.0, 4.0], 2.0)];
        assert_eq!(aggregate_messages(&msgs, Aggregator::Sum).unwrap(), vec![4.0, 6.0]);
        assert_eq!(aggregate_messages(&msgs, Aggregator::Mean).unwrap(), vec![2.0, 3.0]);
        let single = vec![(vec![7.0, 8.0], 1.0)];
        for mode in Aggregator::ALL {
            assert_eq!(aggregate_messages(&single, mode).unwrap(), vec![7.0, 8.0]);
        }
        let timed = vec![(vec![3.0], 3.0), (vec![7.0], 7.0), (vec![5.0], 5.0)];
        assert_eq!(aggregate_messages(&timed, Aggregator::Last).unwrap(), vec![7.0]);
        let tied = vec![(vec![1.0], 2.0), (vec![2.0], 2.0)];
        assert_eq!(aggregate_messages(&tied, Aggregator::Last).unwrap(), vec![2.0]);
        assert!(matches!(
            aggregate_messages(&[], Aggregator::Mean),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn aggregator_parses() {
        for mode in Aggregator::ALL {
            assert_eq!(mode.to_string().parse::<Aggregator>().unwrap(), mode);
        }
        assert!("max".parse::<Aggregator>().is_err());
    }

    #[test]
    fn zero_gru_halves_state() {
        let p = zero_params();
        let s = [0.4, -0.2, 1.0, 0.0, 2.0, -3.0, 0.5, 0.25];
        let out = gru_update(&[9.0; 8], &s, &p).unwrap();
        let expected: Vec<f64> = s.iter().map(|x| 0.5 * x).collect();
        assert_eq!(out, expected);
        assert_eq!(gru_update(&[1.0; 8], &[0.0; 8], &p).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn gru_stays_in_unit_box() {
        let p = params(9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let m: Vec<f64> = (0..8).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let s: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let out = gru_update(&m, &s, &p).unwrap();
            assert!(out.iter().all(|x| x.abs() <= 1.0));
        }
    }

    #[test]
    fn predictor_examples() {
        let mut p = zero_params();
        assert_eq!(predict_link(&[3.0; 8], &[-1.0; 8], &p), 0.5);
        p.predictor_b = 20.0;
        assert!(predict_link(&[0.0; 8], &[0.0; 8], &p) > 0.999);
    }

    #[test]
    fn empty_neighborhood_is_zero() {
        let p = params(3);
        let out = temporal_attention(&[0.3; 8], &[], 5.0, 0, &p).unwrap();
        assert_eq!(out.embedding, vec![0.0; 8]);
        assert!(out.heads.is_empty());
    }

    #[test]
    fn single_neighbor_gets_full_weight() {
        let p = params(3);
        let out = temporal_attention(&[0.3; 8], &[(vec![0.1; 12], 2.0)], 5.0, 0, &p).unwrap();
        for head in &out.heads {
            assert_eq!(head.weights(), vec![1.0]);
        }
        let head_outputs: Vec<Vec<f64>> = out.heads.iter().map(|h| h.values[0].clone()).collect();
        assert_eq!(out.embedding, combine_heads(&head_outputs, 0, &p));
    }

    #[test]
    fn equal_keys_split_evenly() {
        let p = params(3);
        let x = vec![0.7; 12];
        let out = temporal_attention(&[0.3; 8], &[(x.clone(), 2.0), (x, 2.0)], 5.0, 0, &p).unwrap();
        for head in &out.heads {
            assert_eq!(head.weights(), vec![0.5, 0.5]);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let p = params(5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let k = rng.gen_range(1..12);
            let nbrs: Vec<(Vec<f64>, f64)> = (0..k)
                .map(|_| {
                    (
                        (0..12).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                        rng.gen_range(0.0..10.0),
                    )
                })
                .collect();
            let out = temporal_attention(&[0.2; 8], &nbrs, 10.0, 0, &p).unwrap();
            for head in &out.heads {
                assert!((head.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rejects_bad_layer_and_width() {
        let p = params(5);
        assert!(temporal_attention(&[0.2; 8], &[], 1.0, 1, &p).is_err());
        assert!(temporal_attention(&[0.2; 7], &[], 1.0, 0, &p).is_err());
        assert!(temporal_attention(&[0.2; 8], &[(vec![0.0; 3], 0.0)], 1.0, 0, &p).is_err());
    }
}
