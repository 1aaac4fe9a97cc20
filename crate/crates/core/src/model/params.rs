use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Matrix, ModelDims};

pub const PARAMS_HEADER: &str = "# streamtgn-params v1";

#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub b_z: Vec<f64>,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub b_r: Vec<f64>,
    pub w_h: Matrix,
    pub u_h: Matrix,
    pub b_h: Vec<f64>,
}

/// Projections of one attention layer. Query/key/value use the row-vector
/// convention (`x · W`), one matrix per head.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub query: Vec<Matrix>,
    pub key: Vec<Matrix>,
    pub value: Vec<Matrix>,
    /// `(heads · d_k) × d`, applied to the concatenated head outputs.
    pub output: Matrix,
}

/// Every learnable tensor of the model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub dims: ModelDims,
    pub omega: Vec<f64>,
    pub msg_src: Matrix,
    pub msg_src_bias: Vec<f64>,
    pub msg_dst: Matrix,
    pub msg_dst_bias: Vec<f64>,
    pub gru: GruParams,
    pub attention: Vec<AttentionParams>,
    pub predictor_w: Vec<f64>,
    pub predictor_b: f64,
}

/// Geometric frequency ladder from 1 down to 1e-4.
pub fn default_frequencies(count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![1.0; count];
    }
    let step = 4.0 / (count - 1) as f64;
    (0..count).map(|i| 1.0 / 10f64.powf(i as f64 * step)).collect()
}

impl ModelParameters {
    /// All-zero tensors of the right shapes, with the default frequency ladder.
    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let msg_in = dims.message_input();
        let attention = (0..dims.layers)
            .map(|l| AttentionParams {
                query: vec![Matrix::zeros(dims.query_width(l), dims.d_k); dims.heads],
                key: vec![Matrix::zeros(dims.kv_width(l), dims.d_k); dims.heads],
                value: vec![Matrix::zeros(dims.kv_width(l), dims.d_k); dims.heads],
                output: Matrix::zeros(dims.heads * dims.d_k, dims.d),
            })
            .collect();
        Ok(Self {
            dims,
            omega: default_frequencies(dims.frequencies()),
            msg_src: Matrix::zeros(dims.d_m, msg_in),
            msg_src_bias: vec![0.0; dims.d_m],
            msg_dst: Matrix::zeros(dims.d_m, msg_in),
            msg_dst_bias: vec![0.0; dims.d_m],
            gru: GruParams {
                w_z: Matrix::zeros(dims.d_s, dims.d_m),
                u_z: Matrix::zeros(dims.d_s, dims.d_s),
                b_z: vec![0.0; dims.d_s],
                w_r: Matrix::zeros(dims.d_s, dims.d_m),
                u_r: Matrix::zeros(dims.d_s, dims.d_s),
                b_r: vec![0.0; dims.d_s],
                w_h: Matrix::zeros(dims.d_s, dims.d_m),
                u_h: Matrix::zeros(dims.d_s, dims.d_s),
                b_h: vec![0.0; dims.d_s],
            },
            attention,
            predictor_w: vec![0.0; 2 * dims.d],
            predictor_b: 0.0,
        })
    }

    /// Deterministic Glorot-uniform initialisation: every matrix entry is
    /// drawn from `[-a, a]` with `a = sqrt(6 / (rows + cols))`, biases are
    /// zero and the time frequencies follow [`default_frequencies`].
    pub fn init(seed: u64, dims: ModelDims) -> Result<Self> {
        let mut params = Self::zeros(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        params.visit_mut(|name, (rows, cols), values| {
            if is_random_tensor(name) {
                let a = (6.0 / (rows + cols) as f64).sqrt();
                for v in values.iter_mut() {
                    *v = rng.gen_range(-a..=a);
                }
            }
        });
        Ok(params)
    }

    /// Visits every tensor in canonical order as `(name, (rows, cols), values)`.
    pub fn visit(&self, mut f: impl FnMut(&str, (usize, usize), &[f64])) {
        let mut clone = self.clone();
        clone.visit_mut(|name, shape, values| f(name, shape, values));
    }

    pub fn visit_mut(&mut self, mut f: impl FnMut(&str, (usize, usize), &mut [f64])) {
        let d_m = self.dims.d_m;
        let d_s = self.dims.d_s;
        let n_omega = self.omega.len();
        f("time.omega", (1, n_omega), &mut self.omega);
        let shape = self.msg_src.shape();
        f("message.src.weight", shape, self.msg_src.data_mut());
        f("message.src.bias", (1, d_m), &mut self.msg_src_bias);
        let shape = self.msg_dst.shape();
        f("message.dst.weight", shape, self.msg_dst.data_mut());
        f("message.dst.bias", (1, d_m), &mut self.msg_dst_bias);
        let g = &mut self.gru;
        for (gate, w, u, b) in [
            ("z", &mut g.w_z, &mut g.u_z, &mut g.b_z),
            ("r", &mut g.w_r, &mut g.u_r, &mut g.b_r),
            ("h", &mut g.w_h, &mut g.u_h, &mut g.b_h),
        ] {
            let shape = w.shape();
            f(&format!("gru.w_{gate}"), shape, w.data_mut());
            let shape = u.shape();
            f(&format!("gru.u_{gate}"), shape, u.data_mut());
            f(&format!("gru.b_{gate}"), (1, d_s), b);
        }
        for (l, layer) in self.attention.iter_mut().enumerate() {
            for h in 0..layer.query.len() {
                for (kind, m) in [
                    ("query", &mut layer.query[h]),
                    ("key", &mut layer.key[h]),
                    ("value", &mut layer.value[h]),
                ] {
                    let shape = m.shape();
                    f(&format!("attention.{l}.head.{h}.{kind}"), shape, m.data_mut());
                }
            }
            let shape = layer.output.shape();
            f(&format!("attention.{l}.output"), shape, layer.output.data_mut());
        }
        let n_w = self.predictor_w.len();
        f("predictor.weight", (1, n_w), &mut self.predictor_w);
        f("predictor.bias", (1, 1), std::slice::from_mut(&mut self.predictor_b));
    }

    /// Text dump: header, a `dims` line, then for each tensor a
    /// `tensor <name> <rows> <cols>` line followed by one line per row.
    /// Values carry 17 significant digits, so a load restores them exactly.
    pub fn to_text(&self) -> String {
        let d = &self.dims;
        let mut out = String::new();
        let _ = writeln!(out, "{PARAMS_HEADER}");
        let _ = writeln!(
            out,
            "dims d_s={} d_e={} d_t={} d_x={} d_m={} d_k={} heads={} d={} layers={}",
            d.d_s, d.d_e, d.d_t, d.d_x, d.d_m, d.d_k, d.heads, d.d, d.layers
        );
        self.visit(|name, (rows, cols), values| {
            let _ = writeln!(out, "tensor {name} {rows} {cols}");
            for r in 0..rows {
                let row: Vec<String> = values[r * cols..(r + 1) * cols]
                    .iter()
                    .map(|v| format!("{v:.16e}"))
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        });
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, h)) if h == PARAMS_HEADER => {}
            _ => return Err(Error::parse(1, format!("expected header `{PARAMS_HEADER}`"))),
        }
        let (dims_line, dims_text) = lines.next().ok_or_else(|| Error::parse(2, "missing dims line"))?;
        let dims = parse_dims(dims_line, dims_text)?;
        let mut tensors: HashMap<String, (usize, (usize, usize), Vec<f64>)> = HashMap::new();
        while let Some((line_no, line)) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "tensor" {
                return Err(Error::parse(line_no, "expected `tensor <name> <rows> <cols>`"));
            }
            let rows: usize = parts[2].parse().map_err(|_| Error::parse(line_no, "bad row count"))?;
            let cols: usize = parts[3]
                .parse()
                .map_err(|_| Error::parse(line_no, "bad column count"))?;
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (row_no, row) = lines.next().ok_or_else(|| Error::parse(line_no, "tensor truncated"))?;
                let before = values.len();
                for tok in row.split_whitespace() {
                    values.push(
                        tok.parse::<f64>()
                            .map_err(|_| Error::parse(row_no, format!("bad number `{tok}`")))?,
                    );
                }
                if values.len() - before != cols {
                    return Err(Error::parse(row_no, format!("expected {cols} values")));
                }
            }
            tensors.insert(parts[1].to_string(), (line_no, (rows, cols), values));
        }
        let mut params = Self::zeros(dims).map_err(|e| Error::parse(dims_line, e.to_string()))?;
        let mut failure = None;
        params.visit_mut(|name, shape, slot| {
            if failure.is_some() {
                return;
            }
            match tensors.remove(name) {
                None => failure = Some(Error::parse(0, format!("missing tensor `{name}`"))),
                Some((line_no, got, _)) if got != shape => {
                    failure = Some(Error::parse(
                        line_no,
                        format!("tensor `{name}` has shape {got:?}, expected {shape:?}"),
                    ))
                }
                Some((_, _, values)) => slot.copy_from_slice(&values),
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        if let Some((name, (line_no, _, _))) = tensors.into_iter().next() {
            return Err(Error::parse(line_no, format!("unknown tensor `{name}`")));
        }
        Ok(params)
    }

    pub fn tensor_count(&self) -> usize {
        let mut n = 0;
        self.visit(|_, _, _| n += 1);
        n
    }

    pub fn scalar_count(&self) -> usize {
        let mut n = 0;
        self.visit(|_, _, v| n += v.len());
        n
    }
}

fn is_random_tensor(name: &str) -> bool {
    !(name == "time.omega" || name.ends_with(".bias") || name.starts_with("gru.b_"))
}

fn parse_dims(line_no: usize, text: &str) -> Result<ModelDims> {
    let mut parts = text.split_whitespace();
    if parts.next() != Some("dims") {
        return Err(Error::parse(line_no, "expected `dims` line"));
    }
    let mut dims = ModelDims::default();
    for kv in parts {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, format!("expected key=value, got `{kv}`")))?;
        let v: usize = v
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad value for `{k}`")))?;
        match k {
            "d_s" => dims.d_s = v,
            "d_e" => dims.d_e = v,
            "d_t" => dims.d_t = v,
            "d_x" => dims.d_x = v,
            "d_m" => dims.d_m = v,
            "d_k" => dims.d_k = v,
            "heads" => dims.heads = v,
            "d" => dims.d = v,
            "layers" => dims.layers = v,
            _ => return Err(Error::parse(line_no, format!("unknown dimension `{k}`"))),
        }
    }
    dims.validate().map_err(|e| Error::parse(line_no, e.to_string()))?;
    Ok(dims)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_parameters() {
        let dims = ModelDims::default();
        let a = ModelParameters::init(7, dims).unwrap();
        let b = ModelParameters::init(7, dims).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_ne!(a, ModelParameters::init(8, dims).unwrap());
    }

    #[test]
    fn frequency_ladder() {
        assert_eq!(default_frequencies(1), vec![1.0]);
        assert_eq!(default_frequencies(2), vec![1.0, 1e-4]);
        let dims = ModelDims {
            d_t: 2,
            ..ModelDims::default()
        };
        assert_eq!(ModelParameters::init(0, dims).unwrap().omega, vec![1.0]);
    }

    #[test]
    fn glorot_bounds_and_zero_biases() {
        let p = ModelParameters::init(3, ModelDims::default()).unwrap();
        p.visit(|name, (r, c), v| {
            if is_random_tensor(name) {
                let a = (6.0 / (r + c) as f64).sqrt();
                assert!(v.iter().all(|x| x.abs() <= a), "{name}");
                assert!(v.iter().any(|x| *x != 0.0), "{name}");
            } else if name != "time.omega" {
                assert!(v.iter().all(|x| *x == 0.0), "{name}");
            }
        });
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let dims = ModelDims {
            layers: 2,
            d_x: 3,
            ..ModelDims::default()
        };
        let p = ModelParameters::init(11, dims).unwrap();
        let back = ModelParameters::from_text(&p.to_text()).unwrap();
        assert_eq!(p, back);
        assert_eq!(back.to_text(), p.to_text());
    }

    #[test]
    fn load_reports_bad_lines() {
        let p = ModelParameters::init(1, ModelDims::default()).unwrap();
        let text = p
            .to_text()
            .replacen("tensor time.omega 1 2", "tensor time.omega 1 3", 1);
        match ModelParameters::from_text(&text) {
            Err(Error::Parse { line, .. }) => assert!(line > 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            ModelParameters::from_text("nonsense"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
