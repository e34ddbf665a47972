use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::features::{FeatureVector23, FEATURE_LEN};

pub const DEFAULT_HIDDEN: usize = 16;
const FORMAT_MAGIC: &str = "dwcgp-network";
const FORMAT_VERSION: u32 = 1;

/// Per-feature z-score parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureNorm {
    pub mean: f64,
    pub scale: f64,
}

impl Default for FeatureNorm {
    fn default() -> Self {
        Self {
            mean: 0.0,
            scale: 1.0,
        }
    }
}

/// Three-layer network: 23 inputs, tansig hidden layer, one linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    hidden: usize,
    /// `hidden × 23`, row-major.
    pub(crate) hidden_weights: Vec<f64>,
    pub(crate) hidden_bias: Vec<f64>,
    pub(crate) output_weights: Vec<f64>,
    pub(crate) output_bias: f64,
    pub(crate) feature_norm: Vec<FeatureNorm>,
}

/// `tanh` written out as the tangent sigmoid.
#[inline]
pub fn tansig(z: f64) -> f64 {
    z.tanh()
}

impl NetworkModel {
    pub fn new(
        hidden_weights: Vec<f64>,
        hidden_bias: Vec<f64>,
        output_weights: Vec<f64>,
        output_bias: f64,
        feature_norm: Vec<FeatureNorm>,
    ) -> Result<Self> {
        let hidden = hidden_bias.len();
        let model = Self {
            hidden,
            hidden_weights,
            hidden_bias,
            output_weights,
            output_bias,
            feature_norm,
        };
        model.validate()?;
        Ok(model)
    }

    /// All parameters zero, identity normalization.
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden,
            hidden_weights: vec![0.0; hidden * FEATURE_LEN],
            hidden_bias: vec![0.0; hidden],
            output_weights: vec![0.0; hidden],
            output_bias: 0.0,
            feature_norm: vec![FeatureNorm::default(); FEATURE_LEN],
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ModelFormat(m));
        if self.hidden == 0 {
            return bad("hidden layer must be non-empty".into());
        }
        if self.hidden_weights.len() != self.hidden * FEATURE_LEN
            || self.output_weights.len() != self.hidden
        {
            return bad(format!(
                "weight shapes inconsistent with 23-{}-1",
                self.hidden
            ));
        }
        if self.feature_norm.len() != FEATURE_LEN {
            return bad(format!("{} feature_norm entries", self.feature_norm.len()));
        }
        if self
            .feature_norm
            .iter()
            .any(|n| !(n.scale > 0.0 && n.scale.is_finite()) || !n.mean.is_finite())
        {
            return bad("feature_norm scales must be positive and finite".into());
        }
        let finite = self
            .hidden_weights
            .iter()
            .chain(&self.hidden_bias)
            .chain(&self.output_weights)
            .chain(std::iter::once(&self.output_bias))
            .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite weight".into());
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> (usize, usize, usize) {
        (FEATURE_LEN, self.hidden, 1)
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden
    }

    pub fn feature_norm(&self) -> &[FeatureNorm] {
        &self.feature_norm
    }

    pub fn n_params(&self) -> usize {
        self.hidden * (FEATURE_LEN + 2) + 1
    }

    pub(crate) fn normalize(&self, v: &FeatureVector23) -> [f64; FEATURE_LEN] {
        let mut x = [0.0; FEATURE_LEN];
        for ((xi, vi), n) in x.iter_mut().zip(&v.0).zip(&self.feature_norm) {
            *xi = (vi - n.mean) / n.scale;
        }
        x
    }

    /// Linear output before clamping, from already-normalized inputs.
    /// Fills `hidden_out` with the tansig activations.
    pub(crate) fn raw_output(&self, x: &[f64; FEATURE_LEN], hidden_out: &mut [f64]) -> f64 {
        let mut out = self.output_bias;
        for k in 0..self.hidden {
            let row = &self.hidden_weights[k * FEATURE_LEN..(k + 1) * FEATURE_LEN];
            let z = self.hidden_bias[k] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
            let a = tansig(z);
            hidden_out[k] = a;
            out += self.output_weights[k] * a;
        }
        out
    }

    /// Unclamped linear output.
    pub fn output(&self, v: &FeatureVector23) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        let x = self.normalize(v);
        let mut h = vec![0.0; self.hidden];
        Ok(self.raw_output(&x, &mut h))
    }

    /// Grass probability clamped to [0, 1].
    pub fn forward(&self, v: &FeatureVector23) -> Result<f64> {
        Ok(self.output(v)?.clamp(0.0, 1.0))
    }

    /// Flattened parameters: hidden weights, hidden bias, output weights, output bias.
    pub(crate) fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.hidden_weights);
        p.extend_from_slice(&self.hidden_bias);
        p.extend_from_slice(&self.output_weights);
        p.push(self.output_bias);
        p
    }

    pub(crate) fn set_params(&mut self, p: &[f64]) {
        let h = self.hidden;
        let nw = h * FEATURE_LEN;
        self.hidden_weights.copy_from_slice(&p[..nw]);
        self.hidden_bias.copy_from_slice(&p[nw..nw + h]);
        self.output_weights.copy_from_slice(&p[nw + h..nw + 2 * h]);
        self.output_bias = p[nw + 2 * h];
    }

    /// Versioned text serialization, 17 significant digits per value.
    pub fn to_text(&self) -> String {
        let num = |v: f64| format!("{v:.16e}");
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{FORMAT_MAGIC} {FORMAT_VERSION} {} {} 1",
            FEATURE_LEN, self.hidden
        );
        let _ = writeln!(s, "hidden_activation tansig");
        let _ = writeln!(s, "output_activation linear");
        let _ = writeln!(s, "[feature_norm]");
        for n in &self.feature_norm {
            let _ = writeln!(s, "{} {}", num(n.mean), num(n.scale));
        }
        let _ = writeln!(s, "[hidden_weights]");
        for row in self.hidden_weights.chunks(FEATURE_LEN) {
            let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
        let _ = writeln!(s, "[hidden_bias]");
        for &v in &self.hidden_bias {
            let _ = writeln!(s, "{}", num(v));
        }
        let _ = writeln!(s, "[output_weights]");
        let cells: Vec<String> = self.output_weights.iter().map(|&v| num(v)).collect();
        let _ = writeln!(s, "{}", cells.join(" "));
        let _ = writeln!(s, "[output_bias]");
        let _ = writeln!(s, "{}", num(self.output_bias));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::ModelFormat(m.to_string());
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("empty model file"))?
            .split_whitespace()
            .collect();
        if header.len() != 5 || header[0] != FORMAT_MAGIC {
            return Err(bad("missing header line"));
        }
        let version: u32 = header[1].parse().map_err(|_| bad("bad version"))?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let dims: Vec<usize> = header[2..]
            .iter()
            .map(|t| t.parse().map_err(|_| bad("bad layer size")))
            .collect::<Result<_>>()?;
        if dims[0] != FEATURE_LEN || dims[2] != 1 {
            return Err(Error::ModelFormat(format!("unsupported layers {dims:?}")));
        }
        let hidden = dims[1];

        let mut section = String::new();
        let mut values: std::collections::HashMap<String, Vec<f64>> = Default::default();
        for line in lines {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.to_string();
                continue;
            }
            if section.is_empty() {
                let mut parts = line.split_whitespace();
                let (key, val) = (parts.next(), parts.next());
                match (key, val) {
                    (Some("hidden_activation"), Some("tansig"))
                    | (Some("output_activation"), Some("linear")) => {}
                    _ => {
                        return Err(Error::ModelFormat(format!(
                            "unsupported attribute `{line}`"
                        )))
                    }
                }
                continue;
            }
            let entry = values.entry(section.clone()).or_default();
            for tok in line.split_whitespace() {
                entry.push(
                    tok.parse()
                        .map_err(|_| Error::ModelFormat(format!("bad number `{tok}`")))?,
                );
            }
        }
        let mut take = |name: &str, len: usize| -> Result<Vec<f64>> {
            let v = values
                .remove(name)
                .ok_or_else(|| Error::ModelFormat(format!("missing [{name}]")))?;
            if v.len() != len {
                return Err(Error::ModelFormat(format!(
                    "[{name}] has {} values, expected {len}",
                    v.len()
                )));
            }
            Ok(v)
        };
        let norm = take("feature_norm", 2 * FEATURE_LEN)?;
        let feature_norm = norm
            .chunks(2)
            .map(|c| FeatureNorm {
                mean: c[0],
                scale: c[1],
            })
            .collect();
        let hidden_weights = take("hidden_weights", hidden * FEATURE_LEN)?;
        let hidden_bias = take("hidden_bias", hidden)?;
        let output_weights = take("output_weights", hidden)?;
        let output_bias = take("output_bias", 1)?[0];
        Self::new(
            hidden_weights,
            hidden_bias,
            output_weights,
            output_bias,
            feature_norm,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_model(hidden: usize, seed: u64) -> NetworkModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = |n: usize| {
            (0..n)
                .map(|_| rng.random_range(-0.5..0.5))
                .collect::<Vec<f64>>()
        };
        let hw = r(hidden * FEATURE_LEN);
        let hb = r(hidden);
        let ow = r(hidden);
        let ob = r(1)[0];
        let norm = r(FEATURE_LEN)
            .into_iter()
            .map(|m| FeatureNorm {
                mean: m * 10.0,
                scale: 1.0 + m.abs() * 3.0,
            })
            .collect();
        NetworkModel::new(hw, hb, ow, ob, norm).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = NetworkModel::zeros(16);
        assert_eq!(m.forward(&FeatureVector23([3.0; 23])).unwrap(), 0.0);
    }

    #[test]
    fn bias_only_path() {
        let mut m = NetworkModel::zeros(1);
        m.output_weights[0] = 1.0;
        m.output_bias = 0.75;
        let p = m.forward(&FeatureVector23([1.0; 23])).unwrap();
        assert_eq!(p, 0.75);
        assert!(p >= 0.5);
    }

    #[test]
    fn forward_matches_scalar_loops() {
        let m = random_model(5, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = FeatureVector23(std::array::from_fn(|_| rng.random_range(-20.0..20.0)));
        let mut out = m.output_bias;
        for k in 0..5 {
            let mut z = m.hidden_bias[k];
            for i in 0..23 {
                let x = (v.0[i] - m.feature_norm[i].mean) / m.feature_norm[i].scale;
                z += m.hidden_weights[k * 23 + i] * x;
            }
            let e = z.exp();
            let t = (e - 1.0 / e) / (e + 1.0 / e);
            out += m.output_weights[k] * t;
        }
        assert!((m.output(&v).unwrap() - out).abs() < 1e-12);
        assert_eq!(m.forward(&v).unwrap(), out.clamp(0.0, 1.0));
    }

    #[test]
    fn non_finite_rejected() {
        let m = random_model(3, 1);
        let mut v = FeatureVector23([0.0; 23]);
        v.0[7] = f64::NAN;
        assert!(matches!(m.forward(&v), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = random_model(16, 3);
        let back = NetworkModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), m.to_text());
    }

    #[test]
    fn malformed_files() {
        assert!(NetworkModel::from_text("").is_err());
        let m = random_model(2, 3).to_text();
        assert!(NetworkModel::from_text(&m.replace("dwcgp-network 1", "dwcgp-network 9")).is_err());
        let truncated: String = m.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(NetworkModel::from_text(&truncated).is_err());
    }
}
