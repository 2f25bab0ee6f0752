//! Speed planning along a fixed path. The unknowns are the squared speeds
//! `w_i` at `n` equally spaced arc-length samples.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linear::{InstanceMeta, LinearGlbProblem, PieceData};

#[derive(Debug, Error)]
pub enum SpeedPlanError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("curvature has {found} samples, expected {expected}")]
    CurvatureLength { expected: usize, found: usize },
    #[error("curvature profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("negative squared speed {value} at index {index}")]
    NegativeSpeed { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedPlanSpec {
    /// Path length.
    pub s_f: f64,
    pub n: usize,
    /// `k_i = k(h·i)`, one per sample.
    pub curvature: Vec<f64>,
    pub v_bar: f64,
    pub a_t: f64,
    pub a_n: f64,
}

impl SpeedPlanSpec {
    /// Straight path.
    pub fn flat(s_f: f64, n: usize, v_bar: f64, a_t: f64, a_n: f64) -> Self {
        Self {
            s_f,
            n,
            curvature: vec![0.0; n],
            v_bar,
            a_t,
            a_n,
        }
    }

    pub fn step(&self) -> f64 {
        self.s_f / (self.n as f64 - 1.0)
    }

    fn validate(&self) -> Result<(), SpeedPlanError> {
        if self.n < 2 {
            return Err(SpeedPlanError::TooFewSamples(self.n));
        }
        for (name, v) in [
            ("s_f", self.s_f),
            ("v_bar", self.v_bar),
            ("A_T", self.a_t),
            ("A_N", self.a_n),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SpeedPlanError::NonPositive(name));
            }
        }
        if self.curvature.len() != self.n {
            return Err(SpeedPlanError::CurvatureLength {
                expected: self.n,
                found: self.curvature.len(),
            });
        }
        if self.curvature.iter().any(|k| !k.is_finite()) {
            return Err(SpeedPlanError::Profile("non-finite curvature".into()));
        }
        Ok(())
    }

    /// `min(v̄², A_N/|k_i|)` inside, 0 at both ends.
    pub fn caps(&self) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    return 0.0;
                }
                let k = self.curvature[i].abs();
                let speed = self.v_bar * self.v_bar;
                if k == 0.0 {
                    speed
                } else {
                    speed.min(self.a_n / k)
                }
            })
            .collect()
    }
}

/// Two pieces: `w_i <= hA_T + w_{i+1}` (forward) and `w_i <= hA_T + w_{i−1}`
/// (backward). Rows without a neighbour carry `b_i = U_i`, which is 0 at
/// the endpoints.
pub fn speed_planning_problem(spec: &SpeedPlanSpec) -> Result<LinearGlbProblem, SpeedPlanError> {
    spec.validate()?;
    let n = spec.n;
    let ha = spec.step() * spec.a_t;
    let cap = spec.caps();
    let mut forward = PieceData::new(Vec::with_capacity(n), vec![0.0; n]);
    let mut backward = PieceData::new(Vec::with_capacity(n), vec![0.0; n]);
    for (i, &u) in cap.iter().enumerate() {
        if i + 1 < n {
            forward.triplets.push((i, i + 1, 1.0));
            forward.b[i] = ha;
        } else {
            forward.b[i] = u;
        }
        if i > 0 {
            backward.triplets.push((i, i - 1, 1.0));
            backward.b[i] = ha;
        } else {
            backward.b[i] = u;
        }
    }
    let p = LinearGlbProblem::new(n, vec![forward, backward], cap)
        .expect("speed planning pieces are valid by construction");
    Ok(p.with_meta(InstanceMeta {
        generator: "speedplan".into(),
        seed: None,
        params: serde_json::json!({
            "s_f": spec.s_f,
            "n": n,
            "v_bar": spec.v_bar,
            "A_T": spec.a_t,
            "A_N": spec.a_n,
        }),
    }))
}

/// Travel time `2h Σ 1/(√w_i + √w_{i+1})`; `+∞` if the vehicle stops
/// between two samples.
pub fn maneuver_time(w: &[f64], h: f64) -> Result<f64, SpeedPlanError> {
    if let Some((index, &value)) = w.iter().enumerate().find(|(_, &v)| v < 0.0 || v.is_nan()) {
        return Err(SpeedPlanError::NegativeSpeed { index, value });
    }
    let mut total = 0.0;
    for pair in w.windows(2) {
        let speed = pair[0].sqrt() + pair[1].sqrt();
        if speed == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += 1.0 / speed;
    }
    Ok(2.0 * h * total)
}

/// Reads `(s, k)` rows. A non-numeric first row is taken as a header.
pub fn read_curvature_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>, SpeedPlanError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(SpeedPlanError::Profile(format!(
                "row {} needs two columns",
                line + 1
            )));
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(s), Ok(k)) => out.push((s, k)),
            _ if line == 0 => continue,
            _ => {
                return Err(SpeedPlanError::Profile(format!(
                    "row {} is not numeric",
                    line + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(SpeedPlanError::Profile("no samples".into()));
    }
    if out.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(SpeedPlanError::Profile("arc length must increase".into()));
    }
    Ok(out)
}

/// Linear interpolation of the samples at `s = h·i`, `i = 0..n`, held
/// constant outside the sampled range.
pub fn resample_curvature(samples: &[(f64, f64)], s_f: f64, n: usize) -> Vec<f64> {
    let h = if n > 1 { s_f / (n as f64 - 1.0) } else { 0.0 };
    (0..n)
        .map(|i| {
            let s = h * i as f64;
            let hi = samples.partition_point(|&(si, _)| si < s);
            if hi == 0 {
                samples[0].1
            } else if hi == samples.len() {
                samples[samples.len() - 1].1
            } else {
                let (s0, k0) = samples[hi - 1];
                let (s1, k1) = samples[hi];
                k0 + (k1 - k0) * (s - s0) / (s1 - s0)
            }
        })
        .collect()
}
