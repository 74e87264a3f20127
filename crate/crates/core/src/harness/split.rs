use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::Session;
use crate::tensor::Matrix;

/// Fractions of the time axis given to train, validation and test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 8.0 / 15.0,
            val_frac: 2.0 / 15.0,
            test_frac: 5.0 / 15.0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train_frac, self.val_frac, self.test_frac];
        if parts.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::Config(format!("split fractions {parts:?} must lie in (0, 1)")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions {parts:?} must sum to 1")));
        }
        Ok(())
    }
}

/// Contiguous node-index ranges of a time-sorted stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: std::ops::Range<usize>,
    pub val: std::ops::Range<usize>,
    pub test: std::ops::Range<usize>,
    /// Timestamps where validation and test begin.
    pub boundaries: [i64; 2],
}

/// Cuts the time span `[t_min, t_max]` at the given fractions. A session
/// belongs to the first range whose upper boundary it falls strictly below.
pub fn chronological_split(sessions: &[Session], spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    if sessions.windows(2).any(|w| w[0].t > w[1].t) {
        return Err(Error::Split("sessions are not time-sorted".into()));
    }
    let (first, last) = match (sessions.first(), sessions.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(Error::Split("no sessions".into())),
    };
    if first == last {
        return Err(Error::Split("all sessions share one timestamp".into()));
    }
    let span = (last - first) as f64;
    let b1 = first + (spec.train_frac * span).round() as i64;
    let b2 = first + ((spec.train_frac + spec.val_frac) * span).round() as i64;
    let i1 = sessions.partition_point(|s| s.t < b1);
    let i2 = sessions.partition_point(|s| s.t < b2);
    let splits = Splits {
        train: 0..i1,
        val: i1..i2,
        test: i2..sessions.len(),
        boundaries: [b1, b2],
    };
    for (name, r) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        if r.is_empty() {
            return Err(Error::Split(format!("{name} split is empty")));
        }
    }
    Ok(splits)
}

/// Per-column z-scoring with statistics taken from training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl Standardizer {
    /// Fits on `rows` of `m`; population standard deviation, floored.
    pub fn fit(m: &Matrix, rows: std::ops::Range<usize>) -> Result<Self> {
        if rows.is_empty() || rows.end > m.rows() {
            return Err(Error::Split(format!("cannot fit standardizer on rows {rows:?}")));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; m.cols()];
        for i in rows.clone() {
            for (acc, v) in mean.iter_mut().zip(m.row(i)) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n);
        let mut var = vec![0.0; m.cols()];
        for i in rows {
            for ((acc, v), mu) in var.iter_mut().zip(m.row(i)).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.dim() {
            return Err(Error::Shape {
                op: "standardize",
                detail: format!("{} columns, fitted on {}", m.cols(), self.dim()),
            });
        }
        let mut out = m.clone();
        for i in 0..out.rows() {
            for ((v, mu), sd) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / sd;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(ts: &[i64]) -> Vec<Session> {
        ts.iter()
            .map(|&t| Session {
                account_id: "a".into(),
                device_id: "d".into(),
                ip_address: "i".into(),
                t,
                x: vec![0.0],
                y: 0,
                tau: t,
            })
            .collect()
    }

    #[test]
    fn equal_spacing_gives_8_2_5() {
        let s = at(&(0..15).map(|i| i * 10).collect::<Vec<_>>());
        let sp = chronological_split(&s, &SplitSpec::default()).unwrap();
        assert_eq!((sp.train.len(), sp.val.len(), sp.test.len()), (8, 2, 5));
    }

    #[test]
    fn degenerate_and_empty() {
        assert!(chronological_split(&at(&[5, 5, 5]), &SplitSpec::default()).is_err());
        assert!(chronological_split(&[], &SplitSpec::default()).is_err());
        // everything before the first boundary except the last point
        assert!(chronological_split(&at(&[0, 0, 0, 100]), &SplitSpec::default()).is_err());
    }

    #[test]
    fn standardizer_basics() {
        let m = Matrix::from_rows(&[&[0.0, 7.0], &[2.0, 7.0]]);
        let st = Standardizer::fit(&m, 0..2).unwrap();
        assert_eq!(st.mean, vec![1.0, 7.0]);
        assert_eq!(st.std, vec![1.0, STD_FLOOR]);
        let z = st.apply(&m).unwrap();
        assert_eq!(z.data(), &[-1.0, 0.0, 1.0, 0.0]);
    }
}
