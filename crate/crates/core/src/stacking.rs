//! Delay embedding (Hankel stacking) of sampled channels.

use faer::Mat;

use crate::error::{Error, Result};
use crate::ingest::SignalRecord;

/// Real snapshot matrix: rows are (delayed) states, columns are time steps.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    data: Mat<f64>,
    dt: f64,
    t0: f64,
    stack_depth: usize,
    source_channel: String,
}

impl SnapshotMatrix {
    /// Wraps an arbitrary matrix (stack depth 1 per row, i.e. no embedding).
    pub fn from_matrix(data: Mat<f64>, dt: f64, t0: f64, source: &str) -> Result<Self> {
        if data.nrows() < 1 {
            return Err(Error::ShapeMismatch("snapshot matrix needs at least one row".into()));
        }
        if data.ncols() < 2 {
            return Err(Error::TooFewSnapshots(data.ncols()));
        }
        Ok(Self {
            data,
            dt,
            t0,
            stack_depth: 1,
            source_channel: source.to_string(),
        })
    }

    pub fn data(&self) -> &Mat<f64> {
        &self.data
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn stack_depth(&self) -> usize {
        self.stack_depth
    }

    pub fn source_channel(&self) -> &str {
        &self.source_channel
    }

    /// Keeps only the first `n` columns.
    pub fn truncate_columns(&self, n: usize) -> Result<Self> {
        if n < 2 || n > self.ncols() {
            return Err(Error::TooFewSnapshots(n.min(self.ncols())));
        }
        Ok(Self {
            data: self.data.as_ref().subcols(0, n).to_owned(),
            ..self.clone()
        })
    }

    /// Signal estimate for each column: the first (undelayed) row.
    pub fn leading_row(&self) -> Vec<f64> {
        (0..self.ncols()).map(|j| self.data[(0, j)]).collect()
    }
}

/// Default delay depth: one fifth of the record, e.g. 1000 for 5000 samples.
pub fn default_stack_depth(record_len: usize) -> usize {
    (record_len / 5).max(1)
}

/// Hankel embedding of one channel: entry `(i, j)` is sample `i + j`.
///
/// The result has `stack_depth` rows and `len - stack_depth + 1` columns.
pub fn delay_embed(rec: &SignalRecord, channel: &str, stack_depth: usize) -> Result<SnapshotMatrix> {
    delay_embed_joint(rec, &[channel], stack_depth)
}

/// Embeds several channels and stacks their Hankel blocks vertically
/// (channel-major), giving `channels.len() * stack_depth` rows.
pub fn delay_embed_joint(rec: &SignalRecord, channels: &[&str], stack_depth: usize) -> Result<SnapshotMatrix> {
    let len = rec.len();
    let max = len - 1;
    if stack_depth == 0 || stack_depth > max {
        return Err(Error::StackTooDeep {
            requested: stack_depth,
            max,
            record_len: len,
        });
    }
    if channels.is_empty() {
        return Err(Error::InvalidParameter("no channel selected".into()));
    }
    let series = channels
        .iter()
        .map(|name| rec.channel(name).map(|c| c.values.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    let ncols = len - stack_depth + 1;
    let data = Mat::from_fn(stack_depth * series.len(), ncols, |i, j| {
        series[i / stack_depth][i % stack_depth + j]
    });
    Ok(SnapshotMatrix {
        data,
        dt: rec.dt(),
        t0: rec.t0(),
        stack_depth,
        source_channel: channels.join("+"),
    })
}

/// Splits snapshots into the time-shifted pair `(X1, X2)`: columns `0..n-1`
/// and `1..n`.
pub fn shifted_pair(snap: &SnapshotMatrix) -> Result<(Mat<f64>, Mat<f64>)> {
    let n = snap.ncols();
    if n < 2 {
        return Err(Error::TooFewSnapshots(n));
    }
    let d = snap.data.as_ref();
    Ok((d.subcols(0, n - 1).to_owned(), d.subcols(1, n - 1).to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(values: Vec<f64>) -> SignalRecord {
        SignalRecord::from_samples("x", values, 1.0, 0.0).unwrap()
    }

    #[test]
    fn smallest_hankel() {
        let s = delay_embed(&record(vec![1.0, 2.0, 3.0]), "x", 2).unwrap();
        assert_eq!((s.nrows(), s.ncols()), (2, 2));
        assert_eq!(s.data()[(0, 0)], 1.0);
        assert_eq!(s.data()[(0, 1)], 2.0);
        assert_eq!(s.data()[(1, 0)], 2.0);
        assert_eq!(s.data()[(1, 1)], 3.0);
    }

    #[test]
    fn depth_one_is_identity() {
        let v: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let s = delay_embed(&record(v.clone()), "x", 1).unwrap();
        assert_eq!(s.nrows(), 1);
        assert_eq!(s.leading_row(), v);
    }

    #[test]
    fn full_record_embedding() {
        let v: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.01).sin()).collect();
        let s = delay_embed(&record(v), "x", 1000).unwrap();
        assert_eq!((s.nrows(), s.ncols()), (1000, 4001));
        let (x1, x2) = shifted_pair(&s).unwrap();
        assert_eq!((x1.nrows(), x1.ncols()), (1000, 4000));
        assert_eq!((x2.nrows(), x2.ncols()), (1000, 4000));
    }

    #[test]
    fn too_deep_names_maximum() {
        match delay_embed(&record(vec![0.0; 10]), "x", 10).unwrap_err() {
            Error::StackTooDeep { max, .. } => assert_eq!(max, 9),
            e => panic!("{e}"),
        }
        assert!(delay_embed(&record(vec![0.0; 10]), "x", 9).is_ok());
        assert!(delay_embed(&record(vec![0.0; 10]), "x", 0).is_err());
    }

    #[test]
    fn minimal_pair() {
        let s = SnapshotMatrix::from_matrix(Mat::from_fn(1, 2, |_, j| [4.0, 7.0][j]), 1.0, 0.0, "x").unwrap();
        let (x1, x2) = shifted_pair(&s).unwrap();
        assert_eq!(x1[(0, 0)], 4.0);
        assert_eq!(x2[(0, 0)], 7.0);
    }

    #[test]
    fn constant_matrix_shift() {
        let s = SnapshotMatrix::from_matrix(Mat::from_fn(3, 5, |_, _| 2.5), 1.0, 0.0, "x").unwrap();
        let (x1, x2) = shifted_pair(&s).unwrap();
        assert_eq!(x1, x2);
    }

    #[test]
    fn single_column_rejected() {
        assert!(matches!(
            SnapshotMatrix::from_matrix(Mat::zeros(3, 1), 1.0, 0.0, "x"),
            Err(Error::TooFewSnapshots(1))
        ));
    }

    #[test]
    fn joint_embedding_stacks_channels() {
        use crate::ingest::{Channel, FillPolicy};
        let a = Channel {
            name: "a".into(),
            values: vec![1.0, 2.0, 3.0, 4.0],
            missing: vec![false; 4],
        };
        let b = Channel {
            name: "b".into(),
            values: vec![10.0, 20.0, 30.0, 40.0],
            missing: vec![false; 4],
        };
        let rec = SignalRecord::new(vec![a, b], 1.0, 0.0, FillPolicy::Zero).unwrap();
        let s = delay_embed_joint(&rec, &["a", "b"], 2).unwrap();
        assert_eq!((s.nrows(), s.ncols()), (4, 3));
        assert_eq!(s.data()[(1, 2)], 4.0);
        assert_eq!(s.data()[(2, 0)], 10.0);
        assert_eq!(s.data()[(3, 2)], 40.0);
    }

    #[test]
    fn default_depth() {
        assert_eq!(default_stack_depth(5000), 1000);
        assert_eq!(default_stack_depth(3), 1);
    }
}
