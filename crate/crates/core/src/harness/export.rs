use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::training::{Record, TrainingHistory};

/// Columns preceding the `theta_k` block.
pub const CSV_FIXED_COLUMNS: [&str; 8] = [
    "episode",
    "eta",
    "J0_est",
    "J_oracle",
    "V_oracle",
    "grad_norm",
    "critic_gap",
    "clamped",
];

// 17 significant digits: enough to round-trip any f64.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes one row per record. Reals use 17 significant digits so values
/// parse back bit-equal.
pub fn export_history(history: &TrainingHistory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(file);
    let n = history.records.first().map_or(0, |r| r.theta.len());
    let header: Vec<String> = CSV_FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..n).map(|k| format!("theta_{k}")))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in &history.records {
        let mut row = vec![
            r.episode.to_string(),
            real(r.eta),
            real(r.j0_estimate),
            real(r.j_oracle),
            real(r.v_oracle),
            real(r.grad_norm),
            real(r.critic_gap),
            r.clamped.to_string(),
        ];
        row.extend(r.theta.iter().map(|&t| real(t)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads back a file written by [`export_history`].
pub fn read_history(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |msg: String| Error::Contract(format!("{}: {msg}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.len() < CSV_FIXED_COLUMNS.len()
        || header.iter().zip(CSV_FIXED_COLUMNS).any(|(a, b)| a != b)
    {
        return Err(bad("unexpected header".into()));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        let f = |k: usize| -> Result<f64> {
            row[k]
                .parse()
                .map_err(|_| bad(format!("column {k} is not a number: {:?}", &row[k])))
        };
        let int = |k: usize| -> Result<u64> {
            row[k]
                .parse()
                .map_err(|_| bad(format!("column {k} is not an integer: {:?}", &row[k])))
        };
        out.push(Record {
            episode: int(0)?,
            eta: f(1)?,
            j0_estimate: f(2)?,
            j_oracle: f(3)?,
            v_oracle: f(4)?,
            grad_norm: f(5)?,
            critic_gap: f(6)?,
            clamped: int(7)?,
            theta: (CSV_FIXED_COLUMNS.len()..row.len()).map(f).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critic::CriticState;

    fn record(episode: u64, theta: Vec<f64>) -> Record {
        Record {
            episode,
            eta: 1.0 / 3.0,
            j0_estimate: std::f64::consts::PI,
            j_oracle: 1e-300,
            v_oracle: 2.5e17,
            grad_norm: 0.1 + 0.2,
            critic_gap: f64::MIN_POSITIVE,
            clamped: 2,
            theta,
        }
    }

    fn history(records: Vec<Record>) -> TrainingHistory {
        TrainingHistory {
            records,
            final_critic: CriticState::zeros(1, 1),
        }
    }

    #[test]
    fn one_record_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        export_history(&history(vec![record(1, vec![0.5, -0.25, 1e-9])]), &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "episode,eta,J0_est,J_oracle,V_oracle,grad_norm,critic_gap,clamped,theta_0,theta_1,theta_2"
        );
        assert_eq!(lines[1].split(',').count(), 8 + 3);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let thetas = [
            vec![0.1, -1.0 / 7.0],
            vec![f64::EPSILON, 14.999999999999998],
            vec![-0.0, 123456789.12345679],
        ];
        let h = history(
            thetas
                .iter()
                .enumerate()
                .map(|(i, t)| record(i as u64 * 10, t.clone()))
                .collect(),
        );
        export_history(&h, &p).unwrap();
        let back = read_history(&p).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in back.iter().zip(&h.records) {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.theta), bits(&b.theta));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn io_error_names_the_path() {
        let err = export_history(&history(vec![]), "/nonexistent-dir/h.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/h.csv"), "{err}");
    }
}
