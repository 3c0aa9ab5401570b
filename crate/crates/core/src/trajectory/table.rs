//! CSV form of a trajectory. Metadata lines start with `#` and precede the
//! header row; empty cells mean "not measured".

use super::{CheckpointMetrics, MetricTrajectory, TrajectoryError};

const MODE_KEY: &str = "# alignment_mode: ";

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Columns: `step, bleu, lm<k>..., frs, kendall, freq_<bucket>...,
/// acc_<bucket>..., flags, error`. `metadata` lines are written first,
/// each prefixed with `# `.
pub fn trajectory_to_csv(traj: &MetricTrajectory, metadata: &[String]) -> Result<String, TrajectoryError> {
    let mut out = String::new();
    for m in metadata {
        for line in m.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str(MODE_KEY);
    out.push_str(&traj.alignment_mode);
    out.push('\n');

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["step".to_owned(), "bleu".to_owned()];
    header.extend(traj.lm_orders.iter().map(|o| format!("lm{o}")));
    header.push("frs".into());
    header.push("kendall".into());
    header.extend(traj.bucket_labels.iter().map(|l| format!("freq_{l}")));
    header.extend(traj.bucket_labels.iter().map(|l| format!("acc_{l}")));
    header.push("flags".into());
    header.push("error".into());
    w.write_record(&header)?;

    let nb = traj.bucket_labels.len();
    for r in &traj.rows {
        let mut rec = vec![r.step.to_string(), cell(r.bleu)];
        rec.extend(traj.lm_orders.iter().map(|o| cell(r.lm.get(o).copied())));
        rec.push(cell(r.frs));
        rec.push(cell(r.kendall));
        for i in 0..nb {
            rec.push(cell(r.freq_profile.as_ref().and_then(|p| p.get(i).copied())));
        }
        for i in 0..nb {
            rec.push(cell(r.accuracy.as_ref().and_then(|a| a.get(i).copied().flatten())));
        }
        rec.push(r.flags.join(";"));
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| TrajectoryError::Table {
        line: 0,
        message: e.to_string(),
    })?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

enum Column {
    Step,
    Bleu,
    Lm(usize),
    Frs,
    Kendall,
    Freq(usize),
    Acc(usize),
    Flags,
    Error,
}

pub fn read_trajectory_csv(text: &str) -> Result<MetricTrajectory, TrajectoryError> {
    let alignment_mode = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix(MODE_KEY))
        .unwrap_or("unknown")
        .trim()
        .to_owned();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();

    let mut lm_orders = Vec::new();
    let mut bucket_labels = Vec::new();
    let mut acc_labels = Vec::new();
    let mut columns = Vec::with_capacity(headers.len());
    for h in headers.iter() {
        let c = match h {
            "step" => Column::Step,
            "bleu" => Column::Bleu,
            "frs" => Column::Frs,
            "kendall" => Column::Kendall,
            "flags" => Column::Flags,
            "error" => Column::Error,
            _ => {
                if let Some(o) = h.strip_prefix("lm").and_then(|o| o.parse().ok()) {
                    lm_orders.push(o);
                    Column::Lm(o)
                } else if let Some(l) = h.strip_prefix("freq_") {
                    bucket_labels.push(l.to_owned());
                    Column::Freq(bucket_labels.len() - 1)
                } else if let Some(l) = h.strip_prefix("acc_") {
                    acc_labels.push(l.to_owned());
                    Column::Acc(acc_labels.len() - 1)
                } else {
                    return Err(TrajectoryError::Table {
                        line: 0,
                        message: format!("unknown column {h:?}"),
                    });
                }
            }
        };
        columns.push(c);
    }
    if !columns.iter().any(|c| matches!(c, Column::Step)) {
        return Err(TrajectoryError::Table {
            line: 0,
            message: "missing step column".into(),
        });
    }
    if !acc_labels.is_empty() && acc_labels != bucket_labels {
        return Err(TrajectoryError::Table {
            line: 0,
            message: "accuracy and frequency bucket columns differ".into(),
        });
    }

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| TrajectoryError::Table { line, message };
        let num = |s: &str, what: &str| -> Result<Option<f64>, TrajectoryError> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| bad(format!("{what}: {s:?} is not a number")))
        };
        let mut m = CheckpointMetrics::default();
        let mut freq = vec![None; bucket_labels.len()];
        let mut acc = vec![None; acc_labels.len()];
        for (c, v) in columns.iter().zip(rec.iter()) {
            match c {
                Column::Step => m.step = v.parse().map_err(|_| bad(format!("step {v:?} is not an integer")))?,
                Column::Bleu => m.bleu = num(v, "bleu")?,
                Column::Frs => m.frs = num(v, "frs")?,
                Column::Kendall => m.kendall = num(v, "kendall")?,
                Column::Lm(o) => {
                    if let Some(x) = num(v, "lm")? {
                        m.lm.insert(*o, x);
                    }
                }
                Column::Freq(i) => freq[*i] = num(v, "freq")?,
                Column::Acc(i) => acc[*i] = num(v, "acc")?,
                Column::Flags => m.flags = v.split(';').filter(|f| !f.is_empty()).map(str::to_owned).collect(),
                Column::Error => m.error = (!v.is_empty()).then(|| v.to_owned()),
            }
        }
        if freq.iter().all(Option::is_some) && !freq.is_empty() {
            m.freq_profile = Some(freq.into_iter().flatten().collect());
        }
        if acc.iter().any(Option::is_some) {
            m.accuracy = Some(acc);
        }
        rows.push(m);
    }
    MetricTrajectory::new(rows, lm_orders, bucket_labels, alignment_mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn sample() -> MetricTrajectory {
        let rows = vec![
            CheckpointMetrics {
                step: 1000,
                bleu: Some(12.5),
                lm: BTreeMap::from([(2, -2.25), (3, -2.5)]),
                frs: Some(0.875),
                kendall: Some(0.1),
                freq_profile: Some(vec![0.5, 0.5, 0.0]),
                accuracy: Some(vec![Some(0.75), None, Some(0.0)]),
                flags: vec!["a".into(), "b".into()],
                error: None,
            },
            CheckpointMetrics {
                step: 2000,
                error: Some("missing, \"quoted\" file".into()),
                ..Default::default()
            },
        ];
        MetricTrajectory::new(rows, vec![2, 3], vec!["1-10".into(), "11+".into(), "oov".into()], "shared").unwrap()
    }

    #[test]
    fn round_trip() {
        let t = sample();
        let text = trajectory_to_csv(&t, &["tool 1.0".into(), "config: x\ny".into()]).unwrap();
        assert!(text.starts_with("# tool 1.0\n# config: x\n# y\n"));
        assert!(text.contains("step,bleu,lm2,lm3,frs,kendall,freq_1-10"));
        assert_eq!(read_trajectory_csv(&text).unwrap(), t);
    }

    #[test]
    fn rejects_bad_cells() {
        let e = read_trajectory_csv("step,bleu\n1,abc\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(read_trajectory_csv("bleu\n1\n").is_err());
        assert!(read_trajectory_csv("step,what\n1,2\n").is_err());
        assert!(matches!(
            read_trajectory_csv("step,bleu\n2,1\n1,1\n"),
            Err(TrajectoryError::NonIncreasingStep { .. })
        ));
    }
}
