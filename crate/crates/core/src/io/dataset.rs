//! Flat trial CSV (`animal_id,trial_index,stimulus,choice,reward,label`) and
//! the latent sidecar (`animal_id,trial_index,w_stim,w_bias,dw_stim,dw_bias`).

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::analysis::LatentTrajectory;
use crate::error::{Error, Result};
use crate::glm::{SessionRecord, Source, TrialRecord};
use crate::sim::AnimalLatents;

pub const DATASET_HEADER: [&str; 6] = ["animal_id", "trial_index", "stimulus", "choice", "reward", "label"];
pub const LATENTS_HEADER: [&str; 6] = ["animal_id", "trial_index", "w_stim", "w_bias", "dw_stim", "dw_bias"];

/// Shortest round-tripping decimal that always carries a fractional part.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_dataset<W: Write>(out: W, sessions: &[SessionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_HEADER)?;
    for s in sessions {
        for t in &s.trials {
            w.write_record([
                s.animal_id.clone(),
                t.trial_index.to_string(),
                format_f64(t.stimulus),
                t.choice.to_string(),
                t.reward.to_string(),
                t.label.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn check_header(record: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if record.iter().ne(expected.iter().copied()) {
        return Err(Error::Data {
            row: 1,
            message: format!("expected header {}, got {}", expected.join(","), record.iter().collect::<Vec<_>>().join(",")),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, name: &str, row: usize) -> Result<T> {
    let raw = record.get(i).ok_or_else(|| Error::Data {
        row,
        message: format!("missing column {name}"),
    })?;
    raw.parse().map_err(|_| Error::Data {
        row,
        message: format!("cannot parse {name} from {raw:?}"),
    })
}

fn binary(record: &csv::StringRecord, i: usize, name: &str, row: usize) -> Result<u8> {
    match record.get(i) {
        Some("0") => Ok(0),
        Some("1") => Ok(1),
        other => Err(Error::Data {
            row,
            message: format!("{name} must be 0 or 1, got {:?}", other.unwrap_or("")),
        }),
    }
}

/// Groups rows by animal in order of first appearance, requiring each
/// animal's trial indices to run 0, 1, 2, ... in file order.
fn group_rows<T>(
    rows: impl Iterator<Item = Result<(usize, String, usize, T)>>,
) -> Result<Vec<(String, Vec<T>)>> {
    let mut order: Vec<(String, Vec<T>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for row in rows {
        let (line, id, trial_index, value) = row?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push((id.clone(), Vec::new()));
            order.len() - 1
        });
        let expected = order[slot].1.len();
        if trial_index != expected {
            return Err(Error::Data {
                row: line,
                message: format!("animal {id}: trial_index {trial_index} where {expected} was expected"),
            });
        }
        order[slot].1.push(value);
    }
    Ok(order)
}

/// Strict loader: the first offending row aborts with its line number
/// (the header is line 1).
pub fn read_dataset<R: Read>(input: R) -> Result<Vec<SessionRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = reader.records();
    let header = records.next().ok_or_else(|| Error::Data {
        row: 1,
        message: "empty file".into(),
    })??;
    check_header(&header, &DATASET_HEADER)?;
    let rows = records.enumerate().map(|(i, rec)| {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data {
            row: line,
            message: e.to_string(),
        })?;
        if rec.len() != DATASET_HEADER.len() {
            return Err(Error::Data {
                row: line,
                message: format!("expected {} fields, got {}", DATASET_HEADER.len(), rec.len()),
            });
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(Error::Data {
                row: line,
                message: "empty animal_id".into(),
            });
        }
        let trial = TrialRecord {
            trial_index: field(&rec, 1, "trial_index", line)?,
            stimulus: field(&rec, 2, "stimulus", line)?,
            choice: binary(&rec, 3, "choice", line)?,
            reward: binary(&rec, 4, "reward", line)?,
            label: binary(&rec, 5, "label", line)?,
        };
        trial.validate().map_err(|message| Error::Data { row: line, message })?;
        Ok((line, id, trial.trial_index, trial))
    });
    group_rows(rows)?
        .into_iter()
        .map(|(id, trials)| SessionRecord::new(id, trials, None, Source::Ingested))
        .collect()
}

pub fn write_latents<W: Write>(out: W, latents: &[AnimalLatents]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LATENTS_HEADER)?;
    for l in latents {
        for (t, (wt, dw)) in l.weights.iter().zip(&l.dw).enumerate() {
            w.write_record([
                l.animal_id.clone(),
                t.to_string(),
                format_f64(wt[0]),
                format_f64(wt[1]),
                format_f64(dw[0]),
                format_f64(dw[1]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_latents<R: Read>(input: R) -> Result<Vec<LatentTrajectory>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = reader.records();
    let header = records.next().ok_or_else(|| Error::Data {
        row: 1,
        message: "empty file".into(),
    })??;
    check_header(&header, &LATENTS_HEADER)?;
    let rows = records.enumerate().map(|(i, rec)| {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data {
            row: line,
            message: e.to_string(),
        })?;
        if rec.len() != LATENTS_HEADER.len() {
            return Err(Error::Data {
                row: line,
                message: format!("expected {} fields, got {}", LATENTS_HEADER.len(), rec.len()),
            });
        }
        let t: usize = field(&rec, 1, "trial_index", line)?;
        let v: Vec<f64> = (2..6)
            .map(|k| field::<f64>(&rec, k, LATENTS_HEADER[k], line))
            .collect::<Result<_>>()?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data {
                row: line,
                message: "non-finite latent value".into(),
            });
        }
        Ok((line, rec[0].to_string(), t, ([v[0], v[1]], [v[2], v[3]])))
    });
    Ok(group_rows(rows)?
        .into_iter()
        .map(|(animal_id, rows)| LatentTrajectory {
            animal_id,
            weights: rows.iter().map(|r| r.0.to_vec()).collect(),
            dw: rows.iter().map(|r| r.1.to_vec()).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleParams;
    use crate::sim::{simulate_pool, SimConfig};

    fn pool() -> crate::sim::SimulatedPool {
        let mut c = SimConfig::new(3, RuleParams::reinforce(0.1), 4);
        c.trials = 10;
        simulate_pool(&c).unwrap()
    }

    #[test]
    fn round_trip() {
        let p = pool();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &p.sessions).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 31);
        assert!(text.starts_with("animal_id,trial_index,stimulus,choice,reward,label\n"));
        let back = read_dataset(buf.as_slice()).unwrap();
        for (a, b) in back.iter().zip(&p.sessions) {
            assert_eq!(a.animal_id, b.animal_id);
            assert_eq!(a.trials, b.trials);
        }
        let mut again = Vec::new();
        write_dataset(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn latents_round_trip() {
        let p = pool();
        let mut buf = Vec::new();
        write_latents(&mut buf, &p.latents).unwrap();
        let back = read_latents(buf.as_slice()).unwrap();
        for (a, b) in back.iter().zip(&p.latents) {
            assert_eq!(a.weights, b.weights[..10].to_vec());
            assert_eq!(a.dw, b.dw);
        }
    }

    fn load(text: &str) -> Result<Vec<SessionRecord>> {
        read_dataset(text.as_bytes())
    }

    #[test]
    fn strict_rejections_carry_row_numbers() {
        let head = "animal_id,trial_index,stimulus,choice,reward,label\n";
        let cases = [
            ("a,0,0.5,1,1,1\na,1,0.5,1,0,1\n", 3),
            ("a,0,0.5,1,1,1\na,2,0.5,1,1,1\n", 3),
            ("a,1,0.5,1,1,1\n", 2),
            ("a,0,0.5,2,1,1\n", 2),
            ("a,0,-0.5,1,1,1\n", 2),
            ("a,0,abc,1,1,1\n", 2),
            ("a,0,0.5,1,1\n", 2),
            ("a,0,NaN,1,1,1\n", 2),
        ];
        for (body, row) in cases {
            match load(&format!("{head}{body}")) {
                Err(Error::Data { row: r, .. }) => assert_eq!(r, row, "{body}"),
                other => panic!("{body}: {other:?}"),
            }
        }
        assert!(matches!(load("a,b\n"), Err(Error::Data { row: 1, .. })));
    }

    #[test]
    fn interleaved_animals_are_grouped() {
        let text = "animal_id,trial_index,stimulus,choice,reward,label\n\
                    a,0,0.5,1,1,1\nb,0,-1.0,1,0,0\na,1,-0.25,0,1,0\n";
        let s = load(text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].trials.len(), 2);
        assert_eq!(s[1].animal_id, "b");
    }

    #[test]
    fn zero_stimulus_accepts_either_label() {
        let text = "animal_id,trial_index,stimulus,choice,reward,label\na,0,0.0,1,0,0\na,1,0.0,1,1,1\n";
        assert_eq!(load(text).unwrap()[0].trials.len(), 2);
    }
}
