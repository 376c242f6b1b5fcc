//! Tidy CSV tables for update slices and history gaps.

use std::io::{Read, Write};

use crate::analysis::{HistoryGap, Outcome, SliceRow};
use crate::error::{Error, Result};
use crate::io::dataset::format_f64;

pub const SLICES_HEADER: [&str; 6] = ["stimulus", "w_stim", "w_bias", "outcome", "dw_stim", "dw_bias"];
pub const HISTORY_GAP_HEADER: [&str; 6] = ["k", "offset", "stimulus", "dw_rewarded", "dw_unrewarded", "gap"];

pub fn write_slices<W: Write>(out: W, rows: &[SliceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SLICES_HEADER)?;
    for r in rows {
        w.write_record([
            format_f64(r.stimulus),
            format_f64(r.w_stim),
            format_f64(r.w_bias),
            r.outcome.name().to_string(),
            format_f64(r.dw_stim),
            format_f64(r.dw_bias),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_slices<R: Read>(input: R) -> Result<Vec<SliceRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Data {
            row: line,
            message: e.to_string(),
        })?;
        if line == 1 {
            if rec.iter().ne(SLICES_HEADER) {
                return Err(Error::Data {
                    row: 1,
                    message: format!("expected header {}", SLICES_HEADER.join(",")),
                });
            }
            continue;
        }
        let num = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Data {
                row: line,
                message: format!("bad {} value {:?}", SLICES_HEADER[k], &rec[k]),
            })
        };
        let outcome: Outcome = rec[3].parse().map_err(|_| Error::Data {
            row: line,
            message: format!("bad outcome {:?}", &rec[3]),
        })?;
        rows.push(SliceRow {
            stimulus: num(0)?,
            w_stim: num(1)?,
            w_bias: num(2)?,
            outcome,
            dw_stim: num(4)?,
            dw_bias: num(5)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Data {
            row: 1,
            message: "slice table has no rows".into(),
        });
    }
    Ok(rows)
}

pub fn write_history_gap<W: Write>(out: W, gap: &HistoryGap) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HISTORY_GAP_HEADER)?;
    for r in &gap.rows {
        w.write_record([
            gap.k.to_string(),
            gap.offset.to_string(),
            format_f64(r.stimulus),
            format_f64(r.dw_rewarded),
            format_f64(r.dw_unrewarded),
            format_f64(r.gap),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{rule_slices, SliceGrid};
    use crate::rules::RuleParams;

    #[test]
    fn slices_round_trip() {
        let rows = rule_slices(RuleParams::reinforce(0.1), false, &SliceGrid::default()).unwrap();
        let mut buf = Vec::new();
        write_slices(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), rows.len() + 1);
        assert_eq!(read_slices(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn slice_reader_is_strict() {
        let head = SLICES_HEADER.join(",");
        for (body, row) in [("1.0,0.0,0.0,maybe,0.0,0.0", 2), ("1.0,x,0.0,correct,0.0,0.0", 2)] {
            match read_slices(format!("{head}\n{body}\n").as_bytes()) {
                Err(Error::Data { row: r, .. }) => assert_eq!(r, row),
                other => panic!("{other:?}"),
            }
        }
        assert!(read_slices(format!("{head}\n").as_bytes()).is_err());
    }
}
