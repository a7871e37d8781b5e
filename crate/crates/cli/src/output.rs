//! Deterministic CSV and JSON emitters. All floats carry 12 significant
//! digits; CSV uses a header row, commas, LF endings.

use std::io::Write;

use negtrans_core::dynamics::Trajectory;
use negtrans_core::error::{Error, Result};

/// 12 significant digits, scientific notation.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

pub const TRAJECTORY_HEADER: &str =
    "t,neg_AB,neg_AtB,neg_AtA,neg_At_AB,neg_B_AtA,purity_A,purity_B,purity_AB";

pub fn trajectory_csv(tr: &Trajectory) -> String {
    let mut out = String::with_capacity(tr.t.len() * 96);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for k in 0..tr.t.len() {
        let row = [
            tr.t[k],
            tr.neg_ab[k],
            tr.neg_atb[k],
            tr.neg_ata[k],
            tr.neg_at_ab[k],
            tr.neg_b_ata[k],
            tr.purity_a[k],
            tr.purity_b[k],
            tr.purity_ab[k],
        ];
        let cells: Vec<String> = row.iter().map(|&x| fmt_sig(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn optimize_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("evaluation,best_value\n");
    for (k, v) in trace.iter().enumerate() {
        out.push_str(&format!("{},{}\n", k + 1, fmt_sig(*v)));
    }
    out
}

pub fn write_text(path: Option<&std::path::Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = std::fs::File::create(p)
                .map_err(|e| Error::Domain(format!("cannot create {}: {e}", p.display())))?;
            f.write_all(text.as_bytes())
                .map_err(|e| Error::Domain(format!("write failed: {e}")))?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
