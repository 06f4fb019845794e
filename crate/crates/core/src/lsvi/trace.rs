use std::io::{self, Write};

use crate::diagnostics::KlEstimate;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub epsilon: f64,
    pub kl: Option<KlEstimate>,
    /// Residual standard deviation of the untempered fit.
    pub residual_std: f64,
    pub halvings: u32,
    pub variance_capped: bool,
    pub dropped: usize,
    /// Wall time since the start of the run.
    pub elapsed_ns: u64,
    /// Flattened canonical parameter after the step.
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    /// KL diagnostic at the starting parameter.
    pub initial_kl: Option<KlEstimate>,
    pub rows: Vec<TraceRow>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Smallest KL value recorded, with its row.
    pub fn min_kl(&self) -> Option<(usize, KlEstimate)> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.kl.map(|k| (i, k)))
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
    }

    pub fn last_kl(&self) -> Option<KlEstimate> {
        self.rows.iter().rev().find_map(|r| r.kl)
    }

    /// CSV with one row per iteration. Wall time is written only when
    /// `timing` is set, so that repeated runs produce identical files.
    pub fn write_csv<W: Write>(&self, mut w: W, timing: bool) -> io::Result<()> {
        let width = self.rows.first().map_or(0, |r| r.params.len());
        write!(w, "t,epsilon,kl_estimate,residual_std,halvings,elapsed_ns")?;
        for j in 0..width {
            write!(w, ",param_{j}")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            let kl = r.kl.map_or(f64::NAN, |k| k.value);
            let ns = if timing { r.elapsed_ns } else { 0 };
            write!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{},{}",
                r.t, r.epsilon, kl, r.residual_std, r.halvings, ns
            )?;
            for p in &r.params {
                write!(w, ",{p:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, timing: bool) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, timing).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}
