//! CSV trace files.

use std::io::{self, Write};

use dcflow::flows::{TraceRow, TraceSink};

pub struct CsvSink<W: Write> {
    out: W,
    error: Option<io::Error>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W, vertices: usize) -> io::Result<Self> {
        let mut header = String::from("t,residual,sum_u,energy_H,calabi_C");
        for prefix in ["u", "K"] {
            for i in 0..vertices {
                header.push_str(&format!(",{prefix}_{i}"));
            }
        }
        writeln!(out, "{header}")?;
        Ok(Self { out, error: None })
    }

    pub fn finish(mut self) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()
    }
}

fn field(line: &mut String, x: f64) {
    if !line.is_empty() {
        line.push(',');
    }
    // 17 significant digits.
    line.push_str(&format!("{x:.16e}"));
}

impl<W: Write> TraceSink for CsvSink<W> {
    fn push(&mut self, row: &TraceRow) {
        if self.error.is_some() {
            return;
        }
        let mut line = String::new();
        for x in [row.t, row.residual, row.sum_u, row.energy, row.calabi] {
            field(&mut line, x);
        }
        for &x in row.u.iter().chain(&row.curvature) {
            field(&mut line, x);
        }
        if let Err(e) = writeln!(self.out, "{line}") {
            self.error = Some(e);
        }
    }
}
