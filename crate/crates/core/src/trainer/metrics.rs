use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::EpochRecord;
use crate::Result;

pub const METRICS_HEADER: &str = "epoch,iter,train_loss,val_acc,redundancy,wall_ms,store_bytes";

pub fn write_metrics_header(mut w: impl Write) -> Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    Ok(())
}

/// Missing values are written as empty fields.
pub fn write_metrics_row(mut w: impl Write, r: &EpochRecord) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
    writeln!(
        w,
        "{},{},{:.8},{},{},{:.3},{}",
        r.epoch,
        r.iteration,
        r.train_loss,
        opt(r.val_accuracy),
        r.redundancy.map_or(String::new(), |v| format!("{v:.6e}")),
        r.wall_ms,
        r.store_bytes
    )?;
    Ok(())
}

/// Metrics CSV flushed after every row so a crashed run keeps its log.
pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        write_metrics_header(&mut out)?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &EpochRecord) -> Result<()> {
        write_metrics_row(&mut self.out, r)?;
        self.out.flush()?;
        Ok(())
    }
}
