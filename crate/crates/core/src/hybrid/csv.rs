use std::io::{self, Write};

use super::HybridExecution;

/// Writes `t,mode,<columns>` rows for every sample of `exec`.
///
/// Consecutive segments share their boundary time, so each transition shows
/// up as a pre-event row followed by a post-reset row with the same `t`.
/// `row` maps a `(mode, state)` sample to the values for `columns`. Modes are
/// written one-based (stance = 1, flight = 2).
pub fn write_csv<W, F>(out: &mut W, exec: &HybridExecution, columns: &[String], row: F) -> io::Result<()>
where
    W: Write,
    F: Fn(usize, &[f64]) -> Vec<f64>,
{
    write!(out, "t,mode")?;
    for c in columns {
        write!(out, ",{c}")?;
    }
    writeln!(out)?;
    let mut emit = |t: f64, mode: usize, x: &[f64]| -> io::Result<()> {
        write!(out, "{t:.12e},{}", mode + 1)?;
        for v in row(mode, x) {
            write!(out, ",{v:.12e}")?;
        }
        writeln!(out)
    };
    for seg in &exec.segments {
        for (t, x) in seg.times.iter().zip(&seg.states) {
            emit(*t, seg.mode, x)?;
        }
    }
    let dangling = exec
        .segments
        .last()
        .is_some_and(|s| s.terminal_event.is_some());
    if dangling {
        emit(exec.final_time, exec.final_mode, &exec.final_state)?;
    }
    Ok(())
}
