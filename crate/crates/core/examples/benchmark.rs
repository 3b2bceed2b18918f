//! Small timing matrix written as CSV to stdout.

use pencil_fft::bench::{run_matrix, CsvTable, MatrixSpec};
use pencil_fft::TensorDims;

fn main() -> pencil_fft::Result<()> {
    let mut spec = MatrixSpec::new(vec![TensorDims::cube(16)?, TensorDims::cube(32)?], vec![1, 4, 8], vec![1, 4]);
    spec.runs = 3;
    let rows = run_matrix(&spec, |_| {})?;
    let mut table = CsvTable::new(std::io::stdout().lock())?;
    for row in &rows {
        table.write_row(row)?;
    }
    drop(table.finish()?);
    Ok(())
}
