//! Input modes named in scenario configs.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{interpolate, TimeGrid, C64};
use crate::scenario::config::InputShape;
use crate::signal::InputMode;

/// Builds a unit-norm input on `grid` (which must be `[0, T]`).
pub fn make_input_mode(shape: &InputShape, grid: TimeGrid) -> Result<InputMode> {
    if !(grid.duration() > 0.0) {
        return Err(Error::Config("input duration must be positive".into()));
    }
    match shape {
        InputShape::GaussianLike => InputMode::gaussian_like(grid),
        InputShape::Square => InputMode::square(grid),
        InputShape::File(path) => from_file(path, grid),
    }
}

fn from_file(path: &Path, grid: TimeGrid) -> Result<InputMode> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let mut t = Vec::new();
    let mut v = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Config(format!("{}: row with {} columns", path.display(), rec.len())))?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        };
        t.push(num(0)?);
        let im = if rec.len() > 2 { num(2)? } else { 0.0 };
        v.push(C64::new(num(1)?, im));
    }
    if t.len() < 2 {
        return Err(Error::Config(format!("{}: need at least two samples", path.display())));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(format!("{}: times must increase", path.display())));
    }
    let span = t[t.len() - 1] - t[0];
    let uniform = t.windows(2).all(|w| ((w[1] - w[0]) - span / (t.len() - 1) as f64).abs() < 1e-9 * span);
    if !uniform {
        return Err(Error::Config(format!("{}: samples must be uniformly spaced", path.display())));
    }
    let file_grid = TimeGrid::new(t[0], t[t.len() - 1], t.len())?;
    let values: Vec<C64> = grid
        .nodes()
        .iter()
        .map(|&s| if s < t[0] || s > file_grid.t_end() { C64::new(0.0, 0.0) } else { interpolate(&v, &file_grid, s) })
        .collect();
    let (mode, norm) = InputMode::normalized(values, grid)?;
    if (norm - 1.0).abs() > 1e-6 {
        log::warn!("{}: input mode had norm {norm:.6}; renormalized", path.display());
    }
    Ok(mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn gaussian_like_endpoints_and_norm() {
        let g = TimeGrid::new(0.0, 10.0, 2001).unwrap();
        let m = make_input_mode(&InputShape::GaussianLike, g).unwrap();
        assert!(m.values()[0].norm() < 1e-12);
        assert!(m.values()[2000].norm() < 1e-12);
        assert!((m.norm_sq() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn square_is_flat() {
        let g = TimeGrid::new(0.0, 10.0, 101).unwrap();
        let m = make_input_mode(&InputShape::Square, g).unwrap();
        for v in m.values() {
            assert!((v.re - 1.0 / 10f64.sqrt()).abs() < 1e-12 && v.im == 0.0);
        }
    }

    #[test]
    fn file_mode_renormalized() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "t,re,im").unwrap();
        for k in 0..=10 {
            writeln!(f, "{},{},0", k as f64 * 0.2, 3.0).unwrap();
        }
        let g = TimeGrid::new(0.0, 2.0, 41).unwrap();
        let m = make_input_mode(&InputShape::File(f.path().to_path_buf()), g).unwrap();
        assert!((m.norm_sq() - 1.0).abs() < 1e-12);
        assert!((m.values()[7].re - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }
}
