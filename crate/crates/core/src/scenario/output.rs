//! CSV tables, gnuplot scripts and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::config::ScenarioFile;
use crate::scenario::runner::{PointGrid, PointResult, RunOptions, Table};

/// 17 significant digits, enough to round-trip an `f64`.
pub fn format_number(v: f64) -> Result<String> {
    if !v.is_finite() {
        return Err(Error::Numerical { what: "refusing to write a non-finite value".into(), max_abs: v.abs() });
    }
    Ok(format!("{v:.16e}"))
}

fn cell(v: Option<f64>) -> String {
    // Failed or non-finite values become empty cells; the row's flag is false.
    v.and_then(|x| format_number(x).ok()).unwrap_or_default()
}

fn unit_of(column: &str, cavity: bool) -> &'static str {
    if column.ends_with("width_crib") || column.ends_with("omega_constant") {
        "gamma"
    } else if column.contains("iterations") {
        "count"
    } else if column.contains("eta_storage") {
        "storage efficiency"
    } else if column.contains("eta_") || column.contains("spread_") || column.ends_with("bound") {
        if cavity {
            "total efficiency (storage x optimal retrieval C/(1+C))"
        } else {
            "total efficiency (storage + complete retrieval)"
        }
    } else {
        ""
    }
}

/// Writes `table` as CSV: a `#` units line, a header, one row per point.
pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    let strength = if table.cavity { "C" } else { "d" };
    let scaled = if table.cavity { "T*C*gamma" } else { "T*d*gamma" };
    let mut units = vec![format!("strength: {strength}"), "duration: 1/gamma".into(), format!("scaled_duration: {scaled}")];
    for c in &table.columns {
        let u = unit_of(c, table.cavity);
        if !u.is_empty() {
            units.push(format!("{c}: {u}"));
        }
    }
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# {}", units.join("; "))?;
    let mut w = csv::Writer::from_writer(f);
    let mut header = vec!["strength".to_string(), "duration".into(), "scaled_duration".into()];
    header.extend(table.columns.iter().cloned());
    header.push("converged".into());
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![format_number(r.strength)?, format_number(r.duration)?, format_number(r.scaled_duration)?];
        for (c, v) in table.columns.iter().zip(&r.values) {
            rec.push(if c.contains("iterations") { v.map(|x| format!("{}", x as u64)).unwrap_or_default() } else { cell(*v) });
        }
        rec.push(r.converged.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Time, input and every start's control at one point.
pub fn write_waveform(path: &Path, row: &PointResult, cavity: bool) -> Result<()> {
    let wf = row.waveform.as_ref().expect("waveform present");
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(
        f,
        "# {}={}; T={}; t: 1/gamma; input: 1/sqrt(1/gamma); control: gamma; best start {}",
        if cavity { "C" } else { "d" },
        format_number(row.strength)?,
        format_number(row.duration)?,
        wf.best
    )?;
    let mut w = csv::Writer::from_writer(f);
    let mut header = vec!["t".to_string(), "input_re".into(), "input_im".into()];
    header.extend((0..wf.controls.len()).map(|k| format!("control_{k}")));
    w.write_record(&header)?;
    for (i, t) in wf.t.iter().enumerate() {
        let mut rec = vec![format_number(*t)?, format_number(wf.input[i].re)?, format_number(wf.input[i].im)?];
        for c in &wf.controls {
            rec.push(format_number(c[i])?);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn eta_columns(table: &Table) -> Vec<(usize, &str)> {
    table
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| (c.contains("eta_") && !c.contains("storage")) || c.ends_with("bound"))
        .map(|(k, c)| (k + 4, c.as_str()))
        .collect()
}

/// Efficiency against the scaled duration on a log axis, one curve per
/// strength and efficiency column; widths on a second page when present.
pub fn write_plot_script(path: &Path, table: &Table, strengths: &[f64]) -> Result<()> {
    let name = &table.name;
    let (sym, xlabel) = if table.cavity { ("C", "T C {/Symbol g}") } else { ("d", "T d {/Symbol g}") };
    let mut s = String::new();
    s += "set datafile separator ','\n";
    s += "set terminal pngcairo size 900,600\n";
    s += &format!("set output '{name}.png'\n");
    s += "set logscale x\nset key left top\n";
    s += &format!("set xlabel '{xlabel}'\nset ylabel 'efficiency'\nset yrange [0:1]\n");
    let mut curves = Vec::new();
    for &st in strengths {
        for (col, label) in eta_columns(table) {
            let style = if label.ends_with("bound") { "lines dt 2" } else { "linespoints pt 7 ps 0.5" };
            curves.push(format!(
                "'{name}.csv' skip 2 using 3:(abs($1-{st})<1e-9*{st} ? ${col} : 1/0) with {style} title '{label}, {sym}={st}'"
            ));
        }
    }
    s += &format!("plot {}\n", curves.join(", \\\n     "));
    let widths: Vec<(usize, &String)> =
        table.columns.iter().enumerate().filter(|(_, c)| c.ends_with("width_crib")).collect();
    if !widths.is_empty() {
        s += &format!("set output '{name}_width.png'\nunset yrange\nset logscale y\nset ylabel 'inhomogeneous width / {{/Symbol g}}'\n");
        let curves: Vec<String> = widths
            .iter()
            .map(|(k, c)| format!("'{name}.csv' skip 2 using 3:{} with linespoints pt 7 ps 0.5 title '{c}'", k + 4))
            .collect();
        s += &format!("plot {}\n", curves.join(", \\\n     "));
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// One page per waveform file: input (dashed) and every start's control.
pub fn write_waveform_script(path: &Path, files: &[PathBuf], dir: &Path) -> Result<()> {
    let mut s = String::new();
    s += "set datafile separator ','\nset terminal pngcairo size 900,600\nset key autotitle columnhead\n";
    s += "set xlabel 't {/Symbol g}'\nset ylabel 'control / {/Symbol g}'\nset y2label 'input'\nset y2tics\n";
    for f in files {
        let rel = f.strip_prefix(dir).unwrap_or(f).display().to_string();
        let png = rel.trim_end_matches(".csv").to_string() + ".png";
        s += &format!("set output '{png}'\n");
        s += &format!(
            "plot for [k=4:*] '{rel}' skip 1 using 1:k with lines, '{rel}' skip 1 using 1:2 axes x1y2 with lines dt 2 title 'input'\n"
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ManifestPoint<'a> {
    strength: f64,
    duration: f64,
    converged: bool,
    grid: &'a PointGrid,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    notes: &'a [String],
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    toolkit: &'static str,
    version: &'static str,
    config: serde_json::Value,
    grid_scale: f64,
    jobs: Option<usize>,
    wall_time_seconds: f64,
    points: Vec<ManifestPoint<'a>>,
    files: Vec<String>,
}

/// Writes the manifest through a temporary file and a rename.
pub fn write_manifest(
    path: &Path,
    file: &ScenarioFile,
    table: &Table,
    opts: &RunOptions,
    elapsed: f64,
    files: &[PathBuf],
    dir: &Path,
) -> Result<()> {
    let config: serde_json::Value = serde_json::from_str(&file.to_json()?)?;
    let m = RunManifest {
        toolkit: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config,
        grid_scale: opts.grid_scale,
        jobs: opts.jobs,
        wall_time_seconds: elapsed,
        points: table
            .rows
            .iter()
            .map(|r| ManifestPoint {
                strength: r.strength,
                duration: r.duration,
                converged: r.converged,
                grid: &r.grid,
                notes: &r.notes,
            })
            .collect(),
        files: files.iter().map(|f| f.strip_prefix(dir).unwrap_or(f).display().to_string()).collect(),
    };
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_string_pretty(&m)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
