//! CSV emission and parsing, plus the plot script written beside a CSV.
//!
//! The first line of every CSV is a `#` metadata line (timestamp, PRNG,
//! config summary). It is the only part of the file that varies between
//! identical runs, and readers skip it.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use samplize_core::rng::PRNG_NAME;

use crate::config::ExperimentConfig;
use crate::experiment::TrialRow;

pub fn metadata_line(cfg: &ExperimentConfig) -> String {
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!(
        "# samplize-sim {} timestamp={ts} prng={PRNG_NAME} method={} pair={} seed={} trials={} r_cap={}",
        env!("CARGO_PKG_VERSION"),
        cfg.method,
        cfg.pair.label(),
        cfg.seed,
        cfg.trials,
        cfg.r_cap
    )
}

pub fn write_csv<W: Write>(mut out: W, metadata: &str, rows: &[TrialRow]) -> csv::Result<()> {
    writeln!(out, "{metadata}")?;
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(HEADER)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub const HEADER: [&str; 18] = [
    "method",
    "x",
    "epsilon",
    "seed",
    "t",
    "rounds_per_query",
    "T_true",
    "F_true",
    "T_hat",
    "F_hat",
    "err_T",
    "err_F",
    "success",
    "samples_phi",
    "samples_psi",
    "samples_total",
    "wall_ms",
    "status",
];

pub fn read_csv<R: Read>(input: R) -> csv::Result<Vec<TrialRow>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
        .deserialize()
        .collect()
}

/// Everything after the metadata line.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

/// Path of the plot script that accompanies `csv`.
pub fn script_path(csv: &Path) -> PathBuf {
    csv.with_extension("gp")
}

pub fn gnuplot_script(csv: &Path, method: &str) -> String {
    let name = csv.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    format!(
        "set datafile separator \",\"\n\
         set datafile columnheaders\n\
         set logscale xy\n\
         set xlabel \"epsilon\"\n\
         set ylabel \"samples per estimate\"\n\
         set key top right\n\
         plot \"{name}\" using (column(\"epsilon\")):(column(\"samples_total\")) with points title \"{method}\", \\\n     \
         \"{name}\" using (column(\"epsilon\")):(column(\"samples_total\")) smooth unique with lines notitle\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PairSpec;
    use crate::experiment::run_experiment;
    use samplize_core::estimators::Method;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            method: Method::Folklore,
            pair: PairSpec::ZeroPlus,
            epsilons: vec![0.4],
            trials: 3,
            seed: 2,
            output: None,
            r_cap: 1 << 20,
            workers: Some(1),
            eps_fail: 0.1,
            record_timing: false,
        }
    }

    #[test]
    fn header_matches_row_fields() {
        let rows = run_experiment(&config(), 1).unwrap().rows;
        let mut buf = Vec::new();
        write_csv(&mut buf, &metadata_line(&config()), &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# samplize-sim"));
        assert_eq!(lines.next().unwrap(), HEADER.join(","));
        assert_eq!(read_csv(text.as_bytes()).unwrap(), rows);
    }

    #[test]
    fn empty_table_still_has_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, "# meta", &[]).unwrap();
        assert_eq!(csv_body(&String::from_utf8(buf).unwrap()), HEADER.join(","));
    }

    #[test]
    fn script_references_csv() {
        let s = gnuplot_script(Path::new("/tmp/run.csv"), "samplized");
        assert!(s.contains("\"run.csv\"") && s.contains("samples_total"));
        assert_eq!(script_path(Path::new("a/run.csv")), PathBuf::from("a/run.gp"));
    }
}
