//! Driving a study from configuration text with command line style
//! overrides, then writing `study.csv`, `rates.csv` and `rates.svg`.
//!
//! Run with `cargo run --release --example config_file [out_dir]`.

use std::path::PathBuf;

use critmeasure::config::{parse_override, Config};
use critmeasure::study::run_study;

const TEXT: &str = "
[problem]
name = bilinear

[solver]
method = pg
tol = 1e-10

[study]
mesh_sizes = 8, 16, 32, 64
";

fn main() -> critmeasure::Result<()> {
    let overrides = vec![parse_override("study.n_ref=2048")?];
    let cfg = Config::parse(TEXT, &overrides)?;
    let res = run_study(&cfg.study())?;
    print!("{}", res.study_csv()?);
    print!("{}", res.rates_csv()?);
    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        res.write_outputs(&dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
