//! Running a TOML experiment through the library, as the CLI does.

use singular_elliptic::cli::{solve_config, solve_report_json, to_pretty};
use singular_elliptic::config::ExperimentConfig;

const CONFIG: &str = r#"
[domain]
dim = 1
cells = 256

[coefficient]
kind = "expression"
expression = "1 + x^2"

[measure]
kind = "sum"
parts = [
  { kind = "density", expression = "1 + sin(pi*x)" },
  { kind = "atom", position = 0.25, mass = 0.5 },
]

[problem]
lambda = 0.5
"#;

fn main() -> singular_elliptic::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let (u, report) = solve_config(&cfg)?;
    print!("{}", to_pretty(&solve_report_json(&cfg, &report)));
    println!("max u = {:.6}", u.max_abs());
    Ok(())
}
