//! Parse an experiment config, write a field to the CSV format the binary
//! uses, read it back, and show how config errors are reported.
//!
//! cargo run --example config_and_files

use double_phase::cli::{field_csv, parse_config, read_field_csv};
use double_phase::GridFunction;

fn main() -> double_phase::Result<()> {
    let cfg = parse_config(
        r#"
[grid]
dim = 2
res = 8

[exponents]
p1 = "1.5"
p2 = "1.6 + 0.2*x2"
q = "3"
"#,
    )?;
    println!(
        "resolved config:\n{}",
        serde_json::to_string_pretty(&cfg).expect("config serialises")
    );

    let u = GridFunction::from_fn(cfg.grid().clone(), true, |x| {
        x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])
    })?;
    let text = field_csv(&u);
    println!(
        "first rows:\n{}",
        text.lines().take(4).collect::<Vec<_>>().join("\n")
    );
    let back = read_field_csv(&text, cfg.grid())?;
    println!("round trip exact: {}", back.values() == u.values());

    for bad in [
        "[grid]\nres = 2\n",
        "[exponents]\nq = \"2+\"\n",
        "[solver]\ntol = -1.0\n",
        "seed = \"x\"\n",
    ] {
        println!("{:?} -> {}", bad, parse_config(bad).unwrap_err());
    }
    Ok(())
}
