//! Library side of the `multistage` binary: configuration, the subcommands
//! and parameter sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use toml::{Table, Value};

use crate::commands::Context;
use crate::config::{parse_sweep_flag, resolve, set_key, value_label, Sweep};
use crate::error::CliError;
use crate::output::{num, Table as Csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Design,
    Simulate,
    Stationary,
    Rl,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::Simulate => "simulate",
            Command::Stationary => "stationary",
            Command::Rl => "rl",
            Command::Validate => "validate",
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub horizon: Option<usize>,
    pub out: Option<PathBuf>,
    pub sweep: Option<String>,
}

pub fn load_table(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    text.parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("syntax: {}", e.message())))
}

fn apply_overrides(root: &mut Table, o: &Overrides) -> Result<(), CliError> {
    if let Some(s) = o.seed {
        set_key(root, "run.seed", Value::Integer(s as i64))?;
    }
    if let Some(t) = o.trials {
        set_key(root, "run.trials", Value::Integer(t as i64))?;
    }
    if let Some(h) = o.horizon {
        set_key(root, "run.horizon", Value::Integer(h as i64))?;
    }
    if let Some(d) = &o.out {
        set_key(
            root,
            "run.output_dir",
            Value::String(d.display().to_string()),
        )?;
    }
    Ok(())
}

fn run_one(
    command: Command,
    root: &Table,
    out: &Path,
) -> Result<Option<multistage::ExperimentSummary<f64>>, CliError> {
    let ctx = Context::new(resolve(root)?)?;
    match command {
        Command::Design => commands::design(&ctx, out).map(|_| None),
        Command::Simulate => commands::simulate(&ctx, out).map(Some),
        Command::Stationary => commands::stationary(&ctx, out).map(|_| None),
        Command::Rl => commands::rl(&ctx, out).map(|_| None),
        Command::Validate => commands::validate(&ctx, out).map(|_| None),
    }
}

/// Runs a command, once or over every sweep value. Returns the output directory.
pub fn execute(
    command: Command,
    mut root: Table,
    overrides: &Overrides,
) -> Result<PathBuf, CliError> {
    apply_overrides(&mut root, overrides)?;
    // Validate the base file first so its errors name the base keys.
    let base = resolve(&root)?;
    let out = base.run.output_dir.clone();
    let sweep: Option<Sweep> = match &overrides.sweep {
        Some(flag) => Some(parse_sweep_flag(flag)?),
        None => base.sweep.clone(),
    };
    root.remove("sweep");
    let Some(sweep) = sweep else {
        run_one(command, &root, &out)?;
        return Ok(out);
    };

    let mut summary = Csv::new(&["value", "metric", "mean", "std"]);
    let mut levels = Csv::new(&["value", "level", "mean", "std"]);
    for v in &sweep.values {
        let mut point = root.clone();
        set_key(&mut point, &sweep.key, v.clone())?;
        let label = value_label(v);
        let dir = out.join(format!("{}={label}", sweep.key));
        if let Some(s) = run_one(command, &point, &dir)? {
            for m in &s.metrics {
                let row = vec![label.clone(), m.metric.clone(), num(m.mean), num(m.std)];
                match m.metric.strip_prefix("q_") {
                    Some(i) => {
                        levels.push(vec![label.clone(), i.to_string(), num(m.mean), num(m.std)])
                    }
                    None => summary.push(row),
                }
            }
        }
    }
    if command == Command::Simulate {
        let hash = base.hash();
        let cmd = format!("simulate sweep={}", sweep.key);
        summary.write(&out.join("sweep_summary.csv"), &hash, &cmd)?;
        levels.write(&out.join("level_distribution.csv"), &hash, &cmd)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    const CONFIG: &str = r#"
[model]
alpha = 4.0
gamma = 0.9
cost_improve = 0.8
cost_game = 0.75
beta_tilde = 0.604

[ladder]
delta_mu = 1.0
cap = 10.0

[run]
trials = 3
horizon = 400
window = 100
trajectory = true
"#;

    fn run(
        command: Command,
        text: &str,
        out: &Path,
        sweep: Option<&str>,
    ) -> Result<PathBuf, CliError> {
        let o = Overrides {
            out: Some(out.to_path_buf()),
            sweep: sweep.map(String::from),
            ..Overrides::default()
        };
        execute(command, text.parse().unwrap(), &o)
    }

    fn body(path: &Path) -> String {
        let text = fs::read_to_string(path).unwrap();
        assert!(text.starts_with("# config_hash="), "{}", path.display());
        text.split_once('\n').unwrap().1.to_string()
    }

    #[test]
    fn simulate_is_byte_identical_across_runs() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        run(Command::Simulate, CONFIG, &a, None).unwrap();
        run(Command::Simulate, CONFIG, &b, None).unwrap();
        for f in [
            "metrics.csv",
            "summary.csv",
            "trajectory.csv",
            "level_distribution.csv",
        ] {
            assert_eq!(
                fs::read(a.join(f)).unwrap(),
                fs::read(b.join(f)).unwrap(),
                "{f}"
            );
        }
        let header = body(&a.join("trajectory.csv"));
        assert!(header.starts_with("t,level,x,action,kind,y_hat,outcome,next_level,utility,"));
        assert!(body(&a.join("summary.csv")).starts_with("metric,mean,std\n"));
        // Three trials plus the header.
        assert_eq!(body(&a.join("metrics.csv")).lines().count(), 4);
    }

    #[test]
    fn design_round_trips_through_explicit_ladder() {
        let dir = tempfile::tempdir().unwrap();
        run(Command::Design, CONFIG, &dir.path().join("d"), None).unwrap();
        let ladder = fs::read_to_string(dir.path().join("d/ladder.toml")).unwrap();
        assert!(body(&dir.path().join("d/conditions.csv")).contains("condition_c,true,true"));
        let explicit = CONFIG.replace("[ladder]\ndelta_mu = 1.0\ncap = 10.0\n", "") + &ladder;
        run(Command::Simulate, CONFIG, &dir.path().join("x"), None).unwrap();
        run(Command::Simulate, &explicit, &dir.path().join("y"), None).unwrap();
        assert_eq!(
            body(&dir.path().join("x/metrics.csv")),
            body(&dir.path().join("y/metrics.csv"))
        );
        assert_eq!(
            body(&dir.path().join("d/thresholds.csv")).lines().count(),
            8
        );
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let infeasible = CONFIG
            .replace("delta_mu = 1.0", "delta_mu = 0.3")
            .replace("cap = 10.0", "cap = 3.0");
        let e = run(Command::Design, &infeasible, dir.path(), None).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("no valid sequence"));
        let bad = CONFIG.replace("cost_game = 0.75", "cost_game = 0.9");
        assert_eq!(
            run(Command::Simulate, &bad, dir.path(), None)
                .unwrap_err()
                .exit_code(),
            2
        );
        let e = CliError::from(multistage::Error::NotConverged {
            what: "power iteration",
            iterations: 1,
            residual: 1.0,
        });
        assert_eq!(e.exit_code(), 4);
        assert_eq!(
            CliError::from(multistage::Error::NonCompliantLadder("x".into())).exit_code(),
            3
        );
    }

    #[test]
    fn mix_sweep_writes_level_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let text = CONFIG.replace("trajectory = true", "policy = \"mix\"\nrho = 0.5");
        let out = run(
            Command::Simulate,
            &text,
            dir.path(),
            Some("run.rho=0,0.5,1"),
        )
        .unwrap();
        for v in ["0", "0.5", "1"] {
            assert!(out.join(format!("run.rho={v}/summary.csv")).exists());
        }
        let levels = body(&out.join("level_distribution.csv"));
        assert_eq!(levels.lines().count(), 1 + 3 * 7);
        assert!(body(&out.join("sweep_summary.csv")).starts_with("value,metric,mean,std\n"));
    }

    #[test]
    fn stationary_and_validate_reports() {
        let dir = tempfile::tempdir().unwrap();
        run(Command::Stationary, CONFIG, &dir.path().join("s"), None).unwrap();
        let report = body(&dir.path().join("s/report.csv"));
        assert!(report.starts_with("check,value,pass\n"));
        assert!(report.contains("ng_depth_doubling_tv,0,true"));
        assert!(body(&dir.path().join("s/chain_ng.csv")).starts_with("level,attribute,"));
        run(Command::Validate, CONFIG, &dir.path().join("v"), None).unwrap();
        assert!(!body(&dir.path().join("v/validation.csv")).contains(",false\n"));
    }

    #[test]
    fn rl_logs_selection() {
        let dir = tempfile::tempdir().unwrap();
        let text = CONFIG.replace("[ladder]\ndelta_mu = 1.0\ncap = 10.0", "[ladder]\nthresholds = [0.0, 1.0, 2.0]")
            + "\n[rl]\ndx = 0.5\nn_x = 6\nda = 0.5\nn_a = 2\nepisodes = 200\nhorizon = 50\nseeds = 3\ndiscount = 0.9\neval_horizon = 100\n";
        run(Command::Rl, &text, dir.path(), None).unwrap();
        let sel = body(&dir.path().join("selection.csv"));
        assert_eq!(sel.lines().count(), 4);
        assert_eq!(sel.matches(",true").count(), 1);
        assert_eq!(
            body(&dir.path().join("training.csv")).lines().count(),
            1 + 3 * 200
        );
        assert!(body(&dir.path().join("effort.csv")).contains("oracle_avg_reward"));
        assert!(body(&dir.path().join("q_table.csv"))
            .starts_with("level,attribute,a_improve,a_game,value,visits\n"));
    }
}
