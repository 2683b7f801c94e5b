//! Runs the full command-line pipeline in a temporary directory:
//! simulate, calibrate three models, verify, then prints the report.

use std::path::Path;

const CONFIG: &str = r#"
seed = 7
n_days = 40
n_stations = 5
group_sizes = [1, 10]
truth_model = "MIXTURE"
truth_tn = [0.2, 0.1, 0.08, 0.2, 0.3]
truth_ln = [1.5, 0.15, 0.1, 1.0, 1.5]
truth_weight = 0.7
window_days = 15
bootstrap_samples = 500
bootstrap_size = 100
"#;

fn run(args: &[&str]) {
    let code = emos::cli::main_with_args(std::iter::once("emos").chain(args.iter().copied()));
    assert_eq!(code, 0, "emos {args:?} failed");
}

fn main() -> std::io::Result<()> {
    let dir = std::env::temp_dir().join(format!("emos_pipeline_{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let config = dir.join("run.toml");
    std::fs::write(&config, CONFIG)?;
    let p = |s: &str| dir.join(s).display().to_string();
    let config = config.display().to_string();

    run(&["simulate", "--config", &config, "--out", &p("sim")]);
    let data = p("sim/data.csv");
    let mut verify = vec!["verify".to_string(), "--config".into(), config.clone(), "--data".into(), data.clone()];
    verify.extend(["--out".into(), p("verify")]);
    for model in ["TN", "LN", "MIXTURE"] {
        let out = p(&format!("cal_{model}"));
        run(&["calibrate", "--config", &config, "--data", &data, "--out", &out, "--model", model]);
        verify.extend(["--forecasts".into(), format!("{out}/forecasts.csv")]);
    }
    run(&verify.iter().map(String::as_str).collect::<Vec<_>>());

    for file in ["report.csv", "dm_tests.csv", "bootstrap_rejection.csv"] {
        println!("== {file}");
        print!("{}", std::fs::read_to_string(Path::new(&p("verify")).join(file))?);
    }
    std::fs::remove_dir_all(&dir)
}
