//! Subcommand implementations.

use serde::Serialize;

use rpsim_core::allocation::Allocation;
use rpsim_core::analysis::{
    adversarial_search, berry_esseen_bound, ratio_trials, tail_below_count, Model, RatioEstimate,
    RatioNotion, RatioTrial,
};
use rpsim_core::birkhoff::birkhoff_decompose;
use rpsim_core::generators::{gen_iid, gen_non_iid};
use rpsim_core::instance::{matrix_from_csv, validate_instance, Mode};

use crate::config::{ExperimentConfig, Format, SCHEMA_VERSION};
use crate::output::{csv_writer, num, sibling_path, to_sci_json, write_output};
use crate::CliError;

/// A closed-form field that may be undefined at this n; serialized as a
/// number or as the explanatory string.
#[derive(Debug, Serialize)]
#[serde(untagged)]
enum BoundField {
    Value(f64),
    Unavailable(String),
}

impl BoundField {
    fn from_result(r: Result<f64, rpsim_core::Error>) -> Self {
        match r {
            Ok(v) => BoundField::Value(v),
            Err(e) => BoundField::Unavailable(e.to_string()),
        }
    }

    fn csv_field(&self) -> String {
        match self {
            BoundField::Value(v) => num(*v),
            // Empty field keeps the CSV machine-readable.
            BoundField::Unavailable(_) => String::new(),
        }
    }
}

#[derive(Serialize)]
struct Report<'a, Row: Serialize> {
    schema_version: u32,
    command: &'static str,
    inputs: &'a ExperimentConfig,
    rows: &'a [Row],
}

/// Emit rows as the configured format: a self-describing JSON report or a
/// headed CSV table.
fn emit_report<Row: Serialize>(
    config: &ExperimentConfig,
    command: &'static str,
    header: &[&str],
    rows: &[Row],
    to_record: impl Fn(&Row) -> Vec<String>,
) -> Result<(), CliError> {
    let content = match config.format {
        Format::Json => {
            let mut text = to_sci_json(&Report {
                schema_version: SCHEMA_VERSION,
                command,
                inputs: config,
                rows,
            })?;
            text.push('\n');
            text
        }
        Format::Csv => {
            let mut w = csv_writer(Vec::new());
            w.write_record(header)
                .map_err(|e| CliError::Io(e.to_string()))?;
            for row in rows {
                w.write_record(to_record(row))
                    .map_err(|e| CliError::Io(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::Config(e.to_string()))?
        }
    };
    write_output(config.output.as_deref(), &content)
}

fn progress(config: &ExperimentConfig, command: &str, n: usize, done: u64, total: u64) {
    if config.progress {
        eprintln!("progress: {command} n={n} {done}/{total} trials");
    }
}

fn chunk_size(trials: u64) -> u64 {
    (trials / 10).clamp(1, 5000)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::UnitRange => "unit-range",
        Mode::Box => "box",
    }
}

fn notion_name(notion: RatioNotion) -> &'static str {
    match notion {
        RatioNotion::ExpectationOfRatio => "expectation-of-ratio",
        RatioNotion::RatioOfExpectations => "ratio-of-expectations",
    }
}

// ---------------------------------------------------------------- generate

pub fn run_generate(config: &ExperimentConfig) -> Result<(), CliError> {
    let n = config.first_n();
    let inst = match &config.model {
        Model::Iid { dist } => gen_iid(n, dist, config.preset_policy, config.seed)?,
        Model::NonIid { grid } => {
            let grid = grid.materialize(n)?;
            gen_non_iid(n, &grid, config.preset_policy, config.seed)?
        }
    };
    debug_assert!(validate_instance(&inst).is_empty());

    let output = config.output.as_deref().ok_or_else(|| {
        CliError::Config("generate requires --output for the instance file".into())
    })?;
    let mut json = to_sci_json(&inst)?;
    json.push('\n');
    write_output(Some(output), &json)?;

    let free_count = inst.free_entries().count();
    if free_count == 0 {
        eprintln!("warning: n = {n} leaves no free entries; every value is preset");
        println!(
            "n={n} mode={} free_entries=0 free_mean=n/a",
            mode_name(inst.mode)
        );
    } else {
        let free_mean = inst.free_sum() / free_count as f64;
        println!(
            "n={n} mode={} free_entries={free_count} free_mean={free_mean:.6}",
            mode_name(inst.mode)
        );
    }
    Ok(())
}

// ------------------------------------------------------------------- ratio

#[derive(Serialize)]
struct RatioRow {
    n: usize,
    notion: RatioNotion,
    trials: u64,
    mean: f64,
    stderr: f64,
    ci_lo: f64,
    ci_hi: f64,
    bound_1_over_mu: f64,
    theorem_finite_bound: BoundField,
    seed: u64,
}

pub fn run_ratio(config: &ExperimentConfig) -> Result<(), CliError> {
    if config.detail && config.output.is_none() {
        return Err(CliError::Config(
            "--detail needs --output to place the per-trial file".into(),
        ));
    }

    let mut rows = Vec::new();
    let mut detail: Vec<(usize, RatioTrial)> = Vec::new();
    for &n in &config.n_list {
        let mut data: Vec<RatioTrial> = Vec::with_capacity(config.trials as usize);
        let chunk = chunk_size(config.trials);
        let mut done = 0u64;
        while done < config.trials {
            let hi = (done + chunk).min(config.trials);
            data.extend(ratio_trials(
                &config.model,
                n,
                done..hi,
                config.rp_samples,
                config.seed,
            )?);
            done = hi;
            progress(config, "ratio", n, done, config.trials);
        }
        let est = RatioEstimate::from_trials(&data, config.notion);
        rows.push(RatioRow {
            n,
            notion: config.notion,
            trials: est.trials,
            mean: est.mean,
            stderr: est.stderr,
            ci_lo: est.ci95.0,
            ci_hi: est.ci95.1,
            bound_1_over_mu: config.model.one_over_mu(n)?,
            theorem_finite_bound: BoundField::from_result(
                config.model.finite_ratio_bound(n, &config.constants),
            ),
            seed: config.seed,
        });
        if config.detail {
            detail.extend(data.into_iter().map(|t| (n, t)));
        }
    }

    if config.detail {
        let path = sibling_path(config.output.as_deref().expect("checked above"), "detail");
        let mut w = csv_writer(Vec::new());
        w.write_record(["n", "trial", "sw_opt", "sw_rp", "ratio"])
            .map_err(|e| CliError::Io(e.to_string()))?;
        for (n, t) in &detail {
            w.write_record([
                n.to_string(),
                t.trial.to_string(),
                num(t.sw_opt),
                num(t.sw_rp),
                num(t.ratio()),
            ])
            .map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        write_output(
            Some(&path),
            &String::from_utf8(bytes).map_err(|e| CliError::Config(e.to_string()))?,
        )?;
    }

    emit_report(
        config,
        "ratio",
        &[
            "n",
            "notion",
            "trials",
            "mean",
            "stderr",
            "ci_lo",
            "ci_hi",
            "bound_1_over_mu",
            "theorem_finite_bound",
            "seed",
        ],
        &rows,
        |r| {
            vec![
                r.n.to_string(),
                notion_name(r.notion).to_string(),
                r.trials.to_string(),
                num(r.mean),
                num(r.stderr),
                num(r.ci_lo),
                num(r.ci_hi),
                num(r.bound_1_over_mu),
                r.theorem_finite_bound.csv_field(),
                r.seed.to_string(),
            ]
        },
    )
}

// -------------------------------------------------------------------- tail

#[derive(Serialize)]
struct TailRow {
    n: usize,
    lambda: f64,
    empirical_prob: f64,
    theoretical_bound: f64,
    trials: u64,
    vacuous_flag: bool,
}

pub fn run_tail(config: &ExperimentConfig) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for &n in &config.n_list {
        let lambda = config.model.lambda(n)?;
        let bound = config.model.tail_bound(n, &config.constants)?;
        let chunk = chunk_size(config.trials);
        let mut below = 0u64;
        let mut done = 0u64;
        while done < config.trials {
            let hi = (done + chunk).min(config.trials);
            below += tail_below_count(
                &config.model,
                n,
                lambda,
                done..hi,
                config.rp_samples,
                config.seed,
            )?;
            done = hi;
            progress(config, "tail", n, done, config.trials);
        }
        rows.push(TailRow {
            n,
            lambda,
            empirical_prob: below as f64 / config.trials as f64,
            theoretical_bound: bound,
            trials: config.trials,
            vacuous_flag: bound >= 1.0,
        });
    }

    emit_report(
        config,
        "tail",
        &[
            "n",
            "lambda",
            "empirical_prob",
            "theoretical_bound",
            "trials",
            "vacuous_flag",
        ],
        &rows,
        |r| {
            vec![
                r.n.to_string(),
                num(r.lambda),
                num(r.empirical_prob),
                num(r.theoretical_bound),
                r.trials.to_string(),
                r.vacuous_flag.to_string(),
            ]
        },
    )
}

// ------------------------------------------------------------------ bounds

#[derive(Serialize)]
struct BoundsRow {
    n: usize,
    lambda: BoundField,
    tail_bound: BoundField,
    /// Normal-approximation ceiling for the sum of the n^2-2n free
    /// entries; undefined for per-cell grids.
    berry_esseen_bound: Option<BoundField>,
    theorem_finite_bound: BoundField,
    one_over_mu: f64,
}

pub fn run_bounds(config: &ExperimentConfig) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for &n in &config.n_list {
        let berry = match &config.model {
            Model::Iid { dist } => {
                let n_sum = (n * n - 2 * n) as u64;
                Some(BoundField::from_result(berry_esseen_bound(
                    dist,
                    n_sum.max(1),
                    config.constants.c,
                )))
            }
            Model::NonIid { .. } => None,
        };
        rows.push(BoundsRow {
            n,
            lambda: BoundField::from_result(config.model.lambda(n)),
            tail_bound: BoundField::from_result(config.model.tail_bound(n, &config.constants)),
            berry_esseen_bound: berry,
            theorem_finite_bound: BoundField::from_result(
                config.model.finite_ratio_bound(n, &config.constants),
            ),
            one_over_mu: config.model.one_over_mu(n)?,
        });
    }

    // Bounds are always a JSON object, whatever the table format is.
    let mut text = to_sci_json(&Report {
        schema_version: SCHEMA_VERSION,
        command: "bounds",
        inputs: config,
        rows: &rows,
    })?;
    text.push('\n');
    write_output(config.output.as_deref(), &text)
}

// ------------------------------------------------------------- adversarial

#[derive(Serialize)]
struct AdversarialReport<'a> {
    schema_version: u32,
    command: &'static str,
    inputs: &'a ExperimentConfig,
    n: usize,
    mode: &'static str,
    ratio: f64,
    instance: &'a rpsim_core::instance::Instance,
}

pub fn run_adversarial(config: &ExperimentConfig) -> Result<(), CliError> {
    let n = config.first_n();
    let output = config.output.as_deref().ok_or_else(|| {
        CliError::Config("adversarial requires --output for the instance and trace files".into())
    })?;
    if config.progress {
        eprintln!(
            "progress: adversarial n={n} iters={} restarts={}",
            config.adversarial.iters, config.adversarial.restarts
        );
    }
    let result = adversarial_search(
        n,
        config.adversarial.mode,
        config.adversarial.iters,
        config.adversarial.restarts,
        config.seed,
    )?;

    let mut json = to_sci_json(&AdversarialReport {
        schema_version: SCHEMA_VERSION,
        command: "adversarial",
        inputs: config,
        n,
        mode: mode_name(config.adversarial.mode),
        ratio: result.ratio,
        instance: &result.instance,
    })?;
    json.push('\n');
    write_output(Some(output), &json)?;

    let trace_path = sibling_path(output, "trace").with_extension("csv");
    let mut w = csv_writer(Vec::new());
    w.write_record(["iteration", "best_ratio"])
        .map_err(|e| CliError::Io(e.to_string()))?;
    for point in &result.trace {
        w.write_record([point.iteration.to_string(), num(point.best_ratio)])
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    write_output(
        Some(&trace_path),
        &String::from_utf8(bytes).map_err(|e| CliError::Config(e.to_string()))?,
    )?;

    println!("best ratio {:.6} at n={n}", result.ratio);
    Ok(())
}

// --------------------------------------------------------------- decompose

#[derive(Serialize)]
struct DecomposeRow {
    term: usize,
    weight: f64,
    /// Item of each agent, agent order.
    permutation: Vec<usize>,
}

pub fn run_decompose(config: &ExperimentConfig, input: &std::path::Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", input.display())))?;
    let probs: Vec<Vec<f64>> = if input.extension().is_some_and(|e| e == "json") {
        parse_allocation_json(&text)?
    } else {
        matrix_from_csv(text.as_bytes())?
    };
    let alloc = Allocation::new(probs)?;
    let decomposition = birkhoff_decompose(&alloc)?;

    let rows: Vec<DecomposeRow> = decomposition
        .terms
        .iter()
        .enumerate()
        .map(|(k, (w, perm))| DecomposeRow {
            term: k,
            weight: *w,
            permutation: perm.clone(),
        })
        .collect();

    emit_report(
        config,
        "decompose",
        &["term", "weight", "permutation"],
        &rows,
        |r| {
            vec![
                r.term.to_string(),
                num(r.weight),
                r.permutation
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
            ]
        },
    )
}

fn parse_allocation_json(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    #[derive(serde::Deserialize)]
    struct ProbsOnly {
        probs: Vec<Vec<f64>>,
    }
    if let Ok(matrix) = serde_json::from_str::<Vec<Vec<f64>>>(text) {
        return Ok(matrix);
    }
    serde_json::from_str::<ProbsOnly>(text)
        .map(|p| p.probs)
        .map_err(|e| CliError::Config(format!("allocation JSON: {e}")))
}
