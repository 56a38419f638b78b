use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use cef::engine::io::{write_detections_csv, write_forecasts_csv, write_stream};
use cef::engine::{
    alphabet_proposal, benchmark_throughput, evaluate_forecasts, generate_synthetic_stream,
    replay_sharded, slowdown, EngineConfig, EvaluationReport, IidSource, MintermSource, Mode,
    PmcSource, RejectionEmitter, Replay,
};
use cef::pattern::PatternSpec;
use cef::pmc::{ForecastTable, PatternMarkovChain};
use cef::sfa::{compile_snfa, determinize, disambiguate, AutomatonDump, DisambiguatedDfa};
use cef::Event;

use crate::setup::{self, Loaded};
use crate::{
    FormatArg, GenArgs, Internal, ModeArg, ModelArgs, PatternArgs, RunArgs, SourceArg, Usage,
};

fn out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = out.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json(out: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    let path = out.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn test_path(run: &RunArgs) -> Result<&Path> {
    run.test
        .as_deref()
        .ok_or_else(|| Usage("--test STREAM is required".into()).into())
}

fn engine_config(spec: &PatternSpec, run: &RunArgs, mode: Mode) -> EngineConfig {
    EngineConfig {
        mode,
        partition_attribute: spec.partition_attribute.clone(),
        reset_on_detection: !run.no_reset,
        suppress_repeats: run.suppress_repeats,
        strict: !run.lenient,
    }
}

pub fn compile(args: &PatternArgs, out: &Path) -> Result<()> {
    let Loaded { spec, .. } = setup::load_pattern(args)?;
    let nfa = compile_snfa(&spec, setup::oracle(args.oracle)).context("compiling pattern")?;
    let dfa = determinize(&nfa);
    let mut per_order = Vec::with_capacity(spec.order + 1);
    let mut automaton = None;
    for m in 0..=spec.order {
        let d = disambiguate(&dfa, m, args.state_cap).context("disambiguating")?;
        per_order.push(d.num_states());
        automaton = Some(d);
    }
    if per_order.windows(2).any(|w| w[1] < w[0]) {
        bail!(Internal(format!(
            "state count decreased with the order: {per_order:?}"
        )));
    }
    let automaton = automaton.expect("at least order 0");
    out_dir(out)?;
    let dump = AutomatonDump::new(&automaton);
    fs::write(out.join("automaton.json"), dump.to_json() + "\n")?;
    fs::write(out.join("automaton.txt"), dump.to_text())?;
    write_json(
        out,
        "compile.json",
        &json!({
            "order": spec.order,
            "minterms": automaton.dfa.num_minterms(),
            "nfa_states": nfa.num_states,
            "dfa_states": dfa.num_states(),
            "states_per_order": per_order,
            "states": automaton.num_states(),
        }),
    )?;
    println!("minterms       {}", automaton.dfa.num_minterms());
    println!("nfa states     {}", nfa.num_states);
    println!("dfa states     {}", dfa.num_states());
    for (m, n) in per_order.iter().enumerate() {
        println!("order {m} states {n}");
    }
    Ok(())
}

fn table_json(table: &ForecastTable) -> serde_json::Value {
    let entries: Vec<_> = table
        .iter()
        .map(|f| {
            json!({
                "state": f.state,
                "start": f.start,
                "end": f.end,
                "spread": f.spread(),
                "probability": f.probability,
            })
        })
        .collect();
    json!({ "theta": table.theta, "forecasts": entries })
}

pub fn learn(args: &PatternArgs, model: &ModelArgs, out: &Path) -> Result<()> {
    let Loaded { spec, .. } = setup::load_pattern(args)?;
    if model.model.is_some() {
        bail!(Usage("learn takes --train, not --model".into()));
    }
    let compiled = setup::compile_spec(&spec, args)?;
    let pmc = setup::require_chain(setup::load_chain(&compiled.automaton, &spec, model)?)?;
    let table = setup::table(&pmc, &spec)?;
    out_dir(out)?;
    fs::write(out.join("pmc.json"), pmc.to_json() + "\n")?;
    write_json(out, "forecasts.json", &table_json(&table))?;
    println!(
        "states {}  forecasts {}  theta {}",
        pmc.num_states(),
        table.len(),
        table.theta
    );
    Ok(())
}

struct RunOutput {
    replay: Replay,
    report: Option<EvaluationReport>,
}

fn execute(
    args: &PatternArgs,
    model: &ModelArgs,
    run: &RunArgs,
    mode: Mode,
    out: &Path,
) -> Result<RunOutput> {
    let Loaded { spec, .. } = setup::load_pattern(args)?;
    let compiled = setup::compile_spec(&spec, args)?;
    let dfa = setup::arc(compiled.automaton);
    let table = match mode {
        Mode::Rec => None,
        Mode::RecFor => {
            let pmc = setup::require_chain(setup::load_chain(&dfa, &spec, model)?)?;
            Some(setup::table(&pmc, &spec)?)
        }
    };
    let events = setup::read_events(test_path(run)?)?;
    let replay = replay_sharded(
        dfa,
        table,
        engine_config(&spec, run, mode),
        &events,
        run.workers.max(1),
    )
    .context("replaying stream")?;
    let report = match mode {
        Mode::Rec => None,
        Mode::RecFor => Some(evaluate_forecasts(&replay.forecasts, &replay.detections)?),
    };
    out_dir(out)?;
    write_detections_csv(create(out, "detections.csv")?, &replay.detections)?;
    write_forecasts_csv(
        create(out, "forecasts.csv")?,
        &replay.forecasts,
        report.as_ref().map(|r| r.correct.as_slice()),
    )?;
    let mut summary = json!({
        "mode": mode,
        "events": replay.events,
        "skipped": replay.skipped,
        "partitions": replay.detections.partitions.len(),
        "detections": replay.detections.entries.len(),
        "forecasts": replay.forecasts.entries.len(),
    });
    if let Some(r) = &report {
        summary["theta"] = json!(spec.theta);
        summary["order"] = json!(spec.order);
        summary["evaluation"] = serde_json::to_value(r)?;
    }
    write_json(out, "report.json", &summary)?;
    log::info!(
        "{} events, {} detections, {} forecasts",
        replay.events,
        replay.detections.entries.len(),
        replay.forecasts.entries.len()
    );
    Ok(RunOutput { replay, report })
}

fn mode_of(arg: ModeArg) -> Mode {
    match arg {
        ModeArg::Rec => Mode::Rec,
        ModeArg::Recfor => Mode::RecFor,
    }
}

pub fn run(
    args: &PatternArgs,
    model: &ModelArgs,
    run: &RunArgs,
    mode: ModeArg,
    out: &Path,
) -> Result<()> {
    let r = execute(args, model, run, mode_of(mode), out)?;
    println!(
        "events {}  detections {}  forecasts {}",
        r.replay.events,
        r.replay.detections.entries.len(),
        r.replay.forecasts.entries.len()
    );
    Ok(())
}

pub fn evaluate(args: &PatternArgs, model: &ModelArgs, run: &RunArgs, out: &Path) -> Result<()> {
    let r = execute(args, model, run, Mode::RecFor, out)?;
    let report = r.report.expect("forecasting mode scores");
    println!(
        "precision {:.4}  spread {:.3}  scored {}  detections {}",
        report.precision, report.spread_mean, report.forecasts_scored, report.detections
    );
    Ok(())
}

/// One row of the sweep grid.
struct Cell {
    theta: f64,
    order: usize,
    extras: String,
    report: EvaluationReport,
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    args: &PatternArgs,
    model: &ModelArgs,
    run: &RunArgs,
    thetas: Option<&str>,
    orders: Option<&str>,
    variants: &[String],
    out: &Path,
) -> Result<()> {
    let Loaded { spec, registry, .. } = setup::load_pattern(args)?;
    if model.model.is_some() {
        bail!(Usage(
            "sweep learns one chain per order; pass --train".into()
        ));
    }
    let thetas: Vec<f64> = match thetas {
        Some(t) => setup::parse_list(t, "--thetas")?,
        None => vec![spec.theta],
    };
    if let Some(t) = thetas.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        bail!(Usage(format!("--thetas: {t} is outside (0, 1]")));
    }
    let orders: Vec<usize> = match orders {
        Some(o) => setup::parse_list(o, "--orders")?,
        None => vec![spec.order],
    };
    let variants: Vec<PatternSpec> = if variants.is_empty() {
        vec![spec.clone()]
    } else {
        variants
            .iter()
            .map(|v| setup::apply_extras(spec.clone(), v, &registry))
            .collect::<Result<_>>()?
    };

    let grid_empty = thetas.is_empty() || orders.is_empty();
    let (train, test) = if grid_empty {
        (Vec::new(), Vec::new())
    } else {
        let train = model
            .train
            .as_deref()
            .ok_or_else(|| Usage("sweep needs --train".into()))?;
        (
            setup::read_events(train)?,
            setup::read_events(test_path(run)?)?,
        )
    };

    let mut cells = Vec::new();
    for variant in &variants {
        let extras: Vec<String> = variant.extras.iter().map(|e| e.to_string()).collect();
        let extras = extras.join("; ");
        for &order in &orders {
            if thetas.is_empty() {
                break;
            }
            let mut spec = variant.clone();
            spec.order = order;
            let compiled = setup::compile_spec(&spec, args)?;
            let dfa = setup::arc(compiled.automaton);
            let pmc = setup::learn(&dfa, &spec, &train, model)?;
            for &theta in &thetas {
                spec.theta = theta;
                let report = sweep_cell(&dfa, &pmc, &spec, run, &test)?;
                log::info!(
                    "theta {theta} order {order} [{extras}]: precision {:.4}",
                    report.precision
                );
                cells.push(Cell {
                    theta,
                    order,
                    extras: extras.clone(),
                    report,
                });
            }
        }
    }

    out_dir(out)?;
    let mut w = csv::Writer::from_writer(create(out, "sweep.csv")?);
    w.write_record([
        "theta",
        "order",
        "extras",
        "precision",
        "spread_mean",
        "forecasts_scored",
    ])?;
    for c in &cells {
        w.write_record([
            c.theta.to_string(),
            c.order.to_string(),
            c.extras.clone(),
            c.report.precision.to_string(),
            c.report.spread_mean.to_string(),
            c.report.forecasts_scored.to_string(),
        ])?;
    }
    w.flush()?;
    println!(
        "{} rows written to {}",
        cells.len(),
        out.join("sweep.csv").display()
    );
    Ok(())
}

fn sweep_cell(
    dfa: &Arc<DisambiguatedDfa>,
    pmc: &PatternMarkovChain,
    spec: &PatternSpec,
    run: &RunArgs,
    test: &[Event],
) -> Result<EvaluationReport> {
    let (table, failed) = ForecastTable::build_lenient(pmc, spec.theta, setup::horizon(spec))?;
    if !failed.is_empty() {
        log::warn!(
            "theta {}: {} state(s) without a forecast",
            spec.theta,
            failed.len()
        );
    }
    let replay = replay_sharded(
        dfa.clone(),
        Some(Arc::new(table)),
        engine_config(spec, run, Mode::RecFor),
        test,
        run.workers.max(1),
    )?;
    Ok(evaluate_forecasts(&replay.forecasts, &replay.detections)?)
}

fn uniform_chain(dfa: &DisambiguatedDfa) -> PatternMarkovChain {
    let k = dfa.dfa.num_minterms();
    PatternMarkovChain::analytic(dfa, |_| vec![1.0 / k as f64; k])
}

/// Number of proposals drawn when probing which minterms can be produced.
const PROBE_DRAWS: usize = 20_000;

/// Minterms the proposal hits at least once in [`PROBE_DRAWS`] draws.
/// Under the default satisfiability oracle the alphabet may hold
/// combinations no event can realize.
fn reachable_minterms(dfa: &DisambiguatedDfa, loaded: &Loaded, gen: &GenArgs) -> Result<Vec<bool>> {
    let center = setup::center(gen.center.as_deref(), &loaded.geo)?;
    let alphabet = dfa.dfa.alphabet.clone();
    let proposal = alphabet_proposal(&alphabet, center.map(|c| (c, gen.radius_km)));
    let mut rng = ChaCha8Rng::seed_from_u64(gen.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut hit = vec![false; alphabet.len()];
    for _ in 0..PROBE_DRAWS {
        let mut e = Event::new(0, "");
        for (k, v) in proposal(&mut rng) {
            e.set(k, v);
        }
        hit[alphabet.classify_index(&e)?] = true;
    }
    Ok(hit)
}

/// Uniform over the reachable minterms.
fn uniform_reachable(dfa: &DisambiguatedDfa, loaded: &Loaded, gen: &GenArgs) -> Result<Vec<f64>> {
    let hit = reachable_minterms(dfa, loaded, gen)?;
    let n = hit.iter().filter(|h| **h).count();
    let missing: Vec<usize> = (0..hit.len()).filter(|&i| !hit[i]).collect();
    if !missing.is_empty() {
        log::warn!(
            "minterms {missing:?} were never produced by the proposal and get probability 0"
        );
    }
    Ok(hit
        .iter()
        .map(|&h| if h { 1.0 / n as f64 } else { 0.0 })
        .collect())
}

fn synthesize(
    dfa: &Arc<DisambiguatedDfa>,
    loaded: &Loaded,
    source: &dyn MintermSource,
    gen: &GenArgs,
) -> Result<Vec<Event>> {
    let center = setup::center(gen.center.as_deref(), &loaded.geo)?;
    let alphabet = dfa.dfa.alphabet.clone();
    let proposal = alphabet_proposal(&alphabet, center.map(|c| (c, gen.radius_km)));
    let emitter = RejectionEmitter::new(alphabet, proposal);
    Ok(generate_synthetic_stream(
        source,
        &emitter,
        gen.n,
        gen.partitions,
        gen.seed,
    )?)
}

pub fn bench(
    args: &PatternArgs,
    model: &ModelArgs,
    test: Option<&Path>,
    gen: &GenArgs,
    out: &Path,
) -> Result<()> {
    let loaded = setup::load_pattern(args)?;
    let spec = &loaded.spec;
    let compiled = setup::compile_spec(spec, args)?;
    let dfa = setup::arc(compiled.automaton);
    let pmc = match setup::load_chain(&dfa, spec, model)? {
        Some(p) => p,
        None => uniform_chain(&dfa),
    };
    let (table, _) = ForecastTable::build_lenient(&pmc, spec.theta, setup::horizon(spec))?;
    let table = Arc::new(table);
    let events = match test {
        Some(path) => setup::read_events(path)?,
        None => {
            let source = IidSource::new(&uniform_reachable(&dfa, &loaded, gen)?)?;
            synthesize(&dfa, &loaded, &source, gen)?
        }
    };
    let config = EngineConfig {
        partition_attribute: spec.partition_attribute.clone(),
        ..EngineConfig::default()
    };
    let rec = benchmark_throughput(dfa.clone(), None, &config, &events, Mode::Rec)?;
    let rec_for = benchmark_throughput(dfa, Some(table), &config, &events, Mode::RecFor)?;
    let ratio = slowdown(&rec, &rec_for);
    out_dir(out)?;
    write_json(
        out,
        "bench.json",
        &json!({ "events": events.len(), "rec": rec, "rec_for": rec_for, "slowdown": ratio }),
    )?;
    println!("rec      {:>12.0} events/s", rec.events_per_second);
    println!("rec+for  {:>12.0} events/s", rec_for.events_per_second);
    match ratio {
        Some(r) => println!("slowdown {r:.3}"),
        None => println!("slowdown undefined"),
    }
    Ok(())
}

pub fn generate(
    args: &PatternArgs,
    model: &ModelArgs,
    gen: &GenArgs,
    source: SourceArg,
    probs: Option<&str>,
    format: FormatArg,
    out: &Path,
) -> Result<()> {
    let loaded = setup::load_pattern(args)?;
    let spec = &loaded.spec;
    let compiled = setup::compile_spec(spec, args)?;
    let dfa = setup::arc(compiled.automaton);
    let k = dfa.dfa.num_minterms();
    let source: Box<dyn MintermSource> = match source {
        SourceArg::Iid => {
            let p = match probs {
                Some(text) => setup::parse_list::<f64>(text, "--probs")?,
                None => uniform_reachable(&dfa, &loaded, gen)?,
            };
            if p.len() != k {
                bail!(Usage(format!(
                    "--probs needs {k} values, one per minterm, got {}",
                    p.len()
                )));
            }
            Box::new(IidSource::new(&p)?)
        }
        SourceArg::Pmc => {
            let pmc = setup::require_chain(setup::load_chain(&dfa, spec, model)?)?;
            Box::new(PmcSource::new(dfa.clone(), &pmc, true)?)
        }
    };
    let events = synthesize(&dfa, &loaded, source.as_ref(), gen)?;
    out_dir(out)?;
    let name = match format {
        FormatArg::Csv => "stream.csv",
        FormatArg::Ndjson => "stream.ndjson",
    };
    let path = out.join(name);
    write_stream(&path, &events).with_context(|| format!("writing {}", path.display()))?;
    println!("{} events written to {}", events.len(), path.display());
    Ok(())
}
