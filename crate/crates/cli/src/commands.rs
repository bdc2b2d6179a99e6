use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use serde_json::{json, Value};
use wespsq::dataformat::{read_session, write_session, EEGB_MAGIC};
use wespsq::dsp::{
    decimate_epoch, extract_epochs_with, read_epochs, write_epochs, EpochSet, EPB_MAGIC,
};
use wespsq::ensemble::{load_bundle, save_bundle, EpochScorer, OracleScorer, MANIFEST_FILE};
use wespsq::metrics::{analytic_char_accuracy, d_prime, simulate_char_accuracy};
use wespsq::pipeline::{evaluate_bundle, train_ensemble};
use wespsq::speller::accuracy_vs_repetitions;
use wespsq::synth::{generate_session, SynthConfig};
use wespsq::{EnsembleBundle32, Error};

use crate::config::PipelineConfig;
use crate::report::{pipeline_seeds, Reporter, Timer};
use crate::SynthArgs;

pub struct Context {
    pub config: PipelineConfig,
    pub report_dir: PathBuf,
}

impl Context {
    fn reporter(&self, command: &'static str) -> Result<Reporter> {
        Reporter::new(self.report_dir.clone(), command, self.config.clone())
    }
}

/// 2 usage, 3 data or validation, 4 numeric divergence, 5 I/O.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Io(_) => 5,
                Error::Divergence { .. } | Error::Numeric(_) => 4,
                _ => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 5;
        }
        if cause
            .downcast_ref::<rayon::ThreadPoolBuildError>()
            .is_some()
        {
            return 2;
        }
    }
    3
}

/// Reads an EEGB session (filtered and epoched on the fly) or an EPB1 epoch file.
fn load_epochs(config: &PipelineConfig, path: &Path) -> Result<EpochSet> {
    let open = || File::open(path).with_context(|| format!("opening {}", path.display()));
    let mut magic = [0u8; 4];
    open()?
        .read_exact(&mut magic)
        .with_context(|| format!("reading {}", path.display()))?;
    let reader = BufReader::new(open()?);
    if &magic == EPB_MAGIC {
        return Ok(read_epochs(reader)?);
    }
    if &magic != EEGB_MAGIC {
        return Err(Error::Magic {
            expected: "EEGB or EPB1".into(),
            found: String::from_utf8_lossy(&magic).into_owned(),
        }
        .into());
    }
    let session = read_session(reader)?;
    let filter = config.filter.design(session.fs_hz)?;
    Ok(extract_epochs_with(&session, &filter, config.filter.mode)?)
}

fn load_bundle_at(path: &Path) -> Result<(EnsembleBundle32, Value)> {
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let (bundle, manifest) = load_bundle::<f32>(&manifest_path)
        .with_context(|| format!("loading bundle {}", manifest_path.display()))?;
    let seeds = json!({
        "member_seeds": bundle.seeds(),
        "trained_with_config_hash": manifest.config_hash,
    });
    Ok((bundle, seeds))
}

fn curve_rows(accuracy: &[f64]) -> Vec<Value> {
    accuracy
        .iter()
        .enumerate()
        .map(|(j, a)| json!({"repetitions": j + 1, "accuracy": a}))
        .collect()
}

pub fn synth(ctx: &Context, args: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &args.synth_config {
        Some(p) => serde_json::from_str(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )
        .with_context(|| format!("parsing {}", p.display()))?,
        None => SynthConfig::default(),
    };
    if let Some(v) = args.characters {
        cfg.n_characters = v;
    }
    if args.text.is_some() {
        cfg.text = args.text;
    }
    if let Some(v) = args.channels {
        cfg.n_channels = v;
    }
    if let Some(v) = args.amplitude {
        cfg.amplitude_uv = v;
    }
    if let Some(v) = args.sigma {
        cfg.noise_sigma_uv = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    let mut timer = Timer::default();
    let session = timer.phase("generate", || generate_session(&cfg))?;
    let out = File::create(&args.output)
        .with_context(|| format!("creating {}", args.output.display()))?;
    let bytes = timer.phase("write", || write_session(&session, BufWriter::new(out)))?;
    eprintln!(
        "wrote {} characters to {}",
        session.characters.len(),
        args.output.display()
    );
    ctx.reporter("synth")?.json(
        json!({"synth_seed": cfg.seed}),
        json!({}),
        &timer,
        json!({"output": args.output, "bytes": bytes, "synth": cfg}),
    )?;
    Ok(())
}

pub fn preprocess(
    ctx: &Context,
    input: &Path,
    output: &Path,
    features: Option<&Path>,
) -> Result<()> {
    let mut timer = Timer::default();
    let set = timer.phase("filter_and_epoch", || load_epochs(&ctx.config, input))?;
    let out = File::create(output).with_context(|| format!("creating {}", output.display()))?;
    timer.phase("write", || write_epochs(&set, BufWriter::new(out)))?;
    let mut samples_per_channel = None;
    if let Some(path) = features {
        let csv = timer.phase("decimate", || -> Result<String> {
            let mut csv = String::from("character,code,is_target,features\n");
            for e in &set.epochs {
                let fv = decimate_epoch(e, set.n_channels, ctx.config.decimation_stride, false)?;
                samples_per_channel = Some(fv.samples_per_channel);
                let values: Vec<String> = fv.values.iter().map(f32::to_string).collect();
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    e.character,
                    e.code,
                    e.is_target,
                    values.join(" ")
                );
            }
            Ok(csv)
        })?;
        std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!(
        "{} epochs ({} targets) to {}",
        set.len(),
        set.n_targets(),
        output.display()
    );
    ctx.reporter("preprocess")?.json(
        json!({}),
        json!({"input": input}),
        &timer,
        json!({
            "output": output,
            "features": features,
            "n_epochs": set.len(),
            "n_targets": set.n_targets(),
            "n_characters": set.characters.len(),
            "n_channels": set.n_channels,
            "labeled": set.labeled,
            "feature_samples_per_channel": samples_per_channel,
        }),
    )?;
    Ok(())
}

pub fn train(ctx: &Context, input: &Path, bundle_dir: &Path) -> Result<()> {
    let reporter = ctx.reporter("train")?;
    let seeds = pipeline_seeds(&ctx.config);
    eprintln!("seeds={seeds}");
    let mut timer = Timer::default();
    let set = timer.phase("load", || load_epochs(&ctx.config, input))?;
    let trained = timer.phase("train", || {
        train_ensemble::<f32>(&set, &ctx.config.ensemble, |k, s| {
            eprintln!(
                "member {} epoch {}: loss {:.5} accuracy {:.4}",
                k + 1,
                s.epoch,
                s.loss,
                s.accuracy
            );
        })
    })?;
    let manifest = timer.phase("save", || {
        save_bundle(&trained.bundle, bundle_dir, Some(reporter.hash.clone()))
    })?;

    let mut history = String::from("member,epoch,loss,accuracy\n");
    for (k, m) in trained.members.iter().enumerate() {
        for s in &m.history {
            let _ = writeln!(history, "{},{},{},{}", k + 1, s.epoch, s.loss, s.accuracy);
        }
    }
    reporter.csv("train", &seeds, &history)?;
    reporter.json(
        seeds,
        json!({"input": input}),
        &timer,
        json!({
            "bundle": manifest,
            "weights": trained.bundle.weights(),
            "members": trained.members,
            "subsets": trained.subsets,
        }),
    )?;
    Ok(())
}

pub fn evaluate(ctx: &Context, bundle: &Path, input: &Path) -> Result<()> {
    let mut timer = Timer::default();
    let (bundle, seeds) = timer.phase("load_bundle", || load_bundle_at(bundle))?;
    let set = timer.phase("load", || load_epochs(&ctx.config, input))?;
    let report = timer.phase("classify", || {
        evaluate_bundle(&bundle, &set, ctx.config.ensemble.threshold)
    })?;
    let reporter = ctx.reporter("evaluate")?;
    reporter.csv("evaluate", &seeds, &report.to_csv())?;
    reporter.json(
        seeds,
        json!({"input": input}),
        &timer,
        serde_json::to_value(&report)?,
    )?;
    print!("{}", report.to_csv());
    Ok(())
}

pub fn spell(ctx: &Context, bundle: Option<&Path>, input: &Path) -> Result<()> {
    let mut timer = Timer::default();
    let (scorer, seeds): (Box<dyn EpochScorer>, Value) = match bundle {
        Some(p) => {
            let (b, seeds) = timer.phase("load_bundle", || load_bundle_at(p))?;
            (Box::new(b), seeds)
        }
        None => (Box::new(OracleScorer), json!({"scorer": "oracle"})),
    };
    let set = timer.phase("load", || load_epochs(&ctx.config, input))?;
    let curve = timer.phase("spell", || {
        accuracy_vs_repetitions(scorer.as_ref(), &set, ctx.config.max_repetitions)
    })?;
    let reporter = ctx.reporter("spell")?;
    reporter.csv("spell", &seeds, &curve.to_csv())?;
    reporter.csv("spell_predictions", &seeds, &curve.predictions_csv())?;
    reporter.json(
        seeds,
        json!({"input": input, "oracle": bundle.is_none()}),
        &timer,
        json!({"curve": curve_rows(&curve.accuracy), "characters": curve.characters}),
    )?;
    print!("{}", curve.to_csv());
    Ok(())
}

pub fn ablate(ctx: &Context, bundle: &Path, input: &Path) -> Result<()> {
    let mut timer = Timer::default();
    let (bundle, seeds) = timer.phase("load_bundle", || load_bundle_at(bundle))?;
    let set = timer.phase("load", || load_epochs(&ctx.config, input))?;
    let reps = ctx.config.max_repetitions;
    let mut names = Vec::new();
    let mut curves = Vec::new();
    for (k, model) in bundle.models().iter().enumerate() {
        let name = format!("member_{}", k + 1);
        let curve = timer.phase(&name, || accuracy_vs_repetitions(model, &set, reps))?;
        names.push(name);
        curves.push(curve.accuracy);
    }
    let ensemble = timer.phase("ensemble", || accuracy_vs_repetitions(&bundle, &set, reps))?;
    names.push("ensemble".into());
    curves.push(ensemble.accuracy);

    let mut csv = format!("repetitions,{}\n", names.join(","));
    for j in 0..reps {
        let row: Vec<String> = curves.iter().map(|c| c[j].to_string()).collect();
        let _ = writeln!(csv, "{},{}", j + 1, row.join(","));
    }
    let reporter = ctx.reporter("ablate")?;
    reporter.csv("ablate", &seeds, &csv)?;
    let result: serde_json::Map<String, Value> = names
        .iter()
        .zip(&curves)
        .map(|(n, c)| (n.clone(), json!(curve_rows(c))))
        .collect();
    reporter.json(
        seeds,
        json!({"input": input}),
        &timer,
        json!({"weights": bundle.weights(), "curves": result}),
    )?;
    print!("{csv}");
    Ok(())
}

pub fn simulate(
    ctx: &Context,
    auc: Option<f64>,
    dprime: Option<f64>,
    reps: usize,
    n: usize,
    seed: u64,
) -> Result<()> {
    let d = match (auc, dprime) {
        (Some(a), None) => d_prime(a)?,
        (None, Some(d)) => d,
        _ => bail!("exactly one of --auc and --dprime is required"),
    };
    let mut timer = Timer::default();
    let sim = timer.phase("monte_carlo", || simulate_char_accuracy(d, reps, n, seed))?;
    let analytic = timer.phase("quadrature", || {
        (1..=reps)
            .map(|j| analytic_char_accuracy(d, j))
            .collect::<wespsq::Result<Vec<_>>>()
    })?;
    let mut csv = String::from("d_prime,repetitions,accuracy,analytic\n");
    let mut rows = Vec::with_capacity(reps);
    for j in 0..reps {
        let _ = writeln!(csv, "{d},{},{},{}", j + 1, sim[j], analytic[j]);
        rows.push(json!({"repetitions": j + 1, "accuracy": sim[j], "analytic": analytic[j]}));
    }
    let seeds = json!({"simulation_seed": seed});
    let reporter = ctx.reporter("simulate")?;
    reporter.csv("simulate", &seeds, &csv)?;
    reporter.json(
        seeds,
        json!({"auc": auc, "d_prime": dprime, "reps": reps, "n_characters": n}),
        &timer,
        json!({"d_prime": d, "rows": rows}),
    )?;
    print!("{csv}");
    Ok(())
}
