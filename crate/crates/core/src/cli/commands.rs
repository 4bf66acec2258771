use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::settings::Settings;
use crate::corpus::{generate_splits, load_embeddings, parse_tsv, parse_unlabeled_tsv, Splits};
use crate::diagnostics::{joint_gradient_check, GRADCHECK_EPSILON};
use crate::error::{Error, Result};
use crate::eval::{
    ablation_csv, evaluate, predict_all, run_ablation, run_fraction_sweep, sweep_csv, Prediction,
    Variant,
};
use crate::trainer::{
    apply_pretrained, initial_model, load_checkpoint, save_checkpoint, train_with_progress,
};

/// Largest relative error `gradcheck` accepts.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

fn output_dir(settings: &Settings) -> Result<PathBuf> {
    let out = settings.require_path("out")?;
    fs::create_dir_all(&out)?;
    Ok(out)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

/// Corpus files when `train` is set, otherwise the synthetic corpus.
fn load_splits(settings: &Settings) -> Result<Splits> {
    if settings.get("train").is_some() {
        Ok(Splits {
            train: parse_tsv(settings.require_path("train")?)?,
            dev: parse_tsv(settings.require_path("dev")?)?,
            test: parse_tsv(settings.require_path("test")?)?,
        })
    } else {
        generate_splits(&settings.synthetic_config()?)
    }
}

fn print_evaluation(label: &str, eval: &crate::eval::Evaluation) {
    println!("{label} {}", eval.sentence);
    match &eval.token {
        Some(t) => println!("{label} {t}"),
        None => println!("{label} token    (no token labels)"),
    }
}

pub fn train(settings: &Settings) -> Result<i32> {
    let config = settings.train_config()?;
    let train = parse_tsv(settings.require_path("train")?)?;
    let dev = parse_tsv(settings.require_path("dev")?)?;
    let test = settings.path("test").map(parse_tsv).transpose()?;
    let out = output_dir(settings)?;
    let resolved = settings.echo(Some(&config));
    write(&out.join("config.resolved"), &resolved)?;

    let initial = match settings.path("embeddings") {
        Some(path) => {
            let mut model = initial_model(&config, &train)?;
            let table = load_embeddings(path, &model.words, config.sizes.word_emb)?;
            eprintln!(
                "loaded {} of {} word vectors",
                table.pretrained_rows(),
                model.words.len()
            );
            apply_pretrained(&mut model.params, table, config.seed)?;
            Some(model)
        }
        None => None,
    };
    let metric = config.stop_metric;
    let outcome = train_with_progress(&config, &train, &dev, initial, &mut |r| {
        eprintln!(
            "epoch {:>3} loss {:.6} {} {:.4}",
            r.epoch, r.total, metric, r.dev_metric
        );
    })?;
    save_checkpoint(&outcome.model, &resolved, out.join("model.ckpt"))?;
    outcome.history.write_csv(out.join("history.csv"))?;
    println!(
        "best epoch {} {} {:.4}",
        outcome.best_epoch, metric, outcome.best_metric
    );
    if let Some(test) = test {
        print_evaluation("test", &evaluate(&outcome.model, &test)?);
    }
    Ok(0)
}

pub fn eval(settings: &Settings) -> Result<i32> {
    let checkpoint = load_checkpoint(settings.require_path("checkpoint")?)?;
    let data = parse_tsv(settings.require_path("data")?)?;
    print_evaluation("eval", &evaluate(&checkpoint.model, &data)?);
    Ok(0)
}

/// `#sent <score>` followed by one `token<TAB>a_hat<TAB>a_tilde` line per
/// token, with a blank line between sentences.
pub fn predictions_tsv(data: &crate::corpus::Dataset, predictions: &[Prediction]) -> String {
    let mut out = String::new();
    for (i, (s, p)) in data.iter().zip(predictions).enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "#sent {}", p.score);
        for (tok, t) in s.tokens().iter().zip(&p.tokens) {
            let _ = writeln!(out, "{tok}\t{}\t{}", t.score, t.weight);
        }
    }
    out
}

pub fn predict(settings: &Settings) -> Result<i32> {
    let checkpoint = load_checkpoint(settings.require_path("checkpoint")?)?;
    let data = parse_unlabeled_tsv(settings.require_path("data")?)?;
    let text = predictions_tsv(&data, &predict_all(&checkpoint.model, &data)?);
    if settings.get("out").is_some() {
        let out = output_dir(settings)?;
        write(&out.join("config.resolved"), &settings.echo(None))?;
        write(&out.join("predictions.tsv"), &text)?;
    } else {
        print!("{text}");
    }
    Ok(0)
}

pub fn sweep(settings: &Settings) -> Result<i32> {
    let config = settings.train_config()?;
    let fractions: Vec<f64> = settings.list("fractions", "0,0.2,0.4,0.6,0.8,1")?;
    let seeds: Vec<u64> = settings.list("seeds", "1,2,3")?;
    let splits = load_splits(settings)?;
    let out = output_dir(settings)?;
    write(&out.join("config.resolved"), &settings.echo(Some(&config)))?;
    let csv = sweep_csv(&run_fraction_sweep(&config, &splits, &fractions, &seeds)?);
    write(&out.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(0)
}

pub fn ablate(settings: &Settings) -> Result<i32> {
    let config = settings.train_config()?;
    let all = Variant::ALL.map(Variant::name).join(",");
    let names: Vec<String> = settings.list("variants", &all)?;
    let variants = names
        .iter()
        .map(|n| Variant::parse(n))
        .collect::<Result<Vec<_>>>()?;
    let seeds: Vec<u64> = settings.list("seeds", "1,2,3")?;
    let splits = load_splits(settings)?;
    let out = output_dir(settings)?;
    write(&out.join("config.resolved"), &settings.echo(Some(&config)))?;
    let csv = ablation_csv(&run_ablation(&config, &splits, &variants, &seeds)?);
    write(&out.join("ablation.csv"), &csv)?;
    print!("{csv}");
    Ok(0)
}

pub fn synth(settings: &Settings) -> Result<i32> {
    let splits = generate_splits(&settings.synthetic_config()?)?;
    let out = output_dir(settings)?;
    write(&out.join("config.resolved"), &settings.echo(None))?;
    for (name, d) in [
        ("train", &splits.train),
        ("dev", &splits.dev),
        ("test", &splits.test),
    ] {
        d.write_tsv(out.join(format!("{name}.tsv")))?;
        println!(
            "{name}: {} sentences, {} positive",
            d.len(),
            d.positive_count()
        );
    }
    Ok(0)
}

pub fn gradcheck(settings: &Settings) -> Result<i32> {
    let seed: u64 = match settings.get("seed") {
        Some(v) => v
            .parse()
            .map_err(|_| Error::config(format!("invalid value {v:?} for seed")))?,
        None => 1,
    };
    let report = joint_gradient_check(seed, GRADCHECK_EPSILON)?;
    println!("max_relative_error {:e}", report.max_relative_error);
    println!("entries_checked {}", report.entries_checked);
    if let Some((name, idx)) = &report.worst {
        println!("worst {name}[{idx}]");
    }
    if report.max_relative_error <= GRADCHECK_TOLERANCE {
        Ok(0)
    } else {
        eprintln!(
            "jointlabel gradcheck: relative error {:e} exceeds {:e}",
            report.max_relative_error, GRADCHECK_TOLERANCE
        );
        Ok(1)
    }
}
