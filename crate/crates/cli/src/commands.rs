use std::collections::HashMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use log::info;
use sasv_core::data::{
    format_cm_protocol, format_cm_scores, format_enrollment_map, format_score_file,
    format_trial_list, parse_cm_protocol, parse_cm_scores, parse_enrollment_map, parse_score_file,
    parse_trial_list, CmScores, EmbeddingStore, StoreFormat, StoreKind, TrialRecord,
};
use sasv_core::metrics::{evaluate_system, EvalReport, Metric, ScoredTrial};
use sasv_core::models::{
    score_trials, train_baseline2, train_iep, train_msfm, Checkpoint, EmbeddingDims, EvalData,
    ModelKind, System, TrainLog, TrainingData,
};
use sasv_core::sampling::generate_synthetic;

use crate::config::RunConfig;

/// A failed command, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration (exit 2).
    Usage(anyhow::Error),
    /// Anything that went wrong while running (exit 1).
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<sasv_core::Error>() {
            Some(sasv_core::Error::Config(_)) => Failure::Usage(e),
            _ => Failure::Runtime(e),
        }
    }
}

impl From<sasv_core::Error> for Failure {
    fn from(e: sasv_core::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

trait UsageExt<T> {
    fn usage(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> UsageExt<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
}

type CmdResult = Result<(), Failure>;

fn prepare_out(cfg: &RunConfig) -> CmdResult {
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create output directory {}", cfg.out.display()))?;
    write(
        &cfg.out.join("resolved_config.toml"),
        &cfg.to_toml().usage()?,
    )
}

fn write(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn read(path: &Path) -> Result<String, Failure> {
    Ok(fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?)
}

fn load_store(cfg: &RunConfig, key: &str, kind: StoreKind) -> Result<EmbeddingStore, Failure> {
    let path = cfg.existing(key).usage()?;
    Ok(EmbeddingStore::load(path, kind).with_context(|| format!("loading {}", path.display()))?)
}

fn load_cm_scores(cfg: &RunConfig) -> Result<CmScores, Failure> {
    let path = cfg.existing("cm_scores").usage()?;
    Ok(parse_cm_scores(&read(path)?).with_context(|| format!("parsing {}", path.display()))?)
}

fn load_trials(cfg: &RunConfig) -> Result<Vec<TrialRecord>, Failure> {
    let trials = cfg.existing("trials").usage()?;
    let enrollment = cfg.existing("enrollment").usage()?;
    let map = parse_enrollment_map(&read(enrollment)?)
        .with_context(|| format!("parsing {}", enrollment.display()))?;
    Ok(parse_trial_list(&read(trials)?, &map)
        .with_context(|| format!("parsing {}", trials.display()))?)
}

pub fn synth(cfg: &RunConfig) -> CmdResult {
    let synth_cfg = cfg.synthetic_config().usage()?;
    let format = cfg.store_format().usage()?;
    prepare_out(cfg)?;
    let ds = generate_synthetic(&synth_cfg)?;
    let ext = match format {
        StoreFormat::Binary => "emb",
        StoreFormat::Tsv => "tsv",
    };
    let out = &cfg.out;
    write(
        &out.join("train_protocol.txt"),
        &format_cm_protocol(&ds.train),
    )?;
    write(
        &out.join("dev_protocol.txt"),
        &format_cm_protocol(&ds.dev.records),
    )?;
    write(
        &out.join("eval_protocol.txt"),
        &format_cm_protocol(&ds.eval.records),
    )?;
    let mut enrollment = ds.dev.enrollment.clone();
    enrollment.extend(ds.eval.enrollment.clone());
    write(
        &out.join("enrollment.txt"),
        &format_enrollment_map(&enrollment),
    )?;
    write(
        &out.join("trials_dev.txt"),
        &format_trial_list(&ds.dev.trials),
    )?;
    write(
        &out.join("trials_eval.txt"),
        &format_trial_list(&ds.eval.trials),
    )?;
    ds.asv.write(out.join(format!("asv.{ext}")), format)?;
    ds.cm.write(out.join(format!("cm.{ext}")), format)?;
    write(&out.join("cm_scores.txt"), &format_cm_scores(&ds.cm_scores))?;
    // paths relative to this file, ready to pass as --config
    let dataset = format!(
        "protocol = \"train_protocol.txt\"\nasv_store = \"asv.{ext}\"\ncm_store = \"cm.{ext}\"\n\
         cm_scores = \"cm_scores.txt\"\nenrollment = \"enrollment.txt\"\ntrials = \"trials_eval.txt\"\n"
    );
    write(&out.join("dataset.toml"), &dataset)?;
    info!(
        "wrote {} training utterances, {} dev and {} eval trials to {}",
        ds.train.len(),
        ds.dev.trials.len(),
        ds.eval.trials.len(),
        out.display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig) -> CmdResult {
    let kind = cfg
        .model_kind()
        .usage()?
        .ok_or_else(|| Failure::Usage(anyhow!("--model is required for train")))?;
    if !kind.is_trainable() {
        return Err(Failure::Usage(anyhow!(
            "{kind} needs no training; run evaluate directly"
        )));
    }
    let train_cfg = cfg.train_config().usage()?;
    let protocol_path = cfg.existing("protocol").usage()?;
    let needs_scores = matches!(kind, ModelKind::Msfm | ModelKind::MsfmNoSssv);
    let cm_scores = if needs_scores || cfg.cm_scores.is_some() {
        Some(load_cm_scores(cfg)?)
    } else {
        None
    };
    let asv = load_store(cfg, "asv_store", StoreKind::Asv)?;
    let cm = load_store(cfg, "cm_store", StoreKind::Cm)?;
    prepare_out(cfg)?;
    let records = parse_cm_protocol(&read(protocol_path)?)
        .with_context(|| format!("parsing {}", protocol_path.display()))?;
    let data = TrainingData {
        records: &records,
        asv: &asv,
        cm: &cm,
        cm_scores: cm_scores.as_ref(),
    };
    info!(
        "training {kind} on {} utterances, seed {}",
        records.len(),
        train_cfg.seed
    );
    let (checkpoint, log) = match kind {
        ModelKind::Msfm | ModelKind::MsfmNoSssv => {
            let (m, log) = train_msfm(&data, kind == ModelKind::Msfm, &train_cfg)?;
            (Checkpoint::Msfm(m), log)
        }
        ModelKind::Iep => {
            let (m, log) = train_iep(&data, &train_cfg)?;
            (Checkpoint::Iep(m), log)
        }
        ModelKind::Baseline2 => {
            let (m, log) = train_baseline2(&data, &train_cfg)?;
            (Checkpoint::Baseline2(m), log)
        }
        ModelKind::Baseline1 => unreachable!("rejected above"),
    };
    checkpoint.save(cfg.out.join("model.ckpt"))?;
    write(
        &cfg.out.join("train_log.tsv"),
        &format_train_log(kind, train_cfg.seed, &log),
    )?;
    if let (Some(first), Some(last)) = (log.epoch_losses.first(), log.epoch_losses.last()) {
        info!(
            "loss {first:.4} -> {last:.4} over {} epochs",
            log.epoch_losses.len()
        );
    }
    Ok(())
}

fn format_train_log(kind: ModelKind, seed: u64, log: &TrainLog) -> String {
    let mut out = format!("# model {kind}\n# seed {seed}\nepoch\tloss\n");
    for (i, loss) in log.epoch_losses.iter().enumerate() {
        out.push_str(&format!("{}\t{loss:?}\n", i + 1));
    }
    out
}

fn check_dims(
    expected: EmbeddingDims,
    asv: &EmbeddingStore,
    cm: Option<&EmbeddingStore>,
) -> CmdResult {
    let mismatch = asv.dim() != expected.asv || cm.is_some_and(|c| c.dim() != expected.cm);
    if mismatch {
        return Err(Failure::Runtime(anyhow!(
            "checkpoint expects ASV/CM dims {}/{}, stores have {}/{}",
            expected.asv,
            expected.cm,
            asv.dim(),
            cm.map_or(0, |c| c.dim())
        )));
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig) -> CmdResult {
    let configured = cfg.model_kind().usage()?;
    let bins = cfg.histogram_bins().usage()?;
    let checkpoint = match configured {
        Some(ModelKind::Baseline1) => None,
        _ => {
            let path = cfg.existing("checkpoint").usage()?;
            Some(Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?)
        }
    };
    let kind = match (configured, &checkpoint) {
        (Some(k), Some(ck)) if k != ck.kind() => {
            return Err(Failure::Usage(anyhow!(
                "--model {k} does not match the checkpoint, which holds a {} model",
                ck.kind()
            )))
        }
        (Some(k), _) => k,
        (None, Some(ck)) => ck.kind(),
        (None, None) => unreachable!("checkpoint is loaded unless baseline1 is configured"),
    };
    let needs_cm_store = kind != ModelKind::Baseline1;
    let needs_scores = matches!(
        kind,
        ModelKind::Baseline1 | ModelKind::Msfm | ModelKind::MsfmNoSssv
    );
    let trials = load_trials(cfg)?;
    let asv = load_store(cfg, "asv_store", StoreKind::Asv)?;
    let cm = needs_cm_store
        .then(|| load_store(cfg, "cm_store", StoreKind::Cm))
        .transpose()?;
    let cm_scores = needs_scores.then(|| load_cm_scores(cfg)).transpose()?;
    prepare_out(cfg)?;

    let system = match checkpoint {
        None => System::Baseline1,
        Some(Checkpoint::Msfm(m)) => {
            check_dims(m.dims(), &asv, cm.as_ref())?;
            System::Msfm(m)
        }
        Some(Checkpoint::Iep(m)) => {
            check_dims(m.dims(), &asv, cm.as_ref())?;
            System::Iep(m)
        }
        Some(Checkpoint::Baseline2(m)) => {
            check_dims(m.dims(), &asv, cm.as_ref())?;
            System::Baseline2(m)
        }
    };
    let data = EvalData {
        asv: &asv,
        cm: cm.as_ref(),
        cm_scores: cm_scores.as_ref(),
    };
    let scored = score_trials(&system, &trials, &data)?;
    let lines = scored.iter().map(|s| {
        (
            s.trial.enroll_speaker_id.as_str(),
            s.trial.test_utterance_id.as_str(),
            s.score,
        )
    });
    write(&cfg.out.join("scores.txt"), &format_score_file(lines))?;
    info!("{kind}: scored {} trials", scored.len());
    write_report(&cfg.out, &scored, bins)?;
    Ok(())
}

pub fn report(cfg: &RunConfig) -> CmdResult {
    let bins = cfg.histogram_bins().usage()?;
    let scores_path = cfg.existing("scores").usage()?;
    let trials = load_trials(cfg)?;
    let lines = parse_score_file(&read(scores_path)?)
        .with_context(|| format!("parsing {}", scores_path.display()))?;
    prepare_out(cfg)?;
    let mut by_key: HashMap<(&str, &str), f64> = HashMap::with_capacity(lines.len());
    for line in &lines {
        let key = (
            line.enroll_speaker_id.as_str(),
            line.test_utterance_id.as_str(),
        );
        if let Some(old) = by_key.insert(key, line.score) {
            if old != line.score {
                return Err(Failure::Runtime(anyhow!(
                    "conflicting scores for {} {}",
                    key.0,
                    key.1
                )));
            }
        }
    }
    let mut missing = Vec::new();
    let scored: Vec<ScoredTrial> = trials
        .iter()
        .filter_map(|t| {
            let key = (t.enroll_speaker_id.as_str(), t.test_utterance_id.as_str());
            match by_key.get(&key) {
                Some(&score) => Some(ScoredTrial {
                    trial: t.clone(),
                    score,
                }),
                None => {
                    missing.push(format!("{} {}", key.0, key.1));
                    None
                }
            }
        })
        .collect();
    if !missing.is_empty() {
        let shown = missing
            .iter()
            .take(10)
            .cloned()
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Failure::Runtime(anyhow!(
            "score file has no score for {} trial(s): {shown}{}",
            missing.len(),
            if missing.len() > 10 { ", ..." } else { "" }
        )));
    }
    write_report(&cfg.out, &scored, bins)?;
    Ok(())
}

/// The reporting stage shared by `evaluate` and `report`.
fn write_report(out: &Path, scored: &[ScoredTrial], bins: usize) -> Result<EvalReport, Failure> {
    let report = evaluate_system(scored, bins)?;
    write(&out.join("report.csv"), &report.to_csv())?;
    write(&out.join("report.txt"), &report.to_key_value())?;
    write(&out.join("histogram.csv"), &report.histogram.to_csv())?;
    for metric in Metric::ALL {
        match report.get(metric).eer_percent() {
            Some(p) => info!("{metric}-EER {p:.2}%"),
            None => info!("{metric}-EER not defined for these trials"),
        }
    }
    Ok(report)
}
