use std::fmt::Write as _;
use std::path::Path;

use ocula_core::dsp::{apply_filter, design_butterworth, design_notch, FilterKind, FilterMode};
use ocula_core::eog::{derive_eog, preprocess_eog, segment_trials, EogChain, EogPair, Epoch};
use ocula_core::eval::{confusion_named, macro_metrics, metrics, Metrics};
use ocula_core::io::{
    decode_frame, read_labels, read_recording, reassemble, schedule_record, stream_sim, write_labels,
    write_recording, AfeConfig, Classifier, StreamConfig,
};
use ocula_core::nn::{itr_curve_cv, kfold_cv, read_model, train, write_model, Dataset, ModelFile, TrainConfig};
use ocula_core::quant::quantize;
use ocula_core::record::{V_C, V_H, V_L, V_R, V_V};
use ocula_core::ssvep::{ssvep_sweep, DetectOptions};
use ocula_core::synth::{gen_alpha_eeg, gen_combined_session, gen_eog_session, gen_ssvep, EyeState, SynthSpec, TrialLabel};
use ocula_core::{ConfigId, Error, LabelRow, MultiChannelRecord, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Cli, Command, DataArgs, EvalArgs, FilterArg, Global, SsvepArgs, StreamArgs, SynthArgs, SynthKind, TrainOpts};

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth(a) => synth(g, a),
        Command::Filter(a) => {
            let rec = read_rec(&a.io.input)?;
            let fs = rec.sample_rate();
            let mut cascade = match a.kind {
                FilterArg::Notch => {
                    let [f0] = a.cutoff[..] else {
                        return Err(Error::Parameter("notch takes one centre frequency".into()));
                    };
                    design_notch(f0, a.q, fs)?
                }
                FilterArg::Lowpass => design_butterworth(a.order, FilterKind::Lowpass, &a.cutoff, fs)?,
                FilterArg::Highpass => design_butterworth(a.order, FilterKind::Highpass, &a.cutoff, fs)?,
                FilterArg::Bandpass => design_butterworth(a.order, FilterKind::Bandpass, &a.cutoff, fs)?,
            };
            write_recording(&a.io.output, &apply_filter(&mut cascade, &rec, FilterMode::Batch)?)
        }
        Command::DeriveEog(a) => write_recording(&a.output, &derive_eog(&read_rec(&a.input)?)?.to_record()?),
        Command::Ssvep(a) => ssvep(g, a),
        Command::Train(a) => {
            let (ds, _) = dataset(&a.data)?;
            let result = train(&ds, &train_config(&a.opts, g.seed))?;
            write_model(&a.model, &ModelFile::Float(result.params))?;
            if let Some(path) = &a.history {
                let mut csv = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
                for h in &result.history {
                    let _ = writeln!(csv, "{},{},{},{},{}", h.epoch, h.train_loss, h.train_acc, h.val_loss, h.val_acc);
                }
                std::fs::write(path, csv)?;
            }
            log::info!("best epoch {}", result.best_epoch);
            Ok(())
        }
        Command::Quantize(a) => {
            let ModelFile::Float(params) = read_mdl(&a.model)? else {
                return Err(Error::Parameter(format!("{} is already quantized", a.model.display())));
            };
            let (ds, _) = dataset(&a.data)?;
            write_model(&a.output, &ModelFile::Quantized(quantize(&params, &ds.inputs)?))
        }
        Command::Infer(a) => {
            let model = read_mdl(&a.model)?;
            let model: &dyn Classifier = match &model {
                ModelFile::Float(p) => p,
                ModelFile::Quantized(q) => q,
            };
            let rec = model_input(&read_rec(&a.input)?)?;
            let window_s = model.input_shape().1 as f64 / rec.sample_rate();
            let mut csv = String::from("sample_index,time_s,class_id\n");
            for p in schedule_record(&rec, model, window_s, a.hop_ms)? {
                let _ = writeln!(csv, "{},{},{}", p.sample_index, p.time_s, p.class_id);
            }
            emit(a.output.as_deref(), &csv)
        }
        Command::Eval(a) => eval(g, a),
        Command::StreamSim(a) => stream(g, a),
    }
}

/// Names the file in I/O errors.
fn at<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn read_rec(path: &Path) -> Result<MultiChannelRecord> {
    at(path, read_recording(path))
}

fn read_mdl(path: &Path) -> Result<ModelFile> {
    at(path, read_model(path))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn synth(g: &Global, a: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        sample_rate: g.fs,
        trial_duration: a.duration.unwrap_or(match a.kind {
            SynthKind::Eog => 2.0,
            SynthKind::Ssvep => 25.0,
            SynthKind::Alpha => 60.0,
        }),
        amplitude_uv: a.amplitude_uv,
        noise_sd_uv: a.noise_uv,
        noise_tilt_db_per_octave: a.tilt_db,
        drift_uvps: a.drift_uvps,
        mains_amp_uv: a.mains_uv,
        latency_jitter_ms: a.jitter_ms,
        walking_amp_uv: a.walking_uv,
        seed: g.seed,
    };
    let config = g.config.map(ConfigId::from);
    match a.kind {
        SynthKind::Eog => {
            let mut labels: Vec<TrialLabel> =
                TrialLabel::ALL.iter().flat_map(|&l| std::iter::repeat_n(l, a.trials_per_class)).collect();
            labels.shuffle(&mut ChaCha8Rng::seed_from_u64(g.seed));
            let session = match config {
                None => gen_eog_session(&spec, &labels, 2.0)?,
                Some(ConfigId::Combined) => gen_combined_session(&spec, &labels, 2.0)?,
                Some(c) => return Err(Error::Parameter(format!("eye-movement sessions cannot use the `{c}` layout"))),
            };
            write_recording(&a.output, &session.record)?;
            match &a.labels {
                Some(p) => write_labels(p, &session.labels),
                None => Ok(()),
            }
        }
        SynthKind::Ssvep | SynthKind::Alpha => {
            if config == Some(ConfigId::Combined) {
                return Err(Error::Parameter("EEG generators use the `eeg_only` layout".into()));
            }
            let rec = if a.kind == SynthKind::Ssvep {
                gen_ssvep(&spec, a.freq, a.harmonics, a.snr)?
            } else {
                let half = spec.trial_duration / 2.0;
                gen_alpha_eeg(&spec, &[(EyeState::EyesOpen, half), (EyeState::EyesClosed, half)])?
            };
            write_recording(&a.output, &rec)
        }
    }
}

fn ssvep(g: &Global, a: &SsvepArgs) -> Result<()> {
    let mut by_freq: Vec<(f64, Vec<MultiChannelRecord>)> = Vec::new();
    if a.input.is_empty() {
        let spec = SynthSpec { sample_rate: g.fs, trial_duration: a.duration, ..SynthSpec::default() };
        for (fi, &f) in a.freqs.iter().enumerate() {
            let trials = (0..a.trials)
                .map(|k| gen_ssvep(&spec.with_seed(g.seed * 1000 + fi as u64 * 10 + k as u64), f, 1, a.snr))
                .collect::<Result<Vec<_>>>()?;
            by_freq.push((f, trials));
        }
    } else {
        for item in &a.input {
            let (f, path) = item
                .split_once(':')
                .ok_or_else(|| Error::Parameter(format!("expected FREQ:PATH, got `{item}`")))?;
            let f: f64 = f.parse().map_err(|_| Error::Parameter(format!("bad frequency `{f}`")))?;
            let rec = read_rec(Path::new(path))?;
            match by_freq.iter_mut().find(|(g, _)| *g == f) {
                Some((_, v)) => v.push(rec),
                None => by_freq.push((f, vec![rec])),
            }
        }
    }
    let opt = DetectOptions { n_harmonics: a.harmonics, delta: a.delta, threshold: a.threshold, hop_s: a.hop };
    let mut csv = String::from("freq,window_s,mean_score,detected\n");
    for r in ssvep_sweep(&by_freq, &a.windows, &opt)? {
        let _ = writeln!(csv, "{},{},{},{}", r.freq, r.window_s, r.mean_score, r.detected);
    }
    emit(a.output.as_deref(), &csv)
}

fn train_config(o: &TrainOpts, seed: u64) -> TrainConfig {
    TrainConfig {
        lr: o.lr,
        batch_size: o.batch_size,
        epochs: o.epochs,
        seed,
        weight_decay: o.weight_decay,
        pool_d: o.pool_d,
        ..TrainConfig::default()
    }
}

/// Electrode recordings go through derivation and the classification chain;
/// a derived V_H/V_V pair through the chain only; anything else is used as is.
fn model_input(rec: &MultiChannelRecord) -> Result<MultiChannelRecord> {
    let has = |n: &str| rec.channel_index(n).is_some();
    if has(V_R) && has(V_L) && has(V_C) {
        preprocess_eog(&derive_eog(rec)?, EogChain::Classification)?.to_record()
    } else if has(V_H) && has(V_V) {
        preprocess_eog(&EogPair::from_record(rec)?, EogChain::Classification)?.to_record()
    } else {
        Ok(rec.clone())
    }
}

fn epochs(d: &DataArgs) -> Result<(Vec<Epoch>, usize)> {
    let rec = read_rec(&d.input)?;
    let labels: Vec<LabelRow> = at(&d.labels, read_labels(&d.labels, Some(rec.n_samples())))?;
    let classes = d.classes.unwrap_or_else(|| labels.iter().map(|l| l.class_id + 1).max().unwrap_or(0));
    if let Some(bad) = labels.iter().find(|l| l.class_id >= classes) {
        return Err(Error::Validation(format!("label {} is outside the {classes} classes", bad.class_id)));
    }
    Ok((segment_trials(&model_input(&rec)?, &labels, d.window)?, classes))
}

fn dataset(d: &DataArgs) -> Result<(Dataset, Vec<Epoch>)> {
    let (ep, classes) = epochs(d)?;
    Ok((Dataset::from_epochs(&ep, classes)?, ep))
}

fn class_names(k: usize) -> Vec<String> {
    if k == TrialLabel::COUNT {
        TrialLabel::names()
    } else {
        (0..k).map(|i| i.to_string()).collect()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn metrics_row(label: &str, m: &Metrics) -> String {
    format!("{label},{},{},{}\n", opt(m.accuracy), opt(m.sensitivity), opt(m.specificity))
}

fn eval(g: &Global, a: &EvalArgs) -> Result<()> {
    let (ds, ep) = dataset(&a.data)?;
    let k = ds.num_classes;
    let pick = |cm| match a.positive {
        Some(p) if k == 2 => metrics(cm, Some(p)),
        _ => Ok(macro_metrics(cm)),
    };
    let mut table = String::from("fold,accuracy,sensitivity,specificity\n");
    let mut curve = None;
    let confusion = match &a.model {
        Some(path) => {
            let model = read_mdl(path)?;
            let model: &dyn Classifier = match &model {
                ModelFile::Float(p) => p,
                ModelFile::Quantized(q) => q,
            };
            let preds = ds.inputs.iter().map(|x| model.classify(x)).collect::<Result<Vec<_>>>()?;
            let cm = confusion_named(&preds, &ds.labels, class_names(k))?;
            table.push_str(&metrics_row("all", &pick(&cm)?));
            cm
        }
        None => {
            let cfg = train_config(&a.opts, g.seed);
            let report = kfold_cv(&ds, a.folds, &cfg, a.positive)?;
            for (i, f) in report.folds.iter().enumerate() {
                let m = Metrics { accuracy: Some(f.accuracy), sensitivity: f.sensitivity, specificity: f.specificity };
                table.push_str(&metrics_row(&(i + 1).to_string(), &m));
            }
            let mean = Metrics {
                accuracy: Some(report.mean_accuracy),
                sensitivity: report.mean_sensitivity,
                specificity: report.mean_specificity,
            };
            let sd = Metrics {
                accuracy: Some(report.sd_accuracy),
                sensitivity: report.sd_sensitivity,
                specificity: report.sd_specificity,
            };
            table.push_str(&metrics_row("mean", &mean));
            table.push_str(&metrics_row("sd", &sd));
            if !a.fractions.is_empty() {
                let mut csv = String::from("fraction,window_s,accuracy_pct,itr_bits_per_min,below_chance\n");
                for p in itr_curve_cv(&ep, &a.fractions, a.data.window, k, a.folds, &cfg)? {
                    let _ = writeln!(csv, "{},{},{},{},{}", p.fraction, p.itr.t, 100.0 * p.accuracy, p.itr.itr, p.itr.below_chance);
                }
                curve = Some(csv);
            }
            let mut cm = report.pooled;
            cm.class_names = class_names(k);
            cm
        }
    };
    match &a.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("confusion.csv"), confusion.to_csv())?;
            std::fs::write(dir.join("metrics.csv"), &table)?;
            if let Some(c) = &curve {
                std::fs::write(dir.join("itr_curve.csv"), c)?;
            }
            Ok(())
        }
        None => {
            print!("{}\n{table}", confusion.to_csv());
            if let Some(c) = &curve {
                print!("\n{c}");
            }
            Ok(())
        }
    }
}

fn stream(g: &Global, a: &StreamArgs) -> Result<()> {
    let rec = read_rec(&a.input)?;
    if let Some(c) = g.config {
        if rec.config_id() != ConfigId::from(c) {
            return Err(Error::Validation(format!("recording is `{}`, not `{}`", rec.config_id(), ConfigId::from(c))));
        }
    }
    let afe = AfeConfig::new(a.vref, a.gain, rec.sample_rate())?;
    let cfg = StreamConfig { frame_len: a.frame_len, loss_rate: a.loss_rate, jitter_ms: a.jitter_ms, seed: g.seed };
    let sim = stream_sim(&rec, &afe, &cfg)?;
    std::fs::write(&a.output, sim.frames.concat())?;
    let frames = sim.frames.iter().map(|b| decode_frame(b)).collect::<std::result::Result<Vec<_>, _>>()?;
    let (back, report) = reassemble(&frames, &afe, Some(sim.total_samples))?;
    if let Some(path) = &a.reassembled {
        write_recording(path, &back)?;
    }
    let mut csv = String::from("total_frames,received_frames,lost_frames,lost_samples,gaps\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{}",
        sim.total_frames,
        report.received_frames,
        report.lost_frames,
        report.lost_samples,
        report.gaps.len()
    );
    print!("{csv}");
    Ok(())
}
