use ocula_core::eog::{derive_eog, preprocess_eog, segment_trials, EogChain};
use ocula_core::io::{decode_frame, reassemble, run_stream_pipeline, schedule_record, stream_sim, AfeConfig, StreamConfig};
use ocula_core::nn::{build_epidenet, read_model, train, write_model, Dataset, ModelFile, TrainConfig};
use ocula_core::quant::quantize;
use ocula_core::synth::{gen_combined_session, gen_eog_session, SynthSpec, TrialLabel};

fn spec(seed: u64) -> SynthSpec {
    SynthSpec { trial_duration: 1.0, mains_amp_uv: 10.0, drift_uvps: 2.0, ..SynthSpec::default().with_seed(seed) }
}

#[test]
fn streaming_pipeline_matches_batch_chain() {
    let labels: Vec<TrialLabel> = TrialLabel::ALL.iter().copied().cycle().take(22).collect();
    let s = gen_combined_session(&spec(2), &labels, 2.0).unwrap();
    let afe = AfeConfig::new(2.4, 12, 500.0).unwrap();
    let sim = stream_sim(&s.record, &afe, &StreamConfig::default()).unwrap();
    let model = build_epidenet(2, 500, 1, 11, 3).unwrap();
    let streamed = run_stream_pipeline(sim.frames.clone(), &afe, &model, 1.0, 200.0, 4).unwrap();

    let frames: Vec<_> = sim.frames.iter().map(|b| decode_frame(b).unwrap()).collect();
    let (rec, _) = reassemble(&frames, &afe, None).unwrap();
    let pre = preprocess_eog(&derive_eog(&rec).unwrap(), EogChain::Classification).unwrap().to_record().unwrap();
    let batch = schedule_record(&pre, &model, 1.0, 200.0).unwrap();
    assert_eq!(streamed.predictions, batch);
    assert_eq!(streamed.samples as usize, s.record.n_samples());
}

#[test]
fn trained_model_reports_rest_on_a_resting_stream() {
    let labels: Vec<TrialLabel> = TrialLabel::ALL.iter().copied().cycle().take(11 * 12).collect();
    let s = gen_eog_session(&spec(5), &labels, 2.0).unwrap();
    let pre = preprocess_eog(&derive_eog(&s.record).unwrap(), EogChain::Classification).unwrap().to_record().unwrap();
    let ds = Dataset::from_epochs(&segment_trials(&pre, &s.labels, 1.0).unwrap(), 11).unwrap();
    let cfg = TrainConfig { lr: 3e-3, batch_size: 16, epochs: 30, seed: 5, ..TrainConfig::default() };
    let model = train(&ds, &cfg).unwrap().params;

    let rest = gen_eog_session(&spec(6), &[TrialLabel::Rest; 12], 0.0).unwrap();
    let pre = preprocess_eog(&derive_eog(&rest.record).unwrap(), EogChain::Classification).unwrap().to_record().unwrap();
    let preds = schedule_record(&pre.slice(1000, pre.n_samples() - 1000).unwrap(), &model, 1.0, 200.0).unwrap();
    assert!(!preds.is_empty());
    assert!(preds.iter().all(|p| p.class_id == TrialLabel::Rest.class_id()), "{preds:?}");
}

#[test]
fn quantized_file_reproduces_integer_inference() {
    let s = gen_eog_session(&spec(7), &TrialLabel::ALL, 0.0).unwrap();
    let pre = preprocess_eog(&derive_eog(&s.record).unwrap(), EogChain::Classification).unwrap().to_record().unwrap();
    let ds = Dataset::from_epochs(&segment_trials(&pre, &s.labels, 1.0).unwrap(), 11).unwrap();
    let q = quantize(&build_epidenet(2, 500, 1, 11, 7).unwrap(), &ds.inputs).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.epdn");
    write_model(&path, &ModelFile::Quantized(q.clone())).unwrap();
    let ModelFile::Quantized(back) = read_model(&path).unwrap() else { panic!("float model read back") };
    for x in &ds.inputs {
        assert_eq!(back.trace(x).unwrap(), q.trace(x).unwrap());
    }
}
