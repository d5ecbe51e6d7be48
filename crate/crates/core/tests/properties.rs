use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ocula_core::dsp::{apply_filter, design_butterworth, design_notch, FilterKind, FilterMode};
use ocula_core::eog::{derive_eog, segment_trials};
use ocula_core::eval::{confusion, metrics};
use ocula_core::io::frame::decode_frame_prefix;
use ocula_core::io::{encode_frame, AfeConfig, FrameMeta, InferenceScheduler};
use ocula_core::nn::{build_epidenet, loss_and_grad, shape_trace, softmax, train, Dataset, TrainConfig};
use ocula_core::quant::{count_macs, quantize_weights};
use ocula_core::ssvep::{cca_max_corr, ncca};
use ocula_core::synth::{gen_eog_session, gen_eog_trial, gen_ssvep, SynthSpec, TrialLabel};
use ocula_core::{ConfigId, LabelRow, MultiChannelRecord};

fn rows(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Vec<Vec<f64>> {
    (0..d).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn record(data: Vec<Vec<f64>>) -> MultiChannelRecord {
    let names = (0..data.len()).map(|i| format!("c{i}")).collect();
    MultiChannelRecord::new(500.0, names, data, ConfigId::Unspecified).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), label in 0usize..11, dur in 0.5f64..3.0) {
        let spec = SynthSpec { trial_duration: dur, mains_amp_uv: 5.0, drift_uvps: 1.0, walking_amp_uv: 3.0, ..SynthSpec::default().with_seed(seed) };
        let label = TrialLabel::from_class_id(label).unwrap();
        let a = gen_eog_trial(label, &spec).unwrap();
        let b = gen_eog_trial(label, &spec).unwrap();
        prop_assert_eq!(&a.record, &b.record);
        prop_assert_eq!(a.record.n_samples(), (dur * 500.0).round() as usize);
    }

    #[test]
    fn designed_cascades_are_stable(order in 1usize..=12, lo in 0.3f64..20.0, width in 1.0f64..150.0, fs in prop::sample::select(vec![250.0, 500.0, 1000.0])) {
        let hi = (lo + width).min(fs / 2.0 - 1.0);
        for c in [
            design_butterworth(order, FilterKind::Lowpass, &[hi], fs).unwrap(),
            design_butterworth(order, FilterKind::Highpass, &[lo], fs).unwrap(),
            design_butterworth(2 * order.div_ceil(2), FilterKind::Bandpass, &[lo, hi], fs).unwrap(),
            design_notch(hi, 30.0, fs).unwrap(),
        ] {
            prop_assert!(c.sections().iter().all(|s| s.is_stable()));
        }
    }

    #[test]
    fn filtering_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (rows(&mut rng, 2, 800), rows(&mut rng, 2, 800));
        let mix: Vec<Vec<f64>> = x.iter().zip(&y).map(|(p, q)| p.iter().zip(q).map(|(u, v)| a * u + b * v).collect()).collect();
        let mut c = design_butterworth(6, FilterKind::Bandpass, &[0.5, 40.0], 500.0).unwrap();
        let fx = apply_filter(&mut c, &record(x), FilterMode::Batch).unwrap();
        let fy = apply_filter(&mut c, &record(y), FilterMode::Batch).unwrap();
        let fm = apply_filter(&mut c, &record(mix), FilterMode::Batch).unwrap();
        let scale = fm.data().iter().flatten().fold(1e-12f64, |m, v| m.max(v.abs()));
        for ch in 0..2 {
            for i in 0..800 {
                let want = a * fx.data()[ch][i] + b * fy.data()[ch][i];
                prop_assert!((fm.data()[ch][i] - want).abs() <= 1e-9 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn streaming_chunks_match_batch(seed in any::<u64>(), cuts in prop::collection::vec(1usize..300, 1..12)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rows(&mut rng, 2, 1500);
        let mut c = design_butterworth(10, FilterKind::Lowpass, &[40.0], 500.0).unwrap();
        let batch = apply_filter(&mut c, &record(x.clone()), FilterMode::Batch).unwrap();
        c.reset();
        let mut out: Vec<Vec<f64>> = vec![Vec::new(); 2];
        let mut at = 0;
        for &len in cuts.iter().cycle() {
            if at == 1500 { break; }
            let len = len.min(1500 - at);
            let part = record(x.iter().map(|r| r[at..at + len].to_vec()).collect());
            let y = apply_filter(&mut c, &part, FilterMode::Streaming).unwrap();
            for (o, r) in out.iter_mut().zip(y.data()) { o.extend_from_slice(r); }
            at += len;
        }
        prop_assert!(out.iter().flatten().zip(batch.data().iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn derivation_rejects_common_mode(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = gen_eog_trial(TrialLabel::UpLeft, &SynthSpec::default().with_seed(seed)).unwrap().record;
        let cm: Vec<f64> = (0..e.n_samples()).map(|_| rng.random_range(-1e-3..1e-3)).collect();
        let shifted = e.with_data(e.data().iter().map(|r| r.iter().zip(&cm).map(|(v, c)| v + c).collect()).collect()).unwrap();
        let (a, b) = (derive_eog(&e).unwrap(), derive_eog(&shifted).unwrap());
        for (p, q) in a.v_h.iter().zip(&b.v_h).chain(a.v_v.iter().zip(&b.v_v)) {
            prop_assert!((p - q).abs() <= 1e-15);
        }
    }

    #[test]
    fn segmentation_copies_exactly(seed in any::<u64>(), starts in prop::collection::vec(0usize..4000, 1..8)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rec = record(rows(&mut rng, 2, 5000));
        let labels: Vec<LabelRow> = starts.iter().map(|&s| LabelRow { start_sample: s, class_id: 0 }).collect();
        for (e, l) in segment_trials(&rec, &labels, 2.0).unwrap().iter().zip(&labels) {
            for (ch, row) in e.data.iter().enumerate() {
                prop_assert_eq!(&row[..], &rec.data()[ch][l.start_sample..l.start_sample + 1000]);
            }
        }
    }

    #[test]
    fn cca_is_symmetric_and_affine_invariant(seed in any::<u64>(), p in 1usize..=8, q in 1usize..=6, scale in 0.01f64..100.0, offset in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rows(&mut rng, p, 300);
        let y: Vec<Vec<f64>> = (0..q).map(|k| (0..300).map(|t| x[k % p][t] + rng.random_range(-1.0..1.0)).collect()).collect();
        let rho = cca_max_corr(&x, &y).unwrap();
        prop_assert!((rho - cca_max_corr(&y, &x).unwrap()).abs() <= 1e-9);
        let xa: Vec<Vec<f64>> = x.iter().enumerate().map(|(i, r)| r.iter().map(|v| scale * (i + 1) as f64 * v + offset).collect()).collect();
        prop_assert!((rho - cca_max_corr(&xa, &y).unwrap()).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&rho));
    }

    #[test]
    fn weight_round_trip_within_half_step(w in prop::collection::vec(-10.0f64..10.0, 1..200)) {
        let (q, s) = quantize_weights(&w);
        for (qi, wi) in q.iter().zip(&w) {
            prop_assert!((*qi as f64 * s - wi).abs() <= s / 2.0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn macs_ignore_weight_values(seed in any::<u64>()) {
        let a = build_epidenet(2, 500, 1, 11, seed).unwrap();
        let b = build_epidenet(2, 500, 1, 11, seed.wrapping_add(1)).unwrap();
        prop_assert_eq!(count_macs(&a).unwrap(), count_macs(&b).unwrap());
    }

    #[test]
    fn metrics_match_direct_accuracy(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..300)) {
        let (p, t): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let direct = 100.0 * p.iter().zip(&t).filter(|(a, b)| a == b).count() as f64 / p.len() as f64;
        let m = metrics(&confusion(&p, &t, 5).unwrap(), None).unwrap();
        prop_assert!((m.accuracy.unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn scheduler_count_is_closed_form(len in 0usize..3000, window in 1usize..500, hop in 1usize..300) {
        let mut s = InferenceScheduler::new(1, window, hop).unwrap();
        let emitted = (0..len).filter(|&i| s.push(&[i as f64])).count();
        let want = if len < window { 0 } else { (len - window) / hop + 1 };
        prop_assert_eq!(emitted, want);
        prop_assert_eq!(InferenceScheduler::expected_count(len, window, hop), want);
    }

    #[test]
    fn afe_error_is_half_lsb(v in -0.19f64..0.19, gain in prop::sample::select(vec![6u32, 12])) {
        let afe = AfeConfig::new(2.4, gain, 500.0).unwrap();
        let back = afe.raw_to_volts(afe.volts_to_raw(v).unwrap()).unwrap();
        prop_assert!((back - v).abs() <= afe.lsb_volts() / 2.0 * (1.0 + 1e-9));
    }

    #[test]
    fn decode_stops_at_declared_length(n in 1usize..40, tail in prop::collection::vec(any::<u8>(), 0..50)) {
        let codes: Vec<i32> = (0..n * 8).map(|i| i as i32 * 977 - 20_000).collect();
        let meta = FrameMeta { config: ConfigId::EegOnly, seq: 1, timestamp_us: 2 };
        let mut bytes = encode_frame(&codes, meta).unwrap();
        let len = bytes.len();
        bytes.extend(tail);
        let (f, used) = decode_frame_prefix(&bytes).unwrap();
        prop_assert_eq!(used, len);
        prop_assert_eq!(f.samples, codes);
    }

    #[test]
    fn softmax_sums_to_one(logits in prop::collection::vec(-50.0f64..50.0, 2..20)) {
        prop_assert!((softmax(&logits).iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shape_trace_follows_table(c in 1usize..=16, t in 128usize..3000, d in prop::sample::select(vec![1usize, 4])) {
        prop_assume!(c % d == 0);
        let tr = shape_trace(c, t, d, 3).unwrap();
        let get = |n: &str| tr.iter().find(|l| l.name == n).unwrap().shape;
        prop_assert_eq!(get("conv1"), (4, c, t));
        prop_assert_eq!(get("pool3"), (16, c, t / 8 / 4 / 4));
        prop_assert_eq!(get("conv5"), (16, c / d, t / 8 / 4 / 4));
        prop_assert_eq!(get("dense"), (3, 1, 1));
    }
}

#[test]
fn loss_ignores_batch_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = build_epidenet(2, 128, 1, 3, 2).unwrap();
    let xs: Vec<Vec<Vec<f64>>> = (0..5).map(|_| rows(&mut rng, 2, 128)).collect();
    let ys = vec![0, 2, 1, 1, 0];
    let (l1, g1) = loss_and_grad(&p, &xs, &ys).unwrap();
    let order = [3, 0, 4, 1, 2];
    let xs2: Vec<_> = order.iter().map(|&i| xs[i].clone()).collect();
    let ys2: Vec<_> = order.iter().map(|&i| ys[i]).collect();
    let (l2, g2) = loss_and_grad(&p, &xs2, &ys2).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
        assert!(a.iter().zip(b).all(|(u, v)| (u - v).abs() < 1e-12));
    }
}

#[test]
fn training_ignores_storage_order() {
    let s = gen_eog_session(&SynthSpec { trial_duration: 0.5, ..SynthSpec::default().with_seed(3) }, &TrialLabel::ALL[..4].repeat(3), 0.0).unwrap();
    let d = derive_eog(&s.record).unwrap();
    let rec = d.to_record().unwrap();
    let epochs = segment_trials(&rec, &s.labels, 0.5).unwrap();
    let ds = Dataset::from_epochs(&epochs, 4).unwrap();
    let mut rev = epochs.clone();
    rev.reverse();
    let ds_rev = Dataset::from_epochs(&rev, 4).unwrap();
    let cfg = TrainConfig { epochs: 3, batch_size: 4, seed: 9, ..TrainConfig::default() };
    assert_eq!(train(&ds, &cfg).unwrap().params, train(&ds_rev, &cfg).unwrap().params);
}

#[test]
fn ncca_score_rises_with_snr() {
    let spec = SynthSpec { sample_rate: 250.0, trial_duration: 3.0, ..SynthSpec::default() };
    let mut means = Vec::new();
    for snr in [0.0, 0.25, 0.5, 1.0, f64::INFINITY] {
        let total: f64 = (0..100)
            .map(|seed| {
                let r = gen_ssvep(&spec.with_seed(seed), 11.5, 2, snr).unwrap();
                ncca(r.data(), 11.5, 250.0, 2, 0.2).unwrap().score
            })
            .sum();
        means.push(total / 100.0);
    }
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
}
