//! Shared inputs for the kernel benchmarks.

use ocula_core::eog::{derive_eog, preprocess_eog, EogChain};
use ocula_core::synth::{gen_eog_session, gen_ssvep, SynthSpec, TrialLabel};
use ocula_core::MultiChannelRecord;

/// Ten seconds of 3-electrode EOG at 500 Hz.
pub fn eog_record() -> MultiChannelRecord {
    let labels = [TrialLabel::Left, TrialLabel::Up, TrialLabel::Blink, TrialLabel::Rest, TrialLabel::DownRight];
    gen_eog_session(&SynthSpec { mains_amp_uv: 10.0, ..SynthSpec::default().with_seed(1) }, &labels, 0.0)
        .expect("valid spec")
        .record
}

/// One preprocessed `2 × samples` model input.
pub fn eog_window(samples: usize) -> Vec<Vec<f64>> {
    let pair = preprocess_eog(&derive_eog(&eog_record()).expect("EOG roles"), EogChain::Classification).expect("chain");
    vec![pair.v_h[..samples].to_vec(), pair.v_v[..samples].to_vec()]
}

/// A 3 s, 8-channel SSVEP window at 500 Hz.
pub fn ssvep_window() -> Vec<Vec<f64>> {
    let spec = SynthSpec { trial_duration: 3.0, ..SynthSpec::default().with_seed(2) };
    gen_ssvep(&spec, 11.5, 2, 1.0).expect("valid spec").into_data()
}
