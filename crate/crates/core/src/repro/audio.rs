//! End-to-end audio experiments: a continuous wideband source in a quiet
//! room versus the periodic chirp with echoes and a fixed interferer.

use serde::{Deserialize, Serialize};

use crate::audio::{localize_audio, speed_of_sound, AudioPipelineConfig};
use crate::error::Result;
use crate::eval::{evaluate, EvalConfig, Evaluation};
use crate::seed;
use crate::sim::{gen_chirp, gen_trajectory, gen_wideband, synth_audio, AudioSynthOptions, Echoes, Interferer, Pattern};
use crate::types::{Position, SceneConfig, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioSuiteConfig {
    pub path: Pattern,
    /// Walking speed, m/s.
    pub speed: f64,
    /// Passband of the wideband source, Hz.
    pub source_band: [f64; 2],
    /// Reflection coefficient of the first-order echoes in the chirp scene.
    pub echo_reflection: f64,
    pub interferer_position: [f64; 3],
    /// RMS of the interferer relative to the unit-RMS wideband source.
    pub interferer_gain: f64,
}

impl Default for AudioSuiteConfig {
    fn default() -> Self {
        Self {
            path: Pattern::Rectangle {
                min: [1.2, 0.8],
                max: [3.0, 1.7],
                laps: 1.0,
            },
            speed: 0.7,
            source_band: [100.0, 8000.0],
            echo_reflection: 0.5,
            interferer_position: [3.9, 2.3, 0.3],
            interferer_gain: 0.3,
        }
    }
}

pub struct AudioOutcome {
    pub truth: Trajectory,
    pub wideband: Evaluation,
    pub chirp: Evaluation,
}

fn localize_and_score(
    scene: &SceneConfig,
    truth: &Trajectory,
    source: &crate::sim::SourceSignal,
    opts: &AudioSynthOptions,
    seed: u64,
) -> Result<Evaluation> {
    let c = speed_of_sound(scene.temperature)?;
    let rec = synth_audio(truth, source, &scene.mic_array, c, opts)?;
    let cfg = AudioPipelineConfig::for_rate(scene.audio_sample_rate, seed::derive(seed, "audio/ransac"));
    let run = localize_audio(&rec, &scene.mic_array, scene.temperature, &cfg)?;
    evaluate(&run.trajectory, truth, &EvalConfig::default())
}

/// Runs both scenes on the same path, microphones and seed.
pub fn run_audio(scene: &SceneConfig, cfg: &AudioSuiteConfig, seed: u64) -> Result<AudioOutcome> {
    let fs = scene.audio_sample_rate;
    let truth = gen_trajectory(&cfg.path, scene, cfg.speed, 100.0)?;
    let duration = truth.duration();

    let wideband = gen_wideband(duration, fs, cfg.source_band, seed::derive(seed, "audio/source"))?;
    let quiet = AudioSynthOptions {
        bounds: Some(scene.room()),
        seed: seed::derive(seed, "audio/synth"),
        ..Default::default()
    };
    let wideband = localize_and_score(scene, &truth, &wideband, &quiet, seed)?;

    let chirp = gen_chirp(duration, fs)?;
    let fan = gen_wideband(duration, fs, cfg.source_band, seed::derive(seed, "audio/interferer"))?
        .scaled(cfg.interferer_gain);
    let busy = AudioSynthOptions {
        interferer: Some(Interferer {
            position: Position::from(cfg.interferer_position),
            signal: fan,
        }),
        echoes: Some(Echoes {
            room: scene.room(),
            reflection: cfg.echo_reflection,
        }),
        ..quiet
    };
    let chirp = localize_and_score(scene, &truth, &chirp, &busy, seed)?;
    Ok(AudioOutcome { truth, wideband, chirp })
}
