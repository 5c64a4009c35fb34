//! Generate, store, reload, train, checkpoint, evaluate.

use predcode::eval;
use predcode::gol::{self, GenSpec};
use predcode::io;
use predcode::models::{ModelConfig, PredNetConfig, SimpleCnnConfig};
use predcode::training::{self, TrainConfig};

fn small_gol(seed: u64) -> GenSpec {
    GenSpec {
        episodes: 30,
        steps_per_episode: 6,
        height: 12,
        width: 12,
        seed,
        ..GenSpec::default()
    }
}

#[test]
fn dataset_survives_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_gol(1);
    let d = gol::generate_dataset(&spec).unwrap();
    let manifest = io::write_dataset(&d, dir.path(), Some(&spec)).unwrap();
    assert_eq!(manifest.episodes.len(), 30);
    let (back, m2) = io::read_dataset(dir.path()).unwrap();
    assert_eq!(back.episodes, d.episodes);
    assert_eq!(m2.generator.as_ref(), Some(&spec));
    assert_eq!(
        eval::previous_frame_baseline(&back).unwrap(),
        eval::previous_frame_baseline(&d).unwrap()
    );
}

#[test]
fn simple_cnn_beats_baseline_and_reloads_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let data = gol::generate_dataset(&small_gol(2)).unwrap();
    let config = ModelConfig::SimpleCnn(SimpleCnnConfig::with_kernel(3));
    let mut tc = TrainConfig::simple_cnn(4);
    tc.epochs = 8;
    let (model, history, held) = training::train(&config, &data, None, &tc, None).unwrap();
    assert_eq!(history.epochs.len(), 8);
    let losses = history.losses();
    assert!(losses.last().unwrap() < losses.first().unwrap());

    let mse = eval::model_mse(&model, &held).unwrap();
    let base = eval::previous_frame_baseline(&held).unwrap();
    assert!(mse < base, "model {mse} vs baseline {base}");

    let path = dir.path().join("m.ckpt");
    io::write_checkpoint(&model, &path).unwrap();
    let back = io::read_checkpoint(&path).unwrap().to_model().unwrap();
    let values = |m: &predcode::models::Model| {
        m.params()
            .iter()
            .map(|p| {
                (
                    p.name.clone(),
                    p.tensor.shape().to_vec(),
                    p.tensor.data().to_vec(),
                )
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(values(&back), values(&model));
    assert_eq!(
        eval::model_mse(&back, &held).unwrap().to_bits(),
        mse.to_bits()
    );
}

#[test]
fn prednet_trains_and_scores_reversed_data() {
    let data = gol::generate_dataset(&GenSpec {
        episodes: 6,
        steps_per_episode: 4,
        height: 8,
        width: 8,
        seed: 3,
        ..GenSpec::default()
    })
    .unwrap();
    let config = ModelConfig::PredNet(PredNetConfig::for_channels(1));
    let mut tc = TrainConfig::prednet(1);
    tc.epochs = 2;
    let (model, history, held) = training::train(&config, &data, Some(&data), &tc, None).unwrap();
    assert!(history.losses().iter().all(|l| l.is_finite()));
    assert_eq!(held.episodes, data.episodes);
    let fwd = eval::model_mse(&model, &data).unwrap();
    let rev = eval::model_mse(&model, &eval::reverse_episodes(&data)).unwrap();
    assert!(fwd.is_finite() && rev.is_finite());
    assert_eq!(model.predict_episode(&data.episodes[0]).unwrap().len(), 3);
}
