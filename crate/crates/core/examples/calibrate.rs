// Dev-only scratch driver for sizing desk-scale runs. Not part of the
// shipped pipeline.

use oodmap::classifier::{accuracy, train_classifier, ArchSpec, TrainHyper};
use std::time::Instant;

fn main() {
    env_logger::init();
    let which = std::env::args().nth(1).unwrap_or_else(|| "digits".into());
    match which.as_str() {
        "digits" => digits(),
        "shapes" => shapes(),
        other => panic!("unknown mode {other}"),
    }
}

fn digits() {
    let t0 = Instant::now();
    let train = oodmap::synth::digits(2000, 11).unwrap();
    let test = oodmap::synth::digits(1000, 12).unwrap();
    println!("gen: {:?}", t0.elapsed());

    let arch = ArchSpec::conv_small((28, 28, 1), 10);
    let hyper = TrainHyper {
        epochs: 5,
        batch_size: 64,
        lr: 0.05,
        holdout_fraction: 0.1,
        ..TrainHyper::default()
    };
    let t0 = Instant::now();
    let model = train_classifier(&train, arch, &hyper, 42).unwrap();
    println!(
        "train: {:?}, holdout acc {:.4}",
        t0.elapsed(),
        model.holdout_accuracy()
    );
    let t0 = Instant::now();
    let acc = accuracy(&model, &test).unwrap();
    println!("test acc {:.4} ({:?})", acc, t0.elapsed());
}

fn shapes() {
    let t0 = Instant::now();
    let train = oodmap::synth::shapes(4000, 21, oodmap::synth::ShapesVariant::BrightnessPairs).unwrap();
    let test = oodmap::synth::shapes(1000, 22, oodmap::synth::ShapesVariant::BrightnessPairs).unwrap();
    println!("gen: {:?}", t0.elapsed());

    let arch = ArchSpec::resnet18((32, 32, 3), 10, 8);
    let hyper = TrainHyper {
        epochs: 6,
        batch_size: 64,
        lr: 0.05,
        holdout_fraction: 0.1,
        noise_std: 0.01,
        ..TrainHyper::default()
    };
    let t0 = Instant::now();
    let model = train_classifier(&train, arch, &hyper, 42).unwrap();
    println!(
        "train: {:?}, holdout acc {:.4}",
        t0.elapsed(),
        model.holdout_accuracy()
    );
    let t0 = Instant::now();
    let acc = accuracy(&model, &test).unwrap();
    println!("test acc {:.4} ({:?})", acc, t0.elapsed());
}
