use estinet::framework::{evaluate, train_procedure, EntropyReg, Mode, Procedure, TrainingConfig, PretrainConfig};
use estinet::models::ImageLookupModel;
use estinet::tasks::{gen_image_lookup, generate_digit_corpus};
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let corpus = Arc::new(generate_digit_corpus(6000, 1));
    let test_corpus = Arc::new(generate_digit_corpus(1000, 2));
    let (train_ds, table) = gen_image_lookup(&corpus, 2, 3000, 3, 4).unwrap();
    let (test_ds, _) = gen_image_lookup(&test_corpus, 2, 400, 5, 4).unwrap();
    let (model, mut params) = ImageLookupModel::build(corpus.clone(), table.clone(), 7);
    let cfg = TrainingConfig {
        procedure: Procedure::Hybrid,
        beta: 1.0,
        entropy: EntropyReg::Threshold { lambda: 0.1, gamma: 0.15 },
        label_smoothing: 0.6,
        learning_rate: 0.001,
        batch_size: 20,
        epochs: 15,
        pretrain: PretrainConfig { samples_per_epoch: 3000, holdout: 400, batch_size: 50, max_epochs: 20, target_accuracy: 0.9, patience: 5 },
        seed: 11,
    };
    let steps_per_epoch = train_ds.samples.len() / cfg.batch_size;
    let (model_t, _) = ImageLookupModel::build(test_corpus.clone(), table.clone(), 7);
    let mut epoch_end = steps_per_epoch;
    let out = train_procedure(&model, &mut params, &train_ds.samples, &cfg, |step, p| {
        if step >= epoch_end {
            epoch_end += steps_per_epoch;
            let ev = evaluate(&model_t, p, &test_ds.samples[..200], Mode::Test, 50)?;
            eprintln!("step {step}: test acc {:.3} arg acc {:?} ({:.0?})", ev.accuracy(), ev.argument_accuracy(), t0.elapsed());
        }
        Ok(())
    }).unwrap();
    println!("pretrain: {:?}", out.pretrain);
    let test = evaluate(&model_t, &params, &test_ds.samples, Mode::Test, 50).unwrap();
    let inf = evaluate(&model_t, &params, &test_ds.samples, Mode::Inference, 50).unwrap();
    println!("final: test acc {:.3} arg acc {:?} | inference acc {:.3} ({:.0?})",
        test.accuracy(), test.argument_accuracy(), inf.accuracy(), t0.elapsed());
}
