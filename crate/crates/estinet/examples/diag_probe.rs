use estinet::experiment::{presets, run_experiment, Scale};
use estinet::framework::{EntropyReg, Procedure};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    for ent in [EntropyReg::Threshold { lambda: 0.1, gamma: 0.15 }, EntropyReg::Off] {
        for proc_ in [Procedure::Offline, Procedure::Online, Procedure::Hybrid] {
            let mut cfg = presets::tll(proc_, Scale::Desk, 1);
            cfg.repeats = 1;
            cfg.dataset.n_train = 2000;
            cfg.dataset.n_test = 400;
            cfg.training.epochs = 8;
            cfg.training.entropy = ent;
            let rec = run_experiment(&cfg).unwrap();
            let m = &rec[0].final_metrics;
            println!("{ent:?} {proc_:?}: train {:.3} test {:.3} infer {:.3} arg {:.3} ({:.0?})",
                m.get("train.accuracy").unwrap_or(&f64::NAN),
                m.get("test.accuracy").unwrap_or(&f64::NAN),
                m.get("inference.accuracy").unwrap_or(&f64::NAN),
                m.get("inference.argument_accuracy").unwrap_or(&f64::NAN),
                t0.elapsed());
        }
    }
}
