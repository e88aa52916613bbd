// Scratch calibration harness; removed before release.
use ppasim::train::{train_records, TrainConfig};
use ppasim::world::{synthesize_split, DatasetParams};
use std::path::PathBuf;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_train: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let n_test: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(400);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10);
    let lr: f32 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.02);
    let batch: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(32);
    let seed: u64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(1);

    let params = DatasetParams {
        n_train,
        n_test,
        seed: 100,
        texture_seed: 7,
        sigma_trans: 0.15,
        sigma_rot: 0.03,
    };
    let t0 = std::time::Instant::now();
    let train_set = synthesize_split(&params, n_train, 1);
    let test_set = synthesize_split(&params, n_test, 2);
    eprintln!("dataset {n_train}/{n_test} in {:.1?}", t0.elapsed());

    let cfg = TrainConfig {
        epochs,
        batch_size: batch,
        learning_rate: lr,
        seed,
        train_path: PathBuf::new(),
        test_path: PathBuf::new(),
    };
    let t1 = std::time::Instant::now();
    let outcome = train_records(&train_set, &test_set, &cfg).unwrap();
    for m in &outcome.history {
        eprintln!(
            "epoch {:2}  loss {:.4}  train x/y {:.3}/{:.3}  test x/y/joint {:.3}/{:.3}/{:.3}",
            m.epoch, m.loss, m.train_acc_x, m.train_acc_y, m.acc_x, m.acc_y, m.acc_joint
        );
    }
    eprintln!("trained in {:.1?}", t1.elapsed());
}
