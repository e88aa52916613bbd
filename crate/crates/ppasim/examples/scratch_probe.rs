// Scratch probe: can a handcrafted dark-detector model localise at all?
use ppasim::bnn::{infer_reference, BnnModel, ConvKernel, CHANNELS, FEATURE_LEN, POOLED_SIZE};
use ppasim::ppa::BitVector;
use ppasim::world::{synthesize_split, DatasetParams};

fn main() {
    // Channel 0: all -1 kernel (responds +9 to solid dark 3x3), threshold 8.
    // Other channels: irrelevant, give them thresholds so high they stay off.
    let mut kernels = vec![ConvKernel::new([-1i8; 9]).unwrap()];
    let mut thresholds = vec![8.0f32];
    for _ in 1..CHANNELS {
        kernels.push(ConvKernel::new([1i8; 9]).unwrap());
        thresholds.push(100.0); // never fires
    }
    // fc_x[o]: +1 where channel-0 pooled column is in bin o's 2-column band.
    let head = |by_column: bool| -> Vec<BitVector> {
        (0..8)
            .map(|o| {
                let mut bits = vec![0u8; FEATURE_LEN];
                for cy in 0..POOLED_SIZE {
                    for cx in 0..POOLED_SIZE {
                        let coord = if by_column { cx } else { cy };
                        if coord / 2 == o {
                            bits[cy * POOLED_SIZE + cx] = 1; // channel 0 block
                        }
                    }
                }
                BitVector::from_bits(bits)
            })
            .collect()
    };
    let model = BnnModel::new(kernels, thresholds, head(true), head(false), 0.0).unwrap();

    let params = DatasetParams {
        n_train: 0,
        n_test: 600,
        seed: 100,
        texture_seed: 7,
        sigma_trans: 0.15,
        sigma_rot: 0.03,
    };
    let test = synthesize_split(&params, 600, 2);

    let mut hits_x = 0;
    let mut hits_y = 0;
    let mut near_x = 0;
    let mut active_cells = 0usize;
    for r in &test {
        let out = infer_reference(&model, &r.image).unwrap();
        hits_x += (out.prediction.label_x == r.label_x) as usize;
        hits_y += (out.prediction.label_y == r.label_y) as usize;
        near_x += ((out.prediction.label_x as i32 - r.label_x as i32).abs() <= 1) as usize;
        active_cells += out.pooled_planes[0]
            .cells()
            .iter()
            .map(|&b| b as usize)
            .sum::<usize>();
    }
    let n = test.len() as f64;
    eprintln!(
        "handcrafted: acc_x {:.3} acc_y {:.3} near_x {:.3} mean ch0 pooled on-rate {:.3}",
        hits_x as f64 / n,
        hits_y as f64 / n,
        near_x as f64 / n,
        active_cells as f64 / (n * 256.0)
    );
}
