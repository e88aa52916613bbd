// Scratch gradient diagnostics; removed before release.
use ppasim::train::{batch_pass, LatentModel, PreparedSample};
use ppasim::world::{synthesize_split, DatasetParams};

fn main() {
    let params = DatasetParams {
        n_train: 64,
        n_test: 0,
        seed: 100,
        texture_seed: 7,
        sigma_trans: 0.15,
        sigma_rot: 0.03,
    };
    let records = synthesize_split(&params, 64, 1);
    let mut latent = LatentModel::init(1);
    let prepared: Vec<PreparedSample> = records
        .iter()
        .map(|r| PreparedSample::from_pixels(r.image.pixels(), r.label_x, r.label_y, 0.0))
        .collect();

    // Input stats: fraction of dark bits per sample.
    let dark_rate: f64 = prepared
        .iter()
        .map(|p| p.padded.iter().filter(|&&v| v == -1).count() as f64 / 4096.0)
        .sum::<f64>()
        / prepared.len() as f64;
    eprintln!("input dark-bit rate {dark_rate:.4}");

    for step in 0..5 {
        let batch: Vec<&PreparedSample> = prepared.iter().take(32).collect();
        let result = batch_pass(&mut latent, &batch);
        let g_conv: f32 = result.gradients.conv.iter().flatten().map(|g| g.abs()).sum();
        let g_fc: f32 = result.gradients.fc_x.iter().flatten().map(|g| g.abs()).sum();
        let g_gamma: f32 = result.gradients.gamma.iter().map(|g| g.abs()).sum();
        let g_beta: f32 = result.gradients.beta.iter().map(|g| g.abs()).sum();
        eprintln!(
            "step {step}: loss {:.4}  |g_conv| {:.5} |g_fc| {:.5} |g_gamma| {:.5} |g_beta| {:.5}  hits_x {}",
            result.loss_x + result.loss_y,
            g_conv,
            g_fc,
            g_gamma,
            g_beta,
            result.hits_x
        );
        // Manual SGD so we can watch grads without the full train loop.
        for c in 0..latent.conv.len() {
            for t in 0..9 {
                latent.conv[c][t] =
                    (latent.conv[c][t] - 0.02 * result.gradients.conv[c][t]).clamp(-1.0, 1.0);
            }
            latent.bn[c].gamma -= 0.02 * result.gradients.gamma[c];
            latent.bn[c].beta -= 0.02 * result.gradients.beta[c];
        }
        for o in 0..8 {
            for i in 0..latent.fc_x[o].len() {
                latent.fc_x[o][i] =
                    (latent.fc_x[o][i] - 0.02 * result.gradients.fc_x[o][i]).clamp(-1.0, 1.0);
                latent.fc_y[o][i] =
                    (latent.fc_y[o][i] - 0.02 * result.gradients.fc_y[o][i]).clamp(-1.0, 1.0);
            }
        }
    }

    // Feature statistics through the exported model.
    let model = latent.export().unwrap();
    let mut on = vec![0usize; 8];
    for r in records.iter().take(32) {
        let out = ppasim::bnn::infer_reference(&model, &r.image).unwrap();
        for (c, plane) in out.pooled_planes.iter().enumerate() {
            on[c] += plane.cells().iter().map(|&b| b as usize).sum::<usize>();
        }
    }
    eprintln!(
        "pooled on-rates per channel: {:?}",
        on.iter().map(|&c| c as f64 / (32.0 * 256.0)).collect::<Vec<_>>()
    );

    // Label-conditional feature variation: for channel 0, P(bit | label_x).
    let mut per_bin = vec![[0f64; 16]; 8];
    let mut bin_count = [0usize; 8];
    for r in records.iter() {
        let out = ppasim::bnn::infer_reference(&model, &r.image).unwrap();
        bin_count[r.label_x as usize] += 1;
        for cx in 0..16 {
            let mut col = 0.0;
            for cy in 0..16 {
                col += out.pooled_planes[0].get(cx, cy) as f64;
            }
            per_bin[r.label_x as usize][cx] += col / 16.0;
        }
    }
    for b in 0..8 {
        if bin_count[b] > 0 {
            let row: Vec<String> = per_bin[b]
                .iter()
                .map(|v| format!("{:.2}", v / bin_count[b] as f64))
                .collect();
            eprintln!("label_x={b} (n={:2}) ch0 col on-rate: {}", bin_count[b], row.join(" "));
        }
    }
}
