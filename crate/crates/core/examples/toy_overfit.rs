//! Overfits a toy ×2 network on eight rendered 32×32 patches and reports
//! the loss curve and PSNR against the bicubic baseline.
//!
//! `cargo run --release --example toy_overfit -- [channels] [steps] [lr] [heads]`

use std::time::Instant;

use lfx_core::model::{Network, NetworkConfig};
use lfx_core::pipeline::{mean_psnr, resize_lf, train, ToyDataset, TrainConfig};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> lfx_core::Result<()> {
    lfx_core::par::retain_freed_memory();
    let (c, steps, lr, heads) = (arg(1, 8usize), arg(2, 2000usize), arg(3, 3e-3f64), arg(4, 2usize));
    let data = ToyDataset::default();
    let pairs = data.pairs()?;
    let bic = pairs
        .iter()
        .map(|p| resize_lf(&p.input, data.scale as f64))
        .collect::<lfx_core::Result<Vec<_>>>()?;
    println!("bicubic psnr {:.3}", mean_psnr(&bic, &pairs)?);

    let mut ncfg = NetworkConfig::ssr(data.scale, data.angular).toy(c, 1, 1);
    ncfg.heads = heads;
    let mut net = Network::<f32>::new(ncfg, 0)?;
    println!("params {}", net.params().num_values());
    let cfg = TrainConfig {
        batch_size: pairs.len(),
        lr,
        lr_halving_epochs: usize::MAX,
        epochs: steps,
        augment: false,
        max_steps: Some(steps),
        checkpoint_every: 0,
        ..TrainConfig::ssr(data.scale)
    };
    let t = Instant::now();
    let r = train(&mut net, &pairs, &[], &cfg, None)?;
    for s in r.steps.iter().step_by(100) {
        println!("step {:5} loss {:.5}", s.step, s.loss);
    }
    let first = r.steps.iter().position(|s| s.loss < 0.01);
    println!(
        "first < 0.01 at {first:?}; final {:.5}; {:.1}s",
        r.final_loss().unwrap_or(f64::NAN),
        t.elapsed().as_secs_f64()
    );
    let inputs: Vec<_> = pairs.iter().map(|p| p.input.clone()).collect();
    println!("net psnr {:.3}", mean_psnr(&net.predict(&inputs)?, &pairs)?);
    Ok(())
}
