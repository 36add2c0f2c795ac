//! Compares NNSC and the SLIC baseline on equal-mean texture composites.
//!
//! ```text
//! cargo run --release --example texture_corpus -- [trials]
//! ```

use nnsc::clustering::{nnsc_decompose, slic_baseline, NnscParams};
use nnsc::datasets::{generate_composite, two_texture_config, Layout};
use nnsc::image::LabImage;
use nnsc::metrics::asa;

fn main() -> nnsc::Result<()> {
    let trials: u64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(5);
    let (mut nnsc_sum, mut slic_sum) = (0.0, 0.0);
    println!("seed\ttextures\tslic\tnnsc");
    for seed in 0..trials {
        let config = two_texture_config(seed, 256, 256, Layout::Grid4x4);
        let composite = generate_composite(&config)?;
        let image = LabImage::from_gray8(&composite.image);

        let slic = slic_baseline(&image, 64, 10.0, 10)?;
        let params = NnscParams {
            k: 64,
            seed,
            ..NnscParams::default()
        };
        let nnsc = nnsc_decompose(&image, &params)?;

        let s = asa(&slic.labels, &composite.ground_truth)?;
        let n = asa(&nnsc.labels, &composite.ground_truth)?;
        println!("{seed}\t{}/{}\t{s:.4}\t{n:.4}", config.specs[0].kind, config.specs[1].kind);
        slic_sum += s;
        nnsc_sum += n;
    }
    let t = trials as f64;
    println!("mean\t\t{:.4}\t{:.4}", slic_sum / t, nnsc_sum / t);
    Ok(())
}
