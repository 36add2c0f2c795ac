use nnsc::clustering::{nnsc_decompose, nnsc_single_run, NnscParams};
use nnsc::datasets::{generate_composite, CompositeConfig, Layout, TextureKind, TextureSpec};
use nnsc::image::{LabImage, PixelPos};
use nnsc::metrics::asa;
use nnsc::rng::run_seed;
use nnsc::state::{default_min_size, enforce_connectivity, GridConfig};

fn texture(kind: TextureKind, frequency: f64, orientation: f64, noise_seed: u64) -> TextureSpec {
    TextureSpec {
        kind,
        frequency,
        orientation,
        mean: 128.0,
        amplitude: 40.0,
        noise_seed,
    }
}

#[test]
fn constant_image_stays_near_the_grid() {
    let image = LabImage::new(96, 80, 3, vec![42.0; 96 * 80 * 3]).unwrap();
    let params = NnscParams {
        k: 30,
        ..NnscParams::default()
    };
    let run = nnsc_single_run(&image, &params, 3).unwrap();
    let grid = GridConfig::new(96, 80, 30).unwrap();
    let s = grid.step;
    for y in 0..80 {
        for x in 0..96 {
            let l = run.labels.get(PixelPos::new(x, y)) as usize;
            let (bx, by) = (l % grid.blocks_x, l / grid.blocks_x);
            // Block extent; the last row/column absorbs the remainder.
            let x0 = bx * s;
            let x1 = if bx + 1 == grid.blocks_x { 96 } else { x0 + s };
            let y0 = by * s;
            let y1 = if by + 1 == grid.blocks_y { 80 } else { y0 + s };
            let dx = x0.saturating_sub(x).max(x.saturating_sub(x1 - 1));
            let dy = y0.saturating_sub(y).max(y.saturating_sub(y1 - 1));
            assert!(dx.max(dy) <= 2 * s, "pixel ({x},{y}) drifted to block {l}");
        }
    }
}

#[test]
fn vertical_two_texture_split_is_recovered() {
    for seed in 0..3 {
        let config = CompositeConfig {
            width: 128,
            height: 128,
            layout: Layout::VerticalSplit,
            specs: vec![
                texture(TextureKind::Grating, 0.2, 0.3, 1),
                texture(TextureKind::Checkerboard, 0.08, 0.0, 2),
            ],
            seed,
            equal_mean: true,
            jitter: 16,
        };
        let c = generate_composite(&config).unwrap();
        let image = LabImage::from_gray8(&c.image);
        let params = NnscParams {
            k: 64,
            seed,
            ..NnscParams::default()
        };
        let d = nnsc_decompose(&image, &params).unwrap();
        let score = asa(&d.labels, &c.ground_truth).unwrap();
        assert!(score > 0.95, "seed {seed}: ASA {score}");
    }
}

#[test]
fn single_estimation_is_one_run_plus_connectivity() {
    let config = CompositeConfig {
        width: 64,
        height: 48,
        layout: Layout::Grid2x2,
        specs: vec![
            texture(TextureKind::Noise, 0.1, 0.0, 5),
            texture(TextureKind::Grating, 0.15, 1.0, 6),
            texture(TextureKind::Grating, 0.15, 1.0, 7),
            texture(TextureKind::Noise, 0.1, 0.0, 8),
        ],
        seed: 4,
        equal_mean: true,
        jitter: 4,
    };
    let image = LabImage::from_gray8(&generate_composite(&config).unwrap().image);
    let params = NnscParams {
        k: 20,
        estimations: 1,
        seed: 77,
        ..NnscParams::default()
    };
    let d = nnsc_decompose(&image, &params).unwrap();
    let run = nnsc_single_run(&image, &params, run_seed(77, 0)).unwrap();
    let want = enforce_connectivity(&run.labels, default_min_size(run.grid.step));
    assert_eq!(d.labels, want);
}

#[test]
fn run_evaluations_stay_within_budget() {
    let image = LabImage::from_gray8(
        &generate_composite(&CompositeConfig {
            width: 90,
            height: 70,
            layout: Layout::Grid2x2,
            specs: vec![
                texture(TextureKind::Noise, 0.1, 0.0, 1),
                texture(TextureKind::Checkerboard, 0.1, 0.4, 2),
                texture(TextureKind::Grating, 0.2, 2.0, 3),
                texture(TextureKind::Noise, 0.1, 0.0, 4),
            ],
            seed: 1,
            equal_mean: false,
            jitter: 5,
        })
        .unwrap()
        .image,
    );
    for k in [9, 25, 60] {
        let params = NnscParams {
            k,
            ..NnscParams::default()
        };
        let run = nnsc_single_run(&image, &params, 1).unwrap();
        let s = run.grid.step;
        let ceil_log2 = s.next_power_of_two().trailing_zeros() as u64;
        let pixels = image.len() as u64;
        let per_iteration = pixels * (2 + ceil_log2 + 1);
        assert!(run.iteration_evaluations.iter().all(|&e| e <= per_iteration));
        assert!(run.total_evaluations() <= pixels * params.iterations as u64 * (2 + ceil_log2 + 1));
        assert_eq!(run.init_evaluations, pixels);
    }
}
