use ascribe_core::volume::{
    anisotropic_diffusion, get_slice, intensity_stats, load_stack, Raster, Volume,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_volume(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> Volume {
    Volume::from_fn(dims, [1.0; 3], |_, _, _| rng.random::<f64>()).unwrap()
}

/// Sum of absolute differences over every face-adjacent voxel pair.
fn total_variation(v: &Volume) -> f64 {
    let [nx, ny, nz] = v.dims();
    let mut tv = 0.0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let c = v.get(x, y, z);
                if x + 1 < nx {
                    tv += (v.get(x + 1, y, z) - c).abs();
                }
                if y + 1 < ny {
                    tv += (v.get(x, y + 1, z) - c).abs();
                }
                if z + 1 < nz {
                    tv += (v.get(x, y, z + 1) - c).abs();
                }
            }
        }
    }
    tv
}

/// One explicit step of the linear heat equation with edge-repeating
/// boundaries, written directly from the stencil.
fn heat_step(v: &Volume, lambda: f64) -> Vec<f64> {
    let [nx, ny, nz] = v.dims();
    let at = |x: isize, y: isize, z: isize| {
        let c = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
        v.get(c(x, nx), c(y, ny), c(z, nz))
    };
    let mut out = Vec::with_capacity(v.len());
    for z in 0..nz as isize {
        for y in 0..ny as isize {
            for x in 0..nx as isize {
                let c = at(x, y, z);
                let lap = at(x - 1, y, z) + at(x + 1, y, z) + at(x, y - 1, z) + at(x, y + 1, z)
                    + at(x, y, z - 1)
                    + at(x, y, z + 1)
                    - 6.0 * c;
                out.push(c + lambda * lap);
            }
        }
    }
    out
}

#[test]
fn diffusion_maximum_principle_and_total_variation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let v = random_volume(&mut rng, [16, 16, 16]);
        let kappa = [0.02, 0.1, 0.5, 2.0, 1e3][case % 5];
        let lambda = [1.0 / 6.0, 0.1, 0.05][case % 3];
        let (lo, hi) = v.data().iter().fold((f64::MAX, f64::MIN), |(a, b), &s| (a.min(s), b.max(s)));
        let mut prev = v.clone();
        for _ in 0..5 {
            let next = anisotropic_diffusion(&prev, 1, kappa, lambda).unwrap();
            assert!(next.data().iter().all(|&s| s >= lo && s <= hi), "case {case}");
            assert!(
                total_variation(&next) <= total_variation(&prev) + 1e-9,
                "case {case}: kappa={kappa} lambda={lambda}"
            );
            prev = next;
        }
    }
}

#[test]
fn large_kappa_single_step_is_heat_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let v = random_volume(&mut rng, [16, 16, 16]);
        for lambda in [1.0 / 6.0, 0.1] {
            let got = anisotropic_diffusion(&v, 1, 1e9, lambda).unwrap();
            let want = heat_step(&v, lambda);
            let err = got
                .data()
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "max error {err}");
        }
    }
}

#[test]
fn mean_intensity_drift_per_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..20 {
        let dims = [rng.random_range(2..20), rng.random_range(2..20), rng.random_range(2..20)];
        let mut v = random_volume(&mut rng, dims);
        let kappa = rng.random_range(0.01..5.0);
        let lambda = rng.random_range(0.01..1.0 / 6.0);
        let mean = |v: &Volume| v.data().iter().sum::<f64>() / v.len() as f64;
        for step in 0..10 {
            let next = anisotropic_diffusion(&v, 1, kappa, lambda).unwrap();
            let drift = (mean(&next) - mean(&v)).abs();
            assert!(drift < 1e-6, "case {case} step {step}: drift {drift:e}");
            v = next;
        }
    }
}

#[test]
fn stack_slices_round_trip_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let (w, h, n) = (rng.random_range(1..12u32), rng.random_range(1..12u32), rng.random_range(1..8));
        let deep = rng.random_bool(0.5);
        let images: Vec<Raster> = (0..n)
            .map(|k| {
                let len = (w * h) as usize;
                if deep {
                    Raster::gray16(format!("s{k}"), w, h, (0..len).map(|_| rng.random()).collect())
                } else {
                    Raster::gray8(format!("s{k}"), w, h, (0..len).map(|_| rng.random()).collect())
                }
            })
            .collect();
        let v = load_stack(&images).unwrap();
        assert_eq!(v.dims(), [w as usize, h as usize, n]);
        for (k, img) in images.iter().enumerate() {
            let s = get_slice(&v, k).unwrap();
            let want: Vec<f64> = match &img.data {
                ascribe_core::volume::RasterData::Gray8(d) => d.iter().map(|&p| p as f64 / 255.0).collect(),
                ascribe_core::volume::RasterData::Gray16(d) => d.iter().map(|&p| p as f64 / 65535.0).collect(),
            };
            assert_eq!((s.width, s.height, s.index), (w as usize, h as usize, k));
            assert_eq!(s.data, want);
        }
    }
}

#[test]
fn parallel_step_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v = random_volume(&mut rng, [17, 9, 23]);
    let a = anisotropic_diffusion(&v, 4, 0.2, 0.15).unwrap();
    let b = anisotropic_diffusion(&v, 4, 0.2, 0.15).unwrap();
    assert_eq!(a.data().iter().map(|s| s.to_bits()).collect::<Vec<_>>(),
               b.data().iter().map(|s| s.to_bits()).collect::<Vec<_>>());
}

proptest! {
    #[test]
    fn stats_match_two_pass_oracle(
        samples in proptest::collection::vec(0.0f64..=1.0, 1..400),
        bins in 1usize..64,
    ) {
        let n = samples.len();
        let v = Volume::new([n, 1, 1], [1.0; 3], samples.clone()).unwrap();
        let s = intensity_stats(&v, bins);

        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        prop_assert!((s.mean - mean).abs() < 1e-12);
        prop_assert!((s.std_dev - var.sqrt()).abs() < 1e-9);
        prop_assert_eq!(s.min, samples.iter().cloned().fold(f64::INFINITY, f64::min));
        prop_assert_eq!(s.max, samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max));

        let mut hist = vec![0u64; bins];
        for &x in &samples {
            let k = if x >= 1.0 { bins - 1 } else { (x * bins as f64) as usize };
            hist[k] += 1;
        }
        prop_assert_eq!(&s.histogram, &hist);
        prop_assert_eq!(s.histogram.iter().sum::<u64>(), n as u64);
    }
}
