use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xdice::synth::annulus;
use xdice::{
    acceptable_region, dice, extended_dice, hausdorff, AcceptableRegion, AnnotationSet, Mask,
};

fn noisy(rng: &mut ChaCha8Rng, side: usize, inner: f64, outer: f64) -> Mask {
    let c = side as f64 / 2.0;
    annulus(
        side,
        side,
        c + rng.gen_range(-1.0..1.0),
        c + rng.gen_range(-1.0..1.0),
        inner + rng.gen_range(-1.0..1.0),
        outer + rng.gen_range(-1.0..1.0),
    )
}

fn setup(side: usize) -> (Mask, AcceptableRegion, Mask) {
    let mut rng = ChaCha8Rng::seed_from_u64(side as u64);
    let (r_in, r_out) = (side as f64 * 0.2, side as f64 * 0.35);
    let set =
        AnnotationSet::from_masks((0..3).map(|_| noisy(&mut rng, side, r_in, r_out)).collect())
            .expect("equal sizes");
    let region = acceptable_region(&set);
    let pred = noisy(&mut rng, side, r_in, r_out);
    let reference = set.masks()[0].clone();
    (pred, region, reference)
}

fn overlap(c: &mut Criterion) {
    let mut g = c.benchmark_group("overlap");
    for side in [64, 256, 512] {
        let (pred, region, reference) = setup(side);
        g.bench_with_input(BenchmarkId::new("dice", side), &side, |b, _| {
            b.iter(|| dice(black_box(&pred), black_box(&reference)))
        });
        g.bench_with_input(BenchmarkId::new("extended_dice", side), &side, |b, _| {
            b.iter(|| extended_dice(black_box(&pred), black_box(&region)))
        });
    }
    g.finish();
}

fn brute_hausdorff(a: &Mask, b: &Mask) -> f64 {
    let pa: Vec<_> = a.foreground().collect();
    let pb: Vec<_> = b.foreground().collect();
    let directed = |x: &[(usize, usize)], y: &[(usize, usize)]| {
        x.iter()
            .map(|&(r, c)| {
                y.iter()
                    .map(|&(s, d)| (r.abs_diff(s).pow(2) + c.abs_diff(d).pow(2)) as f64)
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(&pa, &pb).max(directed(&pb, &pa)).sqrt()
}

fn distance(c: &mut Criterion) {
    let mut g = c.benchmark_group("hausdorff");
    g.sample_size(20);
    for side in [32, 64, 128] {
        let (pred, _, reference) = setup(side);
        g.bench_with_input(
            BenchmarkId::new("distance_transform", side),
            &side,
            |b, _| b.iter(|| hausdorff(black_box(&pred), black_box(&reference))),
        );
        g.bench_with_input(BenchmarkId::new("brute_force", side), &side, |b, _| {
            b.iter(|| brute_hausdorff(black_box(&pred), black_box(&reference)))
        });
    }
    g.finish();
}

criterion_group!(benches, overlap, distance);
criterion_main!(benches);
