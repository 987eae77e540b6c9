use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use saasr::diarize::{build_affinity, nme_search, recognize_segments, segment_features, spectral_cluster, DiarizeConfig};
use saasr::exec;
use saasr::layout::STACK;
use saasr::model::constructed::{pointer_model, PointerGains};
use saasr::simgen::{generate_meeting, generate_mixture, MeetingConfig, MixtureConfig, Preset};
use saasr::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn decoding(c: &mut Criterion) {
    let s = generate_meeting(1, &MeetingConfig { preset: Preset::LongSilence, n_speakers: (8, 8), ..Default::default() }).unwrap();
    let model = pointer_model(&s.layout, s.vocabulary.eos(), s.vocabulary.sc(), &PointerGains::default()).unwrap();
    let config = DiarizeConfig::default();
    let segs = segment_features(&s.features, s.layout.energy(), &config.vad, STACK).unwrap();
    let inv = s.example_inventory().unwrap();
    let mut g = c.benchmark_group("recognize_segments");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| recognize_segments(&model, black_box(&segs), &inv, s.vocabulary.specials(), &config.beam, config.margin, &[], mode).unwrap())
        });
    }
    g.finish();
}

fn counting(c: &mut Criterion) {
    let mut g = c.benchmark_group("nme_search");
    for n in [16, 48] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let centers: Vec<Vec<f64>> = (0..8).map(|_| (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let points: Vec<Vec<f64>> = (0..n).map(|i| centers[i % 8].iter().map(|x| x + rng.random_range(-0.3..0.3)).collect()).collect();
        let a = build_affinity(&points).unwrap();
        for (name, mode) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &a, |b, a| b.iter(|| nme_search(a, 8, mode).unwrap()));
        }
        for (name, mode) in MODES {
            g.bench_with_input(BenchmarkId::new(format!("spectral_{name}"), n), &a, |b, a| b.iter(|| spectral_cluster(a, 8, 0, mode).unwrap()));
        }
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let cfg = MixtureConfig::default();
    let mut g = c.benchmark_group("simgen_batch");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(name, |b| b.iter(|| exec::map_range(mode, 64, |seed| generate_mixture(seed as u64, &cfg).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, decoding, counting, simulation);
criterion_main!(benches);
