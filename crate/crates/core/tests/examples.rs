//! Worked values checked against independent hand computations or brute force.

use equimix::kernel::*;
use equimix::model::*;
use equimix::sim::*;
use equimix::spectral::*;
use equimix::verify::*;

fn ising(n: usize, beta: f64) -> ModelSpec {
    ModelSpec::ising(n, beta).unwrap()
}

fn beg(n: usize, beta: f64, k: f64) -> ModelSpec {
    ModelSpec::beg(n, beta, k).unwrap()
}

fn cfg(m: &ModelSpec, v: &[i32]) -> SpinConfiguration {
    SpinConfiguration::new(m, v.to_vec()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol:e})");
}

fn two_state(p01: f64, p10: f64) -> FiniteKernel {
    FiniteKernel::from_dense(
        vec![StateLabel::Index(0), StateLabel::Index(1)],
        vec![0.0, (p01 / p10).ln()],
        &[1.0 - p01, p01, p10, 1.0 - p10],
    )
    .unwrap()
}

#[test]
fn sufficient_statistics() {
    let m = ising(4, 1.0);
    assert_eq!(magnetization(&cfg(&m, &[1, 1, -1, -1])), 0);
    assert_eq!(magnetization(&cfg(&m, &[1, 1, 1, 1])), 4);
    let b = beg(4, 1.0, 1.0);
    let x = cfg(&b, &[1, 0, -1, 1]);
    assert_eq!(magnetization(&x), 1);
    assert_eq!(quadrupole(&x).unwrap(), 3);
    assert_eq!(quadrupole(&cfg(&b, &[0; 4])).unwrap(), 0);
    assert_eq!(quadrupole(&cfg(&b, &[-1; 4])).unwrap(), 4);
    assert!(quadrupole(&cfg(&m, &[1, 1, 1, 1])).is_err());
}

#[test]
fn log_weights_against_enumeration() {
    let m = ising(4, 1.0);
    close(m.log_weight_stats(0, 0), 0.0, 0.0);
    close(m.log_weight_stats(4, 0), 2.0, 1e-15);
    let b = beg(4, 1.0, 1.0);
    close(b.log_weight_stats(0, 2), -2.0, 1e-15);
    // every 3^4 configuration against -beta R + K beta S^2 / N
    for idx in 0..81 {
        let x = config_at(&b, idx);
        let s: i64 = x.values.iter().map(|&v| v as i64).sum();
        let r: i64 = x.values.iter().map(|&v| (v != 0) as i64).sum();
        close(log_weight(&b, &x).unwrap(), -(r as f64) + (s * s) as f64 / 4.0, 1e-14);
    }
}

#[test]
fn classes_of_configurations() {
    let m = ising(4, 1.0);
    let c = class_of(&m, &cfg(&m, &[1, -1, 1, 1])).unwrap();
    assert_eq!(c, EnergyClass::Ising { i: 2, sign: Sign::Plus });
    let b = beg(4, 1.0, 1.0);
    let c = class_of(&b, &cfg(&b, &[-1, -1, 0, 0])).unwrap();
    assert_eq!(c, EnergyClass::Beg { s: 2, r: 2, sign: Sign::Minus });
    let w = ModelSpec::warmup(5, 2.0, 0.3).unwrap();
    let c = class_of(&w, &cfg(&w, &[-3])).unwrap();
    assert_eq!(c, EnergyClass::Warmup { i: 3, sign: Sign::Minus });
}

#[test]
fn class_table_counts() {
    let t = class_table(&ising(4, 1.0)).unwrap();
    let zero = t.index_of(&EnergyClass::from_stats(ModelKind::Ising, 0, 0)).unwrap();
    assert_eq!(t.cardinality(zero), 6);
    close(t.entries[zero].log_class_weight, 6f64.ln(), 1e-14);
    let two = t.index_of(&EnergyClass::from_stats(ModelKind::Ising, 2, 0)).unwrap();
    assert_eq!(t.cardinality(two), 4);

    assert_eq!(enumerate_beg_classes(2).unwrap(), vec![(0, 0), (1, 1), (0, 2), (2, 2)]);
    let four = enumerate_beg_classes(4).unwrap();
    assert_eq!(four.len(), 9);
    assert!(four.contains(&(2, 4)) && four.contains(&(0, 4)));
    for n in 1..=7usize {
        let b = ModelSpec { n, ..beg(2, 1.0, 1.0) };
        let brute: std::collections::BTreeSet<(u32, u32)> = (0..3usize.pow(n as u32))
            .map(|idx| {
                let x = config_at(&b, idx);
                (magnetization(&x).unsigned_abs() as u32, quadrupole(&x).unwrap() as u32)
            })
            .collect();
        let closed: usize = (0..=n).map(|r| r / 2 + 1).sum();
        if n % 2 == 0 {
            assert_eq!(enumerate_beg_classes(n).unwrap().len(), closed, "N={n}");
        }
        assert_eq!(brute.len(), closed, "N={n}");
    }
}

#[test]
fn metropolis_construction() {
    // two-state target (2/3, 1/3), proposal always flips
    let q = FiniteKernel::from_dense(
        vec![StateLabel::Index(0), StateLabel::Index(1)],
        vec![0.0, 0.0],
        &[0.0, 1.0, 1.0, 0.0],
    )
    .unwrap();
    let p = metropolize(&q, &[(2f64 / 3.0).ln(), (1f64 / 3.0).ln()]).unwrap();
    close(p.get(0, 1), 0.5, 1e-15);
    close(p.get(1, 0), 1.0, 1e-15);
    // beta = 0: single-flip Metropolis is the hypercube walk
    let m = ising(4, 0.0);
    let k = full_chain(&m, ChainKind::Naive).unwrap();
    for x in 0..16usize {
        for y in 0..16usize {
            let want = if (x ^ y).count_ones() == 1 { 0.25 } else { 0.0 };
            close(k.get(x, y), want, 1e-15);
        }
    }
}

#[test]
fn proposals() {
    let m = ising(2, 1.0);
    let q = single_flip_proposal(&m).unwrap();
    let x = config_index(&m, &cfg(&m, &[1, 1]));
    close(q.get(x, config_index(&m, &cfg(&m, &[-1, 1]))), 0.5, 0.0);
    close(q.get(x, config_index(&m, &cfg(&m, &[1, -1]))), 0.5, 0.0);

    let m = ising(4, 1.0).with_mixture(0.5, 0.25).unwrap();
    let q = equi_energy_proposal(&m).unwrap();
    let x = cfg(&m, &[1, 1, 1, -1]);
    close(q.get(config_index(&m, &x), config_index(&m, &x.negated())), 0.25, 1e-15);
    let a = config_index(&m, &cfg(&m, &[1, 1, -1, -1]));
    let b = config_index(&m, &cfg(&m, &[1, -1, 1, -1]));
    close(q.get(a, b), 0.5 / 6.0, 1e-15);

    let w = ModelSpec::warmup(5, 2.0, 0.2).unwrap();
    let q = small_world_proposal(&w, 0.2).unwrap();
    let at = |v: i32| config_index(&w, &cfg(&w, &[v]));
    close(q.get(at(3), at(-3)), 0.2, 1e-15);
    close(q.get(at(3), at(2)), 0.4, 1e-15);
    close(q.get(at(3), at(4)), 0.4, 1e-15);
    close(q.get(at(0), at(0)), 0.2, 1e-15);
    assert!(ModelSpec::warmup(5, 2.0, 1.0).is_err());
}

#[test]
fn projections_and_restrictions() {
    let p = two_state(0.3, 0.1);
    let one = lumped_projection(&p, &Partition::trivial(2)).unwrap();
    assert_eq!(one.len(), 1);
    close(one.get(0, 0), 1.0, 1e-15);
    let s = lumped_projection(&p, &Partition::singletons(2)).unwrap();
    close(s.get(0, 1), 0.15, 1e-15);
    close(s.get(0, 0), 0.85, 1e-15);
    let r = restriction(&p, &[0, 1]).unwrap();
    close(r.get(1, 0), 0.1, 0.0);

    // orbit restriction: (1 - p1 - p2) uniform + (p1 + p2) identity
    let m = ising(6, 1.0).with_mixture(0.5, 0.25).unwrap();
    let k = full_chain(&m, ChainKind::EquiEnergy).unwrap();
    let class: Vec<usize> = (0..k.len())
        .filter(|&i| match &k.labels()[i] {
            StateLabel::Config(x) => magnetization(x) == 2,
            _ => false,
        })
        .collect();
    assert_eq!(class.len(), 15);
    let r = restriction(&k, &class).unwrap();
    for a in 0..15 {
        for b in 0..15 {
            let want = 0.25 / 15.0 + if a == b { 0.75 } else { 0.0 };
            close(r.get(a, b), want, 1e-14);
        }
    }
}

#[test]
fn lumped_ising_rates() {
    let m = ising(4, 1.0).with_mixture(0.5, 0.25).unwrap();
    let k = ising_lumped_bd(&m).unwrap().to_kernel().unwrap();
    close(k.get(0, 1), 0.25, 1e-15);
    close(k.get(1, 2), 0.0625, 1e-15);
    close(k.get(1, 0), 0.5 / 4.0 * 1.5 * (-0.5f64).exp(), 1e-15);
    // closed form against direct lumping of the 2^4 chain
    let direct = unsigned_projection(&full_chain(&m, ChainKind::EquiEnergy).unwrap()).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                close(k.get(i, j), direct.get(i, j), 1e-14);
            }
        }
    }
}

#[test]
fn lumped_beg_rates() {
    let m = beg(4, 1.0, 1.0).with_mixture(0.5, 0.25).unwrap();
    let k = beg_lumped(&m).unwrap();
    let at = |s: u32, r: u32| {
        k.labels()
            .iter()
            .position(|l| *l == StateLabel::Level { magnitude: s, quadrupole: Some(r) })
            .unwrap()
    };
    close(k.get(at(0, 0), at(1, 1)), 0.25 * (-0.75f64).exp(), 1e-15);
    close(k.get(at(0, 0), at(1, 1)), 0.118092, 1e-6);
    close(k.get(at(0, 4), at(2, 4)), 0.5 / 4.0, 1e-15);
    assert!(k.stochasticity_error() < 1e-14);
}

#[test]
fn strong_lumpability_witness() {
    for n in [2, 4, 6, 8] {
        for m in [ising(n, 1.3), beg(n.min(6), 2.0, 3.0)] {
            let k = full_chain(&m, ChainKind::EquiEnergy).unwrap();
            let sl = strong_lumping(&k, &signed_partition(&k)).unwrap();
            assert!(sl.max_deviation < 1e-14, "{} N={}: {}", m.kind, m.n, sl.max_deviation);
        }
    }
    assert_eq!(signed_lumped_chain(&ising(4, 1.0), ChainKind::Naive).unwrap().len(), 5);
}

#[test]
fn small_spectra() {
    let s = spectrum(&two_state(0.2, 0.2)).unwrap();
    close(s.eigenvalues[0], 1.0, 1e-14);
    close(s.eigenvalues[1], 0.6, 1e-14);
    // sign chain with off-diagonal p2/2 has gap p2
    close(spectrum(&two_state(0.15, 0.15)).unwrap().gap(), 0.3, 1e-14);
    // hypercube {0,1}^4
    let s = spectrum(&full_chain(&ising(4, 0.0), ChainKind::Naive).unwrap()).unwrap();
    let mut want = Vec::new();
    for (k, mult) in [(0, 1), (1, 4), (2, 6), (3, 4), (4, 1)] {
        want.extend(std::iter::repeat_n(1.0 - 2.0 * k as f64 / 4.0, mult));
    }
    for (a, b) in s.eigenvalues.iter().zip(&want) {
        close(*a, *b, 1e-12);
    }
    close(Spectrum::new(vec![1.0, 0.5, -0.7]).gap(), 0.3, 1e-15);
    close(Spectrum::new(vec![1.0, 0.9, 0.1]).gap(), 0.1, 1e-15);
    close(Spectrum::new(vec![1.0]).gap(), 1.0, 0.0);
}

#[test]
fn conductance_examples() {
    close(conductance_exact(&two_state(0.3, 0.3)).unwrap().h, 0.3, 1e-15);
    // uniform jump chain on 5 states: h = |S^c| / n at |S| = 2
    let n = 5;
    let p = FiniteKernel::from_dense((0..n).map(StateLabel::Index).collect(), vec![0.0; n], &vec![0.2; n * n]).unwrap();
    close(conductance_exact(&p).unwrap().h, 0.6, 1e-14);
    // warm-up naive chain: the negative half has h <= pi(0) / (1 - pi(0))
    for n in [3, 6, 10] {
        let k = full_chain(&ModelSpec::warmup(n, 2.0, 0.3).unwrap(), ChainKind::Naive).unwrap();
        let pi = k.stationary();
        let h = conductance_exact(&k).unwrap().h;
        assert!(h <= pi[n] / (1.0 - pi[n]) * (1.0 + 1e-12), "N={n}: {h}");
    }
    assert_eq!(cheeger_interval(0.5).unwrap(), (0.0, 0.875));
    assert_eq!(cheeger_interval(0.0).unwrap(), (1.0, 1.0));
    assert_eq!(cheeger_interval(1.0).unwrap(), (-1.0, 0.5));
}

#[test]
fn decomposition_examples() {
    let k = full_chain(&ising(6, 1.0), ChainKind::EquiEnergy).unwrap();
    let g = gap_report(&k).unwrap().gap;
    close(decomposition_bound(&k, &Partition::trivial(k.len())).unwrap(), g / 2.0, 1e-12);
    let w = full_chain(&ModelSpec::warmup(4, 2.0, 0.3).unwrap(), ChainKind::SmallWorld).unwrap();
    let b = decomposition_bound(&w, &warmup_partition(4).unwrap()).unwrap();
    assert!(b > 0.0 && b <= gap_report(&w).unwrap().gap);
    let k = full_chain(&ising(8, 2.0), ChainKind::EquiEnergy).unwrap();
    assert!(decomposition_bound(&k, &unsigned_partition(&k)).unwrap() <= gap_report(&k).unwrap().gap);
}

#[test]
fn path_bound_examples() {
    // lambda_1 of the lumped Ising chain at N=4, p1=0.5, beta=2 sits below 1 - (p1/16)/(N/2+1)^3
    let m = ising(4, 2.0).with_mixture(0.5, 0.25).unwrap();
    let c = ising_lumped_bd(&m).unwrap();
    let limit = 1.0 - 0.5 / 16.0 / 27.0;
    close(limit, 0.998843, 1e-6);
    assert!(gap_report(&c.to_kernel().unwrap()).unwrap().lambda1 <= limit);
    // symmetric walk on three states
    let c = BirthDeathChain::new(vec![0.25, 0.25, 0.0], vec![0.0, 0.25, 0.25], vec![0.0; 3]).unwrap();
    let b = bd_path_bound(&c, 0.25, 0.0, 1.0, 1).unwrap();
    assert!(gap_report(&c.to_kernel().unwrap()).unwrap().lambda1 <= b);
    // a peak that is not at k violates the unimodality hypothesis
    let c = BirthDeathChain::new(vec![0.5, 0.25, 0.0], vec![0.0, 0.25, 0.5], vec![0.0, std::f64::consts::LN_2, 0.0]).unwrap();
    let err = bd_path_bound(&c, 0.01, 0.0, 1.0, 0).unwrap_err().to_string();
    assert!(err.contains("pair"), "{err}");
}

#[test]
fn eigenvalue_floor_examples() {
    let id = FiniteKernel::from_dense(vec![StateLabel::Index(0), StateLabel::Index(1)], vec![0.0; 2], &[1.0, 0.0, 0.0, 1.0]).unwrap();
    close(gershgorin_bound(&id), 1.0, 0.0);
    close(gershgorin_bound(&two_state(1.0, 1.0)), -1.0, 0.0);
    close(lazy_mixture_bound(0.4, 0.0), 0.4, 0.0);
    close(lazy_mixture_bound(0.4, 1.0), 0.0, 0.0);
    // P with flip probability 1/2 has gap 1; the half-lazy mixture has gap 1/2 and the bound is tight
    close(gap_report(&two_state(0.5, 0.5)).unwrap().gap, 1.0, 1e-14);
    close(gap_report(&two_state(0.25, 0.25)).unwrap().gap, 0.5, 1e-14);
    close(lazy_mixture_bound(1.0, 0.5), 0.5, 0.0);
}

#[test]
fn asymptotic_variance_examples() {
    let a = avar_spectral(&two_state(0.25, 0.25), &[1.0, -1.0]).unwrap();
    close(a.avar, 3.0, 1e-12);
    let c = avar_spectral(&two_state(0.25, 0.25), &[2.0, 2.0]).unwrap();
    assert!(c.degenerate && c.avar == 0.0);
    let id = FiniteKernel::from_dense(vec![StateLabel::Index(0), StateLabel::Index(1)], vec![0.0; 2], &[1.0, 0.0, 0.0, 1.0]).unwrap();
    assert!(avar_spectral(&id, &[1.0, -1.0]).is_err());
}

#[test]
fn total_variation_examples() {
    let p = two_state(0.2, 0.2);
    close(tv_bound(&p, 0, 0).unwrap(), 0.5, 1e-15);
    let mut last = f64::INFINITY;
    for k in 1..20 {
        let b = tv_bound(&p, 0, k).unwrap();
        assert!(b < last);
        last = b;
    }
    close(tv_bound(&two_state(0.5, 0.5), 0, 1).unwrap(), 0.0, 1e-15);
}

#[test]
fn bose_einstein_small_cases() {
    // n = 2 balls in 2 boxes: each outcome has probability 1/3
    let mut counts = std::collections::HashMap::new();
    for u in 0..2 {
        let mut occ = vec![0, 0];
        bose_einstein_place(&mut occ, u);
        for v in 0..3 {
            let mut o = occ.clone();
            bose_einstein_place(&mut o, v);
            *counts.entry(o).or_insert(0.0) += 1.0 / 6.0;
        }
    }
    assert_eq!(counts.len(), 3);
    for p in counts.values() {
        close(*p, 1.0 / 3.0, 1e-15);
    }
    let mut rng = rng_for(1, 0);
    assert_eq!(bose_einstein_sample(0, 3, &mut rng).unwrap(), vec![0, 0, 0]);
    assert_eq!(bose_einstein_sample(3, 1, &mut rng).unwrap(), vec![3]);
}

#[test]
fn orbit_sampling_small_classes() {
    let m = ising(2, 1.0);
    let c = EnergyClass::from_stats(ModelKind::Ising, 2, 0);
    let mut rng = rng_for(2, 0);
    for s in [OrbitSampler::Unranking, OrbitSampler::BoseEinstein] {
        assert_eq!(sample_uniform_class(&m, &c, s, &mut rng).unwrap().values, vec![1, 1]);
    }
    let m = beg(4, 1.0, 1.0);
    let m3 = ModelSpec { n: 3, ..m };
    let c = EnergyClass::from_stats(ModelKind::Beg, -1, 3);
    let mut seen = std::collections::HashMap::new();
    for _ in 0..30_000 {
        let x = sample_uniform_class(&m3, &c, OrbitSampler::BoseEinstein, &mut rng).unwrap();
        assert_eq!(class_of(&m3, &x).unwrap(), c);
        *seen.entry(x.values).or_insert(0) += 1;
    }
    assert_eq!(seen.len(), 3);
    for &v in seen.values() {
        assert!((v as f64 - 10_000.0).abs() < 4.0 * (30_000.0f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt());
    }
}

#[test]
fn one_step_frequencies_match_kernel_row() {
    let m = ising(4, 1.0).with_mixture(0.5, 0.25).unwrap();
    let k = full_chain(&m, ChainKind::EquiEnergy).unwrap();
    let x = cfg(&m, &[1, 1, 1, -1]);
    let xi = config_index(&m, &x);
    let trials = 1_000_000u64;
    let mut rng = rng_for(3, 0);
    let mut counts = vec![0u64; k.len()];
    let mut s = Sampler::new(&m, ChainKind::EquiEnergy, &x).unwrap();
    for _ in 0..trials {
        s = Sampler::new(&m, ChainKind::EquiEnergy, &x).unwrap();
        s.step(&mut rng);
        counts[config_index(&m, &s.state())] += 1;
    }
    drop(s);
    for (y, &c) in counts.iter().enumerate() {
        let p = k.get(xi, y);
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((c as f64 - trials as f64 * p).abs() <= 4.0 * sd + 1e-9, "y={y}: {c} vs {}", trials as f64 * p);
    }
}

#[test]
fn run_estimates() {
    let m = ising(8, 1.0);
    let r = run_estimate(&m, ChainKind::EquiEnergy, &RunConfig::new(20_000, 1, Observable::One)).unwrap();
    assert_eq!(r.estimate, 1.0);
    assert_eq!(r.avar, 0.0);

    let m = ising(20, 2.0);
    let r = run_estimate(&m, ChainKind::EquiEnergy, &RunConfig::new(400_000, 4, Observable::Magnetization)).unwrap();
    assert!(r.estimate.abs() <= 4.0 * r.standard_error, "{} +- {}", r.estimate, r.standard_error);

    let m = ising(10, 2.0);
    let t = class_table(&m).unwrap();
    let probs = t.probabilities();
    let exact: f64 = t.classes().zip(&probs).map(|(c, p)| p * c.magnitude() as f64 / 10.0).sum();
    let r = run_estimate(&m, ChainKind::EquiEnergy, &RunConfig::new(400_000, 5, Observable::AbsMagnetization)).unwrap();
    assert!((r.estimate - exact).abs() <= 4.0 * r.standard_error, "{} vs {exact}", r.estimate);

    let m = beg(10, 1.0, 1.0).with_mixture(0.5, 0.25).unwrap();
    let r = run_estimate(&m, ChainKind::EquiEnergy, &RunConfig::new(400_000, 6, Observable::One)).unwrap();
    let steps = (r.local.proposed + r.flip.proposed + r.orbit.proposed) as f64;
    let orbit = r.orbit.proposed as f64;
    // a global flip from S = 0 stays in the orbit and is counted there
    let t = class_table(&m).unwrap();
    let p0: f64 = t.classes().zip(t.probabilities()).filter(|(c, _)| c.magnitude() == 0).map(|(_, p)| p).sum();
    let want = 0.25 + 0.25 * p0;
    let sd = (steps * want * (1.0 - want)).sqrt();
    assert!((orbit - want * steps).abs() <= 4.0 * sd, "{orbit} vs {}", want * steps);
}

#[test]
fn batch_means_examples() {
    use rand::Rng;
    let mut rng = rng_for(8, 0);
    let iid: Vec<f64> = (0..200_000).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let b = batch_means_avar(&iid).unwrap();
    assert!((b.avar - 1.0).abs() < 0.1, "{}", b.avar);
    assert_eq!(batch_means_avar(&vec![2.5; 20_000]).unwrap().avar, 0.0);
    let mut x = 0usize;
    let chain: Vec<f64> = (0..1_000_000)
        .map(|_| {
            if rng.random::<f64>() < 0.25 {
                x ^= 1;
            }
            if x == 0 { 1.0 } else { -1.0 }
        })
        .collect();
    let b = batch_means_avar(&chain).unwrap();
    assert!((b.avar - 3.0).abs() <= 4.0 * b.se, "{} +- {}", b.avar, b.se);
}

#[test]
fn ising_bound_examples() {
    let b = ising_fast_bound(10, 0.5, 0.25);
    close(b, 0.125 / 32.0 / 216.0 * 0.125, 1e-20);
    close(b, 2.2605e-6, 5e-10);
    for beta in [0.5, 2.0] {
        let m = ising(10, beta).with_mixture(0.5, 0.25).unwrap();
        let g = gap_report(&signed_lumped_chain(&m, ChainKind::EquiEnergy).unwrap()).unwrap().gap;
        assert!(g > b, "beta={beta}: {g}");
    }
    assert!(ising(10, 2.0).with_mixture(0.6, 0.4).is_err());
}

#[test]
fn infinite_temperature_naive_chain() {
    for n in (2..=30).step_by(2) {
        let r = gap_report(&signed_lumped_chain(&ising(n, 0.0), ChainKind::Naive).unwrap()).unwrap();
        close(r.one_minus_lambda1, 2.0 / n as f64, 1e-12);
        // the walk has period two, so the absolute gap vanishes
        close(r.gap, 0.0, 1e-12);
    }
}

#[test]
fn scaled_mixture_examples() {
    let s = scaled_params(1.0, 10).unwrap();
    close(s.printed.0, 0.95, 1e-15);
    close(s.printed.1, 0.1, 1e-15);
    assert!(!s.printed_valid);
    assert!(s.fallback.0 + s.fallback.1 < 1.0);
    close(s.fallback.0, 0.9, 1e-15);
    close(s.fallback.1, 0.05, 1e-15);
}

#[test]
fn beg_profile_at_zero_coupling() {
    for n in [3, 8, 15] {
        let q = beg_row_profile(n, 0.0, 1.0);
        for (r, v) in q.iter().enumerate() {
            close(*v, ln_binomial(n as u64, r as u64) + r as f64 * std::f64::consts::LN_2, 1e-10);
        }
        assert!(shape(&q).0);
    }
}

/// `J(z) = t z − ln M(t)` at `e^t = [z + sqrt(z² + 4e^{−2β}(1−z²))] / (2e^{−β}(1−z))`.
fn legendre_closed(beta: f64, z: f64) -> f64 {
    let e = (-beta).exp();
    let u = (z + (z * z + 4.0 * e * e * (1.0 - z * z)).sqrt()) / (2.0 * e * (1.0 - z));
    let t = u.ln();
    t * z - ((1.0 + e * (u + 1.0 / u)) / (1.0 + 2.0 * e)).ln()
}

#[test]
fn rate_function_examples() {
    for beta in [0.3, 1.0, 3.0] {
        for z in [0.0, 0.1, 0.5, 0.9, 0.99] {
            close(legendre_j(beta, z).unwrap(), legendre_closed(beta, z), 1e-9);
            close(legendre_j(beta, -z).unwrap(), legendre_closed(beta, z), 1e-9);
        }
    }
    let mins = rate_minima(3.0, 5.0).unwrap();
    assert!(mins.z_star > 0.5);
    close(rate_function(3.0, 5.0, mins.z_star).unwrap(), 0.0, 1e-12);
    close(rate_function(3.0, 5.0, -mins.z_star).unwrap(), 0.0, 1e-12);
    for z in [0.1, 0.4, 0.8] {
        close(rate_function(3.0, 5.0, z).unwrap(), rate_function(3.0, 5.0, -z).unwrap(), 1e-10);
    }
    for n in [100, 200] {
        let mode = magnetization_mode(&beg(n, 3.0, 5.0)).unwrap();
        assert!((mode - mins.z_star).abs() <= 2.0 / n as f64, "N={n}: mode {mode} vs {}", mins.z_star);
    }
    assert_eq!(rate_minima(0.5, 0.5).unwrap().z_star, 0.0);
}
