use faer::{c64, Mat, Side};
use proptest::prelude::*;

use spinchaos::classical::{self, HamiltonianParams, SpinChainState};
use spinchaos::ensemble::{averaged_series, EnsembleKind, EnsembleSpec};
use spinchaos::lyapunov::{benettin, BenettinConfig, Reference, ResetPolicy};
use spinchaos::quantum::{self, ChainParams, Reflection, Spin};
use spinchaos::spectral::{self, UnstableWindow};
use spinchaos::vec3::Vec3;

fn unit(theta: f64, phi: f64) -> Vec3 {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn spins(max_len: usize) -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec((0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU), 2..=max_len)
        .prop_map(|a| a.into_iter().map(|(t, p)| unit(t, p)).collect())
}

fn max_abs(m: &Mat<c64>) -> f64 {
    let mut x: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            x = x.max(m[(i, j)].norm());
        }
    }
    x
}

/// Zero-momentum spectrum from the full product basis: P H P + Λ(1 − P) with
/// P = (1/L) Σ Tⁿ pushes every k ≠ 0 level up to Λ.
fn k0_spectrum_by_projection(p: &ChainParams) -> Vec<f64> {
    let h = quantum::dense_full_hamiltonian(p).unwrap();
    let t = quantum::dense_translation(p.spin, p.length).unwrap();
    let n = h.nrows();
    let mut proj = Mat::<c64>::zeros(n, n);
    let mut power = Mat::<c64>::identity(n, n);
    for _ in 0..p.length {
        proj += &power;
        power = &t * &power;
    }
    proj *= faer::Scale(c64::new(1.0 / p.length as f64, 0.0));
    let big = 1e3;
    let shifted = &proj * &h * &proj + (Mat::<c64>::identity(n, n) - &proj) * faer::Scale(c64::new(big, 0.0));
    let mut v = shifted.self_adjoint_eigenvalues(Side::Lower).unwrap();
    v.retain(|&e| e < big / 2.0);
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rk4_keeps_norm_and_energy(s in spins(8), j in -2.0..2.5f64, h in 0.2..2.0f64) {
        let params = HamiltonianParams::new(j, h, s.len()).unwrap();
        let mut state = SpinChainState::from_spins(s).unwrap();
        let e0 = classical::energy(&state, &params);
        classical::integrate(&mut state, &params, 5.0, 1e-3, 1000, &mut |_: &SpinChainState| {}).unwrap();
        prop_assert!(state.max_norm_error() < 1e-9, "norm error {}", state.max_norm_error());
        let de = (classical::energy(&state, &params) - e0).abs();
        prop_assert!(de < 1e-7 * state.len() as f64, "energy drift {de}");
    }

    #[test]
    fn mode_intensities_obey_parseval(v in prop::collection::vec(prop::array::uniform3(-1.0..1.0f64), 1..40)) {
        let total: f64 = v.iter().map(|x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sum();
        let f: f64 = spectral::fourier_intensities(&v).iter().sum();
        prop_assert!((f - total).abs() < 1e-10 * (1.0 + total));
    }

    #[test]
    fn spin_operators_close_the_algebra(two_s in 1u32..=4) {
        let spin = Spin::from_twice(two_s).unwrap();
        let o = quantum::spin_operators(spin);
        let i = c64::new(0.0, 1.0);
        let comm = |a: &Mat<c64>, b: &Mat<c64>| a * b - b * a;
        let scale = |m: &Mat<c64>| m * faer::Scale(i);
        prop_assert!(max_abs(&(comm(&o.sx, &o.sy) - scale(&o.sz))) < 1e-12);
        prop_assert!(max_abs(&(comm(&o.sy, &o.sz) - scale(&o.sx))) < 1e-12);
        prop_assert!(max_abs(&(comm(&o.sz, &o.sx) - scale(&o.sy))) < 1e-12);
        let d = spin.dim();
        let casimir = &o.sx * &o.sx + &o.sy * &o.sy + &o.sz * &o.sz
            - Mat::<c64>::identity(d, d) * faer::Scale(c64::new(spin.casimir(), 0.0));
        prop_assert!(max_abs(&casimir) < 1e-12);
    }

    #[test]
    fn sector_blocks_reproduce_the_projected_full_spectrum(
        case in prop_oneof![(1u32..=1, 2usize..=6), (2u32..=2, 2usize..=4)],
        j in -2.0..2.5f64,
        h in 0.3..2.0f64,
    ) {
        let (two_s, l) = case;
        let p = ChainParams::new(Spin::from_twice(two_s).unwrap(), l, j, h).unwrap();
        let want = k0_spectrum_by_projection(&p);
        let mut got = Vec::new();
        for r in [Reflection::Even, Reflection::Odd] {
            let chain = quantum::build_hamiltonian(&p, r, quantum::DEFAULT_DIM_LIMIT).unwrap();
            got.extend(quantum::eigenvalues(&chain.hamiltonian).unwrap());
        }
        got.sort_by(|a, b| a.total_cmp(b));
        prop_assert_eq!(want.len(), got.len());
        for (a, b) in want.iter().zip(&got) {
            prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
        }
    }

    #[test]
    fn lambda_of_l_fit_roundtrip(q0 in 0.3..3.0f64, lambda_max in 0.1..0.5f64, alpha in 10.0..60.0f64) {
        let w = UnstableWindow { q0, lambda_max, alpha };
        let samples: Vec<(usize, f64)> = (4..=44).map(|l| (l, spectral::lambda_of_l(&w, l))).collect();
        prop_assume!(samples.iter().filter(|s| s.1 > 0.0).count() >= 6);
        let fit = spectral::fit_lambda_of_l(&samples, 0.0).unwrap();
        for &(l, y) in &samples {
            prop_assert!((fit.predict(l) - y).abs() < 1e-3 * lambda_max, "L={} {} vs {}", l, fit.predict(l), y);
        }
        prop_assert!((fit.window.q0 - q0).abs() < 1e-3, "q0 {} vs {}", fit.window.q0, q0);
        prop_assert!((fit.window.alpha / alpha - 1.0).abs() < 1e-2);
    }

    #[test]
    fn window_parabola_roundtrip(q0 in 0.5..2.5f64, lambda_max in 0.01..0.5f64, alpha in 5.0..200.0f64) {
        let w = UnstableWindow { q0, lambda_max, alpha };
        let hw = w.half_width();
        let pts: Vec<(f64, f64)> = (0..9).map(|i| q0 - hw + 2.0 * hw * i as f64 / 8.0).map(|q| (q, w.rate(q))).collect();
        let fit = spectral::fit_window(&pts).unwrap();
        prop_assert!((fit.q0 - q0).abs() < 1e-9);
        prop_assert!((fit.lambda_max / lambda_max - 1.0).abs() < 1e-9);
        prop_assert!((fit.alpha / alpha - 1.0).abs() < 1e-9);
    }

    #[test]
    fn r_statistic_ignores_affine_maps(
        levels in prop::collection::vec(-50.0..50.0f64, 120..200),
        a in 0.1..10.0f64,
        b in -5.0..5.0f64,
    ) {
        let r0 = quantum::r_statistic(&levels, 0.1).unwrap();
        let mapped: Vec<f64> = levels.iter().map(|x| a * x + b).collect();
        let r1 = quantum::r_statistic(&mapped, 0.1).unwrap();
        prop_assert!((0.0..=1.0).contains(&r0.mean));
        prop_assert!((r0.mean - r1.mean).abs() < 1e-9);
    }

    #[test]
    fn participation_ratio_bounds(w in prop::collection::vec(0.0..1.0f64, 1..60)) {
        let total: f64 = w.iter().sum();
        prop_assume!(total > 1e-6);
        let p: Vec<f64> = w.iter().map(|x| x / total).collect();
        let pr = quantum::participation_ratio(&p);
        prop_assert!(pr >= 1.0 - 1e-12 && pr <= p.len() as f64 + 1e-9);
    }

    #[test]
    fn entropy_is_bounded_by_the_smaller_half(
        amps in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 64),
        cut in 0usize..=6,
    ) {
        let spin = Spin::from_twice(1).unwrap();
        let norm = amps.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-6);
        let psi: Vec<c64> = amps.iter().map(|(a, b)| c64::new(a / norm, b / norm)).collect();
        let s = quantum::entanglement_entropy(&psi, spin, 6, cut);
        let bound = cut.min(6 - cut) as f64 * 2f64.ln();
        prop_assert!(s >= -1e-12 && s <= bound + 1e-9, "S = {} bound {}", s, bound);
    }

    #[test]
    fn tukey_is_symmetric_and_bounded(n in 2usize..500, alpha in 0.0..1.0f64) {
        let w = spectral::tukey(n, alpha);
        for i in 0..n {
            prop_assert!((0.0..=1.0).contains(&w[i]));
            prop_assert!((w[i] - w[n - 1 - i]).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn benettin_is_deterministic_per_seed(seed in any::<u64>()) {
        let params = HamiltonianParams::new(1.76, 1.0, 6).unwrap();
        let cfg = BenettinConfig { resets: ResetPolicy::Fixed(20), ..BenettinConfig::periodic(seed) };
        let a = benettin(&params, &Reference::periodic(), &cfg).unwrap();
        let b = benettin(&params, &Reference::periodic(), &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        let c = benettin(&params, &Reference::periodic(), &BenettinConfig { seed: seed ^ 1, ..cfg }).unwrap();
        prop_assert_ne!(a.log_stretches, c.log_stretches);
    }

    #[test]
    fn ensembles_and_random_states_are_deterministic_per_seed(seed in any::<u64>()) {
        let params = HamiltonianParams::new(1.76, 1.0, 5).unwrap();
        let spec = EnsembleSpec { kind: EnsembleKind::QuantumImitation(Spin::from_twice(2).unwrap()), members: 70, seed };
        let a = averaged_series(&spec, &params, 1.0, 0.01, 10).unwrap();
        let b = averaged_series(&spec, &params, 1.0, 0.01, 10).unwrap();
        prop_assert_eq!(&a.mean, &b.mean);
        prop_assert_eq!(&a.stderr, &b.stderr);
        let spin = Spin::from_twice(1).unwrap();
        prop_assert_eq!(quantum::psi_inf(spin, 6, seed).unwrap(), quantum::psi_inf(spin, 6, seed).unwrap());
        prop_assert_ne!(quantum::psi_inf(spin, 6, seed).unwrap(), quantum::psi_inf(spin, 6, seed.wrapping_add(1)).unwrap());
    }
}
