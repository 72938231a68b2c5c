use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use qnet_privacy::fisher;
use qnet_privacy::model::{self, NetworkModel, ParamVector, WeightVector};
use qnet_privacy::noise::{self, NoiseChannel};
use qnet_privacy::privacy;
use qnet_privacy::protocol;
use qnet_privacy::qcore::{self, c, sigma_z_half, CMatrix, CVector, DensityState, NodeDims};

fn density_from(raw: &[(f64, f64)], n: usize) -> DensityState {
    let g = CMatrix::from_fn(n, n, |i, j| {
        let (re, im) = raw[i * n + j];
        c(re, im)
    });
    let m = &g * g.adjoint() + CMatrix::identity(n, n) * c(1e-3, 0.0);
    let t = qcore::trace(&m).re;
    DensityState::new(
        qcore::hermitian_part(&(m / c(t, 0.0))),
        NodeDims::qubits(n.trailing_zeros() as usize),
    )
    .unwrap()
}

fn entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n)
}

fn channel(kind: usize, eta: f64) -> NoiseChannel {
    match kind {
        0 => NoiseChannel::dephasing(eta),
        1 => NoiseChannel::depolarizing(eta),
        2 => NoiseChannel::amplitude_damping(eta),
        _ => NoiseChannel::global_depolarizing(eta),
    }
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channels_preserve_trace_and_positivity(raw in entries(4), kind in 0usize..4, k in 0usize..=10) {
        let rho = density_from(&raw, 4);
        let out = noise::apply_channel_everywhere(&rho, &channel(kind, k as f64 / 10.0)).unwrap();
        let m = out.matrix();
        prop_assert!((qcore::trace(m).re - 1.0).abs() < 1e-9);
        prop_assert!(qcore::hermitian_deviation(m) < 1e-9);
        prop_assert!(qcore::eig_hermitian(m).unwrap().eigenvalues.iter().all(|&l| l > -1e-9));
    }

    #[test]
    fn erasure_output_is_a_state(raw in entries(2), k in 0usize..=10) {
        let rho = density_from(&raw, 2);
        let out = noise::apply_channel_everywhere(&noise::embed_qubit_state(&rho).unwrap(), &NoiseChannel::erasure(k as f64 / 10.0).unwrap()).unwrap();
        prop_assert!((qcore::trace(out.matrix()).re - 1.0).abs() < 1e-9);
        prop_assert!(qcore::eig_hermitian(out.matrix()).unwrap().eigenvalues.iter().all(|&l| l > -1e-9));
    }

    #[test]
    fn rank_one_check_is_scale_invariant(w in prop::collection::vec(0.2..3.0f64, 2..5), a in 0.1..20.0f64, s in 0.1..10.0f64) {
        let wv = WeightVector::new(w.clone()).unwrap();
        let q = fisher::FisherMatrix::new(privacy::build_w(&wv) * a, fisher::FisherKind::Quantum).unwrap();
        let scaled = WeightVector::new(w.iter().map(|x| x * s).collect()).unwrap();
        let v1 = privacy::rank_one_privacy_check(&q, &wv, 1e-8).unwrap();
        let v2 = privacy::rank_one_privacy_check(&q, &scaled, 1e-8).unwrap();
        prop_assert!(v1.is_private && v2.is_private);
        prop_assert!((v1.scale_a.unwrap() - a).abs() < 1e-8 * a);
        prop_assert!((v2.scale_a.unwrap() * s * s - a).abs() < 1e-8 * a);
    }

    #[test]
    fn qfim_is_psd_and_dominates_parity_cfim(t in prop::collection::vec(-1.5..1.5f64, 2..4), p in 0.0..1.0f64) {
        let d = t.len();
        let g = protocol::ghz_balanced(d).unwrap();
        let rho0 = DensityState::new(g.matrix() * c(1.0 - p, 0.0) + CMatrix::identity(1 << d, 1 << d) * c(p / (1 << d) as f64, 0.0), NodeDims::qubits(d)).unwrap();
        let model = NetworkModel::multiplicative(&sigma_z_half(), &vec![1; d], rho0).unwrap();
        let (rho, drho) = model::state_and_derivatives(&model, &ParamVector::new(t).unwrap()).unwrap();
        let q = fisher::qfim(&rho, &drho).unwrap();
        prop_assert!(q.eigenvalues().iter().all(|&l| l > -1e-8));
        let f = fisher::cfim(&rho, &protocol::x_basis_povm(d).unwrap(), &drho).unwrap();
        prop_assert!(fisher::cfim_leq_qfim_check(&f, &q).unwrap());
    }

    #[test]
    fn epsilon_chain_holds(raw in entries(4), t in 0.0..1.0f64, th in prop::collection::vec(-2.0..2.0f64, 2)) {
        let model = NetworkModel::multiplicative(&sigma_z_half(), &[1, 1], protocol::ghz_balanced(2).unwrap()).unwrap();
        let theta = ParamVector::new(th).unwrap();
        let varrho = model::evolve(&model, &theta).unwrap();
        let tau = density_from(&raw, 4);
        let sigma = DensityState::new(varrho.matrix() * c(1.0 - t, 0.0) + tau.matrix() * c(t, 0.0), NodeDims::qubits(2)).unwrap();
        let h0 = model::generator_derivative(&model, 0, &theta).unwrap();
        let h1 = model::generator_derivative(&model, 1, &theta).unwrap();
        let chain = privacy::epsilon_chain(&sigma, &varrho, &h0, &h1, &sigma_z_half()).unwrap();
        prop_assert!(chain.holds(1e-10), "{chain:?}");
    }

    #[test]
    fn continuity_bound_holds(raw in entries(4), gen in prop::collection::vec(-1.0..1.0f64, 4), idx in prop::collection::vec(0usize..2, 4)) {
        let rho0 = density_from(&raw, 4);
        let h = CMatrix::from_row_slice(2, 2, &[c(gen[0], 0.0), c(gen[1], gen[2]), c(gen[1], -gen[2]), c(gen[3], 0.0)]);
        let model = NetworkModel::multiplicative(&h, &[1, 1], rho0).unwrap();
        let (rho, drho) = model::state_and_derivatives(&model, &ParamVector::new(vec![0.3, -0.8]).unwrap()).unwrap();
        let r = privacy::continuity_gap_bound(&rho, &drho, idx[0], idx[1], idx[2], idx[3]).unwrap();
        prop_assert!(r.holds(0.0), "{r:?}");
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(a in entries(4), b in entries(4)) {
        let (x, y) = (density_from(&a, 4), density_from(&b, 4));
        let f1 = qcore::fidelity(&x, &y).unwrap();
        let f2 = qcore::fidelity(&y, &x).unwrap();
        prop_assert!((0.0..=1.0).contains(&f1));
        prop_assert!((f1 - f2).abs() < 1e-8);
    }
}

#[test]
fn parity_probabilities_sum_to_one() {
    for d in 1..=5 {
        let total: f64 = (0..1usize << d)
            .map(|x| {
                protocol::parity_probability(d, 0.37, &protocol::outcome_string(x, d)).unwrap()
            })
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }
}

#[test]
fn damped_ghz_coherence_follows_power_law() {
    for d in 1..=4 {
        let ghz = protocol::ghz_balanced(d).unwrap();
        for k in 0..=10 {
            let eta = k as f64 / 10.0;
            let out = noise::apply_channel_everywhere(
                &ghz,
                &NoiseChannel::amplitude_damping(eta).unwrap(),
            )
            .unwrap();
            assert_abs_diff_eq!(
                noise::ad_structure_decompose(&out).coherence_abs(),
                0.5 * (1.0 - eta).powf(d as f64 / 2.0),
                epsilon = 1e-12
            );
        }
    }
}

#[test]
fn dephasing_scales_ghz_coherence() {
    let ghz = protocol::ghz_balanced(2).unwrap();
    let eta = 0.3;
    let out =
        noise::apply_channel_everywhere(&ghz, &NoiseChannel::dephasing(eta).unwrap()).unwrap();
    assert_abs_diff_eq!(
        out.matrix()[(0, 3)].re,
        0.5 * (1.0 - 2.0 * eta).powi(2),
        epsilon = 1e-14
    );
    let plus = CVector::from_element(2, c(std::f64::consts::FRAC_1_SQRT_2, 0.0));
    let single = DensityState::pure(&plus, NodeDims::qubits(1)).unwrap();
    let dep = noise::apply_channel_everywhere(&single, &NoiseChannel::depolarizing(eta).unwrap())
        .unwrap();
    assert_abs_diff_eq!(dep.matrix()[(0, 1)].re, 0.5 * (1.0 - eta), epsilon = 1e-14);
}
