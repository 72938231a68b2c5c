//! Exhaustive structure of amplitude-damping Kraus strings.

use qnet_privacy::noise::{self, NoiseChannel};
use qnet_privacy::qcore;

#[test]
fn every_string_is_generalized_permutation_and_upper_triangular() {
    for eta in [0.05, 0.37, 0.9] {
        let ch = NoiseChannel::amplitude_damping(eta).unwrap();
        for d in 1..=4 {
            let mut count = 0;
            for (index, m) in noise::kraus_strings(&ch, d).unwrap() {
                let p = noise::matrix_structure_predicates(&m).unwrap();
                assert!(p.is_generalized_permutation, "{index:?}");
                assert!(p.is_upper_triangular, "{index:?}");
                if index.contains(&1) {
                    assert!(p.first_entry_zero, "{index:?}");
                }
                count += 1;
            }
            assert_eq!(count, 1 << d);
        }
    }
}

#[test]
fn identity_string_keeps_first_entry() {
    let ch = NoiseChannel::amplitude_damping(0.5).unwrap();
    let (index, m) = noise::kraus_strings(&ch, 3).unwrap().next().unwrap();
    assert_eq!(index, vec![0, 0, 0]);
    assert!(
        !noise::matrix_structure_predicates(&m)
            .unwrap()
            .first_entry_zero
    );
}

#[test]
fn strings_form_a_complete_set() {
    let ch = NoiseChannel::amplitude_damping(0.3).unwrap();
    let n = 8;
    let sum = noise::kraus_strings(&ch, 3)
        .unwrap()
        .fold(qcore::CMatrix::zeros(n, n), |acc, (_, a)| {
            acc + a.adjoint() * a
        });
    assert!(qcore::max_abs_entry(&(sum - qcore::identity(n))) < 1e-12);
}

#[test]
fn predicates_catch_a_dense_matrix() {
    let m = qcore::pauli_x() + qcore::pauli_z();
    let p = noise::matrix_structure_predicates(&m).unwrap();
    assert!(!p.is_generalized_permutation);
    assert!(!p.is_upper_triangular);
}
