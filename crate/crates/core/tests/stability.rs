use spikelab_core::ground_state::{compute_moments, solve_ground_state, GroundStateMoments};
use spikelab_core::reduced::{solve_positions, ClusterParams, SpikeConfiguration};
use spikelab_core::stability::{
    build_matrix_m, closed_form_estimate, eigenvalues_a, small_eigenvalue_estimates,
    synchronous_estimate, Classification,
};

fn moments() -> GroundStateMoments {
    compute_moments(&solve_ground_state(25.0, 4000, 1e-12).unwrap()).unwrap()
}

const SETS: [(f64, f64); 3] = [(2e-3, 2e-3), (1e-3, 2e-3), (5e-4, 2e-3)];
const H_SECOND: f64 = -18.0;

fn solved(
    eps: f64,
    d: f64,
    k: usize,
    m: &GroundStateMoments,
) -> (ClusterParams, SpikeConfiguration) {
    let p = ClusterParams::new(eps, d, k, H_SECOND, m).unwrap();
    let c = solve_positions(&p, None).unwrap();
    (p, c)
}

#[test]
fn a_spectrum_for_all_cluster_sizes() {
    for k in 1..=12 {
        let e = eigenvalues_a(k).unwrap();
        assert_eq!(e.len(), k);
        for (n, v) in e.iter().enumerate() {
            assert!((v - (n * (n + 1)) as f64).abs() < 1e-9, "k={k} n={n} {v}");
        }
    }
}

#[test]
fn m_structure() {
    let m = moments();
    let (p, c) = solved(1e-3, 2e-3, 1, &m);
    assert_eq!(build_matrix_m(&c, &p).unwrap().diag, vec![0.0]);
    let (p, c) = solved(1e-3, 2e-3, 2, &m);
    let mm = build_matrix_m(&c, &p).unwrap();
    assert!((mm.diag[0] - mm.diag[1]).abs() <= 1e-10 * mm.diag[0]);
    assert!((mm.off[0] + mm.diag[0]).abs() <= 1e-10 * mm.diag[0]);
    for k in [3, 5, 8] {
        let (p, c) = solved(1e-3, 2e-3, k, &m);
        let mm = build_matrix_m(&c, &p).unwrap();
        let row_sums = mm.mul_vec(&vec![1.0; k]);
        assert!(row_sums.iter().all(|v| v.abs() <= 1e-12 * mm.diag[0]));
        let eig = mm.eigen().unwrap();
        let v0 = &eig.vectors[0];
        let norm = 1.0 / (k as f64).sqrt();
        for x in v0 {
            assert!((x.abs() - norm).abs() < 1e-10);
        }
    }
}

#[test]
fn m_rejects_unsolved_configurations() {
    let m = moments();
    let (p, mut c) = solved(1e-3, 2e-3, 3, &m);
    c.offsets.swap(0, 2);
    assert!(build_matrix_m(&c, &p).is_err());
    let (p, mut c) = solved(1e-3, 2e-3, 3, &m);
    c.residual = 1.0;
    assert!(build_matrix_m(&c, &p).is_err());
}

#[test]
fn estimates_are_negative_and_ordered() {
    let m = moments();
    for (eps, d) in SETS {
        for k in [2, 3, 5] {
            let (p, c) = solved(eps, d, k, &m);
            let r = small_eigenvalue_estimates(&p, &c).unwrap();
            assert!(r.stable);
            assert_eq!(
                r.modes[0].classification,
                Classification::ZeroToLeadingOrder
            );
            for mode in &r.modes[1..] {
                assert!(mode.matrix_estimate < 0.0 && mode.closed_form < 0.0);
                assert_eq!(mode.classification, Classification::Stable);
            }
            assert!(r.synchronous < 0.0);
            assert!(r.synchronous.abs() < r.modes[1].matrix_estimate.abs());
        }
    }
}

#[test]
fn synchronous_to_translational_ratio_scales_like_inverse_log() {
    let m = moments();
    for (eps, d) in SETS {
        let (p, c) = solved(eps, d, 2, &m);
        let r = small_eigenvalue_estimates(&p, &c).unwrap();
        let q = r.synchronous.abs() / r.modes[1].matrix_estimate.abs() * p.log_parameter();
        assert!((0.75..=3.0).contains(&q), "q = {q}");
    }
}

#[test]
fn matrix_and_closed_form_estimates_converge() {
    let m = moments();
    let gaps: Vec<f64> = SETS
        .iter()
        .map(|&(eps, d)| {
            let (p, c) = solved(eps, d, 3, &m);
            let r = small_eigenvalue_estimates(&p, &c).unwrap();
            let mode = r.modes[1];
            ((mode.matrix_estimate - mode.closed_form) / mode.closed_form).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn epsilon_cubed_scaling_at_fixed_sigma() {
    let m = moments();
    let p1 = ClusterParams::new(1e-3, 2e-3, 2, H_SECOND, &m).unwrap();
    let p2 = ClusterParams::new(2e-3, 8e-3, 2, H_SECOND, &m).unwrap();
    assert!((p1.sigma - p2.sigma).abs() < 1e-15);
    assert!((synchronous_estimate(&p2) / synchronous_estimate(&p1) - 8.0).abs() < 1e-12);
    let ratio = closed_form_estimate(&p2, 1) / closed_form_estimate(&p1, 1);
    let log_correction = p2.log_parameter() / p1.log_parameter();
    assert!((ratio - 8.0 * log_correction).abs() < 1e-12);
}
