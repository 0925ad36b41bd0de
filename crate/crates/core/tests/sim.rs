use approx::assert_relative_eq;
use proptest::prelude::*;
use spikelab_core::geometry::{BoundaryCurve, CurveSpec};
use spikelab_core::ground_state::{solve_ground_state, GroundState};
use spikelab_core::sim::{
    detect_spikes, run, write_snapshot, write_summary, write_tracks_csv, Amplitude, Seeding,
    SimConfig, SimGrid, SimState, Simulator,
};
use spikelab_core::Error;

fn ground() -> GroundState {
    solve_ground_state(20.0, 2000, 1e-12).unwrap()
}

fn grid(spec: &str, n_rho: usize, n_theta: usize) -> SimGrid {
    let curve = BoundaryCurve::from_spec(&spec.parse().unwrap()).unwrap();
    SimGrid::build(&curve, n_rho, n_theta, 3.0).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn constant_state_is_a_fixed_point() {
    for tau in [0.0, 0.5] {
        let config = SimConfig {
            domain: "ellipse:1.5,1".parse().unwrap(),
            n_rho: 10,
            n_theta: 32,
            tau,
            dt: 0.05,
            seed: "constant:1,1".parse().unwrap(),
            ..Default::default()
        };
        let mut sim = Simulator::new(config).unwrap();
        let mut state = sim.initial_state(&ground()).unwrap();
        for _ in 0..1000 {
            let next = sim.step(&state).unwrap();
            let du = next.u.iter().fold(0.0f64, |m, x| m.max((x - 1.0).abs()));
            let dv = next.v.iter().fold(0.0f64, |m, x| m.max((x - 1.0).abs()));
            assert!(du < 1e-10 && dv < 1e-10, "tau {tau}: {du:e} {dv:e}");
            state = next;
        }
        assert_eq!(sim.rejected_steps, 0);
    }
}

#[test]
fn inhibitor_decays_at_rate_one_over_tau_without_activator() {
    let (tau, dt) = (2.0, 0.01);
    let config = SimConfig {
        n_rho: 8,
        n_theta: 16,
        tau,
        dt,
        seed: "constant:0,3".parse().unwrap(),
        ..Default::default()
    };
    let mut sim = Simulator::new(config).unwrap();
    let mut state = sim.initial_state(&ground()).unwrap();
    for n in 1..=200 {
        state = sim.step(&state).unwrap();
        let expect = 3.0 * (1.0 - dt / tau).powi(n);
        assert!(state.u.iter().all(|&u| u == 0.0));
        for &v in &state.v {
            assert_relative_eq!(v, expect, max_relative = 1e-12);
        }
    }
    assert!(state.v[0] < 3.0 * (-1.0f64).exp());
}

fn squared_radius_error(n_rho: usize, n_theta: usize, stretch: f64) -> f64 {
    let curve = BoundaryCurve::circle(1.0).unwrap();
    let g = SimGrid::build(&curve, n_rho, n_theta, stretch).unwrap();
    let field: Vec<f64> = g.position.iter().map(|p| p[0] * p[0] + p[1] * p[1]).collect();
    let lap = g.apply_laplacian(&field);
    // The outer ring carries the zero-flux face and is excluded.
    (0..g.len())
        .filter(|k| {
            let i = k / g.n_theta;
            g.rho[i] >= 0.2 && i + 1 < g.n_rho
        })
        .fold(0.0f64, |m, k| m.max((lap[k] - 4.0).abs()))
}

#[test]
fn laplacian_of_squared_radius_on_disk() {
    assert!(squared_radius_error(40, 128, 0.0) < 1e-3);
    // Stretched rings are consistent but not exact for |x|².
    let coarse = squared_radius_error(20, 64, 3.0);
    let fine = squared_radius_error(40, 128, 3.0);
    let finer = squared_radius_error(80, 256, 3.0);
    assert!(coarse / fine > 3.0 && fine / finer > 3.0, "{coarse} {fine} {finer}");
}

#[test]
fn constant_field_has_zero_laplacian() {
    for spec in ["circle:1", "ellipse:2,1", "radial-fourier:r0=1,a3=0.2,b2=0.1"] {
        let g = grid(spec, 20, 64);
        let lap = g.apply_laplacian(&vec![2.5; g.len()]);
        assert!(lap.iter().all(|x| x.abs() < 1e-12), "{spec}");
    }
}

#[test]
fn laplacian_converges_on_the_ellipse_interior() {
    let errors: Vec<f64> = [(20, 64), (40, 128), (80, 256)]
        .iter()
        .map(|&(nr, nt)| {
            let g = grid("ellipse:2,1", nr, nt);
            let field: Vec<f64> = g.position.iter().map(|p| p[0].powi(3) - 3.0 * p[0] * p[1] * p[1]).collect();
            let lap = g.apply_laplacian(&field);
            (0..g.len())
                .filter(|k| {
                    let i = k / g.n_theta;
                    g.rho[i] > 0.3 && i + 1 < g.n_rho
                })
                .fold(0.0f64, |m, k| m.max(lap[k].abs()))
        })
        .collect();
    assert!(errors[2] < errors[1] && errors[1] < errors[0], "{errors:?}");
    assert!(errors[1] / errors[2] > 2.0, "{errors:?}");
}

#[test]
fn boundary_normal_derivative_matches_analytic_value_on_ellipse() {
    // g = |x|² has ∂g/∂n = 2 f² / sqrt(f² + f'²) at the boundary point f(θ) e_r.
    let curve = BoundaryCurve::ellipse(2.0, 1.0).unwrap();
    let errors: Vec<f64> = [(20, 64), (40, 128), (80, 256)]
        .iter()
        .map(|&(nr, nt)| {
            let g = SimGrid::build(&curve, nr, nt, 3.0).unwrap();
            let field: Vec<f64> = g.position.iter().map(|p| p[0] * p[0] + p[1] * p[1]).collect();
            let dn = g.boundary_normal_derivative(&field);
            (0..nt)
                .map(|j| {
                    let [f, f1, _] = curve.radial_function(g.theta[j]).unwrap();
                    (dn[j] - 2.0 * f * f / (f * f + f1 * f1).sqrt()).abs()
                })
                .fold(0.0f64, f64::max)
        })
        .collect();
    assert!(errors[0] < 0.05, "{errors:?}");
    for pair in errors.windows(2) {
        assert!(pair[0] / pair[1] > 3.0, "{errors:?}");
    }
}

#[test]
fn pure_diffusion_conserves_activator_mass() {
    let config = SimConfig {
        domain: "ellipse:1.5,1".parse().unwrap(),
        n_rho: 16,
        n_theta: 64,
        epsilon: 0.2,
        reaction: false,
        dt: 0.1,
        seed: "boundary:0.3@2".parse().unwrap(),
        ..Default::default()
    };
    let mut sim = Simulator::new(config).unwrap();
    let mut state = sim.initial_state(&ground()).unwrap();
    let mut mass = sim.grid.integral(&state.u);
    for _ in 0..100 {
        state = sim.step(&state).unwrap();
        let next = sim.grid.integral(&state.u);
        assert!((next - mass).abs() <= 1e-10 * mass, "{mass} -> {next}");
        mass = next;
    }
}

fn field_at_one(dt: f64) -> Vec<f64> {
    let config = SimConfig {
        n_rho: 16,
        n_theta: 64,
        epsilon: 0.1,
        dt,
        t_end: 1.0,
        seed: "boundary:0.4".parse().unwrap(),
        ..Default::default()
    };
    let mut sim = Simulator::new(config.clone()).unwrap();
    let mut state = sim.initial_state(&ground()).unwrap();
    for _ in 0..config.steps() {
        state = sim.step(&state).unwrap();
    }
    assert!((state.t - 1.0).abs() < 1e-12);
    state.u
}

#[test]
fn time_stepping_is_first_order() {
    let fields: Vec<Vec<f64>> = [0.04, 0.02, 0.01].iter().map(|&dt| field_at_one(dt)).collect();
    let d1 = max_abs_diff(&fields[0], &fields[1]);
    let d2 = max_abs_diff(&fields[1], &fields[2]);
    let order = (d1 / d2).log2();
    assert!(order >= 0.9, "observed order {order}");
}

fn spike_position(n_rho: usize, n_theta: usize) -> ([f64; 2], f64) {
    let config = SimConfig {
        domain: "ellipse:1.5,1".parse().unwrap(),
        n_rho,
        n_theta,
        t_end: 5.0,
        seed: "boundary:0.5@consistent".parse().unwrap(),
        snapshot_every: 1000,
        ..Default::default()
    };
    let trajectory = run(&config).unwrap();
    let last = trajectory.snapshots.last().unwrap();
    assert_eq!(last.spikes.len(), 1);
    let g = grid("ellipse:1.5,1", n_rho, n_theta);
    let cell = g.radius.iter().fold(0.0f64, |m, f| m.max(*f)) * g.d_theta();
    (last.spikes[0].position, cell)
}

#[test]
fn refined_grid_moves_spike_by_less_than_a_coarse_cell() {
    let (coarse, cell) = spike_position(40, 256);
    let (fine, _) = spike_position(80, 512);
    let shift = ((coarse[0] - fine[0]).powi(2) + (coarse[1] - fine[1]).powi(2)).sqrt();
    assert!(shift < cell, "{shift} vs {cell}");
}

#[test]
fn flat_field_has_no_spikes() {
    let g = grid("ellipse:1.5,1", 12, 32);
    let state = SimState {
        u: vec![1.0; g.len()],
        v: vec![1.0; g.len()],
        t: 0.0,
    };
    assert!(detect_spikes(&g, &state, 0.2, 0.05, 0.0).spikes.is_empty());
}

#[test]
fn seeded_spikes_are_detected_within_a_cell_and_ordered() {
    let gs = ground();
    for offsets in [vec![0.3], vec![-0.45, 0.05, 0.55]] {
        let config = SimConfig {
            domain: "ellipse:1.5,1".parse().unwrap(),
            n_rho: 40,
            n_theta: 384,
            seed: Seeding::Boundary {
                offsets: offsets.clone(),
                amplitude: Amplitude::Fixed(1.0),
            },
            ..Default::default()
        };
        let sim = Simulator::new(config).unwrap();
        let state = sim.initial_state(&gs).unwrap();
        let found = sim.detect(&state).spikes;
        assert_eq!(found.len(), offsets.len());
        let g = &sim.grid;
        let curve = g.curve();
        let radial = (1.0 - g.rho_faces[g.n_rho - 1]) * 1.5;
        let angular = 1.5 * g.d_theta();
        let cell = radial.hypot(angular);
        for (spike, &s) in found.iter().zip(&offsets) {
            let p = curve.point(curve.parameter_at_arc_offset(sim.reference, s));
            let miss = (spike.position[0] - p[0]).hypot(spike.position[1] - p[1]);
            assert!(miss < cell, "{s}: {miss} vs {cell}");
            assert!((spike.arc.unwrap() - s).abs() < cell);
            assert!(spike.boundary_distance < 2.0 * sim.config.epsilon);
        }
        assert!(found.windows(2).all(|p| p[0].arc.unwrap() < p[1].arc.unwrap()));
    }
}

#[test]
fn settled_spike_satisfies_the_quasi_steady_equations() {
    let config = SimConfig {
        n_rho: 24,
        n_theta: 128,
        epsilon: 0.1,
        t_end: 80.0,
        seed: "boundary:0@consistent".parse().unwrap(),
        ..Default::default()
    };
    let mut sim = Simulator::new(config.clone()).unwrap();
    let mut state = sim.initial_state(&ground()).unwrap();
    for _ in 0..config.steps() {
        state = sim.step(&state).unwrap();
    }
    let u_max = state.u.iter().fold(0.0f64, |m, &x| m.max(x));
    let residual = sim.activator_residual(&state).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(residual < 1e-4 * u_max, "{residual:e} vs {u_max}");
    let v = sim.quasi_steady_inhibitor(&state.u).unwrap();
    assert!(max_abs_diff(&v, &state.v) < 1e-12 * u_max * u_max);
}

#[test]
fn curves_without_radial_representation_are_rejected() {
    let sampled = BoundaryCurve::ellipse(1.5, 1.0).unwrap().spectral_resample(65).unwrap();
    assert!(matches!(SimGrid::build(&sampled, 10, 32, 0.0), Err(Error::Geometry(_))));
    let disk = BoundaryCurve::circle(1.0).unwrap();
    assert!(SimGrid::build(&disk, 2, 32, 0.0).is_err());
    assert!(SimGrid::build(&disk, 10, 31, 0.0).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        SimConfig { dt: 0.6, ..Default::default() },
        SimConfig { tau: 0.01, dt: 0.05, ..Default::default() },
        SimConfig { epsilon: -1.0, ..Default::default() },
        SimConfig { threshold: 1.0, ..Default::default() },
        SimConfig { seed: "constant:1,0".parse().unwrap(), ..Default::default() },
    ];
    for config in bad {
        assert!(config.validate().is_err(), "{config:?}");
    }
    for text in ["boundary:", "boundary:0.1@-2", "constant:1", "spiral:1"] {
        assert!(text.parse::<Seeding>().is_err(), "{text}");
    }
}

#[test]
fn runs_are_deterministic_and_outputs_are_written() {
    let config = SimConfig {
        n_rho: 12,
        n_theta: 64,
        epsilon: 0.1,
        t_end: 1.0,
        snapshot_every: 5,
        ..Default::default()
    };
    let a = run(&config).unwrap();
    let b = run(&config).unwrap();
    assert_eq!(a.final_state, b.final_state);
    assert_eq!(a.snapshots, b.snapshots);
    assert_eq!(a.snapshots.len(), 5);

    let dir = tempfile::tempdir().unwrap();
    let sim = Simulator::new(config.clone()).unwrap();
    write_snapshot(dir.path(), "final", &sim.grid, &a.final_state).unwrap();
    let bytes = std::fs::read(dir.path().join("final.bin")).unwrap();
    assert_eq!(bytes.len(), 16 * sim.grid.len());
    let first = f64::from_le_bytes(bytes[..8].try_into().unwrap());
    assert_eq!(first, a.final_state.u[0]);
    let header = std::fs::read_to_string(dir.path().join("final.hdr")).unwrap();
    assert!(header.contains("n_rho 12") && header.contains("n_theta 64"));

    let mut tracks = Vec::new();
    write_tracks_csv(&mut tracks, &a.snapshots).unwrap();
    let tracks = String::from_utf8(tracks).unwrap();
    assert!(tracks.starts_with("t,index,arc,height\n"));
    assert_eq!(tracks.lines().count(), 1 + a.snapshots.len());

    let mut summary = Vec::new();
    write_summary(&mut summary, &config, &sim.grid, sim.reference, &a).unwrap();
    let json: serde_json::Value = serde_json::from_slice(&summary).unwrap();
    assert_eq!(json["steps"], 20);
    assert!(json["notes"][0].as_str().unwrap().contains("desk-scale"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn seeding_round_trips(offsets in prop::collection::vec(-2.0f64..2.0, 1..5), amp in 0.1f64..10.0, mode in 0u8..3) {
        let amplitude = match mode {
            0 => Amplitude::Ansatz,
            1 => Amplitude::Consistent,
            _ => Amplitude::Fixed(amp),
        };
        let seed = Seeding::Boundary { offsets, amplitude };
        let parsed: Seeding = seed.to_string().parse().unwrap();
        prop_assert_eq!(parsed, seed);
    }

    #[test]
    fn laplacian_annihilates_constants_on_random_ellipses(a in 0.5f64..3.0, b in 0.5f64..3.0, c in -5.0f64..5.0) {
        let curve = BoundaryCurve::from_spec(&CurveSpec::Ellipse { a, b }).unwrap();
        let g = SimGrid::build(&curve, 8, 24, 2.0).unwrap();
        let lap = g.apply_laplacian(&vec![c; g.len()]);
        let scale = g.laplacian.val.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(lap.iter().all(|x| x.abs() <= 1e-13 * scale * c.abs().max(1.0)));
    }
}
