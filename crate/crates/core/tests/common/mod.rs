//! Oracles shared by the integration tests and the acceptance target.

#![allow(dead_code)]

use photon_memory::cavity::{self, CavityParams};
use photon_memory::crib::{self, CribConfig, CribMedium};
use photon_memory::free_space::{self, FreeSpaceParams, RetrievalDirection, RetrievalWindow};
use photon_memory::numerics::{trapezoid, SpaceGrid, TimeGrid, C64, I};
use photon_memory::optimizer::ControlProblem;
use photon_memory::problems::FreeSpaceCompleteRetrieval;
use photon_memory::profile::InhomProfile;
use photon_memory::signal::{ControlField, InputMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Perturbation amplitude for central differences.
const EPS: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Narrow Gaussian bump on `grid`; one "coordinate" of the control.
pub fn bump(grid: &TimeGrid, center: f64, sigma: f64) -> Vec<f64> {
    grid.nodes().iter().map(|t| (-((t - center) / sigma).powi(2)).exp()).collect()
}

fn perturbed(base: &ControlField, dir: &[C64], eps: f64) -> ControlField {
    let v = base.values().iter().zip(dir).map(|(b, d)| b + d * eps).collect();
    ControlField::new(v, *base.grid()).unwrap()
}

/// Relative errors of `∫ Re(ḡ·φ)` against central differences of `eta`
/// along `n` bumps at random centers, real and (when `complex`) imaginary.
pub fn control_fd_errors<F>(eta: F, base: &ControlField, grad: &[C64], n: usize, complex: bool, seed: u64) -> Vec<f64>
where
    F: Fn(&ControlField) -> f64,
{
    let grid = *base.grid();
    let (t0, t1) = (grid.t_start(), grid.t_end());
    let sigma = (t1 - t0) / 30.0;
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for k in 0..n {
        let center = rng.gen_range(t0 + 0.1 * (t1 - t0)..t1 - 0.1 * (t1 - t0));
        let phi = bump(&grid, center, sigma);
        let phase = if complex && k % 2 == 1 { I } else { C64::new(1.0, 0.0) };
        let dir: Vec<C64> = phi.iter().map(|v| phase * v).collect();
        // A complex gradient packs ∂/∂Re Ω + i ∂/∂Im Ω.
        let proj: Vec<f64> = grad.iter().zip(&dir).map(|(g, d)| g.re * d.re + g.im * d.im).collect();
        let adjoint = trapezoid(&proj, grid.spacing());
        let fd = (eta(&perturbed(base, &dir, EPS)) - eta(&perturbed(base, &dir, -EPS))) / (2.0 * EPS);
        out.push((adjoint - fd).abs() / fd.abs());
    }
    out
}

fn real(g: Vec<f64>) -> Vec<C64> {
    g.into_iter().map(|v| C64::new(v, 0.0)).collect()
}

/// A smooth, non-constant real control.
pub fn wavy_control(grid: TimeGrid, scale: f64) -> ControlField {
    let t1 = grid.t_end();
    let v: Vec<f64> = grid.nodes().iter().map(|t| scale * (1.0 + 0.4 * (3.0 * t / t1).sin() + 0.3 * t / t1)).collect();
    ControlField::from_real(&v, grid).unwrap()
}

pub fn cavity_simple_errors(seed: u64) -> Vec<f64> {
    let grid = TimeGrid::new(0.0, 2.0, 401).unwrap();
    let input = InputMode::gaussian_like(grid).unwrap();
    let params = CavityParams::resonant(4.0);
    let control = wavy_control(grid, 1.5);
    let (_, g, _, _) = cavity::efficiency_and_gradient(&control, &input, &params).unwrap();
    let eta = |c: &ControlField| cavity::storage_forward(c, &input, &params).unwrap().storage_efficiency();
    control_fd_errors(eta, &control, &real(g), 10, false, seed)
}

pub fn cavity_generalized_errors(seed: u64) -> Vec<f64> {
    let grid = TimeGrid::new(0.0, 2.0, 401).unwrap();
    let input = InputMode::gaussian_like(grid).unwrap();
    let params = CavityParams {
        cooperativity: 4.0,
        detuning: 0.7,
        spin_decay: 0.05,
        collision_rate: 0.1,
        collisions_in_polarization: true,
    };
    let profile = InhomProfile::new(vec![-1.0, 0.2, 1.5], vec![0.6, 0.64, 0.48]).unwrap();
    let base = wavy_control(grid, 1.5);
    // A complex control, so both quadratures matter.
    let v: Vec<C64> = base.values().iter().zip(grid.nodes()).map(|(c, t)| c * C64::from_polar(1.0, 0.4 * t)).collect();
    let control = ControlField::new(v, grid).unwrap();
    let traj = cavity::generalized_forward(&control, &input, &params, &profile).unwrap();
    let adj = cavity::generalized_adjoint(&control, traj.final_spin(), &params, &profile).unwrap();
    let g = cavity::generalized_gradient(&traj, &adj).unwrap();
    let eta = |c: &ControlField| cavity::generalized_forward(c, &input, &params, &profile).unwrap().storage_efficiency();
    control_fd_errors(eta, &control, &g, 10, true, seed)
}

pub fn free_storage_errors(seed: u64) -> Vec<f64> {
    let grid = TimeGrid::new(0.0, 2.0, 401).unwrap();
    let space = SpaceGrid::new(121).unwrap();
    let input = InputMode::gaussian_like(grid).unwrap();
    let params = FreeSpaceParams::new(3.0).unwrap();
    let control = wavy_control(grid, 1.5);
    let (_, g) = free_space::efficiency_and_gradient(&control, &input, &params, &space).unwrap();
    let eta = |c: &ControlField| free_space::storage_forward(c, &input, &params, &space).unwrap().storage_efficiency();
    control_fd_errors(eta, &control, &real(g), 10, false, seed)
}

pub fn free_total_errors(seed: u64) -> Vec<f64> {
    let grid = TimeGrid::new(0.0, 2.0, 401).unwrap();
    let space = SpaceGrid::new(121).unwrap();
    let input = InputMode::gaussian_like(grid).unwrap();
    let params = FreeSpaceParams::new(3.0).unwrap();
    let control = wavy_control(grid, 1.5);
    let window = RetrievalWindow::constant(2.0, 2.0, 6.0, 0.005, RetrievalDirection::Backward).unwrap();
    let (_, g) = free_space::total_efficiency_and_gradient(&control, &window, &input, &params, &space).unwrap();
    let eta = |c: &ControlField| {
        free_space::storage_then_retrieval(c, &window, &input, &params, &space).unwrap().total_efficiency
    };
    control_fd_errors(eta, &control, &real(g), 10, false, seed)
}

/// The kernel-scored objective used for complete retrieval.
pub fn free_complete_errors(seed: u64) -> Vec<f64> {
    let grid = TimeGrid::new(0.0, 2.0, 401).unwrap();
    let p = FreeSpaceCompleteRetrieval::new(
        InputMode::gaussian_like(grid).unwrap(),
        FreeSpaceParams::new(3.0).unwrap(),
        SpaceGrid::new(121).unwrap(),
        RetrievalDirection::Backward,
    );
    let control = wavy_control(grid, 1.5);
    let g = p.evaluate(&control).unwrap().gradient;
    control_fd_errors(|c| p.efficiency(c).unwrap(), &control, &g, 10, false, seed)
}

fn crib_cases() -> Vec<CribConfig> {
    let factors: Vec<f64> = (0..12).map(|j| -1.0 + 2.0 * j as f64 / 11.0).collect();
    let weights: Vec<f64> = (0..12).map(|j| 1.0 + 0.5 * ((j * 7 % 5) as f64)).collect();
    let profile = InhomProfile::shaped(6.0, factors, &weights).unwrap();
    let mut cav =
        CribConfig::with_resolution(profile.clone(), CribMedium::Cavity { cooperativity: 10.0 }, 0.3, 20.0, 2.0).unwrap();
    cav.residual_tol = None;
    let space = SpaceGrid::new(31).unwrap();
    let mut free =
        CribConfig::with_resolution(profile, CribMedium::FreeSpace { optical_depth: 3.0, space }, 1.0, 8.0, 2.0).unwrap();
    free.residual_tol = None;
    free.retrieval_length = 6.0;
    vec![cav, free]
}

/// Weight gradient `∂η/∂x_j` against differences in one raw amplitude,
/// ten randomly chosen classes per medium.
pub fn crib_weight_errors(seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for cfg in crib_cases() {
        let input = InputMode::gaussian_like(cfg.storage).unwrap();
        let traj = crib::crib_forward(&input, &cfg).unwrap();
        let adj = crib::crib_adjoint(&traj, &cfg).unwrap();
        let g = crib::weight_gradient(&traj, &adj, &cfg).unwrap();
        let x = cfg.profile.amplitudes().to_vec();
        let eta = |x: Vec<f64>| {
            crib::crib_efficiency(&input, &cfg.with_profile(cfg.profile.with_raw_amplitudes_unchecked(x))).unwrap()
        };
        let mut classes: Vec<usize> = (0..x.len()).collect();
        for _ in 0..10 {
            let j = classes.swap_remove(rng.gen_range(0..classes.len()));
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += EPS;
            xm[j] -= EPS;
            let fd = (eta(xp) - eta(xm)) / (2.0 * EPS);
            out.push((g[j] - fd).abs() / fd.abs());
        }
    }
    out
}

/// Width gradient at ten random widths per medium.
pub fn crib_width_errors(seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for cfg in crib_cases() {
        let input = InputMode::gaussian_like(cfg.storage).unwrap();
        for _ in 0..10 {
            let w = rng.gen_range(0.5..8.0);
            let at = |w: f64| cfg.with_profile(cfg.profile.with_width(w).unwrap());
            let c = at(w);
            let traj = crib::crib_forward(&input, &c).unwrap();
            let adj = crib::crib_adjoint(&traj, &c).unwrap();
            let g = crib::width_gradient(&traj, &adj, &c).unwrap();
            let eta = |w: f64| crib::crib_efficiency(&input, &at(w)).unwrap();
            let fd = (eta(w + EPS) - eta(w - EPS)) / (2.0 * EPS);
            out.push((g - fd).abs() / fd.abs());
        }
    }
    out
}

pub fn max(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b))
}
