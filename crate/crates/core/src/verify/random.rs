//! Seeded random instances for the property suites.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::control::{ControlGrid, Flavor, TimeGrid};
use crate::linalg::CVector;
use crate::system::{Edge, LevelSystem};

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Connected coupling graph: a random spanning tree plus each remaining
/// pair with probability `extra`. Weights lie in `[0.5, 2]`, energies in
/// `[-energy_scale, energy_scale]`.
pub fn connected_system(rng: &mut impl Rng, n: usize, extra: f64, energy_scale: f64) -> LevelSystem {
    let mut edges = Vec::new();
    for k in 1..n {
        let j = rng.gen_range(0..k);
        edges.push((j, k));
    }
    for j in 0..n {
        for k in j + 1..n {
            if !edges.contains(&(j, k)) && rng.gen_bool(extra) {
                edges.push((j, k));
            }
        }
    }
    edges.sort_unstable();
    let energies = (0..n).map(|_| if energy_scale > 0.0 { rng.gen_range(-energy_scale..=energy_scale) } else { 0.0 }).collect();
    LevelSystem::new(energies, edges.into_iter().map(|(j, k)| Edge::new(j, k, rng.gen_range(0.5..2.0))).collect())
}

/// Uniformly random direction in `C^n`.
pub fn unit_state(rng: &mut impl Rng, n: usize) -> CVector {
    let v = CVector::from_fn(n, |_, _| Complex64::new(gauss(rng), gauss(rng)));
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v / Complex64::new(norm, 0.0)
}

/// Uniformly random direction in `R^n` supported on `levels`.
pub fn real_unit_on(rng: &mut impl Rng, n: usize, levels: &[usize]) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    for &j in levels {
        v[j] = gauss(rng);
    }
    let norm = v.norm();
    v / norm
}

fn gauss(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Smooth complex controls: each edge carries `a (1 + b sin(nu t + c)) e^{i(omega t + phi)}`
/// sampled at step midpoints, with modulus at most `1.4 amplitude`.
pub fn smooth_control(rng: &mut impl Rng, sys: &LevelSystem, grid: TimeGrid, flavor: Flavor, amplitude: f64) -> ControlGrid {
    let params: Vec<[f64; 6]> = sys
        .edges
        .iter()
        .map(|_| {
            [
                rng.gen_range(0.2..1.0) * amplitude,
                rng.gen_range(0.0..0.4),
                rng.gen_range(0.5..4.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();
    ControlGrid::from_fn(grid, flavor, sys, |i, e| {
        let [a, b, nu, c, omega, phi] = params[e];
        let t = grid.midpoint(i);
        let modulus = a * (1.0 + b * (nu * t + c).sin());
        match flavor {
            Flavor::RealU => Complex64::new(modulus * (omega * t + phi).cos(), 0.0),
            _ => Complex64::from_polar(modulus, omega * t + phi),
        }
    })
}
