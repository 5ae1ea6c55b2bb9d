//! Fixed-step time integration with trapezoidal companion models.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use super::blocktree::{BlockTree, BlockTreeFactor};
use super::circuit::{Circuit, Terminal};
use super::phasor::{balanced, SteadyState};
use crate::error::{Error, Result};

/// Companion data of one series R-L branch.
struct RlCompanion {
    a: Terminal,
    b: Terminal,
    y: Matrix3<f64>,
    /// Trapezoidal history gain on the branch current.
    k_trap: Matrix3<f64>,
    /// Backward-Euler (half step) history gain on the branch current.
    k_be: Matrix3<f64>,
}

/// Everything the stepper needs for one run.
pub struct TransientInput<'a> {
    pub circuit: &'a Circuit,
    pub steady: &'a SteadyState,
    pub dt: f64,
    pub samples: usize,
    /// Index of the first sample with the fault applied, and the fault
    /// conductance matrix at the fault block.
    pub fault: Option<(usize, Matrix3<f64>)>,
    pub critical_damping: bool,
    /// Blocks whose voltages are recorded.
    pub probe: usize,
    /// Abort when any recorded sample exceeds this magnitude.
    pub abort_above: f64,
}

#[derive(Clone, Copy)]
enum Rule {
    Trapezoidal,
    /// Backward Euler over half a step.
    HalfEuler,
}

fn phasor_to_instant(p: &[Complex64; 3], omega: f64, t: f64) -> Vector3<f64> {
    let rot = Complex64::from_polar(std::f64::consts::SQRT_2, omega * t);
    Vector3::new((p[0] * rot).im, (p[1] * rot).im, (p[2] * rot).im)
}

/// Runs the simulation and returns the probe block's three phase voltages.
pub fn run(input: &TransientInput<'_>) -> Result<[Vec<f64>; 3]> {
    let c = input.circuit;
    let dt = input.dt;
    let n_blocks = c.blocks();
    let omega = 2.0 * std::f64::consts::PI * c.frequency_hz;

    let comps: Vec<RlCompanion> = c
        .rl
        .iter()
        .map(|e| {
            let two_l = e.l * (2.0 / dt);
            let y = (e.r + two_l)
                .try_inverse()
                .ok_or_else(|| Error::Singular("series branch with zero impedance".into()))?;
            Ok(RlCompanion {
                a: e.a,
                b: e.b,
                y,
                k_trap: y * (two_l - e.r),
                k_be: y * two_l,
            })
        })
        .collect::<Result<_>>()?;
    let yc: Vec<Matrix3<f64>> = c.shunt_c.iter().map(|m| m * (2.0 / dt)).collect();

    let mut tree = BlockTree::new(c.parent.clone());
    for b in 0..n_blocks {
        tree.add_diag(b, &(c.shunt_g[b] + yc[b]));
    }
    for comp in &comps {
        match (comp.a, comp.b) {
            (Terminal::Block(i), Terminal::Block(j)) => {
                tree.add_diag(i, &comp.y);
                tree.add_diag(j, &comp.y);
                tree.add_coupling(i, j, &(-comp.y));
            }
            (Terminal::Block(i), _) => tree.add_diag(i, &comp.y),
            (_, Terminal::Block(j)) => tree.add_diag(j, &comp.y),
            _ => {}
        }
    }
    let pre = tree.factor()?;
    let post: Option<(usize, BlockTreeFactor<f64>)> = match &input.fault {
        Some((k, g)) => {
            let fb = c
                .fault_block
                .ok_or_else(|| Error::InvalidLocation("fault block missing".into()))?;
            let mut t = tree.clone();
            t.add_diag(fb, g);
            Some((*k, t.factor()?))
        }
        None => None,
    };

    let emf_phasors = [
        balanced(input.steady.grid_emf),
        balanced(input.steady.dg_emf),
    ];
    let emf_arr = |s: usize| [emf_phasors[s][0], emf_phasors[s][1], emf_phasors[s][2]];
    let emf_at = |t: f64| [phasor_to_instant(&emf_arr(0), omega, t), phasor_to_instant(&emf_arr(1), omega, t)];

    // initial state from the phasor solution
    let mut v: Vec<Vector3<f64>> = input
        .steady
        .block_voltages
        .iter()
        .map(|p| phasor_to_instant(p, omega, 0.0))
        .collect();
    let mut i_rl: Vec<Vector3<f64>> = input
        .steady
        .branch_currents
        .iter()
        .map(|p| phasor_to_instant(p, omega, 0.0))
        .collect();
    let mut i_c: Vec<Vector3<f64>> = c
        .shunt_c
        .iter()
        .zip(&input.steady.block_voltages)
        .map(|(cm, p)| {
            // i = C dv/dt
            let d = [
                p[0] * Complex64::new(0.0, omega),
                p[1] * Complex64::new(0.0, omega),
                p[2] * Complex64::new(0.0, omega),
            ];
            cm * phasor_to_instant(&d, omega, 0.0)
        })
        .collect();
    let mut e = emf_at(0.0);

    let mut out = [
        Vec::with_capacity(input.samples),
        Vec::with_capacity(input.samples),
        Vec::with_capacity(input.samples),
    ];
    let mut record = |v: &[Vector3<f64>], k: usize| -> Result<()> {
        let p = v[input.probe];
        for ph in 0..3 {
            let x = p[ph];
            if !x.is_finite() || x.abs() > input.abort_above {
                return Err(Error::NumericalInstability(format!(
                    "sample {k} phase {ph} = {x:.4e} V"
                )));
            }
            out[ph].push(x);
        }
        Ok(())
    };
    if input.samples == 0 {
        return Ok(out);
    }
    record(&v, 0)?;

    let mut h_rl = vec![Vector3::zeros(); comps.len()];
    let mut h_c = vec![Vector3::zeros(); n_blocks];
    let mut rhs = vec![Vector3::zeros(); n_blocks];

    let tv = |t: Terminal, v: &[Vector3<f64>], e: &[Vector3<f64>; 2]| match t {
        Terminal::Block(b) => v[b],
        Terminal::Source(s) => e[s],
        Terminal::Ground => Vector3::zeros(),
    };

    for k in 1..input.samples {
        let faulted = post.as_ref().filter(|(ks, _)| k >= *ks);
        let factor = faulted.map_or(&pre, |(_, f)| f);
        let switching = input.critical_damping && faulted.is_some_and(|(ks, _)| k == *ks);
        let substeps: &[(Rule, f64)] = if switching {
            &[(Rule::HalfEuler, 0.5), (Rule::HalfEuler, 1.0)]
        } else {
            &[(Rule::Trapezoidal, 1.0)]
        };
        let t0 = (k - 1) as f64 * dt;
        for &(rule, frac) in substeps {
            let e_new = emf_at(t0 + frac * dt);
            for (j, comp) in comps.iter().enumerate() {
                h_rl[j] = match rule {
                    Rule::Trapezoidal => {
                        let vab = tv(comp.a, &v, &e) - tv(comp.b, &v, &e);
                        comp.y * vab + comp.k_trap * i_rl[j]
                    }
                    Rule::HalfEuler => comp.k_be * i_rl[j],
                };
            }
            for b in 0..n_blocks {
                h_c[b] = match rule {
                    Rule::Trapezoidal => -(yc[b] * v[b]) - i_c[b],
                    Rule::HalfEuler => -(yc[b] * v[b]),
                };
                rhs[b] = -h_c[b];
            }
            for (j, comp) in comps.iter().enumerate() {
                match (comp.a, comp.b) {
                    (Terminal::Block(a), Terminal::Block(b)) => {
                        rhs[a] -= h_rl[j];
                        rhs[b] += h_rl[j];
                    }
                    (Terminal::Block(a), other) => {
                        rhs[a] -= h_rl[j];
                        if let Terminal::Source(s) = other {
                            rhs[a] += comp.y * e_new[s];
                        }
                    }
                    (other, Terminal::Block(b)) => {
                        rhs[b] += h_rl[j];
                        if let Terminal::Source(s) = other {
                            rhs[b] += comp.y * e_new[s];
                        }
                    }
                    _ => {}
                }
            }
            factor.solve_in_place(&mut rhs);
            std::mem::swap(&mut v, &mut rhs);
            e = e_new;
            for (j, comp) in comps.iter().enumerate() {
                let vab = tv(comp.a, &v, &e) - tv(comp.b, &v, &e);
                i_rl[j] = comp.y * vab + h_rl[j];
            }
            for b in 0..n_blocks {
                i_c[b] = yc[b] * v[b] + h_c[b];
            }
        }
        record(&v, k)?;
    }
    Ok(out)
}
