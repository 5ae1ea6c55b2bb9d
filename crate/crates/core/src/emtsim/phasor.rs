//! Fundamental-frequency steady state of the discretised circuit.
//!
//! The DG unit is first treated as a constant-power injection to find the
//! operating point; its EMF behind the transient impedance is then fixed so
//! the same flow results from the linear circuit the transient solver uses.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use super::blocktree::BlockTree;
use super::circuit::{Circuit, Terminal, DG_SOURCE, GRID_SOURCE};
use crate::error::{Error, Result};
use crate::netmodel::{BusId, FaultScenario, NetworkModel};

const MAX_ITER: usize = 200;
const CONV_TOL: f64 = 1e-13;

/// Per-phase rms phasors of the pre-fault operating point.
#[derive(Debug, Clone)]
pub struct SteadyState {
    /// Phase-a grid EMF (rms).
    pub grid_emf: Complex64,
    /// Phase-a DG EMF (rms).
    pub dg_emf: Complex64,
    pub block_voltages: Vec<[Complex64; 3]>,
    /// Current of every series branch, flowing a -> b.
    pub branch_currents: Vec<[Complex64; 3]>,
    pub bus_voltages: Vec<(BusId, [Complex64; 3])>,
    /// Current entering each line section at its sending end.
    pub section_currents: Vec<[Complex64; 3]>,
}

impl SteadyState {
    pub fn bus_voltage(&self, bus: BusId) -> Option<[Complex64; 3]> {
        self.bus_voltages.iter().find(|(b, _)| *b == bus).map(|(_, v)| *v)
    }
}

/// Balanced set from a phase-a phasor (b lags by 120 degrees).
pub fn balanced(a: Complex64) -> Vector3<Complex64> {
    let rot = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI / 3.0);
    Vector3::new(a, a * rot, a * rot * rot)
}

fn to_c(m: &Matrix3<f64>) -> Matrix3<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

fn branch_admittance(r: &Matrix3<f64>, l: &Matrix3<f64>, omega: f64) -> Result<Matrix3<Complex64>> {
    let z = to_c(r) + to_c(l) * Complex64::new(0.0, omega);
    z.try_inverse()
        .ok_or_else(|| Error::Singular("series branch with zero impedance".into()))
}

struct PhasorSystem<'a> {
    circuit: &'a Circuit,
    omega: f64,
    admittances: Vec<Matrix3<Complex64>>,
}

impl<'a> PhasorSystem<'a> {
    fn new(circuit: &'a Circuit) -> Result<Self> {
        let omega = 2.0 * std::f64::consts::PI * circuit.frequency_hz;
        let admittances = circuit
            .rl
            .iter()
            .map(|e| branch_admittance(&e.r, &e.l, omega))
            .collect::<Result<Vec<_>>>()?;
        Ok(PhasorSystem {
            circuit,
            omega,
            admittances,
        })
    }

    fn solve(
        &self,
        with_dg_branch: bool,
        emf: [Vector3<Complex64>; 2],
        injections: &[(usize, Vector3<Complex64>)],
    ) -> Result<Vec<Vector3<Complex64>>> {
        let c = self.circuit;
        let mut tree = BlockTree::new(c.parent.clone());
        let mut rhs = vec![Vector3::zeros(); c.blocks()];
        for b in 0..c.blocks() {
            let y = to_c(&c.shunt_g[b]) + to_c(&c.shunt_c[b]) * Complex64::new(0.0, self.omega);
            tree.add_diag(b, &y);
        }
        for (e, y) in c.rl.iter().zip(&self.admittances) {
            if !with_dg_branch && e.a == Terminal::Source(DG_SOURCE) {
                continue;
            }
            stamp(&mut tree, &mut rhs, e.a, e.b, y, &emf);
        }
        for (b, i) in injections {
            rhs[*b] += i;
        }
        tree.factor()?.solve_in_place(&mut rhs);
        Ok(rhs)
    }
}

fn terminal_voltage(t: Terminal, v: &[Vector3<Complex64>], emf: &[Vector3<Complex64>; 2]) -> Vector3<Complex64> {
    match t {
        Terminal::Block(b) => v[b],
        Terminal::Source(s) => emf[s],
        Terminal::Ground => Vector3::zeros(),
    }
}

fn stamp(
    tree: &mut BlockTree<Complex64>,
    rhs: &mut [Vector3<Complex64>],
    a: Terminal,
    b: Terminal,
    y: &Matrix3<Complex64>,
    emf: &[Vector3<Complex64>; 2],
) {
    match (a, b) {
        (Terminal::Block(i), Terminal::Block(j)) => {
            tree.add_diag(i, y);
            tree.add_diag(j, y);
            tree.add_coupling(i, j, &(-y));
        }
        (Terminal::Block(i), other) => {
            tree.add_diag(i, y);
            if let Terminal::Source(s) = other {
                rhs[i] += y * emf[s];
            }
        }
        (other, Terminal::Block(j)) => {
            tree.add_diag(j, y);
            if let Terminal::Source(s) = other {
                rhs[j] += y * emf[s];
            }
        }
        _ => {}
    }
}

/// Steady state of an already-built circuit for the given scenario's
/// operating point (DG penetration and load scale).
pub fn steady_state_for_circuit(
    network: &NetworkModel,
    circuit: &Circuit,
    dg_penetration: f64,
    load_scale: f64,
) -> Result<SteadyState> {
    let sys = PhasorSystem::new(circuit)?;
    let v_nom = network.nominal_kv * 1e3 / 3f64.sqrt();
    let (p_load_mw, _) = network.total_load();
    let s_dg = Complex64::new(
        dg_penetration * p_load_mw * load_scale * 1e6,
        network.dg.reactive_power_mvar * 1e6,
    ) / 3.0;

    let dg_block = circuit.block_of_bus(network.dg.bus).expect("DG bus in circuit");
    let root = 0;
    let mut e_grid = Complex64::new(v_nom, 0.0);
    let mut i_dg = Complex64::new(0.0, 0.0);
    let mut converged = false;
    let mut v = Vec::new();
    for _ in 0..MAX_ITER {
        let emf = [balanced(e_grid), Vector3::zeros()];
        v = sys.solve(false, emf, &[(dg_block, balanced(i_dg))])?;
        let v_dg = v[dg_block][0];
        if v_dg.norm() == 0.0 {
            return Err(Error::Singular("zero voltage at the DG bus".into()));
        }
        let new_i = (s_dg / v_dg).conj();
        let mut change = (new_i - i_dg).norm() / (1.0 + i_dg.norm());
        i_dg = new_i;
        if network.grid.regulate_substation_voltage {
            let ratio = v_nom / v[root][0].norm();
            change = change.max((ratio - 1.0).abs());
            e_grid *= ratio;
        }
        if change < CONV_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Singular("steady-state operating point did not converge".into()));
    }

    let z_dg = {
        let b = network.dg_branch();
        Complex64::new(b.r, sys.omega * b.l)
    };
    let e_dg = v[dg_block][0] + z_dg * i_dg;
    let emf = [balanced(e_grid), balanced(e_dg)];
    let v = sys.solve(true, emf, &[])?;

    let branch_currents: Vec<[Complex64; 3]> = circuit
        .rl
        .iter()
        .zip(&sys.admittances)
        .map(|(e, y)| {
            let vab = terminal_voltage(e.a, &v, &emf) - terminal_voltage(e.b, &v, &emf);
            let i = y * vab;
            [i[0], i[1], i[2]]
        })
        .collect();
    let section_currents = (0..network.lines.len())
        .map(|s| {
            circuit
                .first_branch_of_section(s)
                .map_or([Complex64::new(0.0, 0.0); 3], |k| branch_currents[k])
        })
        .collect();
    let block_voltages: Vec<[Complex64; 3]> = v.iter().map(|x| [x[0], x[1], x[2]]).collect();
    let bus_voltages = circuit
        .bus_block
        .iter()
        .map(|&(bus, b)| (bus, block_voltages[b]))
        .collect();
    let _ = (GRID_SOURCE, DG_SOURCE);
    Ok(SteadyState {
        grid_emf: e_grid,
        dg_emf: e_dg,
        block_voltages,
        branch_currents,
        bus_voltages,
        section_currents,
    })
}

/// Pre-fault phasor solution of the feeder at the given DG penetration,
/// using the default pi-section density.
pub fn steady_state_phasors(network: &NetworkModel, dg_penetration: f64) -> Result<SteadyState> {
    let scenario = FaultScenario::control(dg_penetration);
    let circuit = Circuit::build(network, Some(&scenario), super::DEFAULT_SECTIONS_PER_KM)?;
    steady_state_for_circuit(network, &circuit, dg_penetration, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_load_drops_below_emf() {
        let net = NetworkModel::bundled();
        let ss = steady_state_phasors(&net, 0.0).unwrap();
        let v1 = ss.bus_voltage(1).unwrap()[0].norm();
        assert!(v1 < ss.grid_emf.norm());
        // regulated to nominal
        let v_nom = 20e3 / 3f64.sqrt();
        assert!((v1 - v_nom).abs() / v_nom < 1e-10);
        // DG at zero dispatch carries no current
        let k = Circuit::build(&net, None, 2.0).unwrap().source_branch(DG_SOURCE);
        assert!(ss.branch_currents[k][0].norm() < 1e-6);
    }

    #[test]
    fn balanced_phases() {
        let net = NetworkModel::bundled();
        let ss = steady_state_phasors(&net, 0.1).unwrap();
        let v = ss.bus_voltage(11).unwrap();
        let rot = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI / 3.0);
        assert!((v[1] - v[0] * rot).norm() / v[0].norm() < 1e-10);
        assert!((v[0] + v[1] + v[2]).norm() / v[0].norm() < 1e-10);
    }

    #[test]
    fn dg_dispatch_matches_target() {
        let net = NetworkModel::bundled();
        let ss = steady_state_phasors(&net, 0.5).unwrap();
        let circuit = Circuit::build(&net, None, 2.0).unwrap();
        let k = circuit.source_branch(DG_SOURCE);
        let i = ss.branch_currents[k][0];
        let v8 = ss.bus_voltage(8).unwrap()[0];
        let s = v8 * i.conj() * 3.0;
        assert!((s.re - 0.5 * 37.2e6).abs() < 1.0, "P = {}", s.re);
        assert!(s.im.abs() < 1.0);
    }
}
