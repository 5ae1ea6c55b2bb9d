//! Discretised three-phase circuit of the feeder.
//!
//! Every three-phase node is a block; line sections become cascades of
//! pi-sections, loads hang off their bus through the distribution
//! transformer, and the grid and DG are ideal EMFs behind series R-L.

use nalgebra::Matrix3;

use crate::error::Result;
use crate::netmodel::{BusId, FaultScenario, NetworkModel, SeriesRl};

const SPLIT_EPS_KM: f64 = 1e-9;

/// Branch terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Block(usize),
    /// Ideal voltage source: 0 = grid, 1 = DG.
    Source(usize),
    Ground,
}

pub const GRID_SOURCE: usize = 0;
pub const DG_SOURCE: usize = 1;

/// Series R-L branch with (possibly) coupled phases; current flows a -> b.
#[derive(Debug, Clone)]
pub struct RlElement {
    pub a: Terminal,
    pub b: Terminal,
    pub r: Matrix3<f64>,
    pub l: Matrix3<f64>,
    /// Index of the line section this branch belongs to, if any.
    pub section: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Circuit {
    /// Parent block of each block (BFS order, root = substation).
    pub parent: Vec<Option<usize>>,
    pub rl: Vec<RlElement>,
    /// Maxwell capacitance matrix per block, to ground.
    pub shunt_c: Vec<Matrix3<f64>>,
    /// Shunt conductance per block (loads), to ground.
    pub shunt_g: Vec<Matrix3<f64>>,
    pub bus_block: Vec<(BusId, usize)>,
    /// Block carrying the fault, when the circuit was built for a fault.
    pub fault_block: Option<usize>,
    pub frequency_hz: f64,
}

impl Circuit {
    pub fn blocks(&self) -> usize {
        self.parent.len()
    }

    pub fn block_of_bus(&self, bus: BusId) -> Option<usize> {
        self.bus_block.iter().find(|(b, _)| *b == bus).map(|&(_, k)| k)
    }

    fn add_block(&mut self, parent: Option<usize>) -> usize {
        self.parent.push(parent);
        self.shunt_c.push(Matrix3::zeros());
        self.shunt_g.push(Matrix3::zeros());
        self.parent.len() - 1
    }

    /// Builds the circuit. With a faulted scenario the fault point is
    /// guaranteed to be a block, splitting a pi-section when the location
    /// does not fall on the regular grid.
    pub fn build(
        network: &NetworkModel,
        scenario: Option<&FaultScenario>,
        sections_per_km: f64,
    ) -> Result<Circuit> {
        let fault_at = match scenario {
            Some(s) if !s.is_control() => Some(network.resolve_location(s.location())?),
            _ => None,
        };
        let load_scale = scenario.map_or(1.0, |s| s.load_scale);
        let seq = network.sequence_params();

        let mut c = Circuit {
            parent: Vec::new(),
            rl: Vec::new(),
            shunt_c: Vec::new(),
            shunt_g: Vec::new(),
            bus_block: Vec::new(),
            fault_block: None,
            frequency_hz: network.frequency_hz,
        };
        let root = c.add_block(None);
        c.bus_block.push((network.substation_bus, root));

        let dist = network.bus_distances_km();
        let mut order: Vec<usize> = (0..network.lines.len()).collect();
        order.sort_by(|&a, &b| {
            let da = dist[network.bus_index(network.lines[a].from_bus).unwrap()];
            let db = dist[network.bus_index(network.lines[b].from_bus).unwrap()];
            da.total_cmp(&db).then(a.cmp(&b))
        });

        for sec in order {
            let line = &network.lines[sec];
            let from = c
                .block_of_bus(line.from_bus)
                .expect("sections are visited in tree order");
            let n = ((line.length_km * sections_per_km) - SPLIT_EPS_KM).ceil().max(1.0) as usize;
            let mut cuts: Vec<f64> = (0..=n).map(|k| line.length_km * k as f64 / n as f64).collect();
            let fault_here = fault_at.filter(|f| f.section == sec);
            if let Some(f) = fault_here {
                if !cuts.iter().any(|x| (x - f.offset_km).abs() < SPLIT_EPS_KM) {
                    cuts.push(f.offset_km);
                    cuts.sort_by(f64::total_cmp);
                }
            }
            let mut cut_blocks = vec![from];
            for w in cuts.windows(2) {
                let km = w[1] - w[0];
                let prev = *cut_blocks.last().unwrap();
                let next = c.add_block(Some(prev));
                let pd = seq.phase_matrices(km);
                c.rl.push(RlElement {
                    a: Terminal::Block(prev),
                    b: Terminal::Block(next),
                    r: coupled(pd.r_self, pd.r_mut),
                    l: coupled(pd.l_self, pd.l_mut),
                    section: Some(sec),
                });
                let half_c = coupled(pd.c_self, pd.c_mut) * 0.5;
                c.shunt_c[prev] += half_c;
                c.shunt_c[next] += half_c;
                cut_blocks.push(next);
            }
            c.bus_block.push((line.to_bus, *cut_blocks.last().unwrap()));
            if let Some(f) = fault_here {
                let k = cuts
                    .iter()
                    .position(|x| (x - f.offset_km).abs() < SPLIT_EPS_KM)
                    .expect("fault cut was inserted");
                c.fault_block = Some(cut_blocks[k]);
            }
        }
        if let Some(s) = scenario.filter(|s| !s.is_control()) {
            if s.distance.abs() < 1e-6 && c.fault_block.is_none() {
                c.fault_block = Some(root);
            }
        }

        for load in &network.loads {
            let bus = c.block_of_bus(load.bus).expect("validated load bus");
            let lb = network.load_branch(load, load_scale);
            let node = c.add_block(Some(bus));
            c.rl.push(RlElement {
                a: Terminal::Block(bus),
                b: Terminal::Block(node),
                r: diag(lb.series.r),
                l: diag(lb.series.l),
                section: None,
            });
            c.shunt_g[node] += diag(1.0 / lb.shunt_r);
            if let Some(l) = lb.shunt_l {
                c.rl.push(RlElement {
                    a: Terminal::Block(node),
                    b: Terminal::Ground,
                    r: Matrix3::zeros(),
                    l: diag(l),
                    section: None,
                });
            }
        }

        let grid = network.grid_branch();
        c.push_source(GRID_SOURCE, root, grid);
        let dg_bus = c.block_of_bus(network.dg.bus).expect("validated DG bus");
        c.push_source(DG_SOURCE, dg_bus, network.dg_branch());
        Ok(c)
    }

    fn push_source(&mut self, source: usize, block: usize, z: SeriesRl) {
        self.rl.push(RlElement {
            a: Terminal::Source(source),
            b: Terminal::Block(block),
            r: diag(z.r),
            l: diag(z.l),
            section: None,
        });
    }

    /// Index of the source branch for `source`.
    pub fn source_branch(&self, source: usize) -> usize {
        self.rl
            .iter()
            .position(|e| e.a == Terminal::Source(source))
            .expect("circuit has both sources")
    }

    /// Index of the first series branch of a line section.
    pub fn first_branch_of_section(&self, section: usize) -> Option<usize> {
        self.rl.iter().position(|e| e.section == Some(section))
    }
}

pub fn diag(x: f64) -> Matrix3<f64> {
    Matrix3::identity() * x
}

pub fn coupled(self_: f64, mutual: f64) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| if i == j { self_ } else { mutual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::PhaseSet;

    #[test]
    fn block_count_at_500m() {
        let net = NetworkModel::bundled();
        let c = Circuit::build(&net, None, 2.0).unwrap();
        // 1 root + 38 segment blocks + 6 load blocks
        assert_eq!(c.blocks(), 45);
        for (k, p) in c.parent.iter().enumerate() {
            if let Some(p) = p {
                assert!(*p < k);
            }
        }
        assert_eq!(c.block_of_bus(1), Some(0));
        assert!(c.block_of_bus(11).is_some());
    }

    #[test]
    fn grid_fault_reuses_existing_block() {
        let net = NetworkModel::bundled();
        let mut s = FaultScenario::control(0.1);
        s.faulted_phases = PhaseSet::A;
        s.distance = 2500.0;
        let c = Circuit::build(&net, Some(&s), 2.0).unwrap();
        assert_eq!(c.blocks(), 45);
        let fb = c.fault_block.unwrap();
        // 2.5 km along path 1 is one segment past bus 2
        assert_eq!(c.parent[fb], c.block_of_bus(2));
    }

    #[test]
    fn off_grid_fault_splits_a_segment() {
        let net = NetworkModel::bundled();
        let mut s = FaultScenario::control(0.1);
        s.faulted_phases = PhaseSet::A;
        s.path_id = 6;
        s.distance = 8_250.0;
        let c = Circuit::build(&net, Some(&s), 2.0).unwrap();
        assert_eq!(c.blocks(), 46);
        let fb = c.fault_block.unwrap();
        assert_eq!(c.parent[fb], c.block_of_bus(9));
    }

    #[test]
    fn substation_fault() {
        let net = NetworkModel::bundled();
        let mut s = FaultScenario::control(0.1);
        s.faulted_phases = PhaseSet::A;
        s.distance = 0.0;
        let c = Circuit::build(&net, Some(&s), 2.0).unwrap();
        assert_eq!(c.fault_block, Some(0));
    }
}
