use serde::{Deserialize, Serialize};

use super::NetworkModel;
use crate::error::{Error, Result};

/// Slack used when comparing distances built from km sums, metres.
const DIST_EPS_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultLocation {
    pub path_id: u8,
    /// Metres from the substation along the path's route.
    pub distance_m: f64,
}

/// Ordered sections of one path with their distance offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGeometry {
    pub path_id: u8,
    /// Indices into `NetworkModel::lines`, in order away from the substation.
    pub sections: Vec<usize>,
    /// Distance from the substation to the start of each section, km.
    pub offsets_km: Vec<f64>,
    /// Distance from the substation to the path's first bus, km.
    pub start_km: f64,
    /// Distance from the substation to the path's terminus, km.
    pub end_km: f64,
}

impl PathGeometry {
    /// Length of line owned by this path (excluding any shared trunk).
    pub fn own_length_km(&self) -> f64 {
        self.end_km - self.start_km
    }
}

/// A fault location mapped onto the section that carries it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedLocation {
    pub section: usize,
    /// Distance from the section's `from_bus`, km.
    pub offset_km: f64,
}

impl NetworkModel {
    /// Distance of every bus from the substation, km, indexed like `buses`.
    pub fn bus_distances_km(&self) -> Vec<f64> {
        let mut dist = vec![f64::NAN; self.buses.len()];
        let root = self.bus_index(self.substation_bus).expect("validated root");
        dist[root] = 0.0;
        // lines are not necessarily ordered; relax until fixed (tree, so <= n passes)
        for _ in 0..self.buses.len() {
            let mut changed = false;
            for l in &self.lines {
                let (f, t) = (self.bus_index(l.from_bus), self.bus_index(l.to_bus));
                if let (Some(f), Some(t)) = (f, t) {
                    if dist[f].is_finite() && !dist[t].is_finite() {
                        dist[t] = dist[f] + l.length_km;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        dist
    }

    /// Path geometries sorted by path id.
    pub fn paths(&self) -> Vec<PathGeometry> {
        let dist = self.bus_distances_km();
        let mut ids: Vec<u8> = self.lines.iter().map(|l| l.path_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter()
            .map(|pid| {
                let mut sections: Vec<usize> = (0..self.lines.len())
                    .filter(|&i| self.lines[i].path_id == pid)
                    .collect();
                let start_of = |i: usize| {
                    self.bus_index(self.lines[i].from_bus)
                        .map_or(f64::NAN, |b| dist[b])
                };
                sections.sort_by(|&a, &b| start_of(a).total_cmp(&start_of(b)));
                let offsets_km: Vec<f64> = sections.iter().map(|&i| start_of(i)).collect();
                let start_km = offsets_km.first().copied().unwrap_or(0.0);
                let end_km = sections
                    .last()
                    .map_or(start_km, |&i| start_of(i) + self.lines[i].length_km);
                PathGeometry {
                    path_id: pid,
                    sections,
                    offsets_km,
                    start_km,
                    end_km,
                }
            })
            .collect()
    }

    pub fn path(&self, path_id: u8) -> Option<PathGeometry> {
        self.paths().into_iter().find(|p| p.path_id == path_id)
    }

    /// Longest route from the substation over all paths, metres.
    pub fn max_route_m(&self) -> f64 {
        self.paths()
            .iter()
            .map(|p| p.end_km * 1000.0)
            .fold(0.0, f64::max)
    }

    /// Maps a (path, distance) pair onto a section.
    pub fn resolve_location(&self, loc: FaultLocation) -> Result<ResolvedLocation> {
        let path = self
            .path(loc.path_id)
            .ok_or_else(|| Error::InvalidLocation(format!("no path {}", loc.path_id)))?;
        let d_km = loc.distance_m / 1000.0;
        let eps = DIST_EPS_M / 1000.0;
        let is_trunk = path.start_km <= eps;
        let lower_ok = if is_trunk {
            d_km >= -eps
        } else {
            d_km > path.start_km + eps
        };
        if !lower_ok || d_km > path.end_km + eps {
            return Err(Error::InvalidLocation(format!(
                "distance {} m is outside path {} ({} .. {} m)",
                loc.distance_m,
                loc.path_id,
                path.start_km * 1000.0,
                path.end_km * 1000.0
            )));
        }
        for (k, &sec) in path.sections.iter().enumerate() {
            let start = path.offsets_km[k];
            let len = self.lines[sec].length_km;
            if d_km <= start + len + eps {
                return Ok(ResolvedLocation {
                    section: sec,
                    offset_km: (d_km - start).clamp(0.0, len),
                });
            }
        }
        Err(Error::InvalidLocation(format!(
            "distance {} m not on path {}",
            loc.distance_m, loc.path_id
        )))
    }
}

/// Places a fault location every `spacing_m` metres of line.
///
/// Paths are walked in id order (trunk first, then each lateral over its own
/// length only), as one continuous line-length axis; a location is emitted
/// whenever the accumulated length reaches a multiple of the spacing and is
/// labelled with the path that owns that stretch of line. The output is
/// sorted by (path, distance). Returns an empty list for a non-positive
/// spacing or one longer than the total line length.
pub fn enumerate_fault_locations(network: &NetworkModel, spacing_m: f64) -> Vec<FaultLocation> {
    let mut out = Vec::new();
    if !(spacing_m > 0.0) {
        return out;
    }
    let mut walked = 0.0;
    let mut next = spacing_m;
    for path in network.paths() {
        let own_m = path.own_length_km() * 1000.0;
        let end = walked + own_m;
        while next <= end + DIST_EPS_M {
            let along = (next - walked).min(own_m);
            out.push(FaultLocation {
                path_id: path.path_id,
                distance_m: round_mm(path.start_km * 1000.0 + along),
            });
            next += spacing_m;
        }
        walked = end;
    }
    out
}

fn round_mm(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::NetworkModel;

    #[test]
    fn bundled_path_geometry() {
        let net = NetworkModel::bundled();
        let paths = net.paths();
        assert_eq!(paths.len(), 6);
        let ends: Vec<f64> = paths.iter().map(|p| p.end_km).collect();
        assert_eq!(ends, vec![10.0, 4.0, 3.0, 4.5, 7.0, 11.0]);
        let own: f64 = paths.iter().map(|p| p.own_length_km()).sum();
        assert!((own - 19.0).abs() < 1e-12);
        assert_eq!(net.max_route_m(), 11_000.0);
        assert_eq!(paths[0].sections.len(), 5);
        assert_eq!(paths[0].offsets_km, vec![0.0, 2.0, 3.5, 5.0, 8.0]);
    }

    /// Brute-force oracle: step along each section's own length in 1 mm
    /// increments and count crossings of a global spacing grid.
    fn brute_force_count(net: &NetworkModel, spacing_m: f64) -> usize {
        let step_mm = 1u64;
        let spacing_mm = (spacing_m * 1000.0).round() as u64;
        let mut walked_mm = 0u64;
        let mut count = 0;
        for path in net.paths() {
            for &sec in &path.sections {
                let len_mm = (net.lines[sec].length_km * 1e6).round() as u64;
                let mut x = 0;
                while x < len_mm {
                    x += step_mm;
                    walked_mm += step_mm;
                    if walked_mm % spacing_mm == 0 {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn location_counts() {
        let net = NetworkModel::bundled();
        assert_eq!(enumerate_fault_locations(&net, 500.0).len(), 38);
        assert_eq!(enumerate_fault_locations(&net, 1000.0).len(), 19);
        assert_eq!(brute_force_count(&net, 1000.0), 19);
        assert_eq!(brute_force_count(&net, 500.0), 38);
        let one = enumerate_fault_locations(&net, 19_000.0);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].path_id, 6);
        assert_eq!(one[0].distance_m, 11_000.0);
        assert!(enumerate_fault_locations(&net, 20_000.0).is_empty());
        assert!(enumerate_fault_locations(&net, 0.0).is_empty());
    }

    #[test]
    fn per_path_location_counts() {
        let net = NetworkModel::bundled();
        let locs = enumerate_fault_locations(&net, 500.0);
        let per_path: Vec<usize> = (1..=6)
            .map(|p| locs.iter().filter(|l| l.path_id == p).count())
            .collect();
        assert_eq!(per_path, vec![20, 4, 2, 2, 4, 6]);
        let h1 = locs.iter().filter(|l| l.distance_m <= 4500.0).count();
        assert_eq!(h1, 17);
        for l in &locs {
            net.resolve_location(*l).unwrap();
        }
    }

    #[test]
    fn resolve_rejects_out_of_range() {
        let net = NetworkModel::bundled();
        let bad = |p, d| {
            net.resolve_location(FaultLocation {
                path_id: p,
                distance_m: d,
            })
            .is_err()
        };
        assert!(bad(6, 12_000.0));
        assert!(bad(6, 8_000.0)); // bus 9 belongs to the trunk
        assert!(bad(7, 100.0));
        assert!(!bad(1, 0.0));
        let r = net
            .resolve_location(FaultLocation {
                path_id: 1,
                distance_m: 2500.0,
            })
            .unwrap();
        assert_eq!(net.lines[r.section].from_bus, 2);
        assert!((r.offset_km - 0.5).abs() < 1e-12);
    }
}
