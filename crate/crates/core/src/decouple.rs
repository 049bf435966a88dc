//! Output-feedback disturbance decoupling: working set, sensor set, friend
//! gain, closed loop and verification.
//!
//! With actuators `B` from the placement step, the working set `W` is the part
//! of the invariant core lying on disturbance-to-target paths. Sensors are the
//! in-boundary of `W`, and the gain `G[i, j] = A[b_i, c_j]` cancels every
//! sensor-to-actuator edge in `A − B G C`.

use log::warn;
use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::{InfluenceGraph, NodeSet};
use crate::oscillator::DescriptorSystem;
use crate::powergrid::{GridCase, GridModel};
use crate::sim::{spectrum, Feedback, Spectrum};

/// Threshold on the scale-free transfer residual `‖T (sE − A)⁻¹ D‖ · ‖A‖`.
pub const NUMERIC_TOL: f64 = 1e-9;

const SAMPLE_SEED: u64 = 0x5eed_0dd9;

/// `W = Z° ∩ (P ∪ D)` with `P` the union of disturbance-to-target paths.
pub fn build_working_set(
    g: &InfluenceGraph,
    z_core: &NodeSet,
    d: &NodeSet,
    t: &NodeSet,
) -> Result<NodeSet> {
    if !d.is_subset(z_core) {
        return Err(Error::Precondition(format!(
            "disturbances {d} are not inside the core {z_core}"
        )));
    }
    let overlap = z_core.intersection(t);
    if !overlap.is_empty() {
        return Err(Error::Overlap(overlap.to_vec()));
    }
    let paths = g.paths_union(d, t)?;
    let w = z_core.intersection(&paths.union(d));
    let bw = g.out_boundary(&w)?;
    let bz = g.out_boundary(z_core)?;
    if bw != bz {
        warn!("out-boundary of W {bw} differs from out-boundary of the core {bz}");
    }
    Ok(w)
}

pub fn sensor_set(g: &InfluenceGraph, w: &NodeSet) -> Result<NodeSet> {
    g.in_boundary(w)
}

/// `G = Bᵀ A Cᵀ`, rows in ascending actuator order, columns in ascending sensor order.
pub fn synthesize_friend(sys: &DescriptorSystem, b: &NodeSet, c: &NodeSet) -> Result<DMatrix<f64>> {
    let overlap = b.intersection(c);
    if !overlap.is_empty() {
        return Err(Error::Overlap(overlap.to_vec()));
    }
    let rows = sys.states_of(b)?;
    let cols = sys.states_of(c)?;
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        sys.a[(rows[i], cols[j])]
    }))
}

/// `A − B G C`.
pub fn closed_loop(
    sys: &DescriptorSystem,
    b: &NodeSet,
    c: &NodeSet,
    gain: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    Feedback::new(b.clone(), c.clone(), gain.clone())?.closed_loop(sys)
}

/// Whether the `(B, C)` block of `a_cl` is zero and every other entry equals `A`.
pub fn zero_pattern_check(
    sys: &DescriptorSystem,
    a_cl: &DMatrix<f64>,
    b: &NodeSet,
    c: &NodeSet,
) -> Result<bool> {
    let rows = sys.states_of(b)?;
    let cols = sys.states_of(c)?;
    if a_cl.shape() != sys.a.shape() {
        return Ok(false);
    }
    for i in 0..a_cl.nrows() {
        for j in 0..a_cl.ncols() {
            let in_block = rows.contains(&i) && cols.contains(&j);
            let ok = if in_block {
                a_cl[(i, j)] == 0.0
            } else {
                a_cl[(i, j)].to_bits() == sys.a[(i, j)].to_bits()
            };
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Default frequency-response samples: 20 points `i 2π f` with `f`
/// log-spaced over `[0.01, 100]` Hz, plus 5 seeded random points in the
/// right half-plane.
pub fn default_sample_points() -> Vec<Complex<f64>> {
    let mut points: Vec<Complex<f64>> = (0..20)
        .map(|k| {
            let f = 10f64.powf(-2.0 + 4.0 * k as f64 / 19.0);
            Complex::new(0.0, 2.0 * std::f64::consts::PI * f)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    for _ in 0..5 {
        points.push(Complex::new(
            rng.random_range(0.1..2.0),
            rng.random_range(-50.0..50.0),
        ));
    }
    points
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericCheck {
    /// Max `|entry|` of `T (sE − A_cl)⁻¹ D` over the samples.
    pub max_abs: f64,
    /// `max_abs · ‖A‖_max`.
    pub relative: f64,
    pub pass: bool,
}

/// Largest entry of the disturbance-to-target transfer over the sample points.
pub fn verify_numeric(
    sys: &DescriptorSystem,
    a_cl: &DMatrix<f64>,
    d: &NodeSet,
    t: &NodeSet,
    points: &[Complex<f64>],
) -> Result<NumericCheck> {
    let big_n = sys.n_states();
    if a_cl.shape() != (big_n, big_n) {
        return Err(Error::Dimension {
            expected: format!("{big_n}x{big_n}"),
            got: format!("{}x{}", a_cl.nrows(), a_cl.ncols()),
        });
    }
    let dcols = sys.states_of(d)?;
    let trows = sys.states_of(t)?;
    let mut max_abs: f64 = 0.0;
    if !dcols.is_empty() && !trows.is_empty() {
        let mut rhs = DMatrix::<Complex<f64>>::zeros(big_n, dcols.len());
        for (k, &s) in dcols.iter().enumerate() {
            rhs[(s, k)] = Complex::new(1.0, 0.0);
        }
        for &s in points {
            let mut m = a_cl.map(|x| Complex::new(-x, 0.0));
            for i in 0..big_n {
                m[(i, i)] += s * sys.e[i];
            }
            let x = m
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Singular(format!("resolvent at s = {s}")))?;
            for &r in &trows {
                for k in 0..dcols.len() {
                    max_abs = max_abs.max(x[(r, k)].norm());
                }
            }
        }
    }
    let relative = max_abs * sys.a.amax();
    Ok(NumericCheck {
        max_abs,
        relative,
        pass: relative <= NUMERIC_TOL,
    })
}

/// Nodes not reachable from `d` in the graph of `a_cl`.
pub fn decoupled_nodes(
    sys: &DescriptorSystem,
    a_cl: &DMatrix<f64>,
    d: &NodeSet,
) -> Result<NodeSet> {
    let g = graph_of(sys, a_cl);
    Ok(NodeSet::full(sys.n_states()).difference(&g.forward_reach(d)?))
}

/// Influence graph of an arbitrary state matrix in the node labels of `sys`.
pub fn graph_of(sys: &DescriptorSystem, a: &DMatrix<f64>) -> InfluenceGraph {
    let mut copy = sys.clone();
    copy.a = a.clone();
    copy.extended_graph()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    /// Disturbances cannot reach targets once sensor-to-actuator edges are removed.
    pub structural: bool,
    /// `(B, C)` block of the closed loop is zero, everything else untouched.
    pub zero_pattern: bool,
    pub numeric: NumericCheck,
    /// `∂₊(W) = ∂₊(Z°)`.
    pub boundary_consistent: bool,
    /// Sensors that are also disturbance nodes.
    pub sensor_disturbance_overlap: NodeSet,
    pub closed_loop_spectrum: SpectrumSummary,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.structural
            && self.zero_pattern
            && self.numeric.pass
            && self.closed_loop_spectrum.stable
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub max_real: f64,
    pub stable: bool,
    pub near_zero: usize,
}

impl From<&Spectrum> for SpectrumSummary {
    fn from(s: &Spectrum) -> Self {
        Self {
            max_real: s.max_real,
            stable: s.stable,
            near_zero: s.near_zero,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingSolution {
    pub disturbance: NodeSet,
    pub target: NodeSet,
    pub actuators: NodeSet,
    pub sensors: NodeSet,
    pub core: NodeSet,
    pub working: NodeSet,
    /// Row-major `m × p` friend gain.
    pub gain: Vec<Vec<f64>>,
    pub verification: Verification,
}

impl DecouplingSolution {
    pub fn gain_matrix(&self) -> Result<DMatrix<f64>> {
        let (m, p) = (self.actuators.len(), self.sensors.len());
        if self.gain.len() != m || self.gain.iter().any(|row| row.len() != p) {
            return Err(Error::Dimension {
                expected: format!("{m}x{p} gain"),
                got: format!("{} rows", self.gain.len()),
            });
        }
        Ok(DMatrix::from_fn(m, p, |i, j| self.gain[i][j]))
    }

    pub fn feedback(&self) -> Result<Feedback> {
        Feedback::new(
            self.actuators.clone(),
            self.sensors.clone(),
            self.gain_matrix()?,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Re-runs every check of a candidate solution against a system.
pub fn verify(
    sys: &DescriptorSystem,
    d: &NodeSet,
    t: &NodeSet,
    b: &NodeSet,
    c: &NodeSet,
    gain: &DMatrix<f64>,
) -> Result<(Verification, DMatrix<f64>)> {
    let g = sys.extended_graph();
    let a_cl = closed_loop(sys, b, c, gain)?;
    let structural = g.ddpof_structural_check(d, t, b, c)?;
    let zero_pattern = zero_pattern_check(sys, &a_cl, b, c)?;
    let numeric = verify_numeric(sys, &a_cl, d, t, &default_sample_points())?;
    let spec = spectrum(sys, &a_cl)?;
    Ok((
        Verification {
            structural,
            zero_pattern,
            numeric,
            boundary_consistent: true,
            sensor_disturbance_overlap: c.intersection(d),
            closed_loop_spectrum: SpectrumSummary::from(&spec),
        },
        a_cl,
    ))
}

/// End-to-end synthesis on an already assembled descriptor system.
pub fn solve_ddp_system(
    sys: &DescriptorSystem,
    d: &NodeSet,
    t: &NodeSet,
) -> Result<DecouplingSolution> {
    let overlap = d.intersection(t);
    if !overlap.is_empty() {
        return Err(Error::Overlap(overlap.to_vec()));
    }
    let g = sys.extended_graph();
    let inadmissible = d.difference(&g.admissible());
    if !inadmissible.is_empty() {
        return Err(Error::Precondition(format!(
            "disturbance nodes {inadmissible} are not admissible inputs"
        )));
    }
    let placement = g.min_actuator_placement(d, t)?;
    let working = build_working_set(&g, &placement.core, d, t)?;
    // with no actuators there is nothing to feed back
    let sensors = if placement.actuators.is_empty() {
        NodeSet::new()
    } else {
        sensor_set(&g, &working)?
    };
    let boundary_consistent = g.out_boundary(&working)? == placement.actuators;
    let gain = synthesize_friend(sys, &placement.actuators, &sensors)?;
    let (mut verification, _) = verify(sys, d, t, &placement.actuators, &sensors, &gain)?;
    verification.boundary_consistent = boundary_consistent;
    if !verification.sensor_disturbance_overlap.is_empty() {
        warn!(
            "sensors {} are also disturbance nodes",
            verification.sensor_disturbance_overlap
        );
    }
    if !verification.passed() {
        warn!("decoupling verification failed: {verification:?}");
    }
    Ok(DecouplingSolution {
        disturbance: d.clone(),
        target: t.clone(),
        actuators: placement.actuators,
        sensors,
        core: placement.core,
        working,
        gain: gain
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        verification,
    })
}

/// End-to-end synthesis on a grid case.
pub fn solve_ddp(
    case: &GridCase,
    d: &NodeSet,
    t: &NodeSet,
) -> Result<(GridModel, DecouplingSolution)> {
    let model = GridModel::new(case.clone())?;
    let solution = solve_ddp_system(&model.system, d, t)?;
    Ok((model, solution))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    /// Bidirectional path 1..=n with diagonal damping.
    fn path_system(n: usize) -> DescriptorSystem {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = -10.0;
            if i + 1 < n {
                a[(i, i + 1)] = 1.0 + i as f64;
                a[(i + 1, i)] = 0.5 + i as f64;
            }
        }
        DescriptorSystem::from_parts(DVector::from_element(n, 1.0), a, DMatrix::identity(n, n))
            .unwrap()
    }

    #[test]
    fn working_set_examples() {
        let g = path_system(5).extended_graph();
        let w = build_working_set(
            &g,
            &NodeSet::from([1, 2, 3]),
            &NodeSet::from([1]),
            &NodeSet::from([5]),
        )
        .unwrap();
        assert_eq!(w, NodeSet::from([1, 2, 3]));

        let mut g6 = InfluenceGraph::new(6);
        for (t, h, x) in g.edges() {
            g6.add_edge(t, h, x).unwrap();
        }
        g6.add_edge(3, 6, 1.0).unwrap();
        let w = build_working_set(
            &g6,
            &NodeSet::from([1, 2, 3, 6]),
            &NodeSet::from([1]),
            &NodeSet::from([5]),
        )
        .unwrap();
        assert_eq!(w, NodeSet::from([1, 2, 3]));

        let mut lone = InfluenceGraph::new(3);
        lone.add_edge(2, 3, 1.0).unwrap();
        let w = build_working_set(
            &lone,
            &NodeSet::from([1]),
            &NodeSet::from([1]),
            &NodeSet::from([3]),
        )
        .unwrap();
        assert_eq!(w, NodeSet::from([1]));

        assert!(build_working_set(
            &g,
            &NodeSet::from([2]),
            &NodeSet::from([1]),
            &NodeSet::from([5])
        )
        .is_err());
    }

    #[test]
    fn sensor_examples() {
        let g = path_system(5).extended_graph();
        let w = NodeSet::from([1, 2, 3]);
        let c = sensor_set(&g, &w).unwrap();
        assert_eq!(c, NodeSet::from([3]));
        let b = g.out_boundary(&w).unwrap();
        assert!(g.is_controlled_invariant(&w, &b).unwrap());
        assert!(g.is_conditioned_invariant(&w, &c).unwrap());
        assert!(sensor_set(&g, &NodeSet::full(5)).unwrap().is_empty());
    }

    #[test]
    fn friend_by_direct_indexing() {
        let mut a = -DMatrix::identity(3, 3);
        a[(2, 0)] = 7.0;
        a[(1, 0)] = 2.0;
        let sys = DescriptorSystem::from_parts(
            DVector::from_element(3, 1.0),
            a.clone(),
            DMatrix::identity(3, 3),
        )
        .unwrap();
        let (b, c) = (NodeSet::from([3]), NodeSet::from([1]));
        let gain = synthesize_friend(&sys, &b, &c).unwrap();
        assert_eq!(gain, DMatrix::from_element(1, 1, 7.0));
        let a_cl = closed_loop(&sys, &b, &c, &gain).unwrap();
        let mut expected = a.clone();
        expected[(2, 0)] = 0.0;
        assert_eq!(a_cl, expected);
        assert!(zero_pattern_check(&sys, &a_cl, &b, &c).unwrap());

        let zero = DMatrix::zeros(1, 1);
        assert_eq!(closed_loop(&sys, &b, &c, &zero).unwrap(), a);
        assert!(!zero_pattern_check(&sys, &a, &b, &c).unwrap());

        let none = synthesize_friend(&sys, &NodeSet::from([2]), &NodeSet::from([3])).unwrap();
        assert_eq!(none, DMatrix::zeros(1, 1));
        assert!(synthesize_friend(&sys, &b, &b).is_err());
    }

    #[test]
    fn numeric_residual_on_path() {
        let sys = path_system(5);
        let (d, t) = (NodeSet::from([1]), NodeSet::from([5]));
        let points = default_sample_points();
        assert_eq!(points.len(), 25);
        let open = verify_numeric(&sys, &sys.a, &d, &t, &points).unwrap();
        assert!(!open.pass);
        assert!(open.relative > 1e-6);

        let sol = solve_ddp_system(&sys, &d, &t).unwrap();
        assert_eq!(sol.actuators, NodeSet::from([4]));
        assert_eq!(sol.sensors, NodeSet::from([3]));
        assert!(sol.verification.passed(), "{:?}", sol.verification);
        assert!(sol.verification.boundary_consistent);
    }

    #[test]
    fn unreachable_targets_pass_trivially() {
        let mut a = -DMatrix::identity(4, 4);
        a[(1, 0)] = 1.0;
        a[(3, 2)] = 1.0;
        let sys =
            DescriptorSystem::from_parts(DVector::from_element(4, 1.0), a, DMatrix::identity(4, 4))
                .unwrap();
        let sol = solve_ddp_system(&sys, &NodeSet::from([1]), &NodeSet::from([4])).unwrap();
        assert!(sol.actuators.is_empty());
        assert!(sol.sensors.is_empty());
        assert!(sol.gain.is_empty());
        assert!(sol.verification.passed());
        assert_eq!(sol.verification.numeric.max_abs, 0.0);
    }

    #[test]
    fn direct_coupling_is_infeasible() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let sys =
            DescriptorSystem::from_parts(DVector::from_element(2, 1.0), a, DMatrix::identity(2, 2))
                .unwrap();
        assert!(matches!(
            solve_ddp_system(&sys, &NodeSet::from([1]), &NodeSet::from([2])),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn solution_json_round_trip() {
        let sol =
            solve_ddp_system(&path_system(5), &NodeSet::from([1]), &NodeSet::from([5])).unwrap();
        let back = DecouplingSolution::from_json(&sol.to_json().unwrap()).unwrap();
        assert_eq!(back, sol);
        assert_eq!(back.gain_matrix().unwrap()[(0, 0)], 2.5);
    }
}
