//! Grid case files and their conversion to oscillator networks.
//!
//! Powers are on `base_mva`, frequencies in per-unit of the nominal angular
//! frequency. Generator buses are second order (swing equation), all other
//! buses are first order with a small load damping.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::laplacian::component_count;
use crate::oscillator::{
    linear_model, DescriptorSystem, Equilibrium, Linearization, OscillatorNetwork,
};

/// Default damping of buses without a generator.
pub const LOAD_DAMPING: f64 = 1e-4;

const NEW_ENGLAND_39: &str = include_str!("../../../cases/new_england_39.json");

fn default_base_mva() -> f64 {
    100.0
}

fn default_nominal_hz() -> f64 {
    60.0
}

fn default_voltage() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    /// Voltage magnitude, p.u.
    #[serde(default = "default_voltage")]
    pub v: f64,
    /// Net active injection, p.u.
    #[serde(default)]
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Series reactance, p.u.
    pub x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    /// Inertia constant, p.u.·s².
    pub m: f64,
    /// Rated power, p.u.
    pub p_rated: f64,
    /// Droop as a fraction, e.g. 0.05.
    pub droop: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
    #[serde(default = "default_nominal_hz")]
    pub nominal_hz: f64,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub lines: Vec<Line>,
    #[serde(default)]
    pub generators: Vec<Generator>,
}

impl GridCase {
    pub fn from_json(s: &str) -> Result<Self> {
        let case: GridCase = serde_json::from_str(s)?;
        case.validate()?;
        Ok(case)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The bundled New England 39-bus transcription.
    pub fn new_england_39() -> Self {
        Self::from_json(NEW_ENGLAND_39).expect("bundled case is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidCase(msg));
        if self.buses.is_empty() {
            return bad("no buses".into());
        }
        if !(self.base_mva > 0.0) || !(self.nominal_hz > 0.0) {
            return bad("base_mva and nominal_hz must be positive".into());
        }
        let mut ids = BTreeSet::new();
        for bus in &self.buses {
            if !ids.insert(bus.id) {
                return bad(format!("duplicate bus id {}", bus.id));
            }
            if !(bus.v > 0.0) || !bus.v.is_finite() {
                return bad(format!("bus {} has nonpositive voltage {}", bus.id, bus.v));
            }
            if !bus.p.is_finite() {
                return bad(format!("bus {} has non-finite injection", bus.id));
            }
        }
        for line in &self.lines {
            for end in [line.from, line.to] {
                if !ids.contains(&end) {
                    return bad(format!(
                        "line {}-{} references unknown bus {end}",
                        line.from, line.to
                    ));
                }
            }
            if line.from == line.to {
                return bad(format!("line {}-{} is a self-loop", line.from, line.to));
            }
            if !(line.x > 0.0) || !line.x.is_finite() {
                return bad(format!(
                    "line {}-{} has nonpositive reactance {}",
                    line.from, line.to, line.x
                ));
            }
        }
        let mut gen_buses = BTreeSet::new();
        for g in &self.generators {
            if !ids.contains(&g.bus) {
                return bad(format!("generator at unknown bus {}", g.bus));
            }
            if !gen_buses.insert(g.bus) {
                return bad(format!("more than one generator at bus {}", g.bus));
            }
            if !(g.m > 0.0) {
                return bad(format!(
                    "generator at bus {} has nonpositive inertia",
                    g.bus
                ));
            }
        }
        let a = coupling_from_lines(self);
        let comps = component_count(&a);
        if comps > 1 {
            return bad(format!("network is disconnected ({comps} components)"));
        }
        Ok(())
    }

    /// Bus ids in ascending order; position `i` is phase node `i + 1`.
    pub fn bus_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.buses.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        ids
    }

    fn sorted_buses(&self) -> Vec<&Bus> {
        let mut buses: Vec<&Bus> = self.buses.iter().collect();
        buses.sort_by_key(|b| b.id);
        buses
    }

    /// Generators in ascending bus order.
    pub fn sorted_generators(&self) -> Vec<&Generator> {
        let mut gens: Vec<&Generator> = self.generators.iter().collect();
        gens.sort_by_key(|g| g.bus);
        gens
    }
}

pub fn load_case(path: impl AsRef<Path>) -> Result<GridCase> {
    GridCase::from_json(&std::fs::read_to_string(path)?)
}

/// `a_ij = Σ V_i V_j / X` over all lines between buses `i` and `j`, in
/// ascending bus order.
pub fn coupling_from_lines(case: &GridCase) -> DMatrix<f64> {
    let buses = case.sorted_buses();
    let index: BTreeMap<usize, usize> = buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let n = buses.len();
    let mut a = DMatrix::zeros(n, n);
    for line in &case.lines {
        let (Some(&i), Some(&j)) = (index.get(&line.from), index.get(&line.to)) else {
            continue;
        };
        if i == j {
            continue;
        }
        let w = buses[i].v * buses[j].v / line.x;
        a[(i, j)] += w;
        a[(j, i)] += w;
    }
    a
}

/// Droop damping `P / (e_p ω*)` per generator, in ascending bus order.
pub fn droop_damping(case: &GridCase, omega_nominal: f64) -> Result<Vec<f64>> {
    if !(omega_nominal > 0.0) {
        return Err(Error::InvalidCase(format!(
            "nominal frequency must be positive, got {omega_nominal}"
        )));
    }
    case.sorted_generators()
        .into_iter()
        .map(|g| {
            if !(g.droop > 0.0) {
                return Err(Error::InvalidCase(format!(
                    "generator at bus {} has zero droop",
                    g.bus
                )));
            }
            let d = (g.p_rated / (g.droop * omega_nominal)).abs();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidCase(format!(
                    "generator at bus {} has invalid damping {d} (rated power {})",
                    g.bus, g.p_rated
                )));
            }
            Ok(d)
        })
        .collect()
}

/// Damping of `k` first-order buses.
pub fn load_side_damping(k: usize, eps: f64) -> Vec<f64> {
    vec![eps; k]
}

/// Map between bus ids, generator ordinals and extended-graph nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeLabeling {
    /// Bus id of phase node `i + 1`.
    pub bus_ids: Vec<usize>,
    /// Bus id of frequency node `n + g + 1`.
    pub generator_buses: Vec<usize>,
}

impl NodeLabeling {
    pub fn n(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn r(&self) -> usize {
        self.generator_buses.len()
    }

    pub fn phase_node(&self, bus: usize) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == bus).map(|i| i + 1)
    }

    pub fn frequency_node(&self, bus: usize) -> Option<usize> {
        self.generator_buses
            .iter()
            .position(|&b| b == bus)
            .map(|g| self.n() + g + 1)
    }

    /// Human-readable label of a node, e.g. `theta_16` or `omega_34`.
    pub fn label(&self, node: usize) -> Option<String> {
        let n = self.n();
        match node {
            0 => None,
            v if v <= n => Some(format!("theta_{}", self.bus_ids[v - 1])),
            v if v <= n + self.r() => Some(format!("omega_{}", self.generator_buses[v - n - 1])),
            _ => None,
        }
    }

    /// Inverse of [`NodeLabeling::label`].
    pub fn node(&self, label: &str) -> Option<usize> {
        if let Some(bus) = label.strip_prefix("theta_") {
            return self.phase_node(bus.parse().ok()?);
        }
        if let Some(bus) = label.strip_prefix("omega_") {
            return self.frequency_node(bus.parse().ok()?);
        }
        None
    }

    /// Bus id behind a node, phase or frequency.
    pub fn bus_of(&self, node: usize) -> Option<usize> {
        let n = self.n();
        match node {
            0 => None,
            v if v <= n => Some(self.bus_ids[v - 1]),
            v if v <= n + self.r() => Some(self.generator_buses[v - n - 1]),
            _ => None,
        }
    }
}

/// Oscillator network of a case with load damping `eps`.
pub fn build_oscillator_network_with(
    case: &GridCase,
    eps: f64,
) -> Result<(OscillatorNetwork, NodeLabeling)> {
    case.validate()?;
    let bus_ids = case.bus_ids();
    let gens = case.sorted_generators();
    let generator_buses: Vec<usize> = gens.iter().map(|g| g.bus).collect();
    let second_order: Vec<usize> = generator_buses
        .iter()
        .map(|b| bus_ids.binary_search(b).expect("validated"))
        .collect();
    let gen_damping = droop_damping(case, 1.0)?;

    let n = bus_ids.len();
    let loads = load_side_damping(n - gens.len(), eps);
    let mut damping = vec![0.0; n];
    let mut next_load = loads.into_iter();
    for (i, d) in damping.iter_mut().enumerate() {
        *d = match second_order.iter().position(|&s| s == i) {
            Some(g) => gen_damping[g],
            None => next_load.next().expect("one value per load bus"),
        };
    }
    let natural_freq: Vec<f64> = case.sorted_buses().iter().map(|b| b.p).collect();
    let inertia: Vec<f64> = gens.iter().map(|g| g.m).collect();

    let net = OscillatorNetwork::new(
        coupling_from_lines(case),
        second_order,
        inertia,
        damping,
        natural_freq,
    )?
    .with_names(bus_ids.iter().map(|b| b.to_string()).collect())?;
    Ok((
        net,
        NodeLabeling {
            bus_ids,
            generator_buses,
        },
    ))
}

pub fn build_oscillator_network(case: &GridCase) -> Result<(OscillatorNetwork, NodeLabeling)> {
    build_oscillator_network_with(case, LOAD_DAMPING)
}

/// A case carried through equilibrium, linearization and descriptor assembly.
#[derive(Clone, Debug)]
pub struct GridModel {
    pub case: GridCase,
    pub network: OscillatorNetwork,
    pub labeling: NodeLabeling,
    pub equilibrium: Equilibrium,
    pub linearization: Linearization,
    pub system: DescriptorSystem,
}

impl GridModel {
    pub const EQUILIBRIUM_TOL: f64 = 1e-10;
    pub const MAX_NEWTON: usize = 100;

    pub fn new(case: GridCase) -> Result<Self> {
        let (network, labeling) = build_oscillator_network(&case)?;
        let (equilibrium, linearization, system) =
            linear_model(&network, Self::EQUILIBRIUM_TOL, Self::MAX_NEWTON)?;
        Ok(Self {
            case,
            network,
            labeling,
            equilibrium,
            linearization,
            system,
        })
    }

    /// Sum of all damping coefficients.
    pub fn total_damping(&self) -> f64 {
        self.network.damping.iter().sum()
    }
}
