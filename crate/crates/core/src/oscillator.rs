//! Mixed first/second-order coupled oscillators: phase-locked equilibrium,
//! linearization and descriptor-form assembly.
//!
//! Second-order nodes follow `M θ̈ + D θ̇ = f − Σ a sin(θ_i − θ_j)`, first-order
//! nodes `D θ̇ = f − Σ a sin(θ_i − θ_j)`. The linearized state is ordered as
//! `[ω̃ (second-order), θ̃ (second-order), θ̃ (first-order)]`, each block in
//! ascending oscillator index.
//!
//! Extended-graph node labels are 1-based: phase of oscillator `i` is node `i + 1`,
//! the frequency of the `g`-th second-order oscillator is node `n + g + 1`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::netgraph::laplacian::{check_coupling, component_count};
use crate::netgraph::{laplacian_from_adjacency, InfluenceGraph, NodeSet};

/// Smallest eigenvalue accepted for the linearized Laplacian.
pub const PSD_TOLERANCE: f64 = -1e-10;

/// Default cohesiveness angle for the sufficient synchronization condition.
pub const DEFAULT_GAMMA: f64 = FRAC_PI_2 - 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorNetwork {
    /// Symmetric nonnegative coupling, zero diagonal.
    pub coupling: DMatrix<f64>,
    /// 0-based indices of second-order oscillators, ascending.
    pub second_order: Vec<usize>,
    /// Inertia of each second-order oscillator, aligned with `second_order`.
    pub inertia: Vec<f64>,
    /// Damping of every oscillator.
    pub damping: Vec<f64>,
    pub natural_freq: Vec<f64>,
    /// Display names, used for state labels.
    pub names: Vec<String>,
}

impl OscillatorNetwork {
    pub fn new(
        coupling: DMatrix<f64>,
        second_order: Vec<usize>,
        inertia: Vec<f64>,
        damping: Vec<f64>,
        natural_freq: Vec<f64>,
    ) -> Result<Self> {
        let n = coupling.nrows();
        let net = Self {
            coupling,
            second_order,
            inertia,
            damping,
            natural_freq,
            names: (1..=n).map(|i| i.to_string()).collect(),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n() {
            return Err(Error::Dimension {
                expected: format!("{} names", self.n()),
                got: names.len().to_string(),
            });
        }
        self.names = names;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        check_coupling(&self.coupling)?;
        let n = self.n();
        let dim = |what: &str, got: usize, want: usize| -> Result<()> {
            if got == want {
                Ok(())
            } else {
                Err(Error::Dimension {
                    expected: format!("{want} {what}"),
                    got: got.to_string(),
                })
            }
        };
        dim("damping values", self.damping.len(), n)?;
        dim("natural frequencies", self.natural_freq.len(), n)?;
        dim(
            "inertia values",
            self.inertia.len(),
            self.second_order.len(),
        )?;
        if self.second_order.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition(
                "second-order indices must be strictly ascending".into(),
            ));
        }
        if let Some(&i) = self.second_order.iter().find(|&&i| i >= n) {
            return Err(Error::NodeOutOfRange { node: i + 1, n });
        }
        if self.inertia.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Precondition("inertia must be positive".into()));
        }
        if self.damping.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Precondition("damping must be positive".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn r(&self) -> usize {
        self.second_order.len()
    }

    /// 0-based indices of first-order oscillators, ascending.
    pub fn first_order(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|i| self.second_order.binary_search(i).is_err())
            .collect()
    }

    /// `f_i − Σ_j a_ij sin(θ_i − θ_j)` for every oscillator.
    fn net_power(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let flow: f64 = (0..n)
                    .map(|j| self.coupling[(i, j)] * (theta[i] - theta[j]).sin())
                    .sum();
                self.natural_freq[i] - flow
            })
            .collect()
    }

    /// Nonlinear vector field in deviation coordinates around `eq`, using the
    /// linearized state ordering. Its Jacobian at zero is `E⁻¹·A`.
    pub fn vector_field(&self, eq: &Equilibrium, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let r = self.r();
        let first = self.first_order();
        let mut theta = eq.theta.clone();
        for (g, &i) in self.second_order.iter().enumerate() {
            theta[i] += x[r + g];
        }
        for (q, &i) in first.iter().enumerate() {
            theta[i] += x[2 * r + q];
        }
        let power = self.net_power(&theta);
        let mut dx = DVector::zeros(n + r);
        for (g, &i) in self.second_order.iter().enumerate() {
            let omega = eq.omega + x[g];
            dx[g] = (power[i] - self.damping[i] * omega) / self.inertia[g];
            dx[r + g] = x[g];
        }
        for (q, &i) in first.iter().enumerate() {
            dx[2 * r + q] = (power[i] - self.damping[i] * eq.omega) / self.damping[i];
        }
        dx
    }
}

/// Common frequency of a phase-locked solution, `Σ f_i / Σ D_i`.
pub fn sync_frequency(net: &OscillatorNetwork) -> Result<f64> {
    let total: f64 = net.damping.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroDamping(total));
    }
    Ok(net.natural_freq.iter().sum::<f64>() / total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    /// Phases in radians, gauge `θ_1 = 0`.
    pub theta: Vec<f64>,
    /// Synchronized frequency in the rotating frame.
    pub omega: f64,
    /// Max absolute residual of the phase-locking equations.
    pub residual: f64,
    /// Max `|θ_i − θ_j|` over coupled pairs.
    pub cohesive_margin: f64,
    pub iterations: usize,
}

fn equilibrium_residual(net: &OscillatorNetwork, theta: &[f64], omega: f64) -> Vec<f64> {
    net.net_power(theta)
        .into_iter()
        .zip(&net.damping)
        .map(|(p, d)| p - d * omega)
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Max phase gap over coupled pairs.
pub fn cohesive_margin(coupling: &DMatrix<f64>, theta: &[f64]) -> f64 {
    let n = coupling.nrows();
    let mut margin: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if coupling[(i, j)] != 0.0 {
                margin = margin.max((theta[i] - theta[j]).abs());
            }
        }
    }
    margin
}

/// Phase-locked equilibrium by damped Newton iteration from a flat start.
///
/// The gauge is fixed by `θ_1 = 0` and Newton runs on the remaining `n − 1`
/// phases. Steps are halved until the residual decreases.
pub fn solve_equilibrium(
    net: &OscillatorNetwork,
    tol: f64,
    max_iter: usize,
) -> Result<Equilibrium> {
    let n = net.n();
    let comps = component_count(&net.coupling);
    if comps > 1 {
        return Err(Error::Disconnected { components: comps });
    }
    let omega = sync_frequency(net)?;
    let mut theta = vec![0.0; n];
    let mut res = equilibrium_residual(net, &theta, omega);
    let mut norm = max_abs(&res);
    let mut iterations = 0;

    while norm > tol {
        if iterations == max_iter {
            return Err(Error::NoConvergence {
                residual: norm,
                iterations,
            });
        }
        iterations += 1;
        // dF_i/dθ_j = a_ij cos(θ_i − θ_j) off-diagonal, minus the row sum on the diagonal
        let m = n - 1;
        let mut jac = DMatrix::zeros(m, m);
        for i in 1..n {
            for j in 0..n {
                if i == j || net.coupling[(i, j)] == 0.0 {
                    continue;
                }
                let c = net.coupling[(i, j)] * (theta[i] - theta[j]).cos();
                jac[(i - 1, i - 1)] -= c;
                if j > 0 {
                    jac[(i - 1, j - 1)] += c;
                }
            }
        }
        let rhs = DVector::from_iterator(m, res[1..].iter().map(|x| -x));
        let step = jac.lu().solve(&rhs).ok_or(Error::NoConvergence {
            residual: norm,
            iterations,
        })?;

        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = std::iter::once(0.0)
                .chain((1..n).map(|i| theta[i] + lambda * step[i - 1]))
                .collect();
            let trial_res = equilibrium_residual(net, &trial, omega);
            let trial_norm = max_abs(&trial_res);
            if trial_norm < norm || lambda < 1e-10 {
                theta = trial;
                res = trial_res;
                norm = trial_norm;
                break;
            }
            lambda *= 0.5;
        }
        if !norm.is_finite() {
            return Err(Error::NoConvergence {
                residual: norm,
                iterations,
            });
        }
    }

    let margin = cohesive_margin(&net.coupling, &theta);
    if margin >= FRAC_PI_2 {
        return Err(Error::NotCohesive { margin });
    }
    Ok(Equilibrium {
        theta,
        omega,
        residual: norm,
        cohesive_margin: margin,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyncCondition {
    pub holds: bool,
    /// `‖Δᵀ L† β‖∞`.
    pub lhs: f64,
}

/// Sufficient condition for a unique stable cohesive phase-locked solution
/// with edge phase gaps bounded by `gamma`.
pub fn sync_condition_check(net: &OscillatorNetwork, gamma: f64) -> Result<SyncCondition> {
    if !(0.0..FRAC_PI_2).contains(&gamma) {
        return Err(Error::Precondition(format!(
            "gamma {gamma} outside [0, pi/2)"
        )));
    }
    let comps = component_count(&net.coupling);
    if comps > 1 {
        return Err(Error::Disconnected { components: comps });
    }
    let omega = sync_frequency(net)?;
    let beta = DVector::from_iterator(
        net.n(),
        net.natural_freq
            .iter()
            .zip(&net.damping)
            .map(|(f, d)| f - d * omega),
    );
    let lap = laplacian_from_adjacency(&net.coupling)?;
    let pinv = lap
        .laplacian
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::InvalidMatrix(e.to_string()))?;
    let flows = lap.incidence.transpose() * pinv * beta;
    let lhs = flows.amax();
    Ok(SyncCondition {
        holds: lhs <= gamma.sin(),
        lhs,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    /// `ã_ij = a_ij cos(θ*_i − θ*_j)`.
    pub a_tilde: DMatrix<f64>,
    /// Laplacian of `ã`.
    pub k: DMatrix<f64>,
}

pub fn linearize(net: &OscillatorNetwork, eq: &Equilibrium) -> Result<Linearization> {
    let n = net.n();
    if eq.theta.len() != n {
        return Err(Error::Dimension {
            expected: format!("{n} phases"),
            got: eq.theta.len().to_string(),
        });
    }
    let a_tilde = DMatrix::from_fn(n, n, |i, j| {
        net.coupling[(i, j)] * (eq.theta[i] - eq.theta[j]).cos()
    });
    let mut k = -a_tilde.clone();
    for i in 0..n {
        k[(i, i)] = a_tilde.row(i).sum();
    }
    if n > 0 {
        let smallest = k.clone().symmetric_eigenvalues().min();
        if smallest < PSD_TOLERANCE {
            return Err(Error::InvalidMatrix(format!(
                "linearized Laplacian is not positive semi-definite (min eigenvalue {smallest:e})"
            )));
        }
    }
    Ok(Linearization { a_tilde, k })
}

/// `E ẋ = A x + B f̃` with diagonal nonsingular `E` and a node labeling for the states.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorSystem {
    /// Diagonal of `E`.
    pub e: DVector<f64>,
    pub a: DMatrix<f64>,
    /// `N × n` map from oscillator power inputs to state rows.
    pub b_full: DMatrix<f64>,
    /// Number of second-order oscillators.
    pub r: usize,
    /// Number of oscillators.
    pub n: usize,
    node_of_state: Vec<usize>,
    state_of_node: Vec<usize>,
    names: Vec<String>,
}

impl DescriptorSystem {
    /// System whose state `s` is node `s + 1`, with no second-order structure.
    pub fn from_parts(e: DVector<f64>, a: DMatrix<f64>, b_full: DMatrix<f64>) -> Result<Self> {
        let big_n = a.nrows();
        if !a.is_square() || e.len() != big_n || b_full.nrows() != big_n {
            return Err(Error::Dimension {
                expected: format!("E, A and B with {big_n} rows"),
                got: format!(
                    "{} / {}x{} / {}",
                    e.len(),
                    a.nrows(),
                    a.ncols(),
                    b_full.nrows()
                ),
            });
        }
        check_e(&e)?;
        let ids: Vec<usize> = (1..=big_n).collect();
        Ok(Self {
            e,
            a,
            b_full,
            r: 0,
            n: big_n,
            state_of_node: (0..big_n).collect(),
            node_of_state: ids,
            names: (1..=big_n).map(|i| format!("x_{i}")).collect(),
        })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn e_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.e)
    }

    /// State index (0-based) of a 1-based node label.
    pub fn state_of(&self, node: usize) -> Result<usize> {
        if node == 0 || node > self.n_states() {
            return Err(Error::NodeOutOfRange {
                node,
                n: self.n_states(),
            });
        }
        Ok(self.state_of_node[node - 1])
    }

    /// 1-based node label of a state.
    pub fn node_of(&self, state: usize) -> usize {
        self.node_of_state[state]
    }

    pub fn states_of(&self, set: &NodeSet) -> Result<Vec<usize>> {
        set.iter().map(|v| self.state_of(v)).collect()
    }

    /// Whether the node is a second-order frequency state.
    pub fn is_frequency_node(&self, node: usize) -> bool {
        self.r > 0 && node > self.n && node <= self.n + self.r
    }

    /// Node label of the state, e.g. `theta_16` or `omega_34`.
    pub fn node_name(&self, node: usize) -> &str {
        &self.names[node - 1]
    }

    /// Nodes whose state row receives an input channel.
    pub fn admissible(&self) -> NodeSet {
        (0..self.n_states())
            .filter(|&s| self.b_full.row(s).iter().any(|&x| x != 0.0))
            .map(|s| self.node_of(s))
            .collect()
    }

    /// Relabels phase/frequency states with oscillator names.
    pub fn set_oscillator_names(&mut self, names: &[String]) -> Result<()> {
        if self.r == 0 && self.n == self.n_states() && names.len() == self.n {
            for (i, name) in names.iter().enumerate() {
                self.names[i] = format!("theta_{name}");
            }
            return Ok(());
        }
        if names.len() != self.n {
            return Err(Error::Dimension {
                expected: format!("{} names", self.n),
                got: names.len().to_string(),
            });
        }
        for (i, name) in names.iter().enumerate() {
            self.names[i] = format!("theta_{name}");
        }
        // frequency states follow the second-order block of the state ordering
        for g in 0..self.r {
            let phase_node = self.node_of(self.r + g);
            self.names[self.n + g] = format!("omega_{}", names[phase_node - 1]);
        }
        Ok(())
    }

    /// Influence digraph of `A`: edge `(i, j)` for every off-diagonal nonzero
    /// `A[j, i]`, in node labels. Admissible nodes are the rows of `B` with an
    /// input channel.
    pub fn extended_graph(&self) -> InfluenceGraph {
        let big_n = self.n_states();
        let mut g = InfluenceGraph::new(big_n);
        for col in 0..big_n {
            for row in 0..big_n {
                let w = self.a[(row, col)];
                if row != col && w != 0.0 {
                    g.add_edge(self.node_of(col), self.node_of(row), w)
                        .expect("labels are within range");
                }
            }
        }
        g.set_admissible(&self.admissible())
            .expect("labels are within range");
        g.set_labels(self.names.clone())
            .expect("one name per state");
        g
    }
}

fn check_e(e: &DVector<f64>) -> Result<()> {
    match e.iter().position(|&x| !(x > 0.0)) {
        Some(index) => Err(Error::SingularE {
            index: index + 1,
            value: e[index],
        }),
        None => Ok(()),
    }
}

/// Assembles the descriptor form from the linearized Laplacian `k` (in
/// oscillator order), inertia and damping of the second-order oscillators,
/// and damping of the first-order oscillators.
pub fn assemble_descriptor(
    k: &DMatrix<f64>,
    inertia: &[f64],
    damping_second: &[f64],
    damping_first: &[f64],
    second_order: &[usize],
) -> Result<DescriptorSystem> {
    let n = k.nrows();
    let r = second_order.len();
    if !k.is_square()
        || inertia.len() != r
        || damping_second.len() != r
        || damping_first.len() != n - r
    {
        return Err(Error::Dimension {
            expected: format!(
                "{n}x{n} K, {r} inertia/damping, {} first-order damping",
                n.saturating_sub(r)
            ),
            got: format!(
                "{}x{} K, {} inertia, {} damping, {} first-order damping",
                k.nrows(),
                k.ncols(),
                inertia.len(),
                damping_second.len(),
                damping_first.len()
            ),
        });
    }
    let first: Vec<usize> = (0..n).filter(|i| !second_order.contains(i)).collect();
    if first.len() != n - r {
        return Err(Error::Precondition(
            "second-order indices must be distinct and in range".into(),
        ));
    }
    let big_n = n + r;

    // order[s] = oscillator index of the phase in state block position s
    let phase_order: Vec<usize> = second_order.iter().chain(&first).copied().collect();

    let e = DVector::from_iterator(
        big_n,
        inertia
            .iter()
            .copied()
            .chain(std::iter::repeat_n(1.0, r))
            .chain(damping_first.iter().copied()),
    );
    check_e(&e)?;

    let mut a = DMatrix::zeros(big_n, big_n);
    for g in 0..r {
        a[(g, g)] = -damping_second[g];
        a[(r + g, g)] = 1.0;
    }
    // -K rows: frequency block for second-order oscillators, phase block for first-order
    for (p, &i) in phase_order.iter().enumerate() {
        let row = if p < r { p } else { r + p };
        for (q, &j) in phase_order.iter().enumerate() {
            a[(row, r + q)] = -k[(i, j)];
        }
    }

    let mut b_full = DMatrix::zeros(big_n, n);
    for (g, &i) in second_order.iter().enumerate() {
        b_full[(g, i)] = 1.0;
    }
    for (q, &i) in first.iter().enumerate() {
        b_full[(2 * r + q, i)] = 1.0;
    }

    let mut node_of_state = vec![0; big_n];
    for g in 0..r {
        node_of_state[g] = n + g + 1;
    }
    for (p, &i) in phase_order.iter().enumerate() {
        node_of_state[r + p] = i + 1;
    }
    let mut state_of_node = vec![0; big_n];
    for (s, &node) in node_of_state.iter().enumerate() {
        state_of_node[node - 1] = s;
    }

    let mut sys = DescriptorSystem {
        e,
        a,
        b_full,
        r,
        n,
        node_of_state,
        state_of_node,
        names: vec![String::new(); big_n],
    };
    let names: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    sys.set_oscillator_names(&names)?;
    Ok(sys)
}

/// Equilibrium, linearization and descriptor form of a network in one pass.
pub fn linear_model(
    net: &OscillatorNetwork,
    tol: f64,
    max_iter: usize,
) -> Result<(Equilibrium, Linearization, DescriptorSystem)> {
    let eq = solve_equilibrium(net, tol, max_iter)?;
    let lin = linearize(net, &eq)?;
    let first = net.first_order();
    let damping_second: Vec<f64> = net.second_order.iter().map(|&i| net.damping[i]).collect();
    let damping_first: Vec<f64> = first.iter().map(|&i| net.damping[i]).collect();
    let mut sys = assemble_descriptor(
        &lin.k,
        &net.inertia,
        &damping_second,
        &damping_first,
        &net.second_order,
    )?;
    sys.set_oscillator_names(&net.names)?;
    Ok((eq, lin, sys))
}
