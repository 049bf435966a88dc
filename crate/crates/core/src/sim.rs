//! Fixed-step simulation of descriptor systems under step disturbances,
//! with optional static or low-pass filtered output feedback.
//!
//! The integrator is the trapezoidal rule. On the first interval after an
//! input discontinuity it is replaced by two backward-Euler half steps, which
//! damps the stiff load-bus modes that the trapezoidal rule would otherwise
//! carry as an undamped oscillation. Both share the same left-hand matrix.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::NodeSet;
use crate::oscillator::DescriptorSystem;

/// Spectrum verdict threshold on the largest real part.
pub const STABILITY_TOL: f64 = 1e-6;
/// Modes with `|Re| <=` this are counted as near zero.
pub const NEAR_ZERO_TOL: f64 = 1e-8;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_WINDOW: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub node: usize,
    pub amplitude: f64,
    pub start: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Controller {
    #[default]
    None,
    Ideal,
    Filtered {
        tau: f64,
    },
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_freq_scale() -> f64 {
    60.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub steps: Vec<Step>,
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub controller: Controller,
    /// Multiplier from p.u. frequency states to reported Hz.
    #[serde(default = "default_freq_scale")]
    pub freq_scale: f64,
    /// Initial state in state order; zero if absent.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
}

impl Scenario {
    pub fn new(steps: Vec<Step>, horizon: f64) -> Self {
        Self {
            steps,
            horizon,
            dt: DEFAULT_DT,
            controller: Controller::None,
            freq_scale: default_freq_scale(),
            initial: None,
        }
    }

    pub fn with_controller(mut self, controller: Controller) -> Self {
        self.controller = controller;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Number of steps, checked for grid alignment.
    fn grid_index(&self, t: f64, what: &str) -> Result<usize> {
        let k = (t / self.dt).round();
        if (k * self.dt - t).abs() > 1e-9 * self.dt.max(t.abs()) {
            return Err(Error::InvalidScenario(format!(
                "{what} {t} is not a multiple of dt = {}",
                self.dt
            )));
        }
        Ok(k as usize)
    }

    pub fn validate(&self, sys: &DescriptorSystem) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "invalid horizon {}",
                self.horizon
            )));
        }
        self.grid_index(self.horizon, "horizon")?;
        let admissible = sys.admissible();
        for s in &self.steps {
            if !(0.0..=self.horizon).contains(&s.start) {
                return Err(Error::InvalidScenario(format!(
                    "step on node {} starts at {} outside [0, {}]",
                    s.node, s.start, self.horizon
                )));
            }
            self.grid_index(s.start, "step start")?;
            if !admissible.contains(s.node) {
                return Err(Error::InvalidScenario(format!(
                    "disturbance node {} is not admissible",
                    s.node
                )));
            }
            if !s.amplitude.is_finite() {
                return Err(Error::InvalidScenario(format!(
                    "non-finite amplitude on node {}",
                    s.node
                )));
            }
        }
        if let Controller::Filtered { tau } = self.controller {
            if !(tau > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "filter constant must be positive, got {tau}"
                )));
            }
        }
        if let Some(x0) = &self.initial {
            if x0.len() != sys.n_states() {
                return Err(Error::InvalidScenario(format!(
                    "initial state has {} entries, system has {}",
                    x0.len(),
                    sys.n_states()
                )));
            }
        }
        Ok(())
    }
}

/// Static output feedback `u = −G y` with `y` the sensor states and `u`
/// entering the actuator rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Feedback {
    pub actuators: NodeSet,
    pub sensors: NodeSet,
    pub gain: DMatrix<f64>,
}

impl Feedback {
    pub fn new(actuators: NodeSet, sensors: NodeSet, gain: DMatrix<f64>) -> Result<Self> {
        if gain.nrows() != actuators.len() || gain.ncols() != sensors.len() {
            return Err(Error::Dimension {
                expected: format!("{}x{} gain", actuators.len(), sensors.len()),
                got: format!("{}x{}", gain.nrows(), gain.ncols()),
            });
        }
        Ok(Self {
            actuators,
            sensors,
            gain,
        })
    }

    /// `A − B G C` by direct subtraction on the selected entries.
    pub fn closed_loop(&self, sys: &DescriptorSystem) -> Result<DMatrix<f64>> {
        let rows = sys.states_of(&self.actuators)?;
        let cols = sys.states_of(&self.sensors)?;
        let mut a = sys.a.clone();
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                a[(r, c)] -= self.gain[(i, j)];
            }
        }
        Ok(a)
    }
}

/// Sampled trajectories on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub time: Vec<f64>,
    /// One row per grid time, in state order, p.u.
    pub states: Vec<Vec<f64>>,
    /// One row per grid time, one entry per actuator, p.u.
    pub control: Vec<Vec<f64>>,
    /// Node of each state column.
    pub nodes: Vec<usize>,
    /// Column names in state order, e.g. `phase_16`, `freq_34`.
    pub names: Vec<String>,
    pub is_frequency: Vec<bool>,
    pub actuators: Vec<usize>,
    pub freq_scale: f64,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    fn column(&self, node: usize) -> Result<usize> {
        self.nodes
            .iter()
            .position(|&v| v == node)
            .ok_or(Error::NodeOutOfRange {
                node,
                n: self.nodes.len(),
            })
    }

    /// Raw state trace of a node, p.u.
    pub fn trace(&self, node: usize) -> Result<Vec<f64>> {
        let c = self.column(node)?;
        Ok(self.states.iter().map(|row| row[c]).collect())
    }

    /// Trace in reporting units: Hz for frequency nodes, rad for phases.
    pub fn reported(&self, node: usize) -> Result<Vec<f64>> {
        let c = self.column(node)?;
        let scale = if self.is_frequency[c] {
            self.freq_scale
        } else {
            1.0
        };
        Ok(self.states.iter().map(|row| row[c] * scale).collect())
    }

    pub fn control_trace(&self, k: usize) -> Vec<f64> {
        self.control.iter().map(|row| row[k]).collect()
    }

    /// Columns in ascending node order followed by the controls.
    fn csv_columns(&self) -> (Vec<String>, Vec<usize>) {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by_key(|&c| self.nodes[c]);
        let mut header = vec!["t".to_string()];
        header.extend(order.iter().map(|&c| self.names[c].clone()));
        header.extend(self.actuators.iter().map(|b| format!("u_{b}")));
        (header, order)
    }

    /// CSV with every `stride`-th grid time (and always the last one).
    pub fn to_csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let (header, order) = self.csv_columns();
        let mut out = header.join(",");
        out.push('\n');
        for k in 0..self.len() {
            if k % stride != 0 && k + 1 != self.len() {
                continue;
            }
            write!(out, "{:.16e}", self.time[k]).unwrap();
            for &c in &order {
                let scale = if self.is_frequency[c] {
                    self.freq_scale
                } else {
                    1.0
                };
                write!(out, ",{:.16e}", self.states[k][c] * scale).unwrap();
            }
            for u in &self.control[k] {
                write!(out, ",{u:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, stride: usize) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv(stride).as_bytes())?;
        Ok(())
    }

    /// Line plot of the named CSV channels against time.
    pub fn to_svg(&self, channels: &[String]) -> Result<String> {
        const W: f64 = 800.0;
        const H: f64 = 400.0;
        const PAD: f64 = 50.0;
        const COLORS: [&str; 8] = [
            "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
        ];
        let mut traces = Vec::new();
        for name in channels {
            let trace = if let Some(c) = self.names.iter().position(|n| n == name) {
                self.reported(self.nodes[c])?
            } else if let Some(k) = self
                .actuators
                .iter()
                .position(|b| format!("u_{b}") == *name)
            {
                self.control_trace(k)
            } else {
                return Err(Error::InvalidScenario(format!("unknown channel {name}")));
            };
            traces.push((name, trace));
        }
        let t_max = self
            .time
            .last()
            .copied()
            .unwrap_or(0.0)
            .max(f64::MIN_POSITIVE);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (_, tr) in &traces {
            for &y in tr {
                lo = lo.min(y);
                hi = hi.max(y);
            }
        }
        if !lo.is_finite() || hi - lo < 1e-300 {
            lo -= 1.0;
            hi += 1.0;
        }
        let stride = (self.len() / 2000).max(1);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <line x1=\"{PAD}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
             <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{y0}\" stroke=\"black\"/>\n\
             <text x=\"{PAD}\" y=\"{ty}\" font-size=\"12\">0</text>\n\
             <text x=\"{x1}\" y=\"{ty}\" font-size=\"12\" text-anchor=\"end\">{t_max} s</text>\n\
             <text x=\"5\" y=\"{PAD}\" font-size=\"12\">{hi:.3e}</text>\n\
             <text x=\"5\" y=\"{y0}\" font-size=\"12\">{lo:.3e}</text>\n",
            y0 = H - PAD,
            x1 = W - PAD,
            ty = H - PAD + 20.0,
        );
        for (i, (name, tr)) in traces.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let mut points = String::new();
            for k in (0..tr.len()).step_by(stride) {
                let x = PAD + (W - 2.0 * PAD) * self.time[k] / t_max;
                let y = H - PAD - (H - 2.0 * PAD) * (tr[k] - lo) / (hi - lo);
                write!(points, "{x:.2},{y:.2} ").unwrap();
            }
            writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"/>",
                points.trim_end()
            )
            .unwrap();
            writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>",
                W - PAD + 5.0 - 100.0,
                PAD + 15.0 * (i as f64 + 1.0)
            )
            .unwrap();
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }
}

fn column_name(name: &str) -> String {
    if let Some(bus) = name.strip_prefix("theta_") {
        format!("phase_{bus}")
    } else if let Some(bus) = name.strip_prefix("omega_") {
        format!("freq_{bus}")
    } else {
        name.to_string()
    }
}

/// Integrates `E ẋ = A x + B u + D w` over the scenario.
///
/// With `Controller::Ideal` the feedback is folded into the state matrix.
/// With `Controller::Filtered` the state is augmented with `u_f`,
/// `τ u̇_f = −G C x − u_f`, and `B u_f` is applied.
pub fn simulate(
    sys: &DescriptorSystem,
    scenario: &Scenario,
    feedback: Option<&Feedback>,
) -> Result<TimeSeries> {
    scenario.validate(sys)?;
    let big_n = sys.n_states();
    let dt = scenario.dt;
    let n_steps = scenario.grid_index(scenario.horizon, "horizon")?;

    let empty = Feedback {
        actuators: NodeSet::new(),
        sensors: NodeSet::new(),
        gain: DMatrix::zeros(0, 0),
    };
    let fb = match scenario.controller {
        Controller::None => &empty,
        _ => feedback.ok_or_else(|| {
            Error::InvalidScenario("controller requested without a feedback gain".into())
        })?,
    };
    let rows = sys.states_of(&fb.actuators)?;
    let cols = sys.states_of(&fb.sensors)?;
    let m = rows.len();

    // -G C as an m x N matrix
    let mut gc = DMatrix::zeros(m, big_n);
    for i in 0..m {
        for (j, &c) in cols.iter().enumerate() {
            gc[(i, c)] -= fb.gain[(i, j)];
        }
    }

    let filtered = matches!(scenario.controller, Controller::Filtered { .. });
    let dim = if filtered { big_n + m } else { big_n };
    let mut e = DVector::from_element(dim, 1.0);
    e.rows_mut(0, big_n).copy_from(&sys.e);
    let mut a = DMatrix::zeros(dim, dim);
    match scenario.controller {
        Controller::None => a.view_mut((0, 0), (big_n, big_n)).copy_from(&sys.a),
        Controller::Ideal => a
            .view_mut((0, 0), (big_n, big_n))
            .copy_from(&fb.closed_loop(sys)?),
        Controller::Filtered { tau } => {
            a.view_mut((0, 0), (big_n, big_n)).copy_from(&sys.a);
            for (i, &r) in rows.iter().enumerate() {
                a[(r, big_n + i)] = 1.0;
                a[(big_n + i, big_n + i)] = -1.0 / tau;
                for c in 0..big_n {
                    a[(big_n + i, c)] = gc[(i, c)] / tau;
                }
            }
        }
    }

    // disturbance input per grid interval, changing only at step starts
    let mut events: Vec<(usize, usize, f64)> = Vec::with_capacity(scenario.steps.len());
    for s in &scenario.steps {
        let k = scenario.grid_index(s.start, "step start")?;
        events.push((k, sys.state_of(s.node)?, s.amplitude));
    }
    events.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.cmp(&y.1)));

    let lhs_of = |h: f64| -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let mut lhs = -&a * (h / 2.0);
        for i in 0..dim {
            lhs[(i, i)] += e[i];
        }
        let lu = lhs.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular(format!("trapezoidal matrix at dt = {h}")));
        }
        Ok(lu)
    };
    let lu = lhs_of(dt)?;
    // E + h/2 A
    let mut rhs_mat = &a * (dt / 2.0);
    for i in 0..dim {
        rhs_mat[(i, i)] += e[i];
    }

    let mut z = DVector::zeros(dim);
    if let Some(x0) = &scenario.initial {
        z.rows_mut(0, big_n)
            .copy_from(&DVector::from_column_slice(x0));
    }
    let mut w = DVector::zeros(dim);

    let control_of = |z: &DVector<f64>| -> Vec<f64> {
        if filtered {
            z.rows(big_n, m).iter().copied().collect()
        } else {
            (&gc * z.rows(0, big_n)).iter().copied().collect()
        }
    };

    let mut time = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut control = Vec::with_capacity(n_steps + 1);
    time.push(0.0);
    states.push(z.rows(0, big_n).iter().copied().collect::<Vec<_>>());
    control.push(control_of(&z));

    let mut next_event = 0;
    for k in 0..n_steps {
        let mut jump = false;
        while next_event < events.len() && events[next_event].0 == k {
            let (_, state, amp) = events[next_event];
            if amp != 0.0 {
                w[state] += amp;
                jump = true;
            }
            next_event += 1;
        }
        if jump {
            // two backward-Euler half steps: (E − h/2 A) z' = E z + h/2 w
            for _ in 0..2 {
                let rhs = z.component_mul(&e) + &w * (dt / 2.0);
                z = lu
                    .solve(&rhs)
                    .ok_or_else(|| Error::Singular("backward Euler step".into()))?;
            }
        } else {
            let rhs = &rhs_mat * &z + &w * dt;
            z = lu
                .solve(&rhs)
                .ok_or_else(|| Error::Singular("trapezoidal step".into()))?;
        }
        let t = (k + 1) as f64 * dt;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: t });
        }
        time.push(t);
        states.push(z.rows(0, big_n).iter().copied().collect());
        control.push(control_of(&z));
    }

    let nodes: Vec<usize> = (0..big_n).map(|s| sys.node_of(s)).collect();
    Ok(TimeSeries {
        time,
        states,
        control,
        names: nodes
            .iter()
            .map(|&v| column_name(sys.node_name(v)))
            .collect(),
        is_frequency: nodes.iter().map(|&v| sys.is_frequency_node(v)).collect(),
        nodes,
        actuators: fb.actuators.to_vec(),
        freq_scale: scenario.freq_scale,
    })
}

/// Step response `a (1 − e^{−t/τ})` of a first-order low-pass filter.
pub fn lowpass_reference(amplitude: f64, tau: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    amplitude * (1.0 - (-t / tau).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub window: f64,
    /// Least-squares slope of each phase trace, `(node, rad/s)`.
    pub drift_slopes: Vec<(usize, f64)>,
    /// Mean control input per actuator, p.u.
    pub u_ss: Vec<f64>,
    /// Mean frequency deviation per frequency node, `(node, Hz)`.
    pub freq_ss: Vec<(usize, f64)>,
}

impl SteadyState {
    /// Largest minus smallest drift slope.
    pub fn slope_spread(&self) -> f64 {
        let (lo, hi) = self
            .drift_slopes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, s)| {
                (lo.min(s), hi.max(s))
            });
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    pub fn mean_slope(&self) -> f64 {
        if self.drift_slopes.is_empty() {
            return 0.0;
        }
        self.drift_slopes.iter().map(|&(_, s)| s).sum::<f64>() / self.drift_slopes.len() as f64
    }
}

/// Averages over the final `window` seconds of the run.
pub fn steady_state_report(ts: &TimeSeries, window: f64) -> Result<SteadyState> {
    let t_end = ts.time.last().copied().unwrap_or(0.0);
    if !(window > 0.0) || window > t_end + 1e-12 {
        return Err(Error::InvalidScenario(format!(
            "window {window} must be positive and within the horizon {t_end}"
        )));
    }
    let first = ts.time.partition_point(|&t| t < t_end - window - 1e-12);
    let idx: Vec<usize> = (first..ts.len()).collect();
    let count = idx.len() as f64;
    let t_mean = idx.iter().map(|&k| ts.time[k]).sum::<f64>() / count;
    let sxx: f64 = idx.iter().map(|&k| (ts.time[k] - t_mean).powi(2)).sum();

    let mut drift_slopes = Vec::new();
    let mut freq_ss = Vec::new();
    let mut order: Vec<usize> = (0..ts.nodes.len()).collect();
    order.sort_by_key(|&c| ts.nodes[c]);
    for c in order {
        let mean = idx.iter().map(|&k| ts.states[k][c]).sum::<f64>() / count;
        if ts.is_frequency[c] {
            freq_ss.push((ts.nodes[c], mean * ts.freq_scale));
        } else {
            let sxy: f64 = idx
                .iter()
                .map(|&k| (ts.time[k] - t_mean) * (ts.states[k][c] - mean))
                .sum();
            let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            drift_slopes.push((ts.nodes[c], slope));
        }
    }
    let u_ss = (0..ts.actuators.len())
        .map(|i| idx.iter().map(|&k| ts.control[k][i]).sum::<f64>() / count)
        .collect();
    Ok(SteadyState {
        window,
        drift_slopes,
        u_ss,
        freq_ss,
    })
}

/// Largest `|deviation|` over a node set and time interval, in reporting units.
pub fn peak_report(ts: &TimeSeries, nodes: &NodeSet, t_from: f64, t_to: f64) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::Precondition("peak over an empty node set".into()));
    }
    let t_end = ts.time.last().copied().unwrap_or(0.0);
    if t_from > t_to || t_from < -1e-12 || t_to > t_end + 1e-12 {
        return Err(Error::InvalidScenario(format!(
            "interval [{t_from}, {t_to}] outside [0, {t_end}]"
        )));
    }
    let mut peak: f64 = 0.0;
    for v in nodes {
        let trace = ts.reported(v)?;
        for (k, &t) in ts.time.iter().enumerate() {
            if t >= t_from - 1e-12 && t <= t_to + 1e-12 {
                peak = peak.max(trace[k].abs());
            }
        }
    }
    Ok(peak)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// `(re, im)` pairs sorted by decreasing real part.
    pub eigenvalues: Vec<(f64, f64)>,
    pub max_real: f64,
    pub stable: bool,
    pub near_zero: usize,
}

/// Eigenvalues of `E⁻¹ A_eff`, computed on the similar matrix
/// `E^{-1/2} A_eff E^{-1/2}` which is better scaled for diagonal `E`.
pub fn spectrum(sys: &DescriptorSystem, a_eff: &DMatrix<f64>) -> Result<Spectrum> {
    let big_n = sys.n_states();
    if a_eff.nrows() != big_n || a_eff.ncols() != big_n {
        return Err(Error::Dimension {
            expected: format!("{big_n}x{big_n}"),
            got: format!("{}x{}", a_eff.nrows(), a_eff.ncols()),
        });
    }
    let s: Vec<f64> = sys.e.iter().map(|x| 1.0 / x.sqrt()).collect();
    let scaled = DMatrix::from_fn(big_n, big_n, |i, j| s[i] * a_eff[(i, j)] * s[j]);
    let eig: Vec<Complex<f64>> = scaled
        .try_schur(1e-14, 0)
        .ok_or(Error::Eigen)?
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect();
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen);
    }
    let mut eigenvalues: Vec<(f64, f64)> = eig.iter().map(|z| (z.re, z.im)).collect();
    eigenvalues.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    let max_real = eigenvalues.first().map_or(f64::NEG_INFINITY, |e| e.0);
    let near_zero = eigenvalues
        .iter()
        .filter(|e| e.0.abs() <= NEAR_ZERO_TOL)
        .count();
    Ok(Spectrum {
        eigenvalues,
        max_real,
        stable: max_real <= STABILITY_TOL,
        near_zero,
    })
}
