//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netdecouple::decouple::{
    self, default_sample_points, solve_ddp, solve_ddp_system, verify_numeric, DecouplingSolution,
};
use netdecouple::powergrid::{GridCase, GridModel};
use netdecouple::sim::{
    self, peak_report, simulate, spectrum, steady_state_report, Controller, Scenario, Step,
    TimeSeries,
};
use netdecouple::NodeSet;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn disturbances() -> NodeSet {
    NodeSet::from([22, 44])
}

fn targets() -> NodeSet {
    NodeSet::from([40, 41])
}

fn scenario(controller: Controller, dt: f64) -> Scenario {
    Scenario::new(
        vec![
            Step {
                node: 44,
                amplitude: 1.0,
                start: 0.0,
            },
            Step {
                node: 22,
                amplitude: 0.5,
                start: 20.0,
            },
        ],
        60.0,
    )
    .with_controller(controller)
    .with_dt(dt)
}

struct Setup {
    model: GridModel,
    solution: DecouplingSolution,
    solve_time: Duration,
}

impl Setup {
    fn new() -> Result<Self, String> {
        let start = Instant::now();
        let (model, solution) = solve_ddp(&GridCase::new_england_39(), &disturbances(), &targets())
            .map_err(|e| e.to_string())?;
        Ok(Self {
            model,
            solution,
            solve_time: start.elapsed(),
        })
    }

    fn closed_loop(&self) -> DMatrix<f64> {
        self.solution
            .feedback()
            .unwrap()
            .closed_loop(&self.model.system)
            .unwrap()
    }

    /// Generator frequency nodes unreachable from the disturbances in closed loop.
    fn decoupled_generators(&self) -> NodeSet {
        let sys = &self.model.system;
        decouple::decoupled_nodes(sys, &self.closed_loop(), &disturbances())
            .unwrap()
            .iter()
            .filter(|&v| sys.is_frequency_node(v))
            .collect()
    }

    fn run(&self, controller: Controller, dt: f64) -> Result<TimeSeries, String> {
        let fb = self.solution.feedback().map_err(|e| e.to_string())?;
        simulate(&self.model.system, &scenario(controller, dt), Some(&fb))
            .map_err(|e| e.to_string())
    }
}

fn criterion_1(s: &Setup) -> Outcome {
    let sol = &s.solution;
    ensure(
        sol.actuators == NodeSet::from([16]),
        format!("B = {}", sol.actuators),
    )?;
    ensure(
        sol.sensors == NodeSet::from([19, 21, 24]),
        format!("C = {}", sol.sensors),
    )?;
    ensure(
        s.solve_time < Duration::from_secs(1),
        format!("runtime {:?}", s.solve_time),
    )?;
    Ok(format!(
        "B = {}, C = {}, {:?}",
        sol.actuators, sol.sensors, s.solve_time
    ))
}

fn criterion_2(s: &Setup) -> Outcome {
    let reference = [55.3272, 78.7903, 181.4040];
    let gain = &s.solution.gain;
    ensure(
        gain.len() == 1 && gain[0].len() == 3,
        format!("G shape {gain:?}"),
    )?;
    for (g, r) in gain[0].iter().zip(reference) {
        ensure(
            (g - r).abs() <= 0.15 * r,
            format!("G entry {g} outside 15% of {r}"),
        )?;
    }
    // reactance-only floor with a flat voltage profile
    let mut flat = GridCase::new_england_39();
    for bus in &mut flat.buses {
        bus.v = 1.0;
    }
    let (flat_model, flat_sol) =
        solve_ddp(&flat, &disturbances(), &targets()).map_err(|e| e.to_string())?;
    let sys = &flat_model.system;
    let direct = [1.0 / 0.0195, 1.0 / 0.0135, 1.0 / 0.0059];
    for ((g, r), x) in flat_sol.gain[0].iter().zip(reference).zip(direct) {
        ensure(
            (x - r).abs() <= 0.15 * r,
            format!("reactance-only {x} outside 15% of {r}"),
        )?;
        ensure(
            (g - r).abs() <= 0.15 * r,
            format!("flat-profile G entry {g} outside 15% of {r}"),
        )?;
    }
    ensure(sys.n_states() == 49, "flat-profile model size")?;
    Ok(format!(
        "G = [{:.4}, {:.4}, {:.4}], flat = [{:.4}, {:.4}, {:.4}]",
        gain[0][0],
        gain[0][1],
        gain[0][2],
        flat_sol.gain[0][0],
        flat_sol.gain[0][1],
        flat_sol.gain[0][2]
    ))
}

fn criterion_3(s: &Setup) -> Outcome {
    let start = Instant::now();
    let ts = s.run(Controller::Ideal, 1e-3)?;
    let elapsed = start.elapsed();
    let dec = s.decoupled_generators();
    ensure(!dec.is_empty(), "no decoupled generators")?;
    let peak = peak_report(&ts, &dec, 0.0, 60.0).map_err(|e| e.to_string())?;
    ensure(peak <= 1e-6, format!("decoupled peak {peak:e} Hz"))?;
    let check = verify_numeric(
        &s.model.system,
        &s.closed_loop(),
        &disturbances(),
        &targets(),
        &default_sample_points(),
    )
    .map_err(|e| e.to_string())?;
    ensure(check.pass, format!("numeric residual {:e}", check.relative))?;
    ensure(
        elapsed < Duration::from_secs(30),
        format!("runtime {elapsed:?}"),
    )?;
    Ok(format!(
        "decoupled generators {dec}, peak {peak:e} Hz, residual {:e}, {elapsed:?}",
        check.relative
    ))
}

fn criterion_4(s: &Setup) -> Outcome {
    let ts = s.run(Controller::Ideal, 1e-3)?;
    let ss = steady_state_report(&ts, sim::DEFAULT_WINDOW).map_err(|e| e.to_string())?;
    ensure(ss.u_ss.len() == 1, "one actuator expected")?;
    let u = ss.u_ss[0];
    // u = -G y enters as +B u, so full compensation of +1.5 injected is u = -1.5
    ensure((u + 1.5).abs() <= 0.015, format!("u_ss = {u}"))?;
    Ok(format!("u_ss = {u:.6} p.u. (|u_ss| = sum of disturbances)"))
}

fn criterion_5(s: &Setup) -> Outcome {
    let expected = 1.5 / s.model.total_damping();
    // the slowest nonzero open-loop mode decays at about 0.09 1/s, so the
    // 60 s run is reported but the terminal slope is taken on a longer run
    let short = s.run(Controller::None, 1e-3)?;
    let short_ss = steady_state_report(&short, sim::DEFAULT_WINDOW).map_err(|e| e.to_string())?;
    let short_dev = short_ss
        .drift_slopes
        .iter()
        .map(|&(_, x)| (x - expected).abs() / expected)
        .fold(0.0, f64::max);

    let fb = s.solution.feedback().map_err(|e| e.to_string())?;
    let mut long = scenario(Controller::None, 1e-3);
    long.horizon = 120.0;
    let ts = simulate(&s.model.system, &long, Some(&fb)).map_err(|e| e.to_string())?;
    let ss = steady_state_report(&ts, sim::DEFAULT_WINDOW).map_err(|e| e.to_string())?;
    let mean = ss.mean_slope();
    let spread = ss.slope_spread();
    ensure(ss.drift_slopes.len() == 39, "one slope per bus")?;
    for &(node, slope) in &ss.drift_slopes {
        ensure(
            (slope - expected).abs() <= 0.01 * expected.abs(),
            format!("node {node} slope {slope:e}, expected {expected:e}"),
        )?;
    }
    ensure(spread <= 1e-6, format!("slope spread {spread:e}"))?;
    Ok(format!(
        "slope {mean:.6e} vs {expected:.6e}, spread {spread:.2e} (120 s run; 60 s run: worst node off by {:.2}%, spread {:.2e})",
        100.0 * short_dev,
        short_ss.slope_spread()
    ))
}

fn criterion_6(s: &Setup) -> Outcome {
    let ts = s.run(Controller::Filtered { tau: 1.0 }, 1e-3)?;
    let dec = s.decoupled_generators();
    let peak = peak_report(&ts, &dec, 20.0, 40.0).map_err(|e| e.to_string())?;
    ensure(
        (0.0025..=0.0075).contains(&peak),
        format!("peak {peak:.5} Hz"),
    )?;
    Ok(format!("peak after t = 20 s: {peak:.5} Hz"))
}

fn criterion_7(s: &Setup) -> Outcome {
    let sys = &s.model.system;
    let closed = spectrum(sys, &s.closed_loop()).map_err(|e| e.to_string())?;
    let open = spectrum(sys, &sys.a).map_err(|e| e.to_string())?;
    ensure(
        closed.max_real <= 1e-6,
        format!("closed-loop max Re {:e}", closed.max_real),
    )?;
    ensure(
        open.near_zero == 1,
        format!("open loop has {} near-zero modes", open.near_zero),
    )?;
    let others = open
        .eigenvalues
        .iter()
        .filter(|e| e.0.abs() > sim::NEAR_ZERO_TOL);
    ensure(
        others.clone().all(|e| e.0 < 0.0),
        "open-loop mode with positive real part",
    )?;
    Ok(format!(
        "closed max Re {:.3e} ({} near zero), open near-zero modes {}",
        closed.max_real, closed.near_zero, open.near_zero
    ))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut placements = 0;
    let mut infeasible = 0;
    let mut structural_passes = 0;
    let graphs = 600;
    for case in 0..graphs {
        let n = rng.random_range(2..=12);
        let p = rng.random_range(0.1..0.5);
        let mut g = common::random_graph(&mut rng, n, p);
        if rng.random_bool(0.3) {
            let adm: NodeSet = (1..=n).filter(|_| rng.random_bool(0.7)).collect();
            g.set_admissible(&adm).unwrap();
        }
        let nodes: Vec<usize> = (1..=n).collect();
        let ctx = |what: &str| format!("graph {case} ({n} nodes): {what}");

        // (a) fixed points against the lattice
        let z0 = common::random_subset(&mut rng, &nodes, n);
        let b = common::random_subset(&mut rng, &nodes, 3);
        let z = g.max_controlled_invariant(&z0, &b).unwrap();
        ensure(
            z == common::lattice_max_controlled(&g, &z0, &b),
            ctx("max controlled invariant"),
        )?;
        let s0 = common::random_subset(&mut rng, &nodes, 3);
        let c = common::random_subset(&mut rng, &nodes, 3);
        let s = g.min_conditioned_invariant(&s0, &c).unwrap();
        ensure(
            s == common::lattice_min_conditioned(&g, &s0, &c),
            ctx("min conditioned invariant"),
        )?;

        // (b), (c) placement
        let d = common::random_subset(&mut rng, &nodes, 2);
        let rest: Vec<usize> = nodes.iter().copied().filter(|v| !d.contains(*v)).collect();
        if rest.is_empty() {
            continue;
        }
        let t = common::random_subset(&mut rng, &rest, 2);
        let oracle = common::brute_force_cut_size(&g, &d, &t);
        match (g.min_actuator_placement(&d, &t), oracle) {
            (Ok(pl), Some(k)) => {
                placements += 1;
                ensure(
                    pl.actuators.len() == k,
                    ctx(&format!("cut {} vs oracle size {k}", pl.actuators)),
                )?;
                ensure(
                    g.out_boundary(&pl.core).unwrap() == pl.actuators,
                    ctx("B is not the out-boundary of the core"),
                )?;
                ensure(d.is_subset(&pl.core), ctx("D not inside the core"))?;
                ensure(
                    pl.actuators.is_subset(&g.admissible()),
                    ctx("inadmissible actuator"),
                )?;
            }
            (Err(netdecouple::Error::Infeasible { .. }), None) => infeasible += 1,
            (got, want) => return Err(ctx(&format!("placement {got:?} vs oracle {want:?}"))),
        }

        // (d) structural pass implies numeric pass, on random weights
        let sys = common::random_system(&mut rng, &g);
        let mut candidates = vec![(
            common::random_subset(&mut rng, &nodes, 3),
            common::random_subset(&mut rng, &nodes, 3),
        )];
        if d.is_subset(&g.admissible()) {
            if let Ok(sol) = solve_ddp_system(&sys, &d, &t) {
                candidates.push((sol.actuators, sol.sensors));
            }
        }
        for (bb, cc) in candidates {
            if !bb.is_disjoint(&cc) {
                continue;
            }
            if g.ddpof_structural_check(&d, &t, &bb, &cc).unwrap() {
                structural_passes += 1;
                let gain = decouple::synthesize_friend(&sys, &bb, &cc).unwrap();
                let a_cl = decouple::closed_loop(&sys, &bb, &cc, &gain).unwrap();
                let check = verify_numeric(&sys, &a_cl, &d, &t, &default_sample_points()).unwrap();
                ensure(
                    check.pass,
                    ctx(&format!(
                        "structural pass but residual {:e}",
                        check.relative
                    )),
                )?;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(
        elapsed < Duration::from_secs(120),
        format!("runtime {elapsed:?}"),
    )?;
    Ok(format!(
        "{graphs} graphs, {placements} feasible / {infeasible} infeasible placements, {structural_passes} structural passes, {elapsed:?}"
    ))
}

fn criterion_9(s: &Setup) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(2..=6);
        let net = common::random_network(&mut rng, n);
        let (eq, _, sys) =
            netdecouple::oscillator::linear_model(&net, 1e-13, 100).map_err(|e| e.to_string())?;
        let x0 = DVector::zeros(sys.n_states());
        let fd = common::jacobian_fd(|x| net.vector_field(&eq, x), &x0, 1e-6);
        let analytic = DMatrix::from_fn(sys.n_states(), sys.n_states(), |i, j| {
            sys.a[(i, j)] / sys.e[i]
        });
        worst = worst.max((fd - analytic).amax());
    }
    ensure(worst <= 1e-6, format!("Jacobian mismatch {worst:e}"))?;

    // second-order convergence against a dt/8 reference on the closed-loop run
    let dt = sim::DEFAULT_DT;
    let controller = Controller::Filtered { tau: 1.0 };
    let reference = s.run(controller, dt / 8.0)?;
    let coarse = s.run(controller, dt)?;
    let fine = s.run(controller, dt / 2.0)?;
    // grid point k of the coarse run is k * factor of a finer one
    let err = |ts: &TimeSeries, factor: usize| -> f64 {
        let mut e: f64 = 0.0;
        for k in 0..coarse.len() {
            for (x, y) in ts.states[k * factor].iter().zip(&reference.states[k * 8]) {
                e = e.max((x - y).abs());
            }
        }
        e
    };
    let e1 = err(&coarse, 1);
    let e2 = err(&fine, 2);
    let order = e1 / e2;
    ensure(
        (3.0..=5.0).contains(&order),
        format!("error ratio {order:.3} ({e1:e} / {e2:e})"),
    )?;
    Ok(format!(
        "Jacobian max error {worst:.2e}; error ratio {order:.3} ({e1:.2e} -> {e2:.2e})"
    ))
}

fn main() {
    let setup = Setup::new();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("PASS criterion {id} ({name}): {detail}"),
        Err(why) => {
            failures += 1;
            println!("FAIL criterion {id} ({name}): {why}");
        }
    };
    match &setup {
        Ok(s) => {
            report(1, "39-bus placement", criterion_1(s));
            report(2, "friend magnitudes", criterion_2(s));
            report(3, "exact decoupling", criterion_3(s));
            report(4, "steady-state compensation", criterion_4(s));
            report(5, "open-loop common drift", criterion_5(s));
            report(6, "filtered feedback peak", criterion_6(s));
            report(7, "stability", criterion_7(s));
        }
        Err(e) => {
            for (id, name) in [
                (1, "39-bus placement"),
                (2, "friend magnitudes"),
                (3, "exact decoupling"),
                (4, "steady-state compensation"),
                (5, "open-loop common drift"),
                (6, "filtered feedback peak"),
                (7, "stability"),
            ] {
                report(id, name, Err(format!("setup failed: {e}")));
            }
        }
    }
    report(8, "random-graph oracles", criterion_8());
    match &setup {
        Ok(s) => report(9, "linearization and integrator order", criterion_9(s)),
        Err(e) => report(
            9,
            "linearization and integrator order",
            Err(format!("setup failed: {e}")),
        ),
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
