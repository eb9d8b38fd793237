//! Fixed-step integration for non-Lipschitz right-hand sides with
//! settling detection.
//!
//! Classical four-stage Runge-Kutta with a fixed step: adaptive error
//! estimators misbehave on rational-power fields near the origin, so the
//! step is merely halved once inside a small ball, and the state is
//! clamped to exactly zero once it is deep inside the settling tolerance
//! (the origin is absorbing for these systems). Settling is declared at
//! the first entry into the tolerance ball that persists for a dwell
//! window, which guards against chattering crossings.

use thiserror::Error;

use crate::system::DynSystem;

/// Evaluable right-hand side.
pub trait Rhs {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], dx: &mut [f64]);
}

/// A parsed system with the input pinned to a constant (usually zero).
pub struct Autonomous<'a> {
    pub sys: &'a DynSystem,
    pub input: Vec<f64>,
}

impl<'a> Autonomous<'a> {
    pub fn new(sys: &'a DynSystem) -> Self {
        Autonomous {
            input: vec![0.0; sys.ninputs()],
            sys,
        }
    }
}

impl Rhs for Autonomous<'_> {
    fn dim(&self) -> usize {
        self.sys.nstates()
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        let v = self.sys.eval_rhs(x, &self.input).expect("dimensions fixed");
        dx.copy_from_slice(&v);
    }
}

/// Closure-backed right-hand side.
pub struct FnRhs<F: Fn(&[f64], &mut [f64])> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> Rhs for FnRhs<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        (self.f)(x, dx)
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub dt: f64,
    pub t_max: f64,
    pub settle_tol: f64,
    /// Settling must persist this long to count.
    pub dwell: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            dt: 1e-4,
            t_max: 10.0,
            settle_tol: 1e-6,
            dwell: 0.1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("state became non-finite at t = {t:.6} (step {step})")]
    NonFinite { t: f64, step: usize },
}

/// Recorded trajectory with optional observations.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Lyapunov values along the trajectory, when attached.
    pub v: Option<Vec<f64>>,
    /// Control values along the trajectory, when attached.
    pub u: Option<Vec<Vec<f64>>>,
    pub settle_time: Option<f64>,
    pub settle_tol: f64,
    pub dwell: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("nonempty trajectory")
    }

    /// Attach per-step observations computed from the states.
    pub fn observe_v(&mut self, f: impl Fn(&[f64]) -> f64) {
        self.v = Some(self.states.iter().map(|x| f(x)).collect());
    }

    pub fn observe_u(&mut self, f: impl Fn(&[f64]) -> Vec<f64>) {
        self.u = Some(self.states.iter().map(|x| f(x)).collect());
    }

    /// CSV rendering: `t,x1,...,xn[,V][,u1,...]`, one row per step,
    /// optionally keeping every `subsample`-th row (the last row is
    /// always kept).
    pub fn to_csv(&self, state_names: &[String], subsample: usize) -> String {
        let stride = subsample.max(1);
        let mut out = String::new();
        out.push('t');
        for n in state_names {
            out.push(',');
            out.push_str(n);
        }
        if self.v.is_some() {
            out.push_str(",V");
        }
        if let Some(u) = &self.u {
            for j in 0..u.first().map_or(0, |r| r.len()) {
                out.push_str(&format!(",u{}", j + 1));
            }
        }
        out.push('\n');
        let last = self.times.len() - 1;
        for k in 0..self.times.len() {
            if k % stride != 0 && k != last {
                continue;
            }
            out.push_str(&format!("{:.16e}", self.times[k]));
            for v in &self.states[k] {
                out.push_str(&format!(",{v:.16e}"));
            }
            if let Some(vs) = &self.v {
                out.push_str(&format!(",{:.16e}", vs[k]));
            }
            if let Some(us) = &self.u {
                for v in &us[k] {
                    out.push_str(&format!(",{v:.16e}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn rk4_step(rhs: &dyn Rhs, x: &[f64], dt: f64, scratch: &mut [Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let (k1, k2, k3, k4, tmp) = {
        let (a, rest) = scratch.split_at_mut(1);
        let (b, rest) = rest.split_at_mut(1);
        let (c, rest) = rest.split_at_mut(1);
        let (d, rest) = rest.split_at_mut(1);
        (
            &mut a[0],
            &mut b[0],
            &mut c[0],
            &mut d[0],
            &mut rest[0],
        )
    };
    rhs.eval(x, k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    rhs.eval(tmp, k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    rhs.eval(tmp, k3);
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    rhs.eval(tmp, k4);
    (0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrate from `x0` and detect settling.
pub fn integrate(rhs: &dyn Rhs, x0: &[f64], opts: &SimOptions) -> Result<Trajectory, SimError> {
    assert!(opts.dt > 0.0 && opts.t_max > 0.0);
    let n = rhs.dim();
    assert_eq!(x0.len(), n, "initial state dimension mismatch");
    let mut scratch = vec![vec![0.0; n]; 5];

    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let mut t = 0.0;
    let mut x = x0.to_vec();
    let mut entered: Option<f64> = if norm(&x) <= opts.settle_tol {
        Some(0.0)
    } else {
        None
    };
    let mut confirmed: Option<f64> = None;
    let mut step = 0usize;

    while t < opts.t_max - 1e-12 {
        let r = norm(&x);
        // soften the non-Lipschitz field close to the origin
        let dt = if r < 10.0 * opts.settle_tol {
            0.5 * opts.dt
        } else {
            opts.dt
        }
        .min(opts.t_max - t);
        let mut next = if r == 0.0 {
            x.clone() // absorbed
        } else {
            rk4_step(rhs, &x, dt, &mut scratch)
        };
        step += 1;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { t: t + dt, step });
        }
        // absorbing origin
        if norm(&next) < opts.settle_tol / 10.0 {
            next.iter_mut().for_each(|v| *v = 0.0);
        }
        t += dt;
        x = next;
        times.push(t);
        states.push(x.clone());

        let inside = norm(&x) <= opts.settle_tol;
        match (entered, inside) {
            (None, true) => entered = Some(t),
            (Some(_), false) => entered = None,
            _ => {}
        }
        if confirmed.is_none() {
            if let Some(te) = entered {
                if t - te >= opts.dwell {
                    confirmed = Some(te);
                }
            }
        }
    }

    Ok(Trajectory {
        times,
        states,
        v: None,
        u: None,
        settle_time: confirmed,
        settle_tol: opts.settle_tol,
        dwell: opts.dwell,
    })
}

/// Batch of integrations, deterministic order.
pub fn sweep(
    rhs: &dyn Rhs,
    initial: &[Vec<f64>],
    opts: &SimOptions,
) -> Vec<Result<Trajectory, SimError>> {
    initial.iter().map(|x0| integrate(rhs, x0, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{bundled, parse_system};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_root_rhs() -> impl Rhs {
        FnRhs {
            dim: 1,
            f: |x: &[f64], dx: &mut [f64]| {
                dx[0] = -crate::system::sign0(x[0]) * x[0].abs().powf(1.0 / 3.0);
            },
        }
    }

    #[test]
    fn cube_root_settles_at_closed_form_time() {
        // exact settling time from x0 = 1 is 3/2
        let traj = integrate(&cube_root_rhs(), &[1.0], &SimOptions {
            t_max: 3.0,
            ..SimOptions::default()
        })
        .unwrap();
        let t = traj.settle_time.expect("settles");
        assert!((1.48..=1.62).contains(&t), "settle at {t}");
    }

    #[test]
    fn exponential_decay_never_reaches_tolerance() {
        let rhs = FnRhs {
            dim: 1,
            f: |x: &[f64], dx: &mut [f64]| dx[0] = -x[0],
        };
        for tol in [1e-9, 1e-6] {
            let traj = integrate(&rhs, &[1.0], &SimOptions {
                t_max: 5.0,
                settle_tol: tol,
                ..SimOptions::default()
            })
            .unwrap();
            assert!(traj.settle_time.is_none(), "tol {tol}");
        }
    }

    #[test]
    fn zero_initial_state_settles_immediately() {
        let traj = integrate(&cube_root_rhs(), &[0.0], &SimOptions::default()).unwrap();
        assert_eq!(traj.settle_time, Some(0.0));
    }

    #[test]
    fn sweep_is_deterministic() {
        let sys = parse_system(bundled::EX1).unwrap();
        let rhs = Autonomous::new(&sys);
        let x0 = vec![vec![0.4, -0.3]; 3];
        let out = sweep(&rhs, &x0, &SimOptions {
            t_max: 1.0,
            ..SimOptions::default()
        });
        let a = out[0].as_ref().unwrap();
        for other in &out[1..] {
            let b = other.as_ref().unwrap();
            assert_eq!(a.states, b.states);
        }
    }

    #[test]
    fn step_halving_convergence() {
        // the fixed-step chatter amplitude near the origin scales like
        // dt^(3/2) for the cube-root field, so the tolerance must sit
        // above it for both step sizes
        let run = |dt: f64| {
            integrate(&cube_root_rhs(), &[1.0], &SimOptions {
                dt,
                t_max: 3.0,
                settle_tol: 1e-4,
                ..SimOptions::default()
            })
            .unwrap()
            .settle_time
            .unwrap()
        };
        let t1 = run(1e-3);
        let t2 = run(5e-4);
        assert!((t1 - t2).abs() < 2e-3, "settle {t1} vs {t2}");
    }

    #[test]
    fn bundled_systems_settle() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let sys = parse_system(bundled::EX1).unwrap();
        let rhs = Autonomous::new(&sys);
        for _ in 0..10 {
            let x0 = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let traj = integrate(&rhs, &x0, &SimOptions {
                dt: 1e-3,
                t_max: 20.0,
                settle_tol: 1e-5,
                ..SimOptions::default()
            })
            .unwrap();
            assert!(traj.settle_time.is_some(), "no settling from {x0:?}");
        }

        let st = parse_system(bundled::SUPERTWIST).unwrap();
        let rhs = Autonomous::new(&st);
        for s0 in [1.0, -1.0] {
            let traj = integrate(&rhs, &[s0, 0.0], &SimOptions {
                dt: 1e-4,
                t_max: 10.0,
                settle_tol: 1e-5,
                ..SimOptions::default()
            })
            .unwrap();
            assert!(traj.settle_time.is_some(), "super-twisting from {s0}");
        }
    }

    #[test]
    fn energy_consistency_along_trajectory() {
        // numerically differenced V matches the Lie derivative away from
        // the origin ball
        let sys = parse_system(bundled::EX1).unwrap();
        let rs = crate::recast::recast(&sys).unwrap();
        let x1 = crate::poly::Polynomial::var(4, 0);
        let x2 = crate::poly::Polynomial::var(4, 1);
        let v = x1
            .pow(2)
            .scale(4.945)
            .add(&x1.mul(&x2).scale(1.159))
            .add(&x2.pow(2).scale(4.494));
        let lie = rs.lie_derivative(&v).unwrap();

        let rhs = Autonomous::new(&sys);
        let dt = 1e-5;
        let traj = integrate(&rhs, &[0.6, -0.4], &SimOptions {
            dt,
            t_max: 0.5,
            ..SimOptions::default()
        })
        .unwrap();
        let vals: Vec<f64> = traj
            .states
            .iter()
            .map(|x| v.eval(&rs.extend_point(x)))
            .collect();
        let mut checked = 0;
        for k in (1..traj.states.len() - 1).step_by(500) {
            let x = &traj.states[k];
            if norm(x) < 0.05 || x.iter().any(|c| c.abs() < 1e-2) {
                continue; // slack cusp hyperplanes and the origin ball
            }
            let numeric = (vals[k + 1] - vals[k - 1]) / (2.0 * dt);
            let xt = rs.extend_point(x);
            let analytic = lie.eval(&xt);
            assert!(
                (numeric - analytic).abs() <= 1e-4 * (1.0 + analytic.abs()),
                "t={}: {numeric} vs {analytic}",
                traj.times[k]
            );
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn csv_shape() {
        let traj = integrate(&cube_root_rhs(), &[1.0], &SimOptions {
            dt: 0.1,
            t_max: 0.5,
            ..SimOptions::default()
        })
        .unwrap();
        let csv = traj.to_csv(&["x1".to_string()], 1);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1");
        assert_eq!(lines.len(), traj.times.len() + 1);
    }
}
