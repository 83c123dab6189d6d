//! Adjoint-gradient ascent over piecewise-constant amplitudes (GRAPE).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::Execution;
use crate::linalg::{inner, CMatrix, CVector, HermitianEigen};
use crate::propagation::BoxModel;

/// Knobs of the multistart ascent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrapeSettings {
    pub multistarts: usize,
    pub iterations: usize,
    /// Adam step size as a fraction of the rate bound.
    pub learning_rate: f64,
    /// Random starts are drawn uniformly from `±init_scale * r`.
    pub init_scale: f64,
    /// Stop once `1 - fidelity` falls below this.
    pub infidelity_goal: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for GrapeSettings {
    fn default() -> Self {
        Self {
            multistarts: 8,
            iterations: 400,
            learning_rate: 0.05,
            init_scale: 0.5,
            infidelity_goal: 1e-12,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

/// Best amplitudes of one start.
#[derive(Debug, Clone, PartialEq)]
pub struct StartOutcome {
    pub index: usize,
    pub amplitudes: Vec<f64>,
    pub fidelity: f64,
    pub iterations: usize,
}

pub(crate) struct Objective<'a> {
    pub model: &'a BoxModel,
    pub initial: &'a CVector,
    pub target: &'a CVector,
    pub dt: f64,
    pub bound: f64,
}

impl Objective<'_> {
    fn segment_eigen(&self, v: f64) -> HermitianEigen {
        HermitianEigen::new(&self.model.auxiliary_hamiltonian(v))
    }

    /// Overlap `A = <target, U psi0>` and `d|A|^2 / dv_k`.
    pub fn value_and_gradient(&self, v: &[f64]) -> (f64, Vec<f64>) {
        let eig: Vec<HermitianEigen> = v.iter().map(|&x| self.segment_eigen(x)).collect();
        let props: Vec<CMatrix> = eig.iter().map(|e| e.propagator(self.dt)).collect();

        let mut forward = Vec::with_capacity(v.len() + 1);
        forward.push(self.initial.clone());
        for u in &props {
            let next = u * forward.last().expect("non-empty");
            forward.push(next);
        }
        let overlap = inner(self.target, forward.last().expect("non-empty"));

        // dH/dv = -V / ell0
        let dh = self.model.interaction()
            * num_complex::Complex64::new(-1.0 / self.model.params.ell0, 0.0);
        let mut grad = vec![0.0; v.len()];
        let mut costate = self.target.clone();
        for k in (0..v.len()).rev() {
            let du = eig[k].propagator_derivative(self.dt, &dh);
            let d_overlap = inner(&costate, &(du * &forward[k]));
            grad[k] = 2.0 * (overlap.conj() * d_overlap).re;
            costate = props[k].adjoint() * costate;
        }
        (overlap.norm(), grad)
    }

    pub fn fidelity(&self, v: &[f64]) -> f64 {
        let mut psi = self.initial.clone();
        for &x in v {
            psi = self.segment_eigen(x).propagator(self.dt) * psi;
        }
        inner(self.target, &psi).norm()
    }

    fn clip(&self, x: f64) -> f64 {
        let limit = self.bound * (1.0 - 1e-3);
        x.clamp(-limit, limit)
    }

    /// Projected Adam ascent on `|A|^2` from `start`.
    pub fn ascend(&self, index: usize, start: Vec<f64>, settings: &GrapeSettings) -> StartOutcome {
        let (b1, b2, eps) = (0.9, 0.999, 1e-12);
        let lr = settings.learning_rate * self.bound;
        let mut v: Vec<f64> = start.into_iter().map(|x| self.clip(x)).collect();
        let mut m = vec![0.0; v.len()];
        let mut s = vec![0.0; v.len()];
        let mut best = (f64::NEG_INFINITY, v.clone());
        let mut stalled = 0;
        let mut used = 0;
        for it in 1..=settings.iterations {
            used = it;
            let (fid, grad) = self.value_and_gradient(&v);
            if fid > best.0 + 1e-13 {
                best = (fid, v.clone());
                stalled = 0;
            } else {
                stalled += 1;
            }
            if 1.0 - fid <= settings.infidelity_goal || stalled >= 60 {
                break;
            }
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm < 1e-14 {
                break;
            }
            for k in 0..v.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
                s[k] = b2 * s[k] + (1.0 - b2) * grad[k] * grad[k];
                let mh = m[k] / (1.0 - b1.powi(it as i32));
                let sh = s[k] / (1.0 - b2.powi(it as i32));
                v[k] = self.clip(v[k] + lr * mh / (sh.sqrt() + eps));
            }
        }
        let last = self.fidelity(&v);
        if last > best.0 {
            best = (last, v);
        }
        StartOutcome {
            index,
            amplitudes: best.1,
            fidelity: best.0,
            iterations: used,
        }
    }
}

/// Run all starts (start 0 is the zero control) and return the best, ties broken
/// by the lowest start index.
pub(crate) fn multistart(
    objective: &Objective<'_>,
    segments: usize,
    settings: &GrapeSettings,
) -> StartOutcome {
    let starts: Vec<(usize, Vec<f64>)> = (0..settings.multistarts.max(1))
        .map(|i| {
            if i == 0 {
                (i, vec![0.0; segments])
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(i as u64));
                let a = settings.init_scale * objective.bound;
                (i, (0..segments).map(|_| rng.gen_range(-a..=a)).collect())
            }
        })
        .collect();
    let outcomes = settings
        .execution
        .map(starts, |(i, v0)| objective.ascend(i, v0, settings));
    outcomes
        .into_iter()
        .fold(None::<StartOutcome>, |acc, o| match acc {
            Some(b) if b.fidelity >= o.fidelity => Some(b),
            _ => Some(o),
        })
        .expect("at least one start")
}
