//! Projected Adam on the Stiefel manifold for problems of the form
//! `min_V max_e g_e(V)` with every `g_e` affine in `Tr(VᵀA_eV)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::optim::{adam_minimize, AdamOptions};
use crate::linalg::{haar_frame, quad_trace, stiefel_project, Frame};
use crate::scalar::Real;

use super::SolverConfig;

/// Learning-rate halvings allowed before a plateau ends the run.
const MAX_DECAYS: usize = 10;

/// `h(V) = offset + scale · Tr(VᵀAV)`.
#[derive(Debug, Clone)]
pub(crate) struct AffineTerm<T: Real> {
    pub offset: T,
    pub scale: T,
    pub matrix: DMatrix<T>,
}

impl<T: Real> AffineTerm<T> {
    fn value(&self, v: &DMatrix<T>) -> T {
        self.offset + self.scale * quad_trace(&self.matrix, v)
    }
}

/// Either `min_V max_e h_e(V)` or `max_V min_e h_e(V)`.
#[derive(Debug, Clone)]
pub(crate) struct AffineProblem<T: Real> {
    terms: Vec<AffineTerm<T>>,
    maximize: bool,
    dim: usize,
}

impl<T: Real> AffineProblem<T> {
    pub fn new(terms: Vec<AffineTerm<T>>, maximize: bool) -> Result<Self> {
        let dim = terms
            .first()
            .map(|t| t.matrix.nrows())
            .ok_or_else(|| Error::InvalidInput("worst-case problem has no terms".into()))?;
        Ok(Self {
            terms,
            maximize,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn sign(&self) -> T {
        if self.maximize {
            -T::one()
        } else {
            T::one()
        }
    }

    /// Signed worst value (always to be minimized) and its smallest active index.
    fn signed_worst(&self, v: &DMatrix<T>) -> (T, usize) {
        let sign = self.sign();
        let mut best = (sign * self.terms[0].value(v), 0);
        for (e, t) in self.terms.iter().enumerate().skip(1) {
            let g = sign * t.value(v);
            if g > best.0 {
                best = (g, e);
            }
        }
        best
    }

    /// Worst-case value in the problem's own orientation.
    pub fn worst(&self, v: &DMatrix<T>) -> T {
        self.sign() * self.signed_worst(v).0
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PgdOutcome<T: Real> {
    pub frame: Frame<T>,
    pub iterations: usize,
    pub restart_index: usize,
    pub restart_values: Vec<T>,
}

struct Run<T: Real> {
    frame: Frame<T>,
    signed: T,
    iterations: usize,
}

pub(crate) fn solve<T: Real>(problem: &AffineProblem<T>, k: usize, cfg: &SolverConfig) -> Result<PgdOutcome<T>> {
    cfg.validate()?;
    let p = problem.dim();
    if k == p {
        let frame = Frame::identity_block(p, k)?;
        let value = problem.worst(frame.matrix());
        return Ok(PgdOutcome {
            frame,
            iterations: 0,
            restart_index: 0,
            restart_values: vec![value],
        });
    }
    let mut runs = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let mut rng = cfg.seed.derive(r as u64).rng();
        let init = haar_frame::<T>(p, k, &mut rng)?;
        runs.push(run(problem, init, cfg)?);
    }
    let sign = problem.sign();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.signed < runs[best].signed {
            best = i;
        }
    }
    let restart_values = runs.iter().map(|r| sign * r.signed).collect();
    let chosen = runs.swap_remove(best);
    Ok(PgdOutcome {
        frame: chosen.frame,
        iterations: chosen.iterations,
        restart_index: best,
        restart_values,
    })
}

/// Component of `g` tangent to the Stiefel manifold at `v`: `g − V·sym(VᵀG)`.
///
/// The radial part of the gradient does not change the objective on the
/// manifold but would be rescaled coordinatewise by Adam into a spurious
/// tangential step.
pub(crate) fn tangent<T: Real>(v: &DMatrix<T>, g: DMatrix<T>) -> DMatrix<T> {
    let vtg = v.tr_mul(&g);
    let sym = (&vtg + vtg.transpose()) * T::cast(0.5);
    g - v * sym
}

pub(crate) fn adam_options(cfg: &SolverConfig) -> AdamOptions {
    AdamOptions {
        max_iters: cfg.max_iters,
        lr: cfg.step_size,
        beta1: cfg.adam_beta1,
        beta2: cfg.adam_beta2,
        eps: cfg.adam_eps,
        tol: cfg.tol_objective,
        window: cfg.plateau_window,
        max_decays: MAX_DECAYS,
    }
}

fn run<T: Real>(problem: &AffineProblem<T>, init: Frame<T>, cfg: &SolverConfig) -> Result<Run<T>> {
    let two = T::cast(2.0);
    let out = adam_minimize(
        init.into_matrix(),
        &adam_options(cfg),
        |v| {
            let (signed, active) = problem.signed_worst(v);
            let term = &problem.terms[active];
            let euclid = &term.matrix * v * (problem.sign() * term.scale * two);
            Ok((signed, tangent(v, euclid)))
        },
        |m| stiefel_project(&m).map(Frame::into_matrix),
    )?;
    Ok(Run {
        frame: Frame::from_orthonormal_unchecked(out.x),
        signed: out.value,
        iterations: out.iterations,
    })
}
