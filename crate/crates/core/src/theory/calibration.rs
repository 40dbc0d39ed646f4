use crate::envs::{ControlAction, EnvKind, EnvSpec, SystemState};
use crate::gp::{model_input, GpDynamicsModel};
use crate::scalar::Real;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo + hi) / 2.0],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Full tensor grid over physical states and actions with `per_axis`
/// points per axis. Pendulum: `θ ∈ [−π, π]`, `ω ∈ [−6, 6]`, `u` over its
/// bounds. Cartpole: `p ∈ [−1, 1]`, `v ∈ [−2, 2]`, `θ ∈ [−π, π]`,
/// `ω ∈ [−6, 6]`, `u` over its bounds.
pub fn calibration_grid<T: Real>(spec: &EnvSpec<T>, per_axis: usize) -> Vec<(SystemState<T>, ControlAction<T>)> {
    let pi = std::f64::consts::PI;
    let mut axes: Vec<Vec<f64>> = match spec.kind() {
        EnvKind::Pendulum => vec![linspace(-pi, pi, per_axis), linspace(-6.0, 6.0, per_axis)],
        EnvKind::Cartpole => vec![
            linspace(-1.0, 1.0, per_axis),
            linspace(-2.0, 2.0, per_axis),
            linspace(-pi, pi, per_axis),
            linspace(-6.0, 6.0, per_axis),
        ],
    };
    let physical_dims = axes.len();
    for (lo, hi) in spec.action_low.iter().zip(&spec.action_high) {
        axes.push(linspace(lo.as_f64(), hi.as_f64(), per_axis));
    }
    let total: usize = axes.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    for _ in 0..total {
        let point: Vec<T> = idx.iter().zip(&axes).map(|(i, a)| T::lit(a[*i])).collect();
        let state = spec
            .state_from_physical(&point[..physical_dims])
            .expect("grid points are finite");
        out.push((state, ControlAction::from_slice(&point[physical_dims..])));
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coverage {
    /// Fraction of `(point, output)` pairs inside the band.
    pub fraction: f64,
    pub pairs: usize,
}

/// Fraction of `(z, j)` with `|μ_j(z) − f*_j(z)| ≤ β σ_j(z)` over `grid`,
/// where `f*` is the noiseless simulator step.
pub fn check_calibration<T: Real>(
    model: &GpDynamicsModel<T>,
    spec: &EnvSpec<T>,
    grid: &[(SystemState<T>, ControlAction<T>)],
    beta: T,
) -> Coverage {
    let mut inside = 0usize;
    let mut pairs = 0usize;
    for (s, a) in grid {
        let truth = spec.mean_step(s, a).expect("grid states are valid");
        let post = model.posterior(&model_input(s, a)).expect("grid inputs are finite");
        for j in 0..truth.dim() {
            pairs += 1;
            if (post.mean[j] - truth.0[j]).abs() <= beta * post.std[j] {
                inside += 1;
            }
        }
    }
    Coverage {
        fraction: if pairs == 0 { 1.0 } else { inside as f64 / pairs as f64 },
        pairs,
    }
}
