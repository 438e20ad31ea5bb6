//! Post-hoc relabelling: classes are ordered by ascending value of one
//! longitudinal coefficient (by default the second, the time slope).

use crate::model::types::{ModelSpec, ParamState};

/// Coefficient used for ordering when none is configured.
pub fn default_relabel_coef(spec: &ModelSpec) -> usize {
    if spec.dim_x2 > 1 {
        1
    } else {
        0
    }
}

/// `perm[new] = old` sorting classes by `beta_k[coef]`.
pub fn relabel_permutation(state: &ParamState, coef: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..state.n_classes()).collect();
    perm.sort_by(|&a, &b| state.beta[a][coef].total_cmp(&state.beta[b][coef]));
    perm
}

/// Applies `perm[new] = old` to every class-indexed quantity and the labels.
///
/// Under the reference-class constraint the membership coefficients are
/// re-expressed against the new last class, which leaves every membership
/// probability unchanged.
pub fn apply_permutation(state: &mut ParamState, spec: &ModelSpec, perm: &[usize]) {
    if perm.iter().enumerate().all(|(a, &b)| a == b) {
        return;
    }
    let pick = |v: &Vec<Vec<f64>>| perm.iter().map(|&o| v[o].clone()).collect::<Vec<_>>();
    state.beta = pick(&state.beta);
    state.omega = pick(&state.omega);
    state.delta = pick(&state.delta);
    state.lambda0 = pick(&state.lambda0);
    state.tau = perm.iter().map(|&o| state.tau[o]).collect();
    let mut xi = pick(&state.xi);
    if spec.reference_class {
        let last = xi.last().cloned().unwrap_or_default();
        for row in xi.iter_mut() {
            for (x, r) in row.iter_mut().zip(&last) {
                *x -= r;
            }
        }
    }
    state.xi = xi;
    let mut inverse = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    for labs in state.labels.iter_mut() {
        for r in labs.iter_mut() {
            *r = inverse[*r];
        }
    }
}

/// Relabels one draw; a no-op when classes have different baseline grids.
pub fn relabel_draw(state: &mut ParamState, spec: &ModelSpec, coef: usize) -> Vec<usize> {
    if !spec.shares_baseline_grid() || coef >= spec.dim_x2 {
        return (0..spec.n_classes).collect();
    }
    let perm = relabel_permutation(state, coef);
    apply_permutation(state, spec, &perm);
    perm
}
