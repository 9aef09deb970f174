//! Central-finite-difference gradient checking against a scalar loss
//! function of the parameter store. Used by tests across the workspace.

use crate::store::ParamStore;

/// Relative error with a scale floor so near-zero gradients do not blow up
/// the ratio.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Worst relative error per parameter.
#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub worst_rel: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Checks every component of every parameter selected by `filter`.
///
/// The analytic gradients must already be accumulated in the store (run the
/// forward/backward once before calling). `loss_fn` must be a deterministic
/// function of the store (freeze any sampling noise).
pub fn check_params<F>(
    store: &mut ParamStore,
    step: f64,
    floor: f64,
    filter: impl Fn(&str) -> bool,
    mut loss_fn: F,
) -> Vec<ParamCheck>
where
    F: FnMut(&ParamStore) -> f64,
{
    let names: Vec<String> = store
        .names()
        .filter(|n| filter(n))
        .map(|s| s.to_string())
        .collect();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let n = store.value(&name).numel();
        let mut worst = ParamCheck {
            name: name.clone(),
            worst_rel: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..n {
            let analytic = store.param(&name).grad.data()[i];
            let original = store.value(&name).data()[i];
            store.param_mut(&name).value.data_mut()[i] = original + step;
            let plus = loss_fn(store);
            store.param_mut(&name).value.data_mut()[i] = original - step;
            let minus = loss_fn(store);
            store.param_mut(&name).value.data_mut()[i] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let rel = relative_error(analytic, numeric, floor);
            if rel > worst.worst_rel {
                worst.worst_rel = rel;
                worst.worst_index = i;
                worst.analytic = analytic;
                worst.numeric = numeric;
            }
        }
        out.push(worst);
    }
    out
}
