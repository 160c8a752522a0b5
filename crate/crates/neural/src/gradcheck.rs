//! Central finite-difference gradient verification.
//!
//! The checker only ever calls the forward pass, so it stays independent of
//! the reverse-mode code it is used to validate.

use std::collections::BTreeMap;

use crate::store::ParamStore;
use crate::tensor::Tensor;
use crate::Error;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst (parameter, index, analytic, numeric, error) seen.
    pub worst: Option<(String, usize, f64, f64, f64)>,
    pub max_error: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self) -> bool {
        self.worst.is_none()
    }
}

/// Compare analytic gradients against central differences of `loss_fn`.
///
/// An entry fails when |analytic - numeric| exceeds `atol + rtol * max(|a|,
/// |n|)`. `eps` is the half-step of the central difference.
pub fn check_gradients<F>(
    store: &ParamStore,
    analytic: &BTreeMap<String, Tensor>,
    mut loss_fn: F,
    eps: f64,
    rtol: f64,
    atol: f64,
) -> Result<GradCheckReport, Error>
where
    F: FnMut(&ParamStore) -> Result<f64, Error>,
{
    let mut report = GradCheckReport {
        worst: None,
        max_error: 0.0,
        checked: 0,
    };
    let mut work = store.clone();
    for name in store.names().map(str::to_string).collect::<Vec<_>>() {
        let base = store.get(&name)?.clone();
        let grad = analytic
            .get(&name)
            .ok_or_else(|| Error::UnknownParam { name: name.clone() })?;
        for i in 0..base.data.len() {
            let mut plus = base.clone();
            plus.data[i] += eps;
            work.set(&name, plus)?;
            let up = loss_fn(&work)?;

            let mut minus = base.clone();
            minus.data[i] -= eps;
            work.set(&name, minus)?;
            let down = loss_fn(&work)?;

            work.set(&name, base.clone())?;

            let numeric = (up - down) / (2.0 * eps);
            let a = grad.data[i];
            let err = (a - numeric).abs();
            let tol = atol + rtol * a.abs().max(numeric.abs());
            report.checked += 1;
            let rel = err / a.abs().max(numeric.abs()).max(1e-12);
            if rel > report.max_error {
                report.max_error = rel;
            }
            if err > tol && report.worst.as_ref().is_none_or(|w| err > w.4) {
                report.worst = Some((name.clone(), i, a, numeric, err));
            }
        }
    }
    Ok(report)
}
