//! Central finite-difference gradient checking.

use super::{Graph, NodeId, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name and element index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// |a − n| / max(|a|, |n|, 1e-6): relative error with an absolute floor so
/// that exactly-zero gradients compare by absolute difference.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares backward gradients of every trainable parameter with central
/// differences `(f(p+h) − f(p−h)) / 2h`. `build` must construct the same
/// scalar loss deterministically on every call.
pub fn check_gradients<F>(store: &mut ParamStore<f64>, step: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<'_, f64>) -> Result<NodeId>,
{
    let grads = {
        let mut g = Graph::new(&*store);
        let loss = build(&mut g)?;
        g.backward(loss)?
    };
    let eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new(store);
        let loss = build(&mut g)?;
        Ok(g.value(loss)[0])
    };
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
    };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        if !store.get(id).trainable {
            continue;
        }
        let n = store.get(id).value.numel();
        let analytic: Vec<f64> = grads.get(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        for i in 0..n {
            let orig = store.get(id).value.data()[i];
            store.get_mut(id).value.data_mut()[i] = orig + step;
            let plus = eval(store)?;
            store.get_mut(id).value.data_mut()[i] = orig - step;
            let minus = eval(store)?;
            store.get_mut(id).value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            if !numeric.is_finite() {
                return Err(Error::NonFinite(format!("{}[{i}] numeric gradient", store.get(id).name)));
            }
            let err = relative_error(analytic[i], numeric);
            report.checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((store.get(id).name.clone(), i));
            }
        }
    }
    Ok(report)
}
