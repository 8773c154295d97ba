//! Central finite-difference comparison against the tape gradients.

use super::{ParamSet, Tape, TensorError, Var};

/// Step used for the central differences.
pub const FD_STEP: f64 = 1e-5;

/// The error of a coordinate is `|autodiff - numeric| / max(FD_FLOOR, |numeric|)`,
/// so gradients below one are compared absolutely.
pub const FD_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    /// Largest error and the parameter/coordinate where it occurred.
    pub max_rel_error: f64,
    /// Largest `|autodiff - numeric|`.
    pub max_abs_error: f64,
    pub worst: Option<(String, usize)>,
    /// Tape and finite-difference gradients at `worst`.
    pub worst_values: (f64, f64),
    pub coordinates: usize,
}

/// Compares the tape gradient of `loss` with central differences for every
/// coordinate of every parameter accepted by `filter`.
///
/// `loss` receives a fresh tape and the parameters bound in slot order.
pub fn gradcheck<F>(params: &ParamSet, filter: impl Fn(&str) -> bool, loss: F) -> Result<GradcheckReport, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let out = loss(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let eval = |p: &ParamSet| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let out = loss(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };
    let mut probe = params.clone();
    let mut report = GradcheckReport { max_rel_error: 0.0, max_abs_error: 0.0, worst: None, worst_values: (0.0, 0.0), coordinates: 0 };
    for (slot, name) in params.names().iter().enumerate() {
        if !filter(name) {
            continue;
        }
        let ad = grads.get_or_zeros(vars[slot]);
        for i in 0..params.tensors()[slot].len() {
            let orig = params.tensors()[slot].data()[i];
            probe.tensors_mut()[slot].data_mut()[i] = orig + FD_STEP;
            let up = eval(&probe)?;
            probe.tensors_mut()[slot].data_mut()[i] = orig - FD_STEP;
            let down = eval(&probe)?;
            probe.tensors_mut()[slot].data_mut()[i] = orig;
            let fd = (up - down) / (2.0 * FD_STEP);
            let a = ad.data()[i];
            let err = (a - fd).abs() / fd.abs().max(FD_FLOOR);
            report.coordinates += 1;
            report.max_abs_error = report.max_abs_error.max((a - fd).abs());
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err.max(report.max_rel_error);
                report.worst = Some((name.clone(), i));
                report.worst_values = (a, fd);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn quadratic_passes() {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap());
        let r = gradcheck(&p, |_| true, |t, v| {
            let sq = t.mul(v[0], v[0])?;
            t.sum(sq)
        })
        .unwrap();
        assert_eq!(r.coordinates, 3);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }

    #[test]
    fn filter_skips_parameters() {
        let mut p = ParamSet::new();
        p.insert("a", Tensor::scalar(1.0));
        p.insert("b", Tensor::scalar(2.0));
        let r = gradcheck(&p, |n| n == "b", |t, v| t.mul(v[0], v[1])).unwrap();
        assert_eq!(r.coordinates, 1);
    }
}
