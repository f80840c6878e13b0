use super::ParamSet;

/// Central-difference gradient of `f` at `w`, one coordinate at a time.
///
/// This is the verification oracle for the tape; it shares no code with the reverse sweep.
pub fn finite_diff_grad<F>(f: F, w: &ParamSet, h: f64) -> ParamSet
where
    F: Fn(&ParamSet) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = w.clone();
    let mut grad = ParamSet::zeros_like(w);
    for ti in 0..w.tensors().len() {
        for i in 0..w.tensors()[ti].len() {
            let original = w.tensors()[ti].data()[i];
            probe.tensors_mut()[ti].data_mut()[i] = original + h;
            let up = f(&probe);
            probe.tensors_mut()[ti].data_mut()[i] = original - h;
            let down = f(&probe);
            probe.tensors_mut()[ti].data_mut()[i] = original;
            grad.tensors_mut()[ti].data_mut()[i] = (up - down) / (2.0 * h);
        }
    }
    grad
}

/// `||a - b|| / max(||a||, ||b||, 1e-12)`
pub fn relative_error(a: &ParamSet, b: &ParamSet) -> f64 {
    let diff = a.sub(b).norm();
    diff / a.norm().max(b.norm()).max(1e-12)
}
