//! Fixed-step classical Runge–Kutta.

/// Integrates `y' = f(y)` with `steps` RK4 steps of size `h`, calling
/// `observe(step, y)` after every `every` steps (and once at step 0).
pub fn rk4<F, O>(f: F, y: &mut [f64], h: f64, steps: usize, every: usize, mut observe: O)
where
    F: Fn(&[f64], &mut [f64]),
    O: FnMut(usize, &[f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    observe(0, y);
    for s in 1..=steps {
        f(y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        f(&tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if every > 0 && s % every == 0 {
            observe(s, y);
        }
    }
}
