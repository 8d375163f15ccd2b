#![allow(dead_code)]

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol.max(4.0 * f64::EPSILON * (left + right).abs()) {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `∫ f` over `[a, b]` split into `pieces` geometric (`geometric = true`) or equal parts.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    pieces: usize,
    geometric: bool,
    tol: f64,
) -> f64 {
    let node = |i: usize| {
        let t = i as f64 / pieces as f64;
        if geometric {
            a * (b / a).powf(t)
        } else {
            a + (b - a) * t
        }
    };
    (0..pieces)
        .map(|i| adaptive_simpson(&f, node(i), node(i + 1), tol / pieces as f64))
        .sum()
}

/// `∫ x^i dN(ξ, σ²)` by quadrature over `ξ ± 14σ`.
pub fn gaussian_moment_quadrature(i: u32, xi: f64, sigma: f64) -> f64 {
    let density = |x: f64| {
        let z = (x - xi) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    };
    integrate(
        |x| x.powi(i as i32) * density(x),
        xi - 14.0 * sigma,
        xi + 14.0 * sigma,
        56,
        false,
        1e-13,
    )
}

/// Log-normal density with `ln X ~ N(ln ξ, σ²)`.
pub fn lognormal_density(x: f64, xi: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let z = (x.ln() - xi.ln()) / sigma;
    (-0.5 * z * z).exp() / (x * sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// `∫ x^i δ^L_{ξ,σ}(x) dx`, integrated in `x` over the window where the integrand lives.
pub fn lognormal_moment_quadrature(i: u32, xi: f64, sigma: f64) -> f64 {
    let centre = xi.ln() + f64::from(i) * sigma * sigma;
    let (a, b) = ((centre - 13.0 * sigma).exp(), (centre + 13.0 * sigma).exp());
    let scale = (f64::from(i) * xi.ln() + 0.5 * f64::from(i * i) * sigma * sigma).exp();
    integrate(
        |x| x.powi(i as i32) * lognormal_density(x, xi, sigma),
        a,
        b,
        64,
        true,
        1e-12 * scale,
    )
}

/// Central finite difference of a vector-valued function in one coordinate.
pub fn central_difference<F: Fn(f64) -> Vec<f64>>(f: F, x: f64, h: f64) -> Vec<f64> {
    let (p, m) = (f(x + h), f(x - h));
    p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}
