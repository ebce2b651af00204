//! Deterministic quadrature over post-selection regions of the source density.
//!
//! The joint density of (I, θ) has inverse-square-root singularities along the
//! support boundary I·max(cos²(θ/2), sin²(θ/2)) = Σ, so tensor grids in (I, θ)
//! converge poorly. Instead we integrate in the interference coordinates
//! (x, y) ∈ [0, π/2]² with I = Σ(sin²x + sin²y) and tan(θ/2) = sin y / sin x,
//! where the density becomes the constant 4/π². Region boundaries (θ-window,
//! intensity bin) map to curves sin²y = t²·sin²x and sin²y = I/Σ − sin²x, so
//! for each x the admissible y values form a single interval with closed-form
//! endpoints. Kinks in the outer integrand occur only where boundary curves
//! cross; we split the x-range at those points and apply Gauss–Legendre on
//! each smooth segment.

use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre polynomial recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }
}

static GL_CACHE: Lazy<Mutex<HashMap<usize, &'static GaussLegendre>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Cached rule lookup; leaks one table per distinct order, which is bounded
/// by the handful of orders used in practice.
pub fn gauss_legendre(n: usize) -> &'static GaussLegendre {
    let mut cache = GL_CACHE.lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| Box::leak(Box::new(GaussLegendre::new(n))))
}

/// Node counts for the region quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct QuadOrders {
    /// Gauss–Legendre order per x-segment (outer).
    pub x_order: usize,
    /// Gauss–Legendre order for the inner y interval.
    pub y_order: usize,
    /// Gauss–Legendre order for φ windows (only used by φ-dependent integrands).
    pub phi_order: usize,
}

impl Default for QuadOrders {
    fn default() -> Self {
        QuadOrders {
            x_order: 24,
            y_order: 16,
            phi_order: 12,
        }
    }
}

/// Breakpoints in sin²x where a boundary curve of the region starts or stops
/// being the active y-limit.
fn x_breakpoints(t1sq: f64, t2sq: f64, ilo: f64, ihi: f64) -> Vec<f64> {
    let mut s_vals = vec![0.0, 1.0];
    let mut push = |s: f64| {
        if s > 0.0 && s < 1.0 {
            s_vals.push(s);
        }
    };
    for tsq in [t1sq, t2sq] {
        if tsq.is_finite() && tsq > 0.0 {
            for ib in [ilo, ihi] {
                push(ib / (1.0 + tsq));
            }
            push(1.0 / tsq);
        }
    }
    for ib in [ilo, ihi] {
        push(ib);
        push(ib - 1.0);
    }
    let mut xs: Vec<f64> = s_vals
        .into_iter()
        .map(|s| s.clamp(0.0, 1.0).sqrt().asin())
        .collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    xs
}

/// Integrate a batch of integrands against the source density f(I, θ) dI dθ
/// over the region θ ∈ (θ₁, θ₂) × I ∈ (i₁, i₂), accumulating into `acc`.
///
/// `f(i, theta, out)` must write the integrand values (without the density)
/// into `out`; `acc.len()` determines the batch width. The φ dimension is not
/// included here: the density is uniform in φ, so φ factors are applied by
/// the caller.
pub fn integrate_region<F>(
    sigma: f64,
    theta: (f64, f64),
    ibin: (f64, f64),
    orders: QuadOrders,
    mut f: F,
    acc: &mut [f64],
) where
    F: FnMut(f64, f64, &mut [f64]),
{
    acc.fill(0.0);
    let (th1, th2) = theta;
    if th2 <= th1 || ibin.1 <= ibin.0 || sigma <= 0.0 {
        return;
    }
    let t1 = (th1 / 2.0).tan();
    let t1sq = t1 * t1;
    let t2sq = if th2 >= PI {
        f64::INFINITY
    } else {
        let t = (th2 / 2.0).tan();
        t * t
    };
    let ilo = (ibin.0 / sigma).max(0.0);
    let ihi = ibin.1 / sigma;

    let glx = gauss_legendre(orders.x_order);
    let gly = gauss_legendre(orders.y_order);
    let bps = x_breakpoints(t1sq, t2sq, ilo, ihi);
    let mut out = vec![0.0; acc.len()];

    for seg in bps.windows(2) {
        let (xa, xb) = (seg[0], seg[1]);
        if xb - xa < 1e-14 {
            continue;
        }
        let xm = 0.5 * (xa + xb);
        let xr = 0.5 * (xb - xa);
        for (xi, wxi) in glx.nodes.iter().zip(&glx.weights) {
            let x = xm + xr * xi;
            let wx = wxi * xr;
            let sx = x.sin();
            let sx2 = sx * sx;
            let mut lo = (t1sq * sx2).max(ilo - sx2).max(0.0);
            let mut hi = (ihi - sx2).min(1.0);
            if t2sq.is_finite() {
                hi = hi.min(t2sq * sx2);
            }
            if hi <= lo {
                continue;
            }
            lo = lo.clamp(0.0, 1.0);
            hi = hi.clamp(0.0, 1.0);
            let ya = lo.sqrt().asin();
            let yb = hi.sqrt().asin();
            let ym = 0.5 * (ya + yb);
            let yr = 0.5 * (yb - ya);
            for (yi, wyi) in gly.nodes.iter().zip(&gly.weights) {
                let y = ym + yr * yi;
                let wy = wyi * yr;
                let sy = y.sin();
                let sy2 = sy * sy;
                let intensity = sigma * (sx2 + sy2);
                let theta = 2.0 * sy.abs().atan2(sx.abs());
                let w = wx * wy * 4.0 / (PI * PI);
                f(intensity, theta, &mut out);
                for (a, v) in acc.iter_mut().zip(&out) {
                    *a += w * v;
                }
            }
        }
    }
}
