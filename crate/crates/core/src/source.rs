//! Fully passive source: emission density over (I, θ, φ), post-selection
//! interval geometry, Poisson photon-number moments, and Fock-subspace
//! density matrices.
//!
//! The source interferes four equal-intensity coherent pulses with
//! independent uniform phases. Writing Σ = 2vt (v input intensity, t
//! attenuator transmission), the output intensity and Bloch angles are
//!
//! ```text
//! I  = Σ (sin²((α−β)/2) + sin²((γ−δ)/2)),
//! cos(θ/2) ∝ |sin((α−β)/2)|,   φ = arg(a_V) − arg(a_H) mod 2π,
//! ```
//!
//! which gives the joint density
//!
//! ```text
//! f(I, θ) = 1 / (Σ π² √(1 − (I/Σ)cos²(θ/2)) √(1 − (I/Σ)sin²(θ/2))),
//! f(φ)    = 1 / 2π,
//! ```
//!
//! normalized so the full support has probability one; φ is uniform and
//! independent of (I, θ). `sample_source` draws from the same construction
//! by explicit interference of random phases and serves as the brute-force
//! oracle for every quadrature in this module.

use crate::hermitian::hermitian_eigenvalues;
use crate::quad::{gauss_legendre, integrate_region, QuadOrders};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

/// Intensity scale of the fully passive source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceParams {
    /// Σ = 2vt; the support satisfies I·cos²(θ/2) ≤ Σ and I·sin²(θ/2) ≤ Σ.
    pub sigma: f64,
    /// Maximum selectable output intensity; at most 2Σ (reached only at θ = π/2).
    pub i_max: f64,
}

impl SourceParams {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN as well as the wrong sign
    pub fn new(sigma: f64, i_max: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be > 0, got {sigma}"
            )));
        }
        if !(i_max > 0.0 && i_max <= 2.0 * sigma) {
            return Err(Error::InvalidParameter(format!(
                "i_max must lie in (0, 2*sigma]; got {i_max} with sigma {sigma}"
            )));
        }
        Ok(SourceParams { sigma, i_max })
    }

    /// Full-support parameters: i_max = 2Σ.
    pub fn full_support(sigma: f64) -> Result<Self> {
        Self::new(sigma, 2.0 * sigma)
    }
}

/// One emission of the source: intensity and Bloch-sphere angles.
///
/// `psi` is the global phase; the source is phase-randomized so nothing
/// downstream consumes it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochIntensityPoint {
    pub intensity: f64,
    /// Polar angle in [0, π].
    pub theta: f64,
    /// Azimuthal angle in [0, 2π).
    pub phi: f64,
    /// Global phase in [0, 2π); carried for completeness only.
    pub psi: f64,
}

/// Emission probability density f(I, θ)·f(φ) at `point`.
///
/// Returns 0 outside the support. The density diverges integrably at the
/// support boundary; quadrature goes through [`integrate_region`]'s
/// boundary-flattening substitution rather than sampling this directly.
pub fn density(point: &BlochIntensityPoint, params: &SourceParams) -> f64 {
    let sigma = params.sigma;
    if point.intensity < 0.0 || point.intensity > params.i_max {
        return 0.0;
    }
    let c2 = (point.theta / 2.0).cos().powi(2);
    let s2 = 1.0 - c2;
    let r1 = 1.0 - point.intensity / sigma * c2;
    let r2 = 1.0 - point.intensity / sigma * s2;
    if r1 <= 0.0 || r2 <= 0.0 {
        return 0.0;
    }
    1.0 / (sigma * PI * PI * r1.sqrt() * r2.sqrt()) / (2.0 * PI)
}

/// Draw one emission by interfering four uniform-phase coherent pulses
/// (the Appendix-A chain), exposed as the Monte Carlo oracle for the
/// analytic density.
///
/// The degenerate draw I = 0 leaves θ undefined; it is set to π/2 by
/// convention (a measure-zero event).
pub fn sample_source<R: Rng + ?Sized>(rng: &mut R, params: &SourceParams) -> BlochIntensityPoint {
    let alpha = rng.gen_range(0.0..2.0 * PI);
    let beta = rng.gen_range(0.0..2.0 * PI);
    let gamma = rng.gen_range(0.0..2.0 * PI);
    let delta = rng.gen_range(0.0..2.0 * PI);
    // Unit-intensity interference amplitudes; |a_H|²/4 = sin²((α−β)/2).
    let a_h = Complex64::new(alpha.cos() - beta.cos(), alpha.sin() - beta.sin());
    let a_v = Complex64::new(gamma.cos() - delta.cos(), gamma.sin() - delta.sin());
    let nh = a_h.norm_sqr();
    let nv = a_v.norm_sqr();
    let intensity = params.sigma * (nh + nv) / 4.0;
    let theta = if nh + nv == 0.0 {
        PI / 2.0
    } else {
        2.0 * nv.sqrt().atan2(nh.sqrt())
    };
    let phi = (a_v.arg() - a_h.arg()).rem_euclid(2.0 * PI);
    let psi = a_h.arg().rem_euclid(2.0 * PI);
    BlochIntensityPoint {
        intensity,
        theta,
        phi,
        psi,
    }
}

/// Measurement/preparation basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Z, Basis::X, Basis::Y];

    pub fn states(self) -> [StateLabel; 2] {
        match self {
            Basis::Z => [StateLabel::H, StateLabel::V],
            Basis::X => [StateLabel::D, StateLabel::A],
            Basis::Y => [StateLabel::R, StateLabel::L],
        }
    }
}

/// The six post-selected polarization states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum StateLabel {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl StateLabel {
    pub const ALL: [StateLabel; 6] = [
        StateLabel::H,
        StateLabel::V,
        StateLabel::D,
        StateLabel::A,
        StateLabel::R,
        StateLabel::L,
    ];

    pub fn basis(self) -> Basis {
        match self {
            StateLabel::H | StateLabel::V => Basis::Z,
            StateLabel::D | StateLabel::A => Basis::X,
            StateLabel::R | StateLabel::L => Basis::Y,
        }
    }

    /// +1 for the state matching the basis' "plus" detector, −1 otherwise.
    pub fn sign(self) -> f64 {
        match self {
            StateLabel::H | StateLabel::D | StateLabel::R => 1.0,
            StateLabel::V | StateLabel::A | StateLabel::L => -1.0,
        }
    }

    /// θ anchor for Z states, φ anchor for X/Y states.
    pub fn anchor(self) -> f64 {
        match self {
            StateLabel::H => 0.0,
            StateLabel::V => PI,
            StateLabel::D => 0.0,
            StateLabel::A => PI,
            StateLabel::R => PI / 2.0,
            StateLabel::L => 3.0 * PI / 2.0,
        }
    }
}

/// Intensity class of a post-selection region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum IntensityClass {
    Vacuum,
    Decoy,
    Signal,
}

impl IntensityClass {
    pub const ALL: [IntensityClass; 3] = [
        IntensityClass::Vacuum,
        IntensityClass::Decoy,
        IntensityClass::Signal,
    ];

    pub fn index(self) -> usize {
        match self {
            IntensityClass::Vacuum => 0,
            IntensityClass::Decoy => 1,
            IntensityClass::Signal => 2,
        }
    }
}

/// φ extent of a region: Z regions keep the full circle, X/Y regions keep a
/// window of half-width Δφ around the state anchor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhiWindow {
    Full,
    Window { anchor: f64, half_width: f64 },
}

impl PhiWindow {
    /// Total φ length.
    pub fn len(&self) -> f64 {
        match self {
            PhiWindow::Full => 2.0 * PI,
            PhiWindow::Window { half_width, .. } => 2.0 * half_width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 0.0
    }

    /// Fraction of the uniform φ density falling in the window.
    pub fn fraction(&self) -> f64 {
        self.len() / (2.0 * PI)
    }

    pub fn contains(&self, phi: f64) -> bool {
        match self {
            PhiWindow::Full => true,
            PhiWindow::Window { anchor, half_width } => {
                let d = (phi - anchor + PI).rem_euclid(2.0 * PI) - PI;
                d.abs() < *half_width
            }
        }
    }
}

/// The nine-region post-selection geometry: three interval widths plus the
/// intensity edges (I_v, I_d, I_s).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntervalFamily {
    pub dtheta_z: f64,
    pub dtheta_xy: f64,
    pub dphi_xy: f64,
    /// (I_v, I_d, I_s) with 0 < I_v < I_d < I_s ≤ i_max.
    pub intensity_edges: (f64, f64, f64),
}

impl IntervalFamily {
    pub fn new(
        dtheta_z: f64,
        dtheta_xy: f64,
        dphi_xy: f64,
        intensity_edges: (f64, f64, f64),
        params: &SourceParams,
    ) -> Result<Self> {
        let half_pi = PI / 2.0;
        for (name, v) in [
            ("dtheta_z", dtheta_z),
            ("dtheta_xy", dtheta_xy),
            ("dphi_xy", dphi_xy),
        ] {
            if !(v > 0.0 && v <= half_pi) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, pi/2]; got {v}"
                )));
            }
        }
        let (iv, id, is) = intensity_edges;
        if !(0.0 < iv && iv < id && id < is && is <= params.i_max) {
            return Err(Error::InvalidParameter(format!(
                "intensity edges must satisfy 0 < I_v < I_d < I_s <= i_max; got {intensity_edges:?}"
            )));
        }
        Ok(IntervalFamily {
            dtheta_z,
            dtheta_xy,
            dphi_xy,
            intensity_edges,
        })
    }

    /// θ window of a state's region, clipped to (0, π).
    pub fn theta_window(&self, state: StateLabel) -> (f64, f64) {
        match state.basis() {
            Basis::Z => {
                if state == StateLabel::H {
                    (0.0, self.dtheta_z)
                } else {
                    (PI - self.dtheta_z, PI)
                }
            }
            _ => (PI / 2.0 - self.dtheta_xy, PI / 2.0 + self.dtheta_xy),
        }
    }

    pub fn phi_window(&self, state: StateLabel) -> PhiWindow {
        match state.basis() {
            Basis::Z => PhiWindow::Full,
            _ => PhiWindow::Window {
                anchor: state.anchor(),
                half_width: self.dphi_xy,
            },
        }
    }

    /// Intensity bin [lo, hi): vac = [0, I_v], d = (I_v, I_d], s = (I_d, I_s].
    pub fn intensity_bin(&self, class: IntensityClass) -> (f64, f64) {
        let (iv, id, is) = self.intensity_edges;
        match class {
            IntensityClass::Vacuum => (0.0, iv),
            IntensityClass::Decoy => (iv, id),
            IntensityClass::Signal => (id, is),
        }
    }

    pub fn region(&self, state: StateLabel, class: IntensityClass) -> Region {
        Region { state, class }
    }

    /// Membership test used by the Monte Carlo oracle.
    pub fn contains(&self, region: Region, point: &BlochIntensityPoint) -> bool {
        let (t1, t2) = self.theta_window(region.state);
        let (i1, i2) = self.intensity_bin(region.class);
        point.theta > t1
            && point.theta <= t2
            && point.intensity > i1
            && point.intensity <= i2
            && self.phi_window(region.state).contains(point.phi)
    }
}

/// One post-selection region S_x^y: a state label and an intensity class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    pub state: StateLabel,
    pub class: IntensityClass,
}

/// Probability that an emission falls in `region`.
pub fn interval_probability(
    family: &IntervalFamily,
    region: Region,
    params: &SourceParams,
    orders: QuadOrders,
) -> f64 {
    let mut acc = [0.0];
    integrate_region(
        params.sigma,
        family.theta_window(region.state),
        family.intensity_bin(region.class),
        orders,
        |_, _, out| out[0] = 1.0,
        &mut acc,
    );
    acc[0] * family.phi_window(region.state).fraction()
}

/// Poisson weight P(I, n) = Iⁿ e^{−I} / n!, evaluated stably by iteration.
pub fn poisson_weight(intensity: f64, n: usize) -> f64 {
    let mut p = (-intensity).exp();
    for k in 1..=n {
        p *= intensity / k as f64;
    }
    p
}

/// Unnormalized n-photon moment ∫_S P(I, n) f dI dθ dφ. Dividing by the
/// region probability gives the conditional Poisson weight.
pub fn photon_number_moment(
    family: &IntervalFamily,
    region: Region,
    n: usize,
    params: &SourceParams,
    orders: QuadOrders,
) -> f64 {
    let mut acc = [0.0];
    integrate_region(
        params.sigma,
        family.theta_window(region.state),
        family.intensity_bin(region.class),
        orders,
        |i, _, out| out[0] = poisson_weight(i, n),
        &mut acc,
    );
    acc[0] * family.phi_window(region.state).fraction()
}

/// Region probability together with photon moments for n = 0..=n_cut in a
/// single quadrature pass.
pub fn region_probability_and_moments(
    family: &IntervalFamily,
    region: Region,
    n_cut: usize,
    params: &SourceParams,
    orders: QuadOrders,
) -> (f64, Vec<f64>) {
    let mut acc = vec![0.0; n_cut + 2];
    integrate_region(
        params.sigma,
        family.theta_window(region.state),
        family.intensity_bin(region.class),
        orders,
        |i, _, out| {
            out[0] = 1.0;
            let mut p = (-i).exp();
            out[1] = p;
            for n in 1..=n_cut {
                p *= i / n as f64;
                out[n + 1] = p;
            }
        },
        &mut acc,
    );
    let frac = family.phi_window(region.state).fraction();
    let p = acc[0] * frac;
    let moments = acc[1..].iter().map(|m| m * frac).collect();
    (p, moments)
}

/// Whether Fock density matrices carry the Poisson n-photon weight.
///
/// `PoissonWeighted` (the default) integrates |n⟩⟨n| against P(I,n)·f and is
/// the conditional state of n-photon emissions from the region;
/// `Unweighted` integrates against f alone (the literal printed form).
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SigmaWeighting {
    PoissonWeighted,
    Unweighted,
}

/// An (n+1)×(n+1) Hermitian unit-trace matrix on the n-photon subspace,
/// row-major in the {|m⟩_H |n−m⟩_V} basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FockDensityMatrix {
    pub n: usize,
    pub elems: Vec<Complex64>,
}

impl FockDensityMatrix {
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.elems[i * self.dim() + j]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn max_hermiticity_violation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.elems, self.dim())
    }
}

/// Fock-subspace density matrix of the n-photon component of a region.
///
/// The amplitude of |m⟩_H|n−m⟩_V in |n⟩_{a†(θ,φ)} is
/// √C(n,m)·cos^m(θ/2)·(e^{iφ} sin(θ/2))^{n−m}, so entry (m, m′) needs the
/// moments T_k = ∫ cos^k(θ/2) sin^{2n−k}(θ/2) [P(I,n)] f with k = m+m′ and a
/// closed-form φ phase factor.
pub fn fock_density(
    family: &IntervalFamily,
    region: Region,
    n: usize,
    params: &SourceParams,
    weighting: SigmaWeighting,
    orders: QuadOrders,
) -> Result<FockDensityMatrix> {
    let mut out = fock_density_batch(family, region, n, params, weighting, orders)?;
    Ok(out.pop().expect("batch includes n"))
}

/// Fock density matrices for every photon number 0..=n_max in one pass.
pub fn fock_density_batch(
    family: &IntervalFamily,
    region: Region,
    n_max: usize,
    params: &SourceParams,
    weighting: SigmaWeighting,
    orders: QuadOrders,
) -> Result<Vec<FockDensityMatrix>> {
    assert!(2 * n_max < 64, "photon cutoff too large");
    // layout: for each n, entries T_k, k = 0..=2n
    let mut offsets = Vec::with_capacity(n_max + 1);
    let mut len = 0;
    for n in 0..=n_max {
        offsets.push(len);
        len += 2 * n + 1;
    }
    let mut acc = vec![0.0; len];
    integrate_region(
        params.sigma,
        family.theta_window(region.state),
        family.intensity_bin(region.class),
        orders,
        |i, theta, out| {
            let c = (theta / 2.0).cos();
            let s = (theta / 2.0).sin();
            // power tables up to 2 n_max
            let mut cpow = [0.0f64; 64];
            let mut spow = [0.0f64; 64];
            cpow[0] = 1.0;
            spow[0] = 1.0;
            for k in 1..=2 * n_max {
                cpow[k] = cpow[k - 1] * c;
                spow[k] = spow[k - 1] * s;
            }
            let mut pw = (-i).exp();
            for n in 0..=n_max {
                if n > 0 {
                    pw *= i / n as f64;
                }
                let w = match weighting {
                    SigmaWeighting::PoissonWeighted => pw,
                    SigmaWeighting::Unweighted => 1.0,
                };
                let base = offsets[n];
                for k in 0..=2 * n {
                    out[base + k] = w * cpow[k] * spow[2 * n - k];
                }
            }
        },
        &mut acc,
    );

    let phi = family.phi_window(region.state);
    let mut result = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let t = &acc[offsets[n]..offsets[n] + 2 * n + 1];
        let dim = n + 1;
        let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
        // row/column index i counts V photons: i = 0 is the all-H component,
        // so the 1-photon matrix is diag(|H|^2, |V|^2)-ordered
        for i in 0..dim {
            for j in 0..dim {
                let delta = i as i32 - j as i32;
                let phase = match phi {
                    PhiWindow::Full => {
                        if delta != 0 {
                            continue;
                        }
                        Complex64::new(1.0, 0.0)
                    }
                    PhiWindow::Window { anchor, half_width } => {
                        if delta == 0 {
                            Complex64::new(2.0 * half_width / (2.0 * PI), 0.0)
                        } else {
                            let d = delta as f64;
                            Complex64::from_polar(1.0, anchor * d)
                                * (2.0 * (d * half_width).sin() / d)
                                / (2.0 * PI)
                        }
                    }
                };
                let coeff = (binomial(n, i) * binomial(n, j)).sqrt();
                // c-power 2n - (i+j), s-power i + j
                elems[i * dim + j] = phase * (coeff * t[2 * n - (i + j)]);
            }
        }
        let trace: f64 = (0..dim).map(|i| elems[i * dim + i].re).sum();
        if trace <= 0.0 {
            return Err(Error::EmptyRegion);
        }
        for e in &mut elems {
            *e /= trace;
        }
        result.push(FockDensityMatrix { n, elems });
    }
    Ok(result)
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Interval-averaged detection moments need φ-resolved integrands; this
/// helper exposes the φ nodes/weights of a region (already divided by 2π).
pub(crate) fn phi_nodes(window: PhiWindow, orders: QuadOrders) -> Vec<(f64, f64)> {
    match window {
        PhiWindow::Full => {
            // integrands on Z regions never depend on φ; a single node carries
            // the full weight
            vec![(0.0, 1.0)]
        }
        PhiWindow::Window { anchor, half_width } => {
            let gl = gauss_legendre(orders.phi_order);
            gl.nodes
                .iter()
                .zip(&gl.weights)
                .map(|(x, w)| (anchor + half_width * x, w * half_width / (2.0 * PI)))
                .collect()
        }
    }
}
