//! Initial conditions as quantile samples: Gaussian, indicator, Cauchy
//! dilations, and the HLS-optimizer family, plus a quantile CSV loader.

use std::f64::consts::PI;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use statrs::function::erf::erf;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::model::PhysParams;
use crate::numerics::{adaptive_simpson, bisect};
use crate::state::{from_quantile_fn, ParticleState};

/// Constants of the HLS-optimizer family returned alongside the sampled state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HlsProfile {
    /// Optimal interpolation constant (one-dimensional case).
    pub c_hls: f64,
    /// Critical amplitude c* = pi^(-1/m) (chi C_HLS)^(1/(m-2)).
    pub c_star: f64,
    /// Scale of the unit-mass critical profile, lambda* = (c* M1)^(2/k) with
    /// M1 the mass of the lambda = 1 profile at amplitude c*.
    pub lambda_star: f64,
    /// User multiplier on c* actually used for the sampled state.
    pub c_scale: f64,
}

/// Builds a symmetric state by sampling the upper-half quantile function and
/// mirroring, then recentering (the shift is roundoff-sized by symmetry).
fn mirrored_symmetric(n: usize, q_upper: impl Fn(f64) -> f64) -> Result<ParticleState> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "a state needs at least 2 particles, got {n}"
        )));
    }
    let nf = n as f64;
    let mut xs = vec![0.0; n];
    for i in (n + 1) / 2..n {
        let v = q_upper((i as f64 + 0.5) / nf);
        xs[i] = v;
        xs[n - 1 - i] = -v;
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular("quantile sample is not finite".into()));
    }
    let c = xs.iter().sum::<f64>() / nf;
    for x in &mut xs {
        *x -= c;
    }
    ParticleState::new(xs)
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Centered Gaussian with the given variance; quantiles found by bisection on
/// the CDF to absolute tolerance 1e-12.
pub fn gaussian_init(n: usize, variance: f64) -> Result<ParticleState> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gaussian variance must be positive and finite, got {variance}"
        )));
    }
    let sigma = variance.sqrt();
    mirrored_symmetric(n, |eta| {
        sigma * bisect(&|z: f64| std_normal_cdf(z) - eta, 0.0, 40.0, 1e-12)
    })
}

/// Uniform density on [-R, R]: X_i = R (2 eta_i - 1).
pub fn indicator_init(n: usize, radius: f64) -> Result<ParticleState> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "indicator radius must be positive and finite, got {radius}"
        )));
    }
    from_quantile_fn(n, |eta| radius * (2.0 * eta - 1.0))
}

/// Cauchy dilation rho_lambda(x) = lambda rho_1(lambda x):
/// X_i = tan(pi (eta_i - 1/2)) / lambda.
pub fn cauchy_init(n: usize, lambda: f64) -> Result<ParticleState> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cauchy dilation must be positive and finite, got {lambda}"
        )));
    }
    mirrored_symmetric(n, |eta| (PI * (eta - 0.5)).tan() / lambda)
}

/// Heavy-tail profile rho(x) = c0 (lambda0/(lambda0^2 + x^2))^(1/m) with
/// c0 = c_scale * c* and lambda0 normalizing the mass to 1. Requires the
/// conformal pairing m = 2/(2+k) with k in (-1, 0). The CDF is integrated by
/// adaptive quadrature (algebraic change of variables on the tail) and
/// inverted by bisection.
pub fn hls_init(n: usize, c_scale: f64, p: &PhysParams) -> Result<(ParticleState, HlsProfile)> {
    let (m, k) = (p.m, p.k);
    if !(k > -1.0 && k < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "HLS profile needs k in (-1, 0), got {k}"
        )));
    }
    if (m - 2.0 / (2.0 + k)).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "HLS profile needs m = 2/(2+k); got m = {m} for k = {k}"
        )));
    }
    if !(c_scale.is_finite() && c_scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "c_scale must be positive and finite, got {c_scale}"
        )));
    }

    // One-dimensional optimal constant; the pi powers cancel at k = -1/2.
    let c_hls = PI.powf(-k / 2.0) * (gamma((1.0 + k) / 2.0) / gamma(1.0 + k / 2.0))
        * (gamma(0.5) / gamma(1.0)).powf(-(1.0 + k));
    let c_star = PI.powf(-1.0 / m) * (p.chi * c_hls).powf(1.0 / (m - 2.0));
    // Mass of the lambda = 1, amplitude 1 profile: integral of (1+x^2)^(-1/m).
    let mass_one = PI.sqrt() * gamma(1.0 / m - 0.5) / gamma(1.0 / m);
    let lambda_star = (c_star * mass_one).powf(2.0 / k);
    let c0 = c_scale * c_star;
    let lambda0 = (c0 * mass_one).powf(2.0 / k);

    let inv_m = 1.0 / m;
    let amp = c0 * lambda0.powf(inv_m);
    let split = lambda0.max(1.0);
    let body = |y: f64| (lambda0 * lambda0 + y * y).powf(-inv_m);
    // Tail after y -> 1/u and u -> v^(1/(1+k)), which absorbs the u^k factor:
    // integral over v of (lambda0^2 v^(2/(1+k)) + 1)^(-1/m) / (1+k).
    let pk = 1.0 + k;
    let tail_body = |v: f64| (lambda0 * lambda0 * v.powf(2.0 / pk) + 1.0).powf(-inv_m);
    let jtol = 5e-11 / amp;
    let j_split = adaptive_simpson(&body, 0.0, split, 0.5 * jtol);
    // Upper-half CDF value at x >= 0.
    let cdf = |x: f64| -> f64 {
        let j = if x <= split {
            adaptive_simpson(&body, 0.0, x, 0.5 * jtol)
        } else {
            let tail = adaptive_simpson(&tail_body, x.powf(-pk), split.powf(-pk), 0.5 * jtol * pk)
                / pk;
            j_split + tail
        };
        0.5 + amp * j
    };

    let state = mirrored_symmetric(n, |eta| {
        let mut hi = split;
        while cdf(hi) < eta {
            hi *= 2.0;
        }
        bisect(&|x: f64| cdf(x) - eta, 0.0, hi, 1e-11)
    })?;

    Ok((
        state,
        HlsProfile {
            c_hls,
            c_star,
            lambda_star,
            c_scale,
        },
    ))
}

/// Reads a quantile snapshot CSV (header `eta,X`): validates the midpoint
/// grid and strict ordering, returns the state at time 0 without recentering.
pub fn load_quantile_csv(path: &Path) -> Result<ParticleState> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "eta,X" => {}
        Some(Ok(h)) => {
            return Err(Error::Parse(format!(
                "expected header 'eta,X' in {}, got '{h}'",
                path.display()
            )))
        }
        Some(Err(e)) => return Err(e.into()),
        None => return Err(Error::Parse(format!("empty file {}", path.display()))),
    }
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| {
            Error::Parse(format!("line {}: expected 'eta,X' row", lineno + 2))
        })?;
        let eta: f64 = a.trim().parse().map_err(|e| {
            Error::Parse(format!("line {}: bad eta value ({e})", lineno + 2))
        })?;
        let x: f64 = b.trim().parse().map_err(|e| {
            Error::Parse(format!("line {}: bad X value ({e})", lineno + 2))
        })?;
        rows.push((eta, x));
    }
    let n = rows.len();
    if n < 2 {
        return Err(Error::Parse(format!(
            "need at least 2 rows, got {n} in {}",
            path.display()
        )));
    }
    for (i, &(eta, _)) in rows.iter().enumerate() {
        let expect = (i as f64 + 0.5) / n as f64;
        if (eta - expect).abs() > 1e-9 {
            return Err(Error::Parse(format!(
                "row {}: eta {} does not sit on the midpoint grid (expected {})",
                i + 2,
                eta,
                expect
            )));
        }
    }
    ParticleState::new(rows.into_iter().map(|(_, x)| x).collect())
}

/// Parsed form of the CLI `--init` argument.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Gaussian { variance: f64 },
    Indicator { radius: f64 },
    Cauchy { lambda: f64 },
    Hls { c_scale: f64 },
    File { path: std::path::PathBuf },
}

impl FromStr for InitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| {
            Error::Parse(format!(
                "init spec '{s}' must look like kind:value, e.g. gaussian:0.32"
            ))
        })?;
        let num = |what: &str| -> Result<f64> {
            arg.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad {what} in init spec '{s}': {e}")))
        };
        match kind {
            "gaussian" => Ok(InitSpec::Gaussian { variance: num("variance")? }),
            "indicator" => Ok(InitSpec::Indicator { radius: num("radius")? }),
            "cauchy" => Ok(InitSpec::Cauchy { lambda: num("dilation")? }),
            "hls" => Ok(InitSpec::Hls { c_scale: num("c_scale")? }),
            "file" => Ok(InitSpec::File { path: arg.into() }),
            other => Err(Error::Parse(format!(
                "unknown init kind '{other}' (expected gaussian, indicator, cauchy, hls, or file)"
            ))),
        }
    }
}

impl std::fmt::Display for InitSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitSpec::Gaussian { variance } => write!(f, "gaussian:{variance}"),
            InitSpec::Indicator { radius } => write!(f, "indicator:{radius}"),
            InitSpec::Cauchy { lambda } => write!(f, "cauchy:{lambda}"),
            InitSpec::Hls { c_scale } => write!(f, "hls:{c_scale}"),
            InitSpec::File { path } => write!(f, "file:{}", path.display()),
        }
    }
}

impl InitSpec {
    /// Materializes the state; `file:` specs ignore n and take their particle
    /// count from the file.
    pub fn build(&self, n: usize, p: &PhysParams) -> Result<ParticleState> {
        match self {
            InitSpec::Gaussian { variance } => gaussian_init(n, *variance),
            InitSpec::Indicator { radius } => indicator_init(n, *radius),
            InitSpec::Cauchy { lambda } => cauchy_init(n, *lambda),
            InitSpec::Hls { c_scale } => hls_init(n, *c_scale, p).map(|(s, _)| s),
            InitSpec::File { path } => load_quantile_csv(path),
        }
    }
}
