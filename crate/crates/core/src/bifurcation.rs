//! Transcritical normal form of the free-flow / saturated transition.
//!
//! The state is the throughput deficit `x = B - T` and the dynamics are
//!
//! ```text
//! dx/dt = r x - x²,    r = B (1 - p / p_c)
//! ```
//!
//! For `p > p_c` (free flow) `r < 0` and `x = 0`, i.e. `T = B`, is stable.
//! For `p < p_c` (saturated) `r > 0` and `x = r`, i.e. `T = (p / p_c) B`, is
//! stable. The two branches cross and exchange stability at `p = p_c`.
//!
//! Expanding the product form `dT/dt = (T - B)(pB/p_c - T)` under `x = B - T`
//! gives the same right-hand side with the opposite overall sign. The normal
//! form above is used because it is the one that makes `T = B` stable in free
//! flow, which is what a link actually does.
//!
//! Time carries no physical unit: nothing ties `dT/dt` to wall-clock transients.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Degenerate,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Degenerate => "degenerate",
        }
    }

    fn from_eigenvalue(lambda: f64) -> Self {
        if lambda < 0.0 {
            Stability::Stable
        } else if lambda > 0.0 {
            Stability::Unstable
        } else {
            Stability::Degenerate
        }
    }
}

/// `dx/dt = r x - x²` for one value of the bifurcation parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalForm {
    pub r: f64,
}

impl NormalForm {
    pub fn new(r: f64) -> Self {
        NormalForm { r }
    }

    pub fn for_link(bandwidth: f64, packet_size: f64, p_c: f64) -> Self {
        NormalForm::new(normal_form_rate(bandwidth, packet_size, p_c))
    }

    #[inline]
    pub fn vector_field(&self, x: f64) -> f64 {
        self.r * x - x * x
    }

    /// Derivative of the vector field, `r - 2x`.
    #[inline]
    pub fn linearization(&self, x: f64) -> f64 {
        self.r - 2.0 * x
    }

    /// Closed-form logistic solution started from `x0`.
    pub fn exact(&self, x0: f64, t: f64) -> f64 {
        let r = self.r;
        if r == 0.0 {
            return x0 / (1.0 + x0 * t);
        }
        // Written with e^{-rt} so that neither sign of r overflows for large t.
        let decay = (-r * t).exp();
        r * x0 / (r * decay + x0 * (1.0 - decay))
    }
}

/// Bifurcation parameter `r = B (1 - p / p_c)`.
pub fn normal_form_rate(bandwidth: f64, packet_size: f64, p_c: f64) -> f64 {
    bandwidth * (1.0 - packet_size / p_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    /// Throughput at the fixed point, bits/s.
    pub t_value: f64,
    pub stability: Stability,
    /// True for the `T > B` branch on the free-flow side, which no real link
    /// can reach.
    pub virtual_branch: bool,
}

/// The fixed points `T = B` and `T = (p / p_c) B`, or the single collided
/// point when `p == p_c`.
pub fn fixed_points(bandwidth: f64, packet_size: f64, p_c: f64) -> Vec<FixedPoint> {
    let nf = NormalForm::for_link(bandwidth, packet_size, p_c);
    if nf.r == 0.0 {
        return vec![FixedPoint {
            t_value: bandwidth,
            stability: Stability::Degenerate,
            virtual_branch: false,
        }];
    }
    let flow_limited = packet_size / p_c * bandwidth;
    vec![
        FixedPoint {
            t_value: bandwidth,
            stability: Stability::from_eigenvalue(nf.linearization(0.0)),
            virtual_branch: false,
        },
        FixedPoint {
            t_value: flow_limited,
            stability: Stability::from_eigenvalue(nf.linearization(nf.r)),
            virtual_branch: flow_limited > bandwidth,
        },
    ]
}

/// The physically realized throughput: the stable fixed point.
pub fn stable_throughput(bandwidth: f64, packet_size: f64, p_c: f64) -> f64 {
    fixed_points(bandwidth, packet_size, p_c)
        .into_iter()
        .find(|fp| fp.stability != Stability::Unstable)
        .map(|fp| fp.t_value)
        .unwrap_or(bandwidth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

/// Fixed-step trajectory of the deficit, `steps + 1` values starting at `x0`.
pub fn integrate(x0: f64, r: f64, dt: f64, steps: usize, method: Integrator) -> Result<Vec<f64>> {
    if !(x0 >= 0.0 && x0.is_finite()) {
        return Err(Error::invalid("x0", "must be finite and non-negative"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    if steps == 0 {
        return Err(Error::invalid("steps", "must be at least 1"));
    }
    let scale = r.abs().max(x0);
    let limit = 1.0 / scale;
    if dt >= limit {
        return Err(Error::StepTooLarge { dt, limit });
    }

    let nf = NormalForm::new(r);
    let f = |x: f64| nf.vector_field(x);
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0;
    out.push(x);
    for _ in 0..steps {
        x = match method {
            Integrator::Euler => x + dt * f(x),
            Integrator::Rk4 => {
                let k1 = f(x);
                let k2 = f(x + 0.5 * dt * k1);
                let k3 = f(x + 0.5 * dt * k2);
                let k4 = f(x + dt * k3);
                x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            }
        };
        out.push(x);
    }
    Ok(out)
}

/// One row of a bifurcation diagram in deficit coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchRow {
    pub packet_size: f64,
    pub r: f64,
    /// The `x = 0` branch (`T = B`).
    pub bandwidth_branch: f64,
    pub bandwidth_stability: Stability,
    /// The `x = r` branch (`T = (p / p_c) B`).
    pub flow_branch: f64,
    pub flow_stability: Stability,
}

impl BranchRow {
    pub fn stable_deficit(&self) -> f64 {
        if self.flow_stability == Stability::Stable {
            self.flow_branch
        } else {
            self.bandwidth_branch
        }
    }

    pub fn unstable_deficit(&self) -> f64 {
        if self.flow_stability == Stability::Stable {
            self.bandwidth_branch
        } else {
            self.flow_branch
        }
    }
}

/// Branch table ordered by descending packet size, as on a reversed size
/// axis.
pub fn bifurcation_branches(bandwidth: f64, p_c: f64, packet_sizes: &[f64]) -> Result<Vec<BranchRow>> {
    if packet_sizes.is_empty() {
        return Err(Error::invalid("packet_sizes", "must not be empty"));
    }
    if let Some(bad) = packet_sizes.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::invalid("packet_sizes", format!("{bad} is not a positive size")));
    }
    let mut rows: Vec<BranchRow> = packet_sizes
        .iter()
        .map(|&p| {
            let nf = NormalForm::for_link(bandwidth, p, p_c);
            BranchRow {
                packet_size: p,
                r: nf.r,
                bandwidth_branch: 0.0,
                bandwidth_stability: Stability::from_eigenvalue(nf.linearization(0.0)),
                flow_branch: nf.r,
                flow_stability: Stability::from_eigenvalue(nf.linearization(nf.r)),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.packet_size.total_cmp(&a.packet_size));
    Ok(rows)
}
