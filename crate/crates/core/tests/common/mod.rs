//! Exact solution of the Riemann problem for the Euler equations of an ideal gas.

#![allow(dead_code)]

#[derive(Debug, Clone, Copy)]
pub struct State {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

pub struct Riemann {
    left: State,
    right: State,
    gamma: f64,
    p_star: f64,
    u_star: f64,
}

fn sound(s: &State, gamma: f64) -> f64 {
    (gamma * s.p / s.rho).sqrt()
}

/// Pressure function of one side and its derivative.
fn side(p: f64, s: &State, gamma: f64) -> (f64, f64) {
    let c = sound(s, gamma);
    if p > s.p {
        let a = 2.0 / ((gamma + 1.0) * s.rho);
        let b = (gamma - 1.0) / (gamma + 1.0) * s.p;
        let q = (a / (p + b)).sqrt();
        ((p - s.p) * q, q * (1.0 - 0.5 * (p - s.p) / (p + b)))
    } else {
        let e = (gamma - 1.0) / (2.0 * gamma);
        let r = p / s.p;
        (2.0 * c / (gamma - 1.0) * (r.powf(e) - 1.0), r.powf(-(gamma + 1.0) / (2.0 * gamma)) / (s.rho * c))
    }
}

impl Riemann {
    pub fn new(left: State, right: State, gamma: f64) -> Self {
        let du = right.u - left.u;
        let mut p = 0.5 * (left.p + right.p);
        for _ in 0..100 {
            let (fl, dl) = side(p, &left, gamma);
            let (fr, dr) = side(p, &right, gamma);
            let next = (p - (fl + fr + du) / (dl + dr)).max(1e-14);
            let done = (next - p).abs() < 1e-15 * p;
            p = next;
            if done {
                break;
            }
        }
        let (fl, _) = side(p, &left, gamma);
        let (fr, _) = side(p, &right, gamma);
        let u = 0.5 * (left.u + right.u) + 0.5 * (fr - fl);
        Self { left, right, gamma, p_star: p, u_star: u }
    }

    pub fn star(&self) -> (f64, f64) {
        (self.p_star, self.u_star)
    }

    /// State at similarity coordinate `xi = (x - x0) / t`.
    pub fn sample(&self, xi: f64) -> State {
        let g = self.gamma;
        let (ps, us) = (self.p_star, self.u_star);
        let left_side = xi <= us;
        let (s, sign) = if left_side { (self.left, 1.0) } else { (self.right, -1.0) };
        // Mirror the right side onto the left-running case.
        let (u, x) = (sign * s.u, sign * xi);
        let us_m = sign * us;
        let c = sound(&s, g);
        let gm = (g - 1.0) / (g + 1.0);
        let out = if ps > s.p {
            let shock = u - c * ((g + 1.0) / (2.0 * g) * ps / s.p + (g - 1.0) / (2.0 * g)).sqrt();
            if x <= shock {
                State { rho: s.rho, u, p: s.p }
            } else {
                let rho = s.rho * (ps / s.p + gm) / (gm * ps / s.p + 1.0);
                State { rho, u: us_m, p: ps }
            }
        } else {
            let head = u - c;
            let c_star = c * (ps / s.p).powf((g - 1.0) / (2.0 * g));
            let tail = us_m - c_star;
            if x <= head {
                State { rho: s.rho, u, p: s.p }
            } else if x >= tail {
                State { rho: s.rho * (ps / s.p).powf(1.0 / g), u: us_m, p: ps }
            } else {
                let k = 2.0 / (g + 1.0) + gm / c * (u - x);
                let rho = s.rho * k.powf(2.0 / (g - 1.0));
                let vel = 2.0 / (g + 1.0) * (c + (g - 1.0) / 2.0 * u + x);
                State { rho, u: vel, p: s.p * k.powf(2.0 * g / (g - 1.0)) }
            }
        };
        State { rho: out.rho, u: sign * out.u, p: out.p }
    }
}

/// Sod data of the benchmarks: `(ρ, T) = (1, 1)` and `(0.125, 0.8)` at rest, `p = ρ T`.
pub fn sod() -> Riemann {
    Riemann::new(State { rho: 1.0, u: 0.0, p: 1.0 }, State { rho: 0.125, u: 0.0, p: 0.1 }, 2.0)
}

/// Cell average of the exact density over `[a, b]` at time `t`, interface at `x0`.
pub fn cell_density(r: &Riemann, a: f64, b: f64, x0: f64, t: f64) -> f64 {
    let n = 64;
    (0..n).map(|k| r.sample((a + (b - a) * (k as f64 + 0.5) / n as f64 - x0) / t).rho).sum::<f64>() / n as f64
}
