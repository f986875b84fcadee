use crate::error::{Error, Result};

/// Slice times `tau_0, ..., tau_nu`, not necessarily monotone.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDivision {
    times: Vec<f64>,
}

impl TimeDivision {
    /// Consecutive times must differ, except for the one-slice division
    /// `{t, t}`, which represents the identity.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidDivision(format!(
                "need at least two times, got {}",
                times.len()
            )));
        }
        if let Some(bad) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidDivision(format!("non-finite time {bad}")));
        }
        if times.len() > 2 {
            if let Some(j) = times.windows(2).position(|w| w[0] == w[1]) {
                return Err(Error::InvalidDivision(format!(
                    "tau_{j} = tau_{} = {}",
                    j + 1,
                    times[j]
                )));
            }
        }
        Ok(Self { times })
    }

    /// `nu + 1` equally spaced times from `t_i` to `t_f`.
    pub fn uniform(t_i: f64, t_f: f64, nu: usize) -> Result<Self> {
        if nu == 0 {
            return Err(Error::InvalidDivision("nu must be at least 1".into()));
        }
        let mut times: Vec<f64> = (0..nu)
            .map(|j| t_i + (t_f - t_i) * (j as f64 / nu as f64))
            .collect();
        times.push(t_f);
        Self::new(times)
    }

    /// Zig-zag division: legs `t_i -> T -> -T -> T -> ... -> -T -> t_f`
    /// visiting `+T` and `-T` exactly `n` times each, every leg cut into
    /// `n^2` equal slices, so `nu = (2n + 1) n^2`.
    pub fn zigzag(t_i: f64, t_f: f64, big_t: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDivision("zig-zag order n must be at least 1".into()));
        }
        if !(big_t > 0.0 && big_t.is_finite()) {
            return Err(Error::InvalidDivision(format!("T must be positive, got {big_t}")));
        }
        if t_i.abs() > big_t || t_f.abs() > big_t {
            return Err(Error::InvalidDivision(format!(
                "endpoints {t_i}, {t_f} outside [-{big_t}, {big_t}]"
            )));
        }
        let mut corners = Vec::with_capacity(2 * n + 2);
        corners.push(t_i);
        for _ in 0..n {
            corners.push(big_t);
            corners.push(-big_t);
        }
        corners.push(t_f);
        let per_leg = n * n;
        let mut times = Vec::with_capacity(corners.len() * per_leg);
        times.push(t_i);
        for leg in corners.windows(2) {
            let (a, b) = (leg[0], leg[1]);
            if a == b {
                return Err(Error::InvalidDivision(format!(
                    "zero-length zig-zag leg at {a}; move t_i/t_f strictly inside (-T, T)"
                )));
            }
            for j in 1..per_leg {
                times.push(a + (b - a) * (j as f64 / per_leg as f64));
            }
            // Turning points are stored exactly.
            times.push(b);
        }
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of slices `nu`.
    pub fn nu(&self) -> usize {
        self.times.len() - 1
    }

    pub fn initial(&self) -> f64 {
        self.times[0]
    }

    pub fn final_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// `(tau_{j+1}, tau_j)` pairs in application order.
    pub fn slices(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.windows(2).map(|w| (w[1], w[0]))
    }

    /// `sum (tau_{j+1} - tau_j)^2`.
    pub fn sigma(&self) -> f64 {
        self.times.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
    }

    /// `max |tau_{j+1} - tau_j|`.
    pub fn mesh(&self) -> f64 {
        self.times.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }

    /// `sum |tau_{j+1} - tau_j|`.
    pub fn variation(&self) -> f64 {
        self.times.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// Number of direction reversals along the division.
    pub fn turn_count(&self) -> usize {
        let signs: Vec<f64> = self
            .times
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|g| *g != 0.0)
            .map(f64::signum)
            .collect();
        signs.windows(2).filter(|s| s[0] != s[1]).count()
    }

    pub fn max_abs_time(&self) -> f64 {
        self.times.iter().fold(0.0, |m, t| m.max(t.abs()))
    }

    /// The reversed division `Delta*` from `t_f` back to `t_i`.
    pub fn reversed(&self) -> Self {
        let mut times = self.times.clone();
        times.reverse();
        Self { times }
    }

    /// How many times equal `value` exactly.
    pub fn count_exact(&self, value: f64) -> usize {
        self.times.iter().filter(|&&t| t == value).count()
    }
}
