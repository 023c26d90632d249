//! Proportional-fair power allocation over inner common and private streams.
//!
//! With exact block-diagonal outer precoders there is no inter-group
//! interference, the outer common stream can be dropped, and each group runs
//! its own rate splitting. The problem is
//!
//! ```text
//! maximize   sum_g ln( R_ic,g + sum_{k in g} R_p,k )
//! subject to p_min <= sum_k p_k <= p_max
//!            sum_g p_ic,g + sum_k p_k <= p_budget
//!            R_sum >= r_min
//! ```
//!
//! over the inner common powers `p_ic` and private powers `p_k`. It is
//! non-convex; [`sca_solve`] iterates concave minorants. Each stream rate
//! `log2(1 + gamma)` is bounded below by `a log2(gamma) + b`, tight at the
//! current SINR. In log-power variables `q = ln p`, `log2(gamma)` is an affine
//! term minus a log-sum-exp, so every surrogate rate is concave, the per-group
//! minimum over users is concave, and `ln` of a positive concave sum stays
//! concave. The surrogate problem is solved by a log-barrier Newton method
//! with an epigraph variable for each group's minimum.
//!
//! Power variables are laid out as `[p_ic,0 .. p_ic,G-1, p_0 .. p_K-1]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hrs::Grouping;
use crate::precoding::{outer_residual, PrecoderSet};
use crate::ratesplit::{gain2, rate};

/// Largest relative inter-group leakage accepted by [`simplify_high_snr`].
pub const LEAKAGE_THRESHOLD: f64 = 1e-9;
/// Relative gap under which two inner common SINRs count as tied.
pub const TIE_RTOL: f64 = 1e-9;
const MIX_ROUNDS: usize = 20;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_OUTER: usize = 50;
pub const DEFAULT_MAX_INNER: usize = 500;
/// Private share of the budget at the uniform starting point.
pub const DEFAULT_INIT_ALPHA: f64 = 0.8;
/// Largest variable count [`grid_oracle`] accepts.
pub const ORACLE_MAX_VARS: usize = 4;

/// Group utility. Only the logarithm (proportional fairness) is provided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Utility {
    #[default]
    Log,
}

/// Full problem statement before the high-SNR simplification.
#[derive(Debug, Clone)]
pub struct AllocationProblem {
    pub gains: DMatrix<f64>,
    pub noise_var: DVector<f64>,
    pub grouping: Grouping,
    /// Two-tier precoders (outer precoders present).
    pub precoders: PrecoderSet,
    /// Bounds on the summed private power.
    pub p_min: f64,
    pub p_max: f64,
    pub p_budget: f64,
    pub r_min: f64,
    pub utility: Utility,
}

impl AllocationProblem {
    /// Problem with the default bounds `p_min = 0`, `p_max = p_budget`,
    /// `r_min = 0`.
    pub fn new(
        gains: DMatrix<f64>,
        noise_var: DVector<f64>,
        grouping: Grouping,
        precoders: PrecoderSet,
        p_budget: f64,
    ) -> Result<Self> {
        let out = AllocationProblem {
            gains,
            noise_var,
            grouping,
            precoders,
            p_min: 0.0,
            p_max: p_budget,
            p_budget,
            r_min: 0.0,
            utility: Utility::Log,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        validate_bounds(self.p_min, self.p_max, self.p_budget, self.r_min)?;
        self.grouping.check_users(self.gains.nrows())?;
        if self.precoders.outer.is_none() || self.precoders.inner_common.is_none() {
            return Err(Error::invalid("precoders", "outer and inner common precoders required"));
        }
        Ok(())
    }
}

fn validate_bounds(p_min: f64, p_max: f64, p_budget: f64, r_min: f64) -> Result<()> {
    if !(p_budget > 0.0 && p_budget.is_finite()) {
        return Err(Error::invalid("p_budget", format!("must be > 0, got {p_budget}")));
    }
    if !(p_min >= 0.0 && p_min <= p_max && p_max <= p_budget) {
        return Err(Error::invalid(
            "power bounds",
            format!("need 0 <= p_min <= p_max <= p_budget, got {p_min}, {p_max}, {p_budget}"),
        ));
    }
    if !(p_max > 0.0) {
        return Err(Error::invalid("p_max", "must be > 0"));
    }
    if !(r_min >= 0.0) {
        return Err(Error::invalid("r_min", format!("must be >= 0, got {r_min}")));
    }
    Ok(())
}

/// `gamma = signal * p[own] / (sum_j interference[j] * p[j] + noise)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrCoefficients {
    pub own: usize,
    pub signal: f64,
    pub interference: Vec<f64>,
    pub noise: f64,
}

impl SinrCoefficients {
    pub fn sinr(&self, p: &[f64]) -> f64 {
        let denom: f64 = self.interference.iter().zip(p).map(|(c, x)| c * x).sum::<f64>() + self.noise;
        self.signal * p[self.own] / denom
    }

    fn is_dead(&self) -> bool {
        self.signal <= 0.0
    }
}

/// The simplified problem in SINR-coefficient form.
#[derive(Debug, Clone)]
pub struct HighSnrProblem {
    pub members: Vec<Vec<usize>>,
    /// `inner_common[g][i]`: inner common stream of group `g` at its `i`-th member.
    pub inner_common: Vec<Vec<SinrCoefficients>>,
    pub private: Vec<SinrCoefficients>,
    pub p_min: f64,
    pub p_max: f64,
    pub p_budget: f64,
    pub r_min: f64,
}

/// Rates and objective at one allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub inner_common_rates: Vec<f64>,
    pub private_rates: Vec<f64>,
    pub sum_rate: f64,
    /// `-inf` when some group has zero rate.
    pub objective: f64,
}

impl HighSnrProblem {
    pub fn num_groups(&self) -> usize {
        self.members.len()
    }

    pub fn num_users(&self) -> usize {
        self.private.len()
    }

    pub fn num_vars(&self) -> usize {
        self.num_groups() + self.num_users()
    }

    pub fn evaluate(&self, p: &[f64]) -> Evaluation {
        let private_rates: Vec<f64> = self.private.iter().map(|s| rate(s.sinr(p))).collect();
        let inner_common_rates: Vec<f64> = self
            .inner_common
            .iter()
            .map(|streams| rate(streams.iter().map(|s| s.sinr(p)).fold(f64::INFINITY, f64::min)))
            .collect();
        let objective = self
            .members
            .iter()
            .enumerate()
            .map(|(g, m)| {
                let u = inner_common_rates[g] + m.iter().map(|&k| private_rates[k]).sum::<f64>();
                if u > 0.0 {
                    u.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .sum();
        let sum_rate = inner_common_rates.iter().sum::<f64>() + private_rates.iter().sum::<f64>();
        Evaluation {
            inner_common_rates,
            private_rates,
            sum_rate,
            objective,
        }
    }

    pub fn objective(&self, p: &[f64]) -> f64 {
        self.evaluate(p).objective
    }

    /// Power constraints (and the rate floor) within `tol` absolute.
    pub fn is_feasible(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.num_vars() || p.iter().any(|&x| !(x >= -tol)) {
            return false;
        }
        let private: f64 = p[self.num_groups()..].iter().sum();
        let total: f64 = p.iter().sum();
        private >= self.p_min - tol
            && private <= self.p_max + tol
            && total <= self.p_budget + tol
            && self.evaluate(p).sum_rate >= self.r_min - tol
    }

    /// Gradient of the true objective in power space. At a tie in a group's
    /// minimum the lowest-index member is differentiated.
    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let mix: Vec<Vec<f64>> = self
            .tied_members(p)
            .iter()
            .zip(&self.members)
            .map(|(tied, m)| {
                let mut w = vec![0.0; m.len()];
                w[tied[0]] = 1.0;
                w
            })
            .collect();
        self.mixed_gradient(p, &mix)
    }

    /// Gradient with each group's inner common term replaced by the
    /// `mix[g]`-weighted combination of its members' streams.
    fn mixed_gradient(&self, p: &[f64], mix: &[Vec<f64>]) -> Vec<f64> {
        let mut grad = vec![0.0; self.num_vars()];
        let eval = self.evaluate(p);
        for (g, members) in self.members.iter().enumerate() {
            let u = eval.inner_common_rates[g] + members.iter().map(|&k| eval.private_rates[k]).sum::<f64>();
            if !(u > 0.0) {
                continue;
            }
            let weight = 1.0 / u;
            for (s, &w) in self.inner_common[g].iter().zip(&mix[g]) {
                if w > 0.0 {
                    add_rate_gradient(s, p, weight * w, &mut grad);
                }
            }
            for &k in members {
                add_rate_gradient(&self.private[k], p, weight, &mut grad);
            }
        }
        grad
    }

    /// Per group, the members whose inner common SINR attains the minimum
    /// within a relative `TIE_RTOL`.
    fn tied_members(&self, p: &[f64]) -> Vec<Vec<usize>> {
        self.inner_common
            .iter()
            .map(|streams| {
                let sinrs: Vec<f64> = streams.iter().map(|s| s.sinr(p)).collect();
                let min = sinrs.iter().cloned().fold(f64::INFINITY, f64::min);
                (0..sinrs.len()).filter(|&i| sinrs[i] <= min + TIE_RTOL * min.abs()).collect()
            })
            .collect()
    }

    /// Euclidean projection onto the power polytope
    /// `{p >= 0, p_min <= sum_k p_k <= p_max, sum p <= p_budget}`.
    ///
    /// The solution is `p_i = max(0, y_i - lambda - nu [i private])`; `nu` is
    /// found by bisection for each budget multiplier `lambda`, and `lambda` by
    /// an outer bisection.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let g = self.num_groups();
        let (ic, private) = y.split_at(g);
        let shifted_sum = |v: &[f64], s: f64| v.iter().map(|&x| (x - s).max(0.0)).sum::<f64>();
        let private_shift = |lambda: f64| -> f64 {
            let free = shifted_sum(private, lambda);
            let target = if free > self.p_max {
                self.p_max
            } else if free < self.p_min {
                self.p_min
            } else {
                return lambda;
            };
            let hi_y = private.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let (mut lo, mut hi) = if free > target {
                (lambda, hi_y)
            } else {
                (lambda - target - 1.0, lambda)
            };
            while shifted_sum(private, lo) < target {
                lo -= 2.0 * (target + 1.0);
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if shifted_sum(private, mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let total = |lambda: f64| shifted_sum(ic, lambda) + shifted_sum(private, private_shift(lambda));
        let lambda = if total(0.0) <= self.p_budget {
            0.0
        } else {
            let mut lo = 0.0;
            let mut hi = y.iter().cloned().fold(0.0, f64::max) + 1.0;
            while total(hi) > self.p_budget {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if total(mid) > self.p_budget {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        let shift = private_shift(lambda);
        ic.iter()
            .map(|&x| (x - lambda).max(0.0))
            .chain(private.iter().map(|&x| (x - shift).max(0.0)))
            .collect()
    }

    /// `|| proj(p + g) - p ||` minimised over the generalized gradient `g`
    /// of the true objective. Zero exactly at first-order stationary points
    /// of the power-constrained problem.
    ///
    /// Away from ties `g` is the gradient. Where several members attain a
    /// group's inner common minimum, `g` ranges over convex combinations of
    /// their stream gradients; the weights are searched by cyclic golden
    /// section moves of mass between tied members.
    pub fn projected_gradient_norm(&self, p: &[f64]) -> f64 {
        let tied = self.tied_members(p);
        let mut mix: Vec<Vec<f64>> = tied
            .iter()
            .zip(&self.members)
            .map(|(t, m)| {
                let mut w = vec![0.0; m.len()];
                for &i in t {
                    w[i] = 1.0 / t.len() as f64;
                }
                w
            })
            .collect();
        let measure = |mix: &[Vec<f64>]| -> f64 {
            let grad = self.mixed_gradient(p, mix);
            let step: Vec<f64> = p.iter().zip(&grad).map(|(x, d)| x + d).collect();
            self.project(&step)
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        let mut best = measure(&mix);
        if tied.iter().all(|t| t.len() < 2) {
            return best;
        }
        let invphi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..MIX_ROUNDS {
            let before = best;
            for (g, t) in tied.iter().enumerate() {
                for &i in t {
                    for &j in t {
                        if i == j || mix[g][i] == 0.0 {
                            continue;
                        }
                        let at = |shift: f64, mix: &mut Vec<Vec<f64>>| -> f64 {
                            let (wi, wj) = (mix[g][i], mix[g][j]);
                            mix[g][i] = wi - shift;
                            mix[g][j] = wj + shift;
                            let v = measure(mix);
                            mix[g][i] = wi;
                            mix[g][j] = wj;
                            v
                        };
                        let (mut lo, mut hi) = (0.0, mix[g][i]);
                        for _ in 0..60 {
                            let a = hi - invphi * (hi - lo);
                            let b = lo + invphi * (hi - lo);
                            if at(a, &mut mix) <= at(b, &mut mix) {
                                hi = b;
                            } else {
                                lo = a;
                            }
                        }
                        let shift = 0.5 * (lo + hi);
                        let candidates = [shift, mix[g][i]];
                        for c in candidates {
                            let v = at(c, &mut mix);
                            if v < best {
                                best = v;
                                mix[g][i] -= c;
                                mix[g][j] += c;
                                break;
                            }
                        }
                    }
                }
            }
            if !(best < before * (1.0 - 1e-6)) {
                break;
            }
        }
        best
    }
}

fn add_rate_gradient(s: &SinrCoefficients, p: &[f64], weight: f64, grad: &mut [f64]) {
    if s.is_dead() {
        return;
    }
    let denom: f64 = s.interference.iter().zip(p).map(|(c, x)| c * x).sum::<f64>() + s.noise;
    let gamma = s.signal * p[s.own] / denom;
    let d_rate = weight / (std::f64::consts::LN_2 * (1.0 + gamma));
    grad[s.own] += d_rate * s.signal / denom;
    for (j, &c) in s.interference.iter().enumerate() {
        if c != 0.0 {
            grad[j] -= d_rate * gamma * c / denom;
        }
    }
}

/// Drops the outer common stream after checking that the outer precoders
/// really null inter-group interference.
pub fn simplify_high_snr(problem: &AllocationProblem) -> Result<HighSnrProblem> {
    problem.validate()?;
    let h = &problem.gains;
    let grouping = &problem.grouping;
    let outer = problem.precoders.outer.as_ref().expect("validated");
    let residual = outer_residual(h, grouping, outer);
    if !(residual <= LEAKAGE_THRESHOLD) {
        return Err(Error::Leakage {
            residual,
            threshold: LEAKAGE_THRESHOLD,
        });
    }
    let g_count = grouping.num_groups();
    let k_count = h.nrows();
    let n = g_count + k_count;
    let ic_dirs: Vec<DVector<f64>> = (0..g_count)
        .map(|g| problem.precoders.inner_common_composite(g).expect("validated"))
        .collect();
    let private_dirs: Vec<DVector<f64>> = (0..k_count)
        .map(|k| problem.precoders.private.column(k).into_owned())
        .collect();
    let members: Vec<Vec<usize>> = (0..g_count).map(|g| grouping.members(g)).collect();

    // Interference seen by user u from every private stream and from inner
    // common streams of other groups.
    let base_interference = |u: usize, own_group: usize| -> Vec<f64> {
        let mut c = vec![0.0; n];
        for (l, d) in ic_dirs.iter().enumerate() {
            if l != own_group {
                c[l] = gain2(h, u, d);
            }
        }
        for (j, w) in private_dirs.iter().enumerate() {
            c[g_count + j] = gain2(h, u, w);
        }
        c
    };

    let inner_common = members
        .iter()
        .enumerate()
        .map(|(g, m)| {
            m.iter()
                .map(|&u| SinrCoefficients {
                    own: g,
                    signal: gain2(h, u, &ic_dirs[g]),
                    interference: base_interference(u, g),
                    noise: problem.noise_var[u],
                })
                .collect()
        })
        .collect();
    let private = (0..k_count)
        .map(|u| {
            let mut interference = base_interference(u, grouping.assignments[u]);
            let own = g_count + u;
            let signal = interference[own];
            interference[own] = 0.0;
            SinrCoefficients {
                own,
                signal,
                interference,
                noise: problem.noise_var[u],
            }
        })
        .collect();
    Ok(HighSnrProblem {
        members,
        inner_common,
        private,
        p_min: problem.p_min,
        p_max: problem.p_max,
        p_budget: problem.p_budget,
        r_min: problem.r_min,
    })
}

/// Coefficients `(a, b)` of the tangent minorant `a log2(g) + b <= log2(1 + g)`
/// at `g = gamma_t`.
pub fn surrogate_bound(gamma_t: f64) -> Result<(f64, f64)> {
    if !(gamma_t > 0.0 && gamma_t.is_finite()) {
        return Err(Error::invalid("gamma_t", format!("must be > 0, got {gamma_t}")));
    }
    let a = gamma_t / (1.0 + gamma_t);
    Ok((a, rate(gamma_t) - a * gamma_t.log2()))
}

/// Concave minorant of the objective built at an expansion point.
#[derive(Debug, Clone)]
pub struct Surrogate<'a> {
    problem: &'a HighSnrProblem,
    /// `(a, b)` per inner common stream, `None` for dead streams.
    ic: Vec<Vec<Option<(f64, f64)>>>,
    private: Vec<Option<(f64, f64)>>,
}

fn bound_for(s: &SinrCoefficients, p: &[f64]) -> Option<(f64, f64)> {
    if s.is_dead() {
        return None;
    }
    surrogate_bound(s.sinr(p)).ok()
}

impl<'a> Surrogate<'a> {
    pub fn at(problem: &'a HighSnrProblem, p: &[f64]) -> Self {
        Surrogate {
            problem,
            ic: problem
                .inner_common
                .iter()
                .map(|streams| streams.iter().map(|s| bound_for(s, p)).collect())
                .collect(),
            private: problem.private.iter().map(|s| bound_for(s, p)).collect(),
        }
    }

    fn stream_value(s: &SinrCoefficients, ab: Option<(f64, f64)>, p: &[f64]) -> f64 {
        match ab {
            Some((a, b)) => a * s.sinr(p).log2() + b,
            None => 0.0,
        }
    }

    /// Surrogate objective at powers `p`.
    pub fn value(&self, p: &[f64]) -> f64 {
        let pr = self.problem;
        pr.members
            .iter()
            .enumerate()
            .map(|(g, m)| {
                let ic = pr.inner_common[g]
                    .iter()
                    .zip(&self.ic[g])
                    .map(|(s, &ab)| Self::stream_value(s, ab, p))
                    .fold(f64::INFINITY, f64::min);
                let private: f64 = m
                    .iter()
                    .map(|&k| Self::stream_value(&pr.private[k], self.private[k], p))
                    .sum();
                let u = ic + private;
                if u > 0.0 {
                    u.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .sum()
    }
}

/// Result of an allocation run.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub p_inner_common: Vec<f64>,
    pub p_private: Vec<f64>,
    pub objective_value: f64,
    pub sum_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    /// True objective after every accepted outer iteration, starting point
    /// first.
    pub history: Vec<f64>,
    /// Whether the allocation meets the rate floor.
    pub meets_rate_floor: bool,
}

impl PowerAllocation {
    fn from_powers(problem: &HighSnrProblem, p: &[f64]) -> Self {
        let eval = problem.evaluate(p);
        let g = problem.num_groups();
        PowerAllocation {
            p_inner_common: p[..g].to_vec(),
            p_private: p[g..].to_vec(),
            objective_value: eval.objective,
            sum_rate: eval.sum_rate,
            iterations: 0,
            converged: false,
            history: vec![eval.objective],
            meets_rate_floor: eval.sum_rate >= problem.r_min,
        }
    }

    /// Powers in variable order.
    pub fn powers(&self) -> Vec<f64> {
        self.p_inner_common.iter().chain(&self.p_private).copied().collect()
    }

    pub fn total_power(&self) -> f64 {
        self.powers().iter().sum()
    }
}

/// Interior margin kept from every power constraint at the starting point.
const INIT_MARGIN: f64 = 1e-6;

/// Uniform starting point: `alpha` of the budget to private streams, the rest
/// to inner common streams, pulled strictly inside every power constraint.
pub fn feasible_init(problem: &HighSnrProblem, alpha: f64) -> Result<PowerAllocation> {
    validate_bounds(problem.p_min, problem.p_max, problem.p_budget, problem.r_min)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    let budget = problem.p_budget;
    if problem.p_min >= budget * (1.0 - INIT_MARGIN) || problem.p_min >= problem.p_max {
        return Err(Error::Infeasible(format!(
            "private power floor {} leaves no room under p_max {} and budget {budget}",
            problem.p_min, problem.p_max
        )));
    }
    let g = problem.num_groups();
    let k = problem.num_users();
    let span = problem.p_max - problem.p_min;
    let lo = problem.p_min + INIT_MARGIN * span;
    let hi = problem.p_max - INIT_MARGIN * span;
    let private_total = (budget * alpha).clamp(lo, hi).min(budget * (1.0 - 2.0 * INIT_MARGIN));
    let room = budget * (1.0 - INIT_MARGIN) - private_total;
    let ic_total = (budget * (1.0 - alpha)).min(room).max(INIT_MARGIN * room);
    let mut p = vec![ic_total / g as f64; g];
    p.extend(std::iter::repeat_n(private_total / k as f64, k));
    Ok(PowerAllocation::from_powers(problem, &p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    /// Relative objective improvement below which the outer loop stops.
    pub tol: f64,
    pub max_outer: usize,
    /// Newton iterations per surrogate solve.
    pub max_inner: usize,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            tol: DEFAULT_TOL,
            max_outer: DEFAULT_MAX_OUTER,
            max_inner: DEFAULT_MAX_INNER,
        }
    }
}

/// Successive convex approximation from a feasible starting point.
///
/// The true objective never decreases between accepted iterates. If `init`
/// violates the rate floor, a first phase maximizes the surrogate sum rate
/// until the floor is met.
pub fn sca_solve(problem: &HighSnrProblem, init: &PowerAllocation, opts: &ScaOptions) -> Result<PowerAllocation> {
    let mut p = init.powers();
    if p.len() != problem.num_vars() || !problem.is_feasible_power(&p) {
        return Err(Error::Infeasible("starting point violates the power constraints".into()));
    }
    if p.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Infeasible("starting powers must be strictly positive".into()));
    }
    let mut iterations = 0;
    if problem.evaluate(&p).sum_rate <= problem.r_min {
        let mut reached = false;
        while iterations < opts.max_outer {
            iterations += 1;
            let next = solve_surrogate(problem, &p, Phase::RateFloor, opts.max_inner);
            let before = problem.evaluate(&p).sum_rate;
            let after = problem.evaluate(&next).sum_rate;
            if after > before {
                p = next;
            }
            if problem.evaluate(&p).sum_rate > problem.r_min {
                reached = true;
                break;
            }
            if after <= before {
                break;
            }
        }
        if !reached {
            return Err(Error::Infeasible(format!(
                "could not reach the rate floor {} (best sum rate {:.6})",
                problem.r_min,
                problem.evaluate(&p).sum_rate
            )));
        }
    }

    let mut current = problem.objective(&p);
    let mut history = vec![current];
    let mut converged = false;
    for _ in 0..opts.max_outer {
        iterations += 1;
        let next = solve_surrogate(problem, &p, Phase::Fairness, opts.max_inner);
        let value = problem.objective(&next);
        let floor_ok = problem.r_min == 0.0 || problem.evaluate(&next).sum_rate >= problem.r_min;
        let improvement = value - current;
        if !(improvement >= 0.0) || !floor_ok || !problem.is_feasible_power(&next) {
            // Tolerate numerical noise of the barrier solve at a fixed point.
            converged = improvement.is_finite() && improvement > -1e-10 * (1.0 + current.abs());
            break;
        }
        p = next;
        current = value;
        history.push(current);
        if improvement <= opts.tol * current.abs().max(1e-12) {
            converged = true;
            break;
        }
    }
    let mut out = PowerAllocation::from_powers(problem, &p);
    out.iterations = iterations;
    out.converged = converged;
    out.history = history;
    Ok(out)
}

impl HighSnrProblem {
    fn is_feasible_power(&self, p: &[f64]) -> bool {
        let tol = 1e-9;
        let private: f64 = p[self.num_groups()..].iter().sum();
        let total: f64 = p.iter().sum();
        p.iter().all(|&x| x >= 0.0)
            && private >= self.p_min - tol
            && private <= self.p_max + tol
            && total <= self.p_budget + tol
    }
}

/// Exhaustive search over a log-spaced grid, for validating [`sca_solve`] on
/// small instances.
///
/// Every variable takes `points_per_dim` values spaced evenly in log scale
/// from `1e-4 * p_budget` to `p_budget`; infeasible combinations are skipped.
pub fn grid_oracle(problem: &HighSnrProblem, points_per_dim: usize) -> Result<PowerAllocation> {
    let n = problem.num_vars();
    if n > ORACLE_MAX_VARS {
        return Err(Error::invalid(
            "grid_oracle",
            format!("{n} variables exceed the limit of {ORACLE_MAX_VARS}"),
        ));
    }
    if points_per_dim < 2 {
        return Err(Error::invalid("points_per_dim", "need at least 2 points"));
    }
    let decades = 4.0;
    let levels: Vec<f64> = (0..points_per_dim)
        .map(|i| problem.p_budget * 10f64.powf(-decades * (1.0 - i as f64 / (points_per_dim - 1) as f64)))
        .collect();
    let mut idx = vec![0usize; n];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let p: Vec<f64> = idx.iter().map(|&i| levels[i]).collect();
        if problem.is_feasible(&p, 0.0) {
            let value = problem.objective(&p);
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, p));
            }
        }
        let mut d = 0;
        loop {
            if d == n {
                let (_, p) = best.ok_or_else(|| Error::Infeasible("no feasible grid point".into()))?;
                let mut out = PowerAllocation::from_powers(problem, &p);
                out.converged = true;
                return Ok(out);
            }
            idx[d] += 1;
            if idx[d] < points_per_dim {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Surrogate subproblem: log-barrier Newton in z = (q, t).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Maximize the surrogate sum rate (used to reach the rate floor).
    RateFloor,
    /// Maximize the surrogate proportional-fair objective.
    Fairness,
}

/// Value, gradient and Hessian of a scalar function of z.
#[derive(Clone)]
struct Quad {
    v: f64,
    g: DVector<f64>,
    h: DMatrix<f64>,
}

impl Quad {
    fn constant(v: f64, dim: usize) -> Self {
        Quad {
            v,
            g: DVector::zeros(dim),
            h: DMatrix::zeros(dim, dim),
        }
    }

    fn add(&mut self, other: &Quad, scale: f64) {
        self.v += scale * other.v;
        self.g.axpy(scale, &other.g, 1.0);
        self.h += &other.h * scale;
    }

    /// `ln(self)`, assuming `self.v > 0`.
    fn ln(&self) -> Quad {
        let inv = 1.0 / self.v;
        let mut h = &self.h * inv;
        h.ger(-inv * inv, &self.g, &self.g, 1.0);
        Quad {
            v: self.v.ln(),
            g: &self.g * inv,
            h,
        }
    }
}

/// Frozen data of one surrogate subproblem.
struct Subproblem<'a> {
    problem: &'a HighSnrProblem,
    phase: Phase,
    /// `(a / ln 2, b)` per inner common stream.
    ic: Vec<Vec<Option<(f64, f64)>>>,
    private: Vec<Option<(f64, f64)>>,
    /// Expansion powers, used to linearize the private floor.
    anchor: Vec<f64>,
    q_floor: f64,
}

impl<'a> Subproblem<'a> {
    fn new(problem: &'a HighSnrProblem, p: &[f64], phase: Phase) -> Self {
        let scaled = |ab: Option<(f64, f64)>| ab.map(|(a, b)| (a / std::f64::consts::LN_2, b));
        let sur = Surrogate::at(problem, p);
        Subproblem {
            problem,
            phase,
            ic: sur.ic.iter().map(|v| v.iter().map(|&ab| scaled(ab)).collect()).collect(),
            private: sur.private.iter().map(|&ab| scaled(ab)).collect(),
            anchor: p.to_vec(),
            q_floor: (problem.p_budget * 1e-30).ln(),
        }
    }

    fn n(&self) -> usize {
        self.problem.num_vars()
    }

    fn dim(&self) -> usize {
        self.n() + self.problem.num_groups()
    }

    fn t_index(&self, g: usize) -> usize {
        self.n() + g
    }

    /// Surrogate stream rate `c * y(q) + b` with `y = ln gamma`.
    fn stream(&self, s: &SinrCoefficients, cb: Option<(f64, f64)>, q: &[f64], derivs: bool) -> Quad {
        let dim = self.dim();
        let Some((c, b)) = cb else {
            return Quad::constant(0.0, if derivs { dim } else { 0 });
        };
        let n = self.n();
        let mut weights = vec![0.0; n];
        let mut denom = s.noise;
        for j in 0..n {
            if s.interference[j] != 0.0 {
                weights[j] = s.interference[j] * q[j].exp();
                denom += weights[j];
            }
        }
        let y = s.signal.ln() + q[s.own] - denom.ln();
        let v = c * y + b;
        if !derivs {
            return Quad {
                v,
                g: DVector::zeros(0),
                h: DMatrix::zeros(0, 0),
            };
        }
        let pi = DVector::from_fn(dim, |j, _| if j < n { weights[j] / denom } else { 0.0 });
        let mut g = -&pi * c;
        g[s.own] += c;
        let mut h = DMatrix::from_diagonal(&(-&pi * c));
        h.ger(c, &pi, &pi, 1.0);
        Quad { v, g, h }
    }

    /// Barrier objective; `None` outside the domain.
    fn eval(&self, z: &[f64], mu: f64, derivs: bool) -> Option<Quad> {
        let pr = self.problem;
        let n = self.n();
        let dim = if derivs { self.dim() } else { 0 };
        let q = &z[..n];
        let mut total = Quad::constant(0.0, dim);
        let mut barrier = Quad::constant(0.0, dim);
        let mut rate_sum = Quad::constant(0.0, dim);

        let t_quad = |g: usize| {
            let mut t = Quad::constant(z[self.t_index(g)], dim);
            if derivs {
                t.g[self.t_index(g)] = 1.0;
            }
            t
        };

        for (g, members) in pr.members.iter().enumerate() {
            let mut u = t_quad(g);
            for &k in members {
                let s = self.stream(&pr.private[k], self.private[k], q, derivs);
                u.add(&s, 1.0);
            }
            rate_sum.add(&u, 1.0);
            match self.phase {
                Phase::Fairness => {
                    if !(u.v > 0.0) {
                        return None;
                    }
                    total.add(&u.ln(), 1.0);
                }
                Phase::RateFloor => total.add(&u, 1.0),
            }
            // Epigraph: t_g below every member's inner common surrogate.
            for (i, s) in pr.inner_common[g].iter().enumerate() {
                let mut slack = self.stream(s, self.ic[g][i], q, derivs);
                slack.add(&t_quad(g), -1.0);
                if !(slack.v > 0.0) {
                    return None;
                }
                barrier.add(&slack.ln(), 1.0);
            }
        }

        // Private power cap and total budget.
        let mut private_sum = Quad::constant(0.0, dim);
        let mut all_sum = Quad::constant(0.0, dim);
        for (j, &qj) in q.iter().enumerate() {
            let e = qj.exp();
            all_sum.v += e;
            if derivs {
                all_sum.g[j] = e;
                all_sum.h[(j, j)] = e;
            }
            if j >= pr.num_groups() {
                private_sum.v += e;
                if derivs {
                    private_sum.g[j] = e;
                    private_sum.h[(j, j)] = e;
                }
            }
        }
        let mut cap = Quad::constant(pr.p_max, dim);
        cap.add(&private_sum, -1.0);
        let mut budget = Quad::constant(pr.p_budget, dim);
        budget.add(&all_sum, -1.0);
        for c in [&cap, &budget] {
            if !(c.v > 0.0) {
                return None;
            }
            barrier.add(&c.ln(), 1.0);
        }

        // Private floor, linearized from below at the anchor.
        if pr.p_min > 0.0 {
            let mut floor = Quad::constant(-pr.p_min, dim);
            for j in pr.num_groups()..n {
                let e = self.anchor[j];
                floor.v += e * (1.0 + q[j] - e.ln());
                if derivs {
                    floor.g[j] = e;
                }
            }
            if !(floor.v > 0.0) {
                return None;
            }
            barrier.add(&floor.ln(), 1.0);
        }

        if self.phase == Phase::Fairness && pr.r_min > 0.0 {
            let mut slack = rate_sum.clone();
            slack.v -= pr.r_min;
            if !(slack.v > 0.0) {
                return None;
            }
            barrier.add(&slack.ln(), 1.0);
        }

        for (j, &qj) in q.iter().enumerate() {
            let mut lower = Quad::constant(qj - self.q_floor, dim);
            if !(lower.v > 0.0) {
                return None;
            }
            if derivs {
                lower.g[j] = 1.0;
            }
            barrier.add(&lower.ln(), 1.0);
        }

        total.add(&barrier, mu);
        total.v.is_finite().then_some(total)
    }

    fn start(&self) -> Vec<f64> {
        let pr = self.problem;
        let n = self.n();
        let q: Vec<f64> = self.anchor.iter().map(|p| p.ln()).collect();
        let mut z = q.clone();
        for g in 0..pr.num_groups() {
            let lowest = pr.inner_common[g]
                .iter()
                .enumerate()
                .map(|(i, s)| self.stream(s, self.ic[g][i], &q, false).v)
                .fold(f64::INFINITY, f64::min);
            z.push(lowest - 1e-9 * (1.0 + lowest.abs()));
        }
        debug_assert_eq!(z.len(), n + pr.num_groups());
        z
    }
}

/// Maximizes one surrogate subproblem; returns the new powers.
fn solve_surrogate(problem: &HighSnrProblem, p: &[f64], phase: Phase, max_inner: usize) -> Vec<f64> {
    let sub = Subproblem::new(problem, p, phase);
    let mut z = sub.start();
    if sub.eval(&z, 1.0, false).is_none() {
        return p.to_vec();
    }
    let dim = sub.dim();
    let mut mu = 1e-2;
    let mut used = 0;
    while used < max_inner {
        loop {
            if used >= max_inner {
                break;
            }
            used += 1;
            let Some(f) = sub.eval(&z, mu, true) else { break };
            // Newton direction for a concave function: solve (-H) d = g.
            let neg_h = -&f.h;
            let mut damping = 0.0;
            let dir = loop {
                let mut m = neg_h.clone();
                for i in 0..dim {
                    m[(i, i)] += damping;
                }
                if let Some(ch) = m.cholesky() {
                    break ch.solve(&f.g);
                }
                damping = if damping == 0.0 { 1e-10 * (1.0 + neg_h.amax()) } else { damping * 10.0 };
                if damping > 1e20 {
                    break f.g.clone();
                }
            };
            let decrement = f.g.dot(&dir);
            if !(decrement > 1e-14 * (1.0 + f.v.abs())) {
                break;
            }
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-16 {
                let trial: Vec<f64> = z.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
                if let Some(t) = sub.eval(&trial, mu, false) {
                    if t.v >= f.v + 1e-4 * step * decrement {
                        z = trial;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if mu <= 1e-13 {
            break;
        }
        mu *= 0.1;
    }
    z[..sub.n()].iter().map(|q| q.exp()).collect()
}
