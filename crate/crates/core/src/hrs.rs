//! Hierarchical rate splitting: users are clustered into groups, an outer
//! common stream spans all groups, each group gets an inner common stream,
//! and every user a private stream.
//!
//! Decoding at a user runs outer common -> inner common -> private, each step
//! removing the streams decoded before it. The outer common rate is set by
//! the weakest user overall, each inner common rate by the weakest user of
//! its group.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::User;
use crate::precoding::PrecoderSet;
use crate::ratesplit::{gain2, rate, RateBreakdown, Scheme};

/// Lloyd iteration cap.
pub const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    /// Group index of every user.
    pub assignments: Vec<usize>,
    /// Floor-plane centroid of every group; NaN when built without positions.
    pub centroids: Vec<[f64; 2]>,
}

impl Grouping {
    /// Everybody in one group.
    pub fn single(k: usize) -> Self {
        Grouping {
            assignments: vec![0; k],
            centroids: vec![[f64::NAN; 2]],
        }
    }

    pub fn from_assignments(assignments: Vec<usize>) -> Result<Self> {
        let g = assignments.iter().max().map_or(0, |m| m + 1);
        let out = Grouping {
            assignments,
            centroids: vec![[f64::NAN; 2]; g],
        };
        out.validate()?;
        Ok(out)
    }

    pub fn num_groups(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, g: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == g)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.num_groups();
        if g == 0 || self.assignments.is_empty() {
            return Err(Error::invalid("grouping", "empty grouping"));
        }
        if let Some(&bad) = self.assignments.iter().find(|&&a| a >= g) {
            return Err(Error::invalid("grouping", format!("group index {bad} out of range")));
        }
        for grp in 0..g {
            if !self.assignments.contains(&grp) {
                return Err(Error::invalid("grouping", format!("group {grp} is empty")));
            }
        }
        Ok(())
    }

    pub(crate) fn check_users(&self, k: usize) -> Result<()> {
        self.validate()?;
        if self.assignments.len() != k {
            return Err(Error::invalid(
                "grouping",
                format!("covers {} users, channel has {k}", self.assignments.len()),
            ));
        }
        Ok(())
    }

    /// CSV dump: `user_index,group_index,centroid_x,centroid_y`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "user_index,group_index,centroid_x,centroid_y")?;
        for (k, &g) in self.assignments.iter().enumerate() {
            let [x, y] = self.centroids[g];
            writeln!(
                out,
                "{k},{g},{},{}",
                crate::runner::fmt_value(x),
                crate::runner::fmt_value(y)
            )?;
        }
        Ok(())
    }
}

/// Default number of groups for `k` users: 2 up to eight users, `ceil(k/4)`
/// beyond, never more than `k`.
pub fn default_group_count(k: usize) -> usize {
    let g = if k <= 8 { 2 } else { k.div_ceil(4) };
    g.min(k).max(1)
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: [f64; 2], centers: &[[f64; 2]]) -> usize {
    let mut best = 0;
    for (c, &center) in centers.iter().enumerate().skip(1) {
        if dist2(p, center) < dist2(p, centers[best]) {
            best = c;
        }
    }
    best
}

fn kmeans_pp_seed(points: &[[f64; 2]], g: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut chosen = vec![rng.random_range(0..points.len())];
    while chosen.len() < g {
        let d2: Vec<f64> = points
            .iter()
            .map(|&p| chosen.iter().map(|&c| dist2(p, points[c])).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // Only duplicates left; take the first point not yet used.
            (0..points.len()).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
    }
    chosen.into_iter().map(|i| points[i]).collect()
}

fn centroids_of(points: &[[f64; 2]], assignments: &[usize], g: usize) -> Vec<Option<[f64; 2]>> {
    let mut sums = vec![[0.0, 0.0, 0.0]; g];
    for (p, &a) in points.iter().zip(assignments) {
        sums[a][0] += p[0];
        sums[a][1] += p[1];
        sums[a][2] += 1.0;
    }
    sums.into_iter()
        .map(|[x, y, n]| (n > 0.0).then(|| [x / n, y / n]))
        .collect()
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(points: &[[f64; 2]], assignments: &mut [usize], centers: &mut [[f64; 2]]) {
    let g = centers.len();
    loop {
        let mut counts = vec![0usize; g];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &p) in points.iter().enumerate() {
            let a = assignments[i];
            if counts[a] < 2 {
                continue;
            }
            let d = dist2(p, centers[a]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("G <= K leaves a donor cluster");
        assignments[i] = empty;
        centers[empty] = points[i];
    }
}

/// Clusters users by their floor-plane position with k-means++ seeding and
/// Lloyd iterations.
pub fn kmeans_group(users: &[User], g: usize, seed: u64) -> Result<Grouping> {
    let k = users.len();
    if g == 0 || g > k {
        return Err(Error::invalid(
            "groups",
            format!("need 1 <= G <= K, got G = {g}, K = {k}"),
        ));
    }
    let points: Vec<[f64; 2]> = users.iter().map(|u| [u.position.x, u.position.y]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp_seed(&points, g, &mut rng);
    let mut assignments: Vec<usize> = points.iter().map(|&p| nearest(p, &centers)).collect();
    repair_empty(&points, &mut assignments, &mut centers);
    for _ in 0..KMEANS_MAX_ITER {
        for (c, m) in centroids_of(&points, &assignments, g).into_iter().enumerate() {
            if let Some(m) = m {
                centers[c] = m;
            }
        }
        let mut next: Vec<usize> = points.iter().map(|&p| nearest(p, &centers)).collect();
        repair_empty(&points, &mut next, &mut centers);
        if next == assignments {
            break;
        }
        assignments = next;
    }
    let centroids = centroids_of(&points, &assignments, g)
        .into_iter()
        .map(|c| c.expect("repaired clusters are non-empty"))
        .collect();
    Ok(Grouping {
        assignments,
        centroids,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HrsPowerSplit {
    pub total_power: f64,
    pub alpha: f64,
    pub beta: f64,
    pub p_outer_common: f64,
    pub p_inner_common: Vec<f64>,
    pub p_private: Vec<f64>,
}

impl HrsPowerSplit {
    pub fn total(&self) -> f64 {
        self.p_outer_common + self.p_inner_common.iter().sum::<f64>() + self.p_private.iter().sum::<f64>()
    }
}

/// Uniform two-tier split: `P(1-beta)` to the outer common stream,
/// `(P beta / G)(1-alpha)` to each inner common stream and `(P beta / K) alpha`
/// to each private stream. Private power is divided by the total user count,
/// not the group size.
pub fn hrs_split(total_power: f64, alpha: f64, beta: f64, g: usize, k: usize) -> Result<HrsPowerSplit> {
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::invalid(
                if name == "alpha" { "alpha" } else { "beta" },
                format!("must lie in (0, 1], got {v}"),
            ));
        }
    }
    if g == 0 || k == 0 || g > k {
        return Err(Error::invalid("groups", format!("need 1 <= G <= K, got G = {g}, K = {k}")));
    }
    if !(total_power > 0.0 && total_power.is_finite()) {
        return Err(Error::invalid("P", format!("must be > 0, got {total_power}")));
    }
    Ok(HrsPowerSplit {
        total_power,
        alpha,
        beta,
        p_outer_common: total_power * (1.0 - beta),
        p_inner_common: vec![total_power * beta / g as f64 * (1.0 - alpha); g],
        p_private: vec![total_power * beta / k as f64 * alpha; k],
    })
}

/// Per-user SINRs of the three streams a user decodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrsSinr {
    pub outer_common: f64,
    pub inner_common: f64,
    pub private: f64,
}

/// SINRs for explicit stream powers.
///
/// The private denominator is formed as the full private double sum minus
/// the user's own term, and inter-group terms are kept even though exact
/// outer nulling makes them negligible.
pub fn hrs_sinrs_with_powers(
    h: &DMatrix<f64>,
    grouping: &Grouping,
    precoders: &PrecoderSet,
    p_outer_common: f64,
    p_inner_common: &[f64],
    p_private: &[f64],
    noise_var: &DVector<f64>,
) -> Result<Vec<HrsSinr>> {
    grouping.check_users(h.nrows())?;
    let groups = grouping.num_groups();
    let inner: Vec<DVector<f64>> = (0..groups)
        .map(|g| {
            precoders
                .inner_common_composite(g)
                .ok_or_else(|| Error::invalid("precoders", "outer and inner common precoders required"))
        })
        .collect::<Result<_>>()?;
    let k = h.nrows();
    Ok((0..k)
        .map(|u| {
            let g = grouping.assignments[u];
            let private_terms: Vec<f64> = (0..k)
                .map(|j| p_private[j] * gain2(h, u, &precoders.private.column(j).into_owned()))
                .collect();
            let all_private: f64 = private_terms.iter().sum();
            let ic_terms: Vec<f64> = (0..groups).map(|l| p_inner_common[l] * gain2(h, u, &inner[l])).collect();
            let all_ic: f64 = ic_terms.iter().sum();
            let other_ic: f64 = (0..groups).filter(|&l| l != g).map(|l| ic_terms[l]).sum();
            let lambda = private_terms[u];
            let sigma = noise_var[u];
            HrsSinr {
                outer_common: p_outer_common * gain2(h, u, &precoders.common) / (all_private + all_ic + sigma),
                inner_common: ic_terms[g] / (all_private + other_ic + sigma),
                private: lambda / (all_private - lambda + other_ic + sigma),
            }
        })
        .collect())
}

pub fn hrs_sinrs(
    h: &DMatrix<f64>,
    grouping: &Grouping,
    precoders: &PrecoderSet,
    split: &HrsPowerSplit,
    noise_var: &DVector<f64>,
) -> Result<Vec<HrsSinr>> {
    hrs_sinrs_with_powers(
        h,
        grouping,
        precoders,
        split.p_outer_common,
        &split.p_inner_common,
        &split.p_private,
        noise_var,
    )
}

/// Collapses per-user SINRs into the rate breakdown: global minimum for the
/// outer common stream, per-group minimum for inner common streams.
pub fn rates_from_sinrs(scheme: Scheme, grouping: &Grouping, sinrs: &[HrsSinr]) -> RateBreakdown {
    let oc = sinrs.iter().map(|s| s.outer_common).fold(f64::INFINITY, f64::min);
    let ic = (0..grouping.num_groups())
        .map(|g| {
            let worst = grouping
                .members(g)
                .into_iter()
                .map(|u| sinrs[u].inner_common)
                .fold(f64::INFINITY, f64::min);
            rate(worst)
        })
        .collect();
    let private = sinrs.iter().map(|s| rate(s.private)).collect();
    RateBreakdown::new(scheme, rate(oc), ic, private)
}

pub fn hrs_rates(
    h: &DMatrix<f64>,
    grouping: &Grouping,
    precoders: &PrecoderSet,
    split: &HrsPowerSplit,
    noise_var: &DVector<f64>,
) -> Result<RateBreakdown> {
    let sinrs = hrs_sinrs(h, grouping, precoders, split, noise_var)?;
    Ok(rates_from_sinrs(Scheme::Hrs, grouping, &sinrs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::default_scene;
    use crate::precoding::{hrs_precoders, rs_precoders, CommonStrategy};
    use crate::ratesplit::{rs_rates, rs_sinr_common, rs_sinr_private, rs_split};
    use rand::Rng;
    use proptest::prelude::*;

    fn users_at(xy: &[(f64, f64)]) -> Vec<User> {
        default_scene().with_users_at(xy).unwrap().users
    }

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn kmeans_trivial_partitions() {
        let users = users_at(&[(0.5, 0.5), (4.0, 1.0), (2.0, 3.0), (4.5, 4.5)]);
        let each = kmeans_group(&users, 4, 3).unwrap();
        let mut seen = each.assignments.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        let one = kmeans_group(&users, 1, 3).unwrap();
        assert_eq!(one.assignments, vec![0; 4]);
        assert!((one.centroids[0][0] - 2.75).abs() < 1e-12);
        assert!(kmeans_group(&users, 5, 3).is_err());
        assert!(kmeans_group(&users, 0, 3).is_err());
    }

    #[test]
    fn kmeans_recovers_planted_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut xy = Vec::new();
        let mut truth = Vec::new();
        for (c, (cx, cy)) in [(1.0, 1.0), (4.0, 4.0)].into_iter().enumerate() {
            for _ in 0..10 {
                xy.push((cx + rng.random_range(-0.2..0.2), cy + rng.random_range(-0.2..0.2)));
                truth.push(c);
            }
        }
        for seed in 0..20 {
            let g = kmeans_group(&users_at(&xy), 2, seed).unwrap();
            let flip = g.assignments[0] != truth[0];
            for (a, t) in g.assignments.iter().zip(&truth) {
                assert_eq!(*a, if flip { 1 - t } else { *t });
            }
        }
    }

    #[test]
    fn kmeans_handles_duplicates() {
        let users = users_at(&[(1.0, 1.0); 3]);
        let g = kmeans_group(&users, 3, 0).unwrap();
        g.validate().unwrap();
    }

    #[test]
    fn kmeans_is_deterministic() {
        let s = crate::geometry::place_users_random(&default_scene(), 12, 5).unwrap();
        assert_eq!(kmeans_group(&s.users, 3, 9).unwrap(), kmeans_group(&s.users, 3, 9).unwrap());
    }

    #[test]
    fn split_examples() {
        let s = hrs_split(12.0, 0.5, 0.5, 2, 4).unwrap();
        assert!((s.p_outer_common - 6.0).abs() < 1e-12);
        assert!(s.p_inner_common.iter().all(|&p| (p - 1.5).abs() < 1e-12));
        assert!(s.p_private.iter().all(|&p| (p - 0.75).abs() < 1e-12));
        assert_eq!(hrs_split(5.0, 0.3, 1.0, 2, 3).unwrap().p_outer_common, 0.0);
        assert!(hrs_split(5.0, 0.3, 0.0, 2, 3).is_err());
        assert!(hrs_split(5.0, 1.2, 0.5, 2, 3).is_err());
        assert!(hrs_split(5.0, 0.3, 0.5, 4, 3).is_err());
    }

    #[test]
    fn reduces_to_rs_for_one_group() {
        for seed in 0..20 {
            let h = random(3, 4, seed);
            let noise = DVector::from_element(3, 0.7);
            let g = Grouping::single(3);
            let hp = hrs_precoders(&h, &g, CommonStrategy::EqualGain).unwrap();
            let rp = rs_precoders(&h, CommonStrategy::EqualGain).unwrap();
            let hs = hrs_split(8.0, 0.6, 1.0, 1, 3).unwrap();
            let rsplit = rs_split(8.0, 0.6, 3).unwrap();
            let sinrs = hrs_sinrs(&h, &g, &hp, &hs, &noise).unwrap();
            for (k, s) in sinrs.iter().enumerate() {
                assert_eq!(s.outer_common, 0.0);
                let c = rs_sinr_common(&h, &rp.private, &rp.common, &rsplit, &noise, k);
                let p = rs_sinr_private(&h, &rp.private, &rsplit, &noise, k);
                assert!((s.inner_common - c).abs() <= 1e-12 * c);
                assert!((s.private - p).abs() <= 1e-10 * p);
            }
            let a = hrs_rates(&h, &g, &hp, &hs, &noise).unwrap();
            let b = rs_rates(&h, &rp, &rsplit, &noise);
            assert!((a.sum_rate - b.sum_rate).abs() < 1e-12);
        }
    }

    /// Scalar transcription of the three SINR expressions, looping over
    /// groups and members exactly as written.
    fn oracle_sinrs(
        h: &DMatrix<f64>,
        groups: &[Vec<usize>],
        b: &[DMatrix<f64>],
        w: &[DMatrix<f64>],
        w_ic: &[DVector<f64>],
        w_oc: &DVector<f64>,
        split: &HrsPowerSplit,
        sigma2: f64,
    ) -> Vec<(f64, f64, f64)> {
        let dot = |u: usize, v: &DVector<f64>| -> f64 {
            let mut s = 0.0;
            for a in 0..h.ncols() {
                s += h[(u, a)] * v[a];
            }
            s * s
        };
        let mut out = vec![(0.0, 0.0, 0.0); h.nrows()];
        for (g, members) in groups.iter().enumerate() {
            for (kk, &u) in members.iter().enumerate() {
                let mut privates = 0.0;
                for (l, ml) in groups.iter().enumerate() {
                    for (j, &uj) in ml.iter().enumerate() {
                        privates += split.p_private[uj] * dot(u, &(&b[l] * w[l].column(j)));
                    }
                }
                let mut ic_all = 0.0;
                let mut ic_other = 0.0;
                for l in 0..groups.len() {
                    let t = split.p_inner_common[l] * dot(u, &(&b[l] * &w_ic[l]));
                    ic_all += t;
                    if l != g {
                        ic_other += t;
                    }
                }
                let lambda = split.p_private[u] * dot(u, &(&b[g] * w[g].column(kk)));
                let oc = split.p_outer_common * dot(u, w_oc) / (privates + ic_all + sigma2);
                let ic = split.p_inner_common[g] * dot(u, &(&b[g] * &w_ic[g])) / (privates + ic_other + sigma2);
                let p = lambda / (privates - lambda + ic_other + sigma2);
                out[u] = (oc, ic, p);
            }
        }
        out
    }

    #[test]
    fn matches_scalar_oracle_on_two_groups() {
        let h = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.9, 0.4, 0.1, 0.05, //
                0.7, 0.6, 0.2, 0.1, //
                0.1, 0.2, 0.8, 0.5, //
                0.05, 0.1, 0.6, 0.9,
            ],
        );
        let grouping = Grouping::from_assignments(vec![0, 0, 1, 1]).unwrap();
        let pre = hrs_precoders(&h, &grouping, CommonStrategy::EqualGain).unwrap();
        let outer = crate::precoding::outer_precoders(&h, &grouping).unwrap();
        let inner = crate::precoding::inner_precoders(&h, &grouping, &outer, CommonStrategy::EqualGain).unwrap();
        let split = hrs_split(20.0, 0.7, 0.8, 2, 4).unwrap();
        let noise = DVector::from_element(4, 0.5);
        let got = hrs_sinrs(&h, &grouping, &pre, &split, &noise).unwrap();
        let w: Vec<_> = inner.iter().map(|(w, _)| w.clone()).collect();
        let wic: Vec<_> = inner.iter().map(|(_, c)| c.clone()).collect();
        let want = oracle_sinrs(&h, &[vec![0, 1], vec![2, 3]], &outer, &w, &wic, &pre.common, &split, 0.5);
        for (g, w) in got.iter().zip(&want) {
            assert!((g.outer_common - w.0).abs() <= 1e-12 * w.0);
            assert!((g.inner_common - w.1).abs() <= 1e-12 * w.1);
            assert!((g.private - w.2).abs() <= 1e-9 * w.2);
        }
        // Exact nulling leaves no inter-group inner-common leakage.
        for u in 0..4 {
            let other = 1 - grouping.assignments[u];
            let leak = gain2(&h, u, &pre.inner_common_composite(other).unwrap());
            assert!(leak <= 1e-18);
        }
    }

    #[test]
    fn two_by_two_fixture_emits_expected_streams() {
        let scene = default_scene();
        let users = users_at(&[(1.2, 1.3), (1.7, 1.1), (3.6, 3.9), (3.3, 3.6)]);
        let grouping = kmeans_group(&users, 2, 1).unwrap();
        assert_eq!(grouping.assignments[0], grouping.assignments[1]);
        assert_eq!(grouping.assignments[2], grouping.assignments[3]);
        let h = random(4, scene.num_aps(), 77);
        let pre = hrs_precoders(&h, &grouping, CommonStrategy::EqualGain).unwrap();
        let split = hrs_split(10.0, 0.8, 0.8, 2, 4).unwrap();
        let r = hrs_rates(&h, &grouping, &pre, &split, &DVector::from_element(4, 1.0)).unwrap();
        assert!(r.r_outer_common > 0.0);
        assert_eq!(r.r_inner_common.len(), 2);
        assert_eq!(r.r_private.len(), 4);
    }

    #[test]
    fn csv_dump() {
        let users = users_at(&[(1.0, 1.0), (1.0, 2.0), (4.0, 4.0)]);
        let g = kmeans_group(&users, 2, 0).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("user_index,group_index,centroid_x,centroid_y\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn default_groups() {
        assert_eq!(default_group_count(4), 2);
        assert_eq!(default_group_count(8), 2);
        assert_eq!(default_group_count(9), 3);
        assert_eq!(default_group_count(12), 3);
        assert_eq!(default_group_count(1), 1);
    }

    proptest! {
        #[test]
        fn hrs_invariants(seed in any::<u64>(), alpha in 0.01f64..=1.0, beta in 0.01f64..=1.0, p in 0.1f64..1e3) {
            let h = random(4, 4, seed);
            let grouping = Grouping::from_assignments(vec![0, 1, 0, 1]).unwrap();
            let pre = hrs_precoders(&h, &grouping, CommonStrategy::EqualGain).unwrap();
            let split = hrs_split(p, alpha, beta, 2, 4).unwrap();
            prop_assert!((split.total() - p).abs() <= 1e-12 * p);
            let noise = DVector::from_element(4, 1.0);
            let sinrs = hrs_sinrs(&h, &grouping, &pre, &split, &noise).unwrap();
            let r = rates_from_sinrs(Scheme::Hrs, &grouping, &sinrs);
            let parts = r.r_outer_common + r.inner_common_total() + r.private_total();
            prop_assert!((r.sum_rate - parts).abs() <= 1e-12);
            for (u, s) in sinrs.iter().enumerate() {
                prop_assert!(rate(s.outer_common) >= r.r_outer_common);
                prop_assert!(rate(s.inner_common) >= r.r_inner_common[grouping.assignments[u]]);
                prop_assert!(s.private >= 0.0);
            }
        }
    }
}
