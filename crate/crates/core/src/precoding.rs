//! Zero-forcing, common-stream and two-tier (outer/inner) precoders.
//!
//! All channel algebra is real: `h^T w` is a plain inner product. Every
//! emitted precoding vector has unit norm, so stream powers live entirely in
//! the power split.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hrs::Grouping;

/// Relative singular-value threshold of the rank test.
pub const RANK_TOL: f64 = 1e-10;

/// How the common (or outer common) stream is beamformed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CommonStrategy {
    /// Normalized sum of the unit-normalized user channels.
    #[default]
    EqualGain,
    /// Dominant right singular vector of the channel matrix.
    DominantSingular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    /// L x K; column `k` is user `k`'s private precoder. For two-tier
    /// precoding this is the composite `B_g w_gk`.
    pub private: DMatrix<f64>,
    /// Common precoder `w_c` (outer common `w_oc` for two-tier precoding).
    pub common: DVector<f64>,
    /// Per-group outer precoders `B_g` (L x r_g, orthonormal columns).
    pub outer: Option<Vec<DMatrix<f64>>>,
    /// Per-group inner common precoders in the group's r_g coordinates.
    pub inner_common: Option<Vec<DVector<f64>>>,
}

impl PrecoderSet {
    /// `B_g w_ic,g` in AP coordinates.
    pub fn inner_common_composite(&self, g: usize) -> Option<DVector<f64>> {
        let outer = self.outer.as_ref()?;
        let inner = self.inner_common.as_ref()?;
        Some(&outer[g] * &inner[g])
    }
}

struct Svd {
    /// Descending.
    values: Vec<f64>,
    /// Right singular vectors as columns, matching `values`; holds a full
    /// basis of the row space's ambient dimension.
    v: DMatrix<f64>,
    u: DMatrix<f64>,
}

/// SVD with rows padded to at least `ncols`, so `v` spans the full input
/// space and the trailing columns give the null space.
fn full_svd(m: &DMatrix<f64>) -> Result<Svd> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("channel", "matrix has non-finite entries"));
    }
    let (rows, cols) = m.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let max_iter = 1000 * cols.max(rows).max(1);
    let svd = padded
        .try_svd(true, true, f64::EPSILON, max_iter)
        .ok_or_else(|| Error::Infeasible("singular value decomposition did not converge".into()))?;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    // Stable sort keeps column order on ties.
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = DMatrix::from_fn(cols, order.len(), |r, c| v_t[(order[c], r)]);
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    Ok(Svd { values, v, u })
}

fn numerical_rank(values: &[f64]) -> usize {
    let max = values.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&s| s > RANK_TOL * max).count()
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn canonical_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Zero-forcing precoder for a K x L channel: column `k` is orthogonal to
/// every other user's channel and has unit norm.
pub fn zf_precoder(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (k, l) = h.shape();
    if k == 0 {
        return Err(Error::invalid("channel", "no users"));
    }
    if k > l {
        return Err(Error::Infeasible(format!(
            "zero forcing needs users <= transmit dimensions, got K = {k} > L = {l}"
        )));
    }
    let svd = full_svd(h)?;
    let rank = numerical_rank(&svd.values);
    if rank < k {
        return Err(Error::Infeasible(format!(
            "channel matrix is rank deficient: rank {rank} < K = {k} users"
        )));
    }
    // Right pseudo-inverse V_k S_k^{-1} U_k^T.
    let mut w = DMatrix::zeros(l, k);
    for i in 0..k {
        let v_i = svd.v.column(i);
        let u_i = svd.u.column(i);
        let s = svd.values[i];
        for c in 0..k {
            let coef = u_i[c] / s;
            for r in 0..l {
                w[(r, c)] += v_i[r] * coef;
            }
        }
    }
    for mut col in w.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }
    Ok(w)
}

/// Unit-norm precoder of a stream every user must decode.
pub fn common_precoder(h: &DMatrix<f64>, strategy: CommonStrategy) -> Result<DVector<f64>> {
    let l = h.ncols();
    if h.nrows() == 0 || h.iter().all(|&x| x == 0.0) {
        return Err(Error::invalid("channel", "common precoder of a zero channel"));
    }
    if strategy == CommonStrategy::EqualGain {
        let mut sum = DVector::zeros(l);
        for row in h.row_iter() {
            let n = row.norm();
            if n > 0.0 {
                sum += row.transpose() / n;
            }
        }
        let n = sum.norm();
        // Signed effective channels can cancel; fall back to the dominant
        // direction then.
        if n > 1e-12 {
            return Ok(sum / n);
        }
    }
    let svd = full_svd(h)?;
    let mut v = svd.v.column(0).into_owned();
    if v.sum() < 0.0 {
        v.neg_mut();
    }
    Ok(v)
}

/// Orthonormal basis (L x r) of `{x : rows * x = 0}`.
pub fn null_space(rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = rows.ncols();
    if rows.nrows() == 0 {
        return Ok(DMatrix::identity(l, l));
    }
    let svd = full_svd(rows)?;
    let rank = numerical_rank(&svd.values);
    let mut basis = DMatrix::zeros(l, l - rank);
    for (j, i) in (rank..l).enumerate() {
        let mut v = svd.v.column(i).into_owned();
        canonical_sign(&mut v);
        basis.set_column(j, &v);
    }
    Ok(basis)
}

fn rows_of(h: &DMatrix<f64>, users: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(users.len(), h.ncols(), |r, c| h[(users[r], c)])
}

/// Outer precoders: group `g` is confined to the null space of every other
/// group's channels, so inter-group interference vanishes.
pub fn outer_precoders(h: &DMatrix<f64>, grouping: &Grouping) -> Result<Vec<DMatrix<f64>>> {
    grouping.check_users(h.nrows())?;
    let l = h.ncols();
    (0..grouping.num_groups())
        .map(|g| {
            let others: Vec<usize> = (0..h.nrows()).filter(|&k| grouping.assignments[k] != g).collect();
            let b = null_space(&rows_of(h, &others))?;
            if b.ncols() == 0 {
                return Err(Error::Infeasible(format!(
                    "group {g} has no spatial dimensions left after nulling {} other users with L = {l} APs; \
                     use fewer groups or more APs",
                    others.len()
                )));
            }
            Ok(b)
        })
        .collect()
}

/// Per-group inner private (r_g x K_g) and inner common (r_g) precoders on the
/// effective channels `H_g B_g`.
pub fn inner_precoders(
    h: &DMatrix<f64>,
    grouping: &Grouping,
    outer: &[DMatrix<f64>],
    strategy: CommonStrategy,
) -> Result<Vec<(DMatrix<f64>, DVector<f64>)>> {
    (0..grouping.num_groups())
        .map(|g| {
            let effective = rows_of(h, &grouping.members(g)) * &outer[g];
            let w = zf_precoder(&effective)
                .map_err(|e| Error::Infeasible(format!("group {g} inner precoder: {e}")))?;
            let c = common_precoder(&effective, strategy)
                .map_err(|e| Error::Infeasible(format!("group {g} inner common precoder: {e}")))?;
            Ok((w, c))
        })
        .collect()
}

/// Single-tier precoders: ZF privates plus one common stream.
pub fn rs_precoders(h: &DMatrix<f64>, strategy: CommonStrategy) -> Result<PrecoderSet> {
    Ok(PrecoderSet {
        private: zf_precoder(h)?,
        common: common_precoder(h, strategy)?,
        outer: None,
        inner_common: None,
    })
}

/// Two-tier precoders. The outer common stream uses `common_precoder` over
/// all users.
pub fn hrs_precoders(
    h: &DMatrix<f64>,
    grouping: &Grouping,
    strategy: CommonStrategy,
) -> Result<PrecoderSet> {
    let outer = outer_precoders(h, grouping)?;
    let inner = inner_precoders(h, grouping, &outer, strategy)?;
    let mut private = DMatrix::zeros(h.ncols(), h.nrows());
    for g in 0..grouping.num_groups() {
        let composite = &outer[g] * &inner[g].0;
        for (j, &k) in grouping.members(g).iter().enumerate() {
            private.set_column(k, &composite.column(j));
        }
    }
    Ok(PrecoderSet {
        private,
        common: common_precoder(h, strategy)?,
        inner_common: Some(inner.into_iter().map(|(_, c)| c).collect()),
        outer: Some(outer),
    })
}

/// `max_{j != k} |h_j . w_k| / ||h_j||`.
pub fn zf_residual(h: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..h.nrows() {
        let row = h.row(j);
        let n = row.norm();
        if n == 0.0 {
            continue;
        }
        for k in 0..w.ncols() {
            if k != j {
                worst = worst.max((row * w.column(k))[0].abs() / n);
            }
        }
    }
    worst
}

/// `max_g max_{j not in g} ||h_j B_g|| / ||h_j||`.
pub fn outer_residual(h: &DMatrix<f64>, grouping: &Grouping, outer: &[DMatrix<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (g, b) in outer.iter().enumerate() {
        for j in 0..h.nrows() {
            if grouping.assignments[j] == g {
                continue;
            }
            let row = h.row(j);
            let n = row.norm();
            if n > 0.0 {
                worst = worst.max((row * b).norm() / n);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0))
    }

    fn unit_columns(w: &DMatrix<f64>) -> bool {
        w.column_iter().all(|c| (c.norm() - 1.0).abs() < 1e-12)
    }

    #[test]
    fn zf_identity() {
        let w = zf_precoder(&DMatrix::identity(2, 2)).unwrap();
        assert!((w - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn zf_hand_inverse() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let w = zf_precoder(&h).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((w[(0, 0)] - s).abs() < 1e-12 && (w[(1, 0)] + s).abs() < 1e-12);
        assert!(w[(0, 1)].abs() < 1e-12 && (w[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(zf_residual(&h, &w) < 1e-15);
    }

    #[test]
    fn zf_random_residual() {
        for seed in 0..100 {
            let h = random(3, 4, seed);
            let w = zf_precoder(&h).unwrap();
            assert!(zf_residual(&h, &w) <= 1e-9);
            assert!(unit_columns(&w));
        }
    }

    #[test]
    fn zf_infeasibility() {
        assert!(matches!(zf_precoder(&random(5, 4, 1)), Err(Error::Infeasible(_))));
        let h = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let err = zf_precoder(&h).unwrap_err();
        assert!(err.to_string().contains("rank"), "{err}");
    }

    #[test]
    fn common_precoder_cases() {
        let one = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 2.0]);
        let wc = common_precoder(&one, CommonStrategy::EqualGain).unwrap();
        assert!((&wc - DVector::from_vec(vec![1.0, 2.0, 2.0]) / 3.0).norm() < 1e-15);

        let twin = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 2.0, 1.0, 2.0, 2.0]);
        assert!((common_precoder(&twin, CommonStrategy::EqualGain).unwrap() - &wc).norm() < 1e-15);

        let orth = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let w = common_precoder(&orth, CommonStrategy::EqualGain).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((w[0] - s).abs() < 1e-15 && (w[1] - s).abs() < 1e-15);

        let dom = common_precoder(&twin, CommonStrategy::DominantSingular).unwrap();
        assert!((dom - &wc).norm() < 1e-12);

        assert!(common_precoder(&DMatrix::zeros(2, 2), CommonStrategy::EqualGain).is_err());
    }

    #[test]
    fn outer_single_group_is_identity() {
        let h = random(3, 4, 5);
        let g = Grouping::single(3);
        let b = outer_precoders(&h, &g).unwrap();
        assert_eq!(b.len(), 1);
        assert!((&b[0] - DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-15);
    }

    #[test]
    fn outer_two_groups_null_other_group() {
        for seed in 0..100 {
            let h = random(4, 4, seed);
            let g = Grouping::from_assignments(vec![0, 0, 1, 1]).unwrap();
            let b = outer_precoders(&h, &g).unwrap();
            for bg in &b {
                assert_eq!(bg.shape(), (4, 2));
                let gram = bg.transpose() * bg;
                assert!((gram - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-10);
            }
            assert!(outer_residual(&h, &g, &b) <= 1e-9);
        }
    }

    #[test]
    fn outer_runs_out_of_dimensions() {
        let h = random(6, 4, 2);
        let g = Grouping::from_assignments(vec![0, 0, 1, 1, 2, 2]).unwrap();
        let err = outer_precoders(&h, &g).unwrap_err();
        assert!(err.to_string().contains("fewer groups"), "{err}");
    }

    #[test]
    fn inner_reductions() {
        // One user per group: the inner ZF is the matched filter.
        let h = random(2, 4, 9);
        let g = Grouping::from_assignments(vec![0, 1]).unwrap();
        let outer = outer_precoders(&h, &g).unwrap();
        let inner = inner_precoders(&h, &g, &outer, CommonStrategy::EqualGain).unwrap();
        for (grp, (w, _)) in inner.iter().enumerate() {
            let eff = h.row(grp) * &outer[grp];
            let mf = eff.transpose() / eff.norm();
            assert!((w.column(0) - mf).norm() < 1e-12);
        }

        // A single group with B = I is plain ZF.
        let h = random(3, 4, 10);
        let p = hrs_precoders(&h, &Grouping::single(3), CommonStrategy::EqualGain).unwrap();
        let zf = zf_precoder(&h).unwrap();
        assert!((p.private - zf).abs().max() < 1e-12);
    }

    #[test]
    fn hrs_precoders_zero_force_within_and_across_groups() {
        for seed in 0..50 {
            let h = random(4, 4, 100 + seed);
            let g = Grouping::from_assignments(vec![0, 1, 0, 1]).unwrap();
            let p = hrs_precoders(&h, &g, CommonStrategy::EqualGain).unwrap();
            assert!(zf_residual(&h, &p.private) <= 1e-9);
            assert!(unit_columns(&p.private));
            assert!((p.common.norm() - 1.0).abs() < 1e-12);
            for grp in 0..2 {
                assert!((p.inner_common_composite(grp).unwrap().norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn zf_is_scale_invariant(seed in any::<u64>(), c in 1e-6f64..1e6) {
            let h = random(3, 4, seed);
            let a = zf_precoder(&h).unwrap();
            let b = zf_precoder(&(&h * c)).unwrap();
            prop_assert!((a - b).abs().max() < 1e-12);
        }
    }
}
