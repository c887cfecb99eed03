use std::collections::BTreeMap;
use std::fmt::Display;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::AnticipateError;

/// Sums of squares for unbalanced cells: each main effect adjusted for the
/// other, the interaction for both.
pub const ANOVA_METHOD: &str = "type_ii";

/// Effects smaller than this fraction of the total sum of squares are
/// rounding noise and reported as exactly zero.
const SS_RELATIVE_ZERO: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaEffect {
    pub ss: f64,
    pub df: usize,
    pub ms: f64,
    pub f: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaResidual {
    pub ss: f64,
    pub df: usize,
    pub ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub method: String,
    pub levels_a: Vec<String>,
    pub levels_b: Vec<String>,
    pub factor_a: AnovaEffect,
    pub factor_b: AnovaEffect,
    pub interaction: AnovaEffect,
    pub residual: AnovaResidual,
    pub total_ss: f64,
    pub n: usize,
}

/// Residual sum of squares of the least-squares fit of `y` on `x`.
fn rss(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let svd = x.clone().svd(true, true);
    let beta = svd.solve(y, 1e-12).expect("U and V computed");
    (y - x * beta).norm_squared()
}

fn group_rss(y: &[f64], groups: &[usize], n_groups: usize) -> f64 {
    let mut sum = vec![0.0; n_groups];
    let mut cnt = vec![0usize; n_groups];
    for (v, g) in y.iter().zip(groups) {
        sum[*g] += v;
        cnt[*g] += 1;
    }
    y.iter()
        .zip(groups)
        .map(|(v, g)| (v - sum[*g] / cnt[*g] as f64).powi(2))
        .sum()
}

/// Two-way ANOVA of `(level_a, level_b, response)` rows.
pub fn anova_two_way<A, B>(rows: &[(A, B, f64)]) -> Result<AnovaTable, AnticipateError>
where
    A: Ord + Clone + Display,
    B: Ord + Clone + Display,
{
    let la: Vec<A> = {
        let mut v: Vec<A> = rows.iter().map(|r| r.0.clone()).collect();
        v.sort();
        v.dedup();
        v
    };
    let lb: Vec<B> = {
        let mut v: Vec<B> = rows.iter().map(|r| r.1.clone()).collect();
        v.sort();
        v.dedup();
        v
    };
    if la.len() < 2 {
        return Err(AnticipateError::Degenerate(format!(
            "factor A has {} level(s)",
            la.len()
        )));
    }
    if lb.len() < 2 {
        return Err(AnticipateError::Degenerate(format!(
            "factor B has {} level(s)",
            lb.len()
        )));
    }
    if let Some(r) = rows.iter().find(|r| !r.2.is_finite()) {
        return Err(AnticipateError::Design(format!(
            "non-finite response in cell ({}, {})",
            r.0, r.1
        )));
    }
    let (a, b) = (la.len(), lb.len());
    let ia: Vec<usize> = rows.iter().map(|r| la.binary_search(&r.0).unwrap()).collect();
    let ib: Vec<usize> = rows.iter().map(|r| lb.binary_search(&r.1).unwrap()).collect();
    let cell: Vec<usize> = ia.iter().zip(&ib).map(|(i, j)| i * b + j).collect();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for c in &cell {
        *counts.entry(*c).or_default() += 1;
    }
    for i in 0..a {
        for j in 0..b {
            if !counts.contains_key(&(i * b + j)) {
                return Err(AnticipateError::Design(format!("empty cell ({}, {})", la[i], lb[j])));
            }
        }
    }
    let n = rows.len();
    let df_res = n - a * b;
    if df_res == 0 {
        return Err(AnticipateError::Degenerate(
            "one observation per cell leaves no residual degrees of freedom".into(),
        ));
    }

    let mean = rows.iter().map(|r| r.2).sum::<f64>() / n as f64;
    let y: Vec<f64> = rows.iter().map(|r| r.2 - mean).collect();
    let total_ss: f64 = y.iter().map(|v| v * v).sum();
    let all_equal = rows.iter().all(|r| r.2 == rows[0].2);

    let rss_full = group_rss(&y, &cell, a * b);
    let rss_a = group_rss(&y, &ia, a);
    let rss_b = group_rss(&y, &ib, b);
    let p = 1 + (a - 1) + (b - 1);
    let x = DMatrix::from_fn(n, p, |r, c| {
        if c == 0 {
            1.0
        } else if c < a {
            f64::from(u8::from(ia[r] == c))
        } else {
            f64::from(u8::from(ib[r] == c - a + 1))
        }
    });
    let rss_add = rss(&x, &DVector::from_vec(y.clone()));

    let zero = |ss: f64| {
        if all_equal || ss <= SS_RELATIVE_ZERO * total_ss {
            0.0
        } else {
            ss
        }
    };
    let ss_res = zero(rss_full);
    let ms_res = ss_res / df_res as f64;
    let effect = |ss: f64, df: usize| {
        let ss = zero(ss.max(0.0));
        let ms = ss / df as f64;
        let f = if ss == 0.0 {
            0.0
        } else if ms_res == 0.0 {
            f64::INFINITY
        } else {
            ms / ms_res
        };
        let p = if f == 0.0 {
            1.0
        } else if f.is_infinite() {
            0.0
        } else {
            FisherSnedecor::new(df as f64, df_res as f64)
                .map(|d| d.sf(f))
                .unwrap_or(f64::NAN)
        };
        AnovaEffect { ss, df, ms, f, p }
    };

    Ok(AnovaTable {
        method: ANOVA_METHOD.to_string(),
        levels_a: la.iter().map(|l| l.to_string()).collect(),
        levels_b: lb.iter().map(|l| l.to_string()).collect(),
        factor_a: effect(rss_b - rss_add, a - 1),
        factor_b: effect(rss_a - rss_add, b - 1),
        interaction: effect(rss_add - rss_full, (a - 1) * (b - 1)),
        residual: AnovaResidual {
            ss: ss_res,
            df: df_res,
            ms: ms_res,
        },
        total_ss: if all_equal { 0.0 } else { total_ss },
        n,
    })
}
