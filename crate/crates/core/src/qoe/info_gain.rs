//! Information-gain ranking of confounding factors against an engagement
//! label. Entropies are empirical plug-in estimates in bits.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Default number of equal-frequency bins for numeric factors.
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Categorical(Vec<i64>),
    Numeric(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Categorical(v) => v.len(),
            Column::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named factor columns plus the label they are scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    pub names: Vec<String>,
    pub factors: Vec<Column>,
    pub label: Column,
}

fn codes_of(values: &[i64]) -> Vec<usize> {
    let mut ids = HashMap::new();
    values
        .iter()
        .map(|v| {
            let next = ids.len();
            *ids.entry(*v).or_insert(next)
        })
        .collect()
}

/// Equal-frequency binning; tied values always share a bin.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    values
        .iter()
        .map(|v| {
            let rank = sorted.partition_point(|x| x.total_cmp(v).is_lt());
            (rank * bins / n).min(bins - 1)
        })
        .collect()
}

fn median_split(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    values.iter().map(|&v| usize::from(v > median)).collect()
}

fn factor_codes(col: &Column) -> Vec<usize> {
    match col {
        Column::Categorical(v) => codes_of(v),
        Column::Numeric(v) => equal_frequency_bins(v, DEFAULT_BINS),
    }
}

fn label_codes(col: &Column) -> Vec<usize> {
    match col {
        Column::Categorical(v) => codes_of(v),
        Column::Numeric(v) => median_split(v),
    }
}

/// Shannon entropy (bits) of a discrete sample.
pub fn entropy(codes: &[usize]) -> f64 {
    if codes.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &c in codes {
        *counts.entry(c).or_default() += 1;
    }
    let n = codes.len() as f64;
    let mut h = 0.0;
    // Sorted keys keep the float summation order fixed.
    let mut keys: Vec<_> = counts.keys().copied().collect();
    keys.sort_unstable();
    for k in keys {
        let p = counts[&k] as f64 / n;
        h -= p * p.log2();
    }
    h
}

fn conditional_entropy(label: &[usize], factor: &[usize]) -> f64 {
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (&y, &x) in label.iter().zip(factor) {
        groups.entry(x).or_default().push(y);
    }
    let n = label.len() as f64;
    let mut keys: Vec<_> = groups.keys().copied().collect();
    keys.sort_unstable();
    keys.iter()
        .map(|k| {
            let g = &groups[k];
            g.len() as f64 / n * entropy(g)
        })
        .sum()
}

/// `H(label) - H(label | factor)` in bits, clamped to `[0, H(label)]`.
pub fn information_gain(factor: &Column, label: &Column) -> Result<f64> {
    if factor.len() != label.len() {
        return Err(Error::InvalidInput(format!(
            "factor has {} rows, label has {}",
            factor.len(),
            label.len()
        )));
    }
    if factor.len() < 2 {
        return Err(Error::InvalidInput("information gain needs at least two rows".into()));
    }
    if let Column::Numeric(v) = factor {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("factor column"));
        }
    }
    if let Column::Numeric(v) = label {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("label column"));
        }
    }
    let y = label_codes(label);
    let x = factor_codes(factor);
    let h = entropy(&y);
    let ig = h - conditional_entropy(&y, &x);
    Ok(ig.clamp(0.0, h))
}

/// Factors sorted by information gain (descending, ties by column order);
/// the first `k` are returned with their scores.
pub fn rank_top_k(table: &FactorTable, k: usize) -> Result<Vec<(String, f64)>> {
    if k > table.factors.len() {
        return Err(Error::InvalidInput(format!(
            "asked for top {k} of {} factors",
            table.factors.len()
        )));
    }
    let mut scored = table
        .names
        .iter()
        .zip(&table.factors)
        .enumerate()
        .map(|(i, (name, col))| Ok((i, name.clone(), information_gain(col, &table.label)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(k).map(|(_, n, g)| (n, g)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cat(v: &[i64]) -> Column {
        Column::Categorical(v.to_vec())
    }

    #[test]
    fn hand_computed_gains() {
        let perfect = information_gain(&cat(&[0, 0, 1, 1]), &cat(&[5, 5, 7, 7])).unwrap();
        assert_relative_eq!(perfect, 1.0, epsilon = 1e-12);

        let indep = information_gain(&cat(&[1, 0, 1, 0]), &cat(&[1, 1, 0, 0])).unwrap();
        assert_relative_eq!(indep, 0.0, epsilon = 1e-12);

        // H(Y) = 0.811, H(Y|X) = 0.5.
        let partial = information_gain(&cat(&[1, 1, 0, 0]), &cat(&[1, 1, 1, 0])).unwrap();
        let hy = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert_relative_eq!(partial, hy - 0.5, epsilon = 1e-12);
        assert_relative_eq!(partial, 0.311, epsilon = 1e-3);
    }

    #[test]
    fn constant_label_has_zero_gain() {
        assert_eq!(information_gain(&cat(&[1, 2, 3]), &cat(&[4, 4, 4])).unwrap(), 0.0);
        let num = Column::Numeric(vec![2.0; 5]);
        assert_eq!(information_gain(&Column::Numeric(vec![1., 2., 3., 4., 5.]), &num).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(information_gain(&cat(&[1]), &cat(&[1])).is_err());
        assert!(information_gain(&cat(&[1, 2]), &cat(&[1])).is_err());
        assert!(information_gain(&Column::Numeric(vec![1.0, f64::NAN]), &cat(&[1, 2])).is_err());
    }

    #[test]
    fn bins_are_balanced_and_tie_stable() {
        let v: Vec<f64> = (0..100).map(f64::from).collect();
        let b = equal_frequency_bins(&v, 10);
        for bin in 0..10 {
            assert_eq!(b.iter().filter(|&&x| x == bin).count(), 10);
        }
        let tied = equal_frequency_bins(&[1.0, 1.0, 1.0, 2.0], 2);
        assert_eq!(tied, vec![0, 0, 0, 1]);
    }

    #[test]
    fn ranking_orders_and_breaks_ties_by_column() {
        let label = cat(&[0, 0, 1, 1, 0, 1, 0, 1]);
        let copy = cat(&[0, 0, 1, 1, 0, 1, 0, 1]);
        let noise = cat(&[0, 1, 0, 1, 0, 1, 1, 0]);
        let table = FactorTable {
            names: vec!["noise".into(), "f3".into(), "f3_dup".into()],
            factors: vec![noise, copy.clone(), copy],
            label,
        };
        let all = rank_top_k(&table, 3).unwrap();
        let names: Vec<_> = all.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, vec!["f3", "f3_dup", "noise"]);
        assert_eq!(rank_top_k(&table, 1).unwrap().len(), 1);
        assert!(rank_top_k(&table, 4).is_err());
    }
}
