//! Performance-based funding over four quartile classes.
//!
//! Each institution receives `budget · w_c · staff / Σ_k w_k · staff_k`
//! where `w_c` is the weight of its class. The default weights 9:3:1:0
//! give a first-class institution three times the per-capita funds of the
//! second class, which gets three times the third; the fourth class gets
//! nothing.

use std::collections::BTreeMap;

use crate::error::ComputeError;
use crate::ranklab::RankList;

pub const DEFAULT_WEIGHTS: [f64; 4] = [9.0, 3.0, 1.0, 0.0];

#[derive(Debug, Clone, PartialEq)]
pub struct FundingRow {
    pub institution_id: String,
    pub class: u8,
    pub staff: f64,
    pub weight: f64,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundingOutcome {
    pub uda_id: String,
    pub budget: f64,
    pub rows: Vec<FundingRow>,
}

impl FundingOutcome {
    pub fn amount(&self, institution: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.institution_id == institution)
            .map(|r| r.amount)
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().map(|r| r.amount).sum()
    }
}

pub fn allocate(
    ranklist: &RankList,
    staff: &BTreeMap<String, f64>,
    budget: f64,
    weights: [f64; 4],
) -> Result<FundingOutcome, ComputeError> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(ComputeError::InvalidBudget(budget));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(ComputeError::InvalidConfig(format!("weights {weights:?} must be finite and non-negative")));
    }
    let mut rows = Vec::with_capacity(ranklist.len());
    for r in &ranklist.rows {
        let s = *staff
            .get(&r.institution_id)
            .ok_or_else(|| ComputeError::MissingStaff(r.institution_id.clone()))?;
        rows.push(FundingRow {
            institution_id: r.institution_id.clone(),
            class: r.quartile,
            staff: s,
            weight: weights[r.quartile as usize - 1],
            amount: 0.0,
        });
    }
    let mass: f64 = rows.iter().map(|r| r.weight * r.staff).sum();
    if mass <= 0.0 {
        return Err(ComputeError::ZeroWeightMass);
    }
    for r in &mut rows {
        r.amount = budget * (r.weight * r.staff) / mass;
    }
    Ok(FundingOutcome { uda_id: ranklist.uda_id.clone(), budget, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaFlag {
    None,
    /// Funded under the left ranking, zero under the right one.
    LeftOnly,
    /// Funded under the right ranking, zero under the left one.
    RightOnly,
}

impl DeltaFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            DeltaFlag::None => "",
            DeltaFlag::LeftOnly => "funded_left_only",
            DeltaFlag::RightOnly => "funded_right_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub institution_id: String,
    pub amount_left: f64,
    pub amount_right: f64,
    /// right − left
    pub delta: f64,
    pub flag: DeltaFlag,
}

pub fn funding_delta(
    left: &FundingOutcome,
    right: &FundingOutcome,
) -> Result<Vec<DeltaRow>, ComputeError> {
    if left.budget != right.budget {
        return Err(ComputeError::Mismatch("budget"));
    }
    let l: BTreeMap<&str, &FundingRow> =
        left.rows.iter().map(|r| (r.institution_id.as_str(), r)).collect();
    let r: BTreeMap<&str, &FundingRow> =
        right.rows.iter().map(|r| (r.institution_id.as_str(), r)).collect();
    if l.len() != r.len() || l.keys().any(|k| !r.contains_key(k)) {
        return Err(ComputeError::Mismatch("institution set"));
    }
    if l.iter().any(|(k, a)| a.staff != r[k].staff) {
        return Err(ComputeError::Mismatch("staff"));
    }
    Ok(l.iter()
        .map(|(id, a)| {
            let b = r[id];
            let flag = match (a.amount > 0.0, b.amount > 0.0) {
                (true, false) => DeltaFlag::LeftOnly,
                (false, true) => DeltaFlag::RightOnly,
                _ => DeltaFlag::None,
            };
            DeltaRow {
                institution_id: id.to_string(),
                amount_left: a.amount,
                amount_right: b.amount,
                delta: b.amount - a.amount,
                flag,
            }
        })
        .collect())
}

pub fn write_funding_csv<W: std::io::Write>(
    outcome: &FundingOutcome,
    w: &mut csv::Writer<W>,
) -> csv::Result<()> {
    w.write_record(["institution_id", "class", "staff", "weight", "amount"])?;
    for r in &outcome.rows {
        w.write_record([
            r.institution_id.clone(),
            r.class.to_string(),
            r.staff.to_string(),
            r.weight.to_string(),
            r.amount.to_string(),
        ])?;
    }
    Ok(())
}

pub fn write_delta_csv<W: std::io::Write>(
    left: &FundingOutcome,
    delta: &[DeltaRow],
    w: &mut csv::Writer<W>,
) -> csv::Result<()> {
    w.write_record([
        "institution_id", "class", "staff", "weight", "amount", "amount_left", "amount_right", "delta", "flag",
    ])?;
    for d in delta {
        let row = left
            .rows
            .iter()
            .find(|r| r.institution_id == d.institution_id)
            .expect("delta rows come from left");
        w.write_record([
            d.institution_id.clone(),
            row.class.to_string(),
            row.staff.to_string(),
            row.weight.to_string(),
            row.amount.to_string(),
            d.amount_left.to_string(),
            d.amount_right.to_string(),
            d.delta.to_string(),
            d.flag.as_str().to_string(),
        ])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranklab::build_ranklist;

    fn ranked(scores: &[(&str, f64)]) -> RankList {
        build_ranklist(&scores.iter().map(|(k, v)| (k.to_string(), *v)).collect(), "U").unwrap()
    }

    fn equal_staff(ids: &[&str]) -> BTreeMap<String, f64> {
        ids.iter().map(|i| (i.to_string(), 10.0)).collect()
    }

    #[test]
    fn three_to_one_between_first_two_classes() {
        let l = ranked(&[("a", 4.0), ("b", 3.0), ("c", 2.0), ("d", 1.0)]);
        let out = allocate(&l, &equal_staff(&["a", "b", "c", "d"]), 130.0, DEFAULT_WEIGHTS).unwrap();
        assert_eq!(out.amount("a").unwrap() / out.amount("b").unwrap(), 3.0);
        assert_eq!(out.amount("d"), Some(0.0));
    }

    #[test]
    fn single_institution_takes_budget() {
        let l = ranked(&[("a", 1.0)]);
        let out = allocate(&l, &equal_staff(&["a"]), 1000.0, DEFAULT_WEIGHTS).unwrap();
        assert_eq!(out.amount("a"), Some(1000.0));
    }

    #[test]
    fn eight_institutions_budget_26() {
        let ids = ["a", "b", "c", "d", "e", "f", "g", "h"];
        let l = ranked(&ids.iter().enumerate().map(|(i, k)| (*k, 8.0 - i as f64)).collect::<Vec<_>>());
        let staff: BTreeMap<String, f64> = ids.iter().map(|i| (i.to_string(), 1.0)).collect();
        let out = allocate(&l, &staff, 26.0, DEFAULT_WEIGHTS).unwrap();
        let amounts: Vec<f64> = out.rows.iter().map(|r| r.amount).collect();
        assert_eq!(amounts, [9.0, 9.0, 3.0, 3.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn errors() {
        let l = ranked(&[("a", 1.0)]);
        assert_eq!(
            allocate(&l, &equal_staff(&["a"]), 0.0, DEFAULT_WEIGHTS),
            Err(ComputeError::InvalidBudget(0.0))
        );
        assert_eq!(
            allocate(&l, &BTreeMap::new(), 1.0, DEFAULT_WEIGHTS),
            Err(ComputeError::MissingStaff("a".into()))
        );
        assert_eq!(
            allocate(&l, &equal_staff(&["a"]), 1.0, [0.0; 4]),
            Err(ComputeError::ZeroWeightMass)
        );
    }

    #[test]
    fn delta_flags_and_conservation() {
        let staff = equal_staff(&["a", "b", "c", "d"]);
        let l = allocate(&ranked(&[("a", 4.0), ("b", 3.0), ("c", 2.0), ("d", 1.0)]), &staff, 100.0, DEFAULT_WEIGHTS).unwrap();
        let r = allocate(&ranked(&[("a", 1.0), ("b", 3.0), ("c", 2.0), ("d", 4.0)]), &staff, 100.0, DEFAULT_WEIGHTS).unwrap();
        let d = funding_delta(&l, &r).unwrap();
        assert!(d.iter().map(|x| x.delta).sum::<f64>().abs() < 1e-9);
        let a = d.iter().find(|x| x.institution_id == "a").unwrap();
        assert_eq!(a.flag, DeltaFlag::LeftOnly);
        assert_eq!(a.delta, -l.amount("a").unwrap());
        let dd = d.iter().find(|x| x.institution_id == "d").unwrap();
        assert_eq!(dd.flag, DeltaFlag::RightOnly);

        let same = funding_delta(&l, &l).unwrap();
        assert!(same.iter().all(|x| x.delta == 0.0 && x.flag == DeltaFlag::None));

        let other = allocate(&ranked(&[("a", 4.0), ("b", 3.0), ("c", 2.0), ("d", 1.0)]), &staff, 50.0, DEFAULT_WEIGHTS).unwrap();
        assert_eq!(funding_delta(&l, &other), Err(ComputeError::Mismatch("budget")));
    }
}
